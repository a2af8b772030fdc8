import math

import numpy as np
import pytest

from pushpull_pd.engine import (
    StepSchedule,
    Trace,
    ergodic_average,
    init_state,
    run,
    step,
    step_size,
)
from pushpull_pd.errors import DimensionMismatch, InfeasibleStart, NonFiniteState, RangeError
from pushpull_pd.network import DiGraph, GraphSchedule, WeightSchedule
from pushpull_pd.problem import (
    BoxSet,
    LocalConstraint,
    LocalObjective,
    ProblemInstance,
    canonical_instance,
    eval_constraints,
    primal_grad,
)
from pushpull_pd.projections import DualSet, project_box, project_dual

SS = StepSchedule(2.0, 0.6)


def identity_weights(m):
    eye = np.eye(m)
    return WeightSchedule((eye,), (eye,))


class TestStepSize:
    def test_k0(self):
        assert step_size(SS, 0) == 2.0

    def test_k3(self):
        # 2 / 4**0.6 evaluated directly
        assert step_size(SS, 3) == pytest.approx(0.8705505632961242, rel=1e-15)

    def test_harmonic(self):
        assert step_size(StepSchedule(1.0, 1.0), 9) == pytest.approx(0.1, rel=1e-15)

    def test_exponent_range(self):
        for bad in (0.5, 1.2, 0.0):
            with pytest.raises(ValueError):
                StepSchedule(1.0, bad)
        with pytest.raises(ValueError):
            StepSchedule(0.0, 0.75)


class TestInit:
    def test_tracking_sums_exact(self, inst42):
        rng = np.random.default_rng(0)
        x0 = rng.uniform(-3, 3, (6, 2))
        lam0 = np.abs(rng.normal(size=(6, 2)))
        st = init_state(inst42, x0, lam0)
        h = np.array([eval_constraints(c, x0[i]) for i, c in enumerate(inst42.constraints)])
        assert np.array_equal(st.y.sum(0) - h.sum(0), np.zeros(2))
        assert np.array_equal(st.z.sum(0) - st.d.sum(0), np.zeros(2))
        assert st.round == 0

    def test_infeasible_start(self, inst42):
        x0 = np.zeros((6, 2))
        x0[2] = [4, 0]
        with pytest.raises(InfeasibleStart):
            init_state(inst42, x0)

    def test_dimension_mismatch(self, inst42):
        with pytest.raises(DimensionMismatch):
            init_state(inst42, np.zeros((5, 2)))
        with pytest.raises(DimensionMismatch):
            init_state(inst42, np.zeros((6, 2)), np.zeros((6, 3)))

    def test_multipliers_projected(self, inst42):
        lam0 = np.tile([-1.0, 7.0], (6, 1))
        st = init_state(inst42, None, lam0)
        assert np.all(st.lam[:, 0] == 0) and np.all(st.lam[:, 1] == 7.0)


class TestStep:
    def test_zero_step_fixed_point(self, inst42):
        rng = np.random.default_rng(1)
        st = init_state(inst42, rng.uniform(-3, 3, (6, 2)), np.abs(rng.normal(size=(6, 2))))
        new = step(st, inst42, identity_weights(6), SS, alpha=0.0)
        for name in ("x", "lam", "z", "y", "d"):
            assert np.array_equal(getattr(new, name), getattr(st, name)), name
        assert new.round == 1

    def test_one_step_tracking(self, inst42, weights):
        st = step(init_state(inst42), inst42, weights, SS)
        h = np.array([eval_constraints(c, st.x[i]) for i, c in enumerate(inst42.constraints)])
        d = np.array([primal_grad(inst42.objectives[i], inst42.constraints[i], st.x[i], st.lam[i]) for i in range(6)])
        assert np.linalg.norm(st.z.sum(0) - d.sum(0)) <= 1e-10
        assert np.linalg.norm(st.y.sum(0) - h.sum(0)) <= 1e-10

    def test_deterministic(self, inst42, weights):
        a = b = init_state(inst42)
        for _ in range(50):
            a = step(a, inst42, weights, SS)
        for _ in range(50):
            b = step(b, inst42, weights, SS)
        for name in ("x", "lam", "z", "y", "d"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()

    def test_cached_gradient_matches_recomputed(self, inst42, weights):
        st = init_state(inst42)
        for _ in range(200):
            st = step(st, inst42, weights, SS)
            d = np.array([
                primal_grad(inst42.objectives[i], inst42.constraints[i], st.x[i], st.lam[i])
                for i in range(6)
            ])
            assert np.max(np.abs(d - st.d)) <= 1e-12

    def test_nonfinite_detected(self, inst42, weights):
        st = init_state(inst42)
        st.z[0, 0] = np.nan
        with pytest.raises(NonFiniteState) as info:
            step(st, inst42, weights, SS)
        assert info.value.round == 0

    def test_iterates_stay_feasible(self, inst42, weights):
        ds = DualSet.for_instance(inst42)
        st = init_state(inst42, np.full((6, 2), 2.9))
        for _ in range(300):
            st = step(st, inst42, weights, SS)
            assert np.all(st.x >= -3) and np.all(st.x <= 3)
            assert np.all(st.lam[:, 0] >= 0)
            assert np.all(np.abs(st.lam[:, 0]) <= ds.radius * (1 + 1e-14))


def single_agent_instance(seed=3):
    base = canonical_instance(seed, m=1)
    return base


def centralized_reference(inst, x, lam, rounds, ss):
    """Plain projected primal-dual gradient iteration for one agent."""
    obj, con = inst.objectives[0], inst.constraints[0]
    ds = DualSet.for_instance(inst)
    out = []
    for k in range(rounds):
        a = ss.c / (k + 1) ** ss.exponent
        g = primal_grad(obj, con, x, lam)
        h = eval_constraints(con, x)
        x, lam = project_box(x - a * g, inst.feasible_set), project_dual(lam + a * h, ds)
        out.append((x, lam))
    return out


def test_single_agent_reduces_to_centralized():
    inst = single_agent_instance()
    ws = identity_weights(1)
    x0 = np.array([[2.5, -1.0]])
    st = init_state(inst, x0)
    ref = centralized_reference(inst, x0[0].copy(), np.zeros(inst.r), 100, SS)
    for k in range(100):
        st = step(st, inst, ws, SS)
        assert st.x[0].tobytes() == ref[k][0].tobytes()
        assert st.lam[0].tobytes() == ref[k][1].tobytes()


def test_dual_ascent_sign():
    box = BoxSet([-1, -1], [1, 1])
    inst = ProblemInstance(
        [LocalObjective([0.3, 0.1], 0.0, 1.0, [1.0, -1.0])],
        [LocalConstraint(0.5, 2.0, np.zeros((0, 2)), np.zeros(0))],  # h >= 2 on X
        box, [0, 0], 5.0,
    )
    st = init_state(inst)
    prev = st.lam[0, 0]
    hit = False
    for _ in range(400):
        st = step(st, inst, identity_weights(1), StepSchedule(1.0, 0.75))
        cur = st.lam[0, 0]
        assert cur >= prev
        if cur == pytest.approx(5.0, rel=1e-12):
            hit = True
        prev = cur
    assert hit


class TestRun:
    def test_zero_rounds(self, inst42, sched, weights):
        tr = run(inst42, sched, weights, SS, rounds=0)
        assert len(tr.states) == 1 and tr.final.round == 0
        assert len(tr.rows) == 1

    def test_record_stride(self, inst42, sched, weights):
        tr = run(inst42, sched, weights, SS, rounds=95, record_every=10)
        assert len(tr.states) == 1 + math.ceil(95 / 10)
        assert tr.recorded_rounds()[-1] == 95

    def test_precondition_failures(self, inst42, sched, weights):
        row = [a.copy() for a in weights.row]
        row[0] = row[0] * 1.1
        with pytest.raises(ValueError):
            run(inst42, sched, WeightSchedule(tuple(row), weights.col), SS, rounds=1)
        lonely = GraphSchedule(tuple(DiGraph(6, frozenset()) for _ in range(4)), 4)
        eye = identity_weights(6)
        with pytest.raises(ValueError):
            run(inst42, lonely, WeightSchedule(eye.row * 4, eye.col * 4), SS, rounds=1)

    def test_consensus_after_5000(self, inst42, sched, weights):
        tr = run(inst42, sched, weights, SS, rounds=5000, record_every=5000, monitor=())
        assert tr.rows[-1].consensus_x < 1e-2

    def test_run_is_deterministic(self, inst42, sched, weights):
        a = run(inst42, sched, weights, SS, rounds=200, record_every=200, monitor=())
        b = run(inst42, sched, weights, SS, rounds=200, record_every=200, monitor=())
        assert a.final.x.tobytes() == b.final.x.tobytes()
        assert a.xhat.tobytes() == b.xhat.tobytes()

    def test_tracking_and_feasibility_monitors(self, run10k):
        m = 6
        assert run10k.per_round["tracking_z"].max() <= 1e-9 * m
        assert run10k.per_round["tracking_y"].max() <= 1e-9 * m
        assert len(run10k.per_round["tracking_z"]) == 10_001


class ConstantSteps:
    def alphas(self, start, stop):
        return np.ones(stop - start)


def _fake_trace(xhat):
    N = len(xhat) - 1
    from pushpull_pd.engine import SwarmState

    state = SwarmState(N, np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 2)))
    return Trace([state], [], np.asarray(xhat, float), np.zeros((N + 1, 1)), SS.alphas(0, N + 1), SS)


class TestErgodic:
    def test_constant(self):
        tr = _fake_trace(np.tile([0.25, -1.5], (21, 1)))
        assert np.allclose(ergodic_average(tr, 3, 20), [0.25, -1.5], rtol=0, atol=1e-15)

    def test_single_round(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(size=(11, 2))
        tr = _fake_trace(xs)
        assert np.allclose(ergodic_average(tr, 7, 7), xs[7], rtol=0, atol=1e-15)

    def test_equal_weights_mean(self):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=(11, 2))
        tr = _fake_trace(xs)
        assert np.allclose(ergodic_average(tr, 2, 9, ConstantSteps()), xs[2:10].mean(0), atol=1e-15)

    def test_weighted_by_steps(self):
        rng = np.random.default_rng(2)
        xs = rng.normal(size=(31, 2))
        tr = _fake_trace(xs)
        w = np.array([2.0 / (k + 1) ** 0.6 for k in range(5, 31)])
        expected = sum(w[i] * xs[5 + i] for i in range(len(w))) / w.sum()
        assert np.allclose(ergodic_average(tr, 5, 30), expected, atol=1e-14)

    @pytest.mark.parametrize("s, n", [(-1, 3), (5, 4), (0, 11)])
    def test_range_error(self, s, n):
        tr = _fake_trace(np.zeros((11, 2)))
        with pytest.raises(RangeError):
            ergodic_average(tr, s, n)

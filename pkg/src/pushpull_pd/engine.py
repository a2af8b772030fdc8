"""
Synchronous push-pull primal-dual iteration.

Every round, each agent pulls primal and dual estimates from its
in-neighbours through the row-stochastic ``A(k)``, takes a projected
descent step in ``x`` along its gradient tracker ``z`` and a projected
ascent step in ``lam`` along its constraint tracker ``y``, and then pushes
its trackers through the column-stochastic ``B(k)``.

All agents update from the same round-``k`` snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import analysis
from .errors import DimensionMismatch, InfeasibleStart, NonFiniteState, RangeError
from .network import WeightSchedule
from .problem import ProblemInstance, eval_constraints, primal_grad
from .projections import DualSet, project_box, project_dual

__all__ = [
    "StepSchedule",
    "AgentState",
    "SwarmState",
    "Trace",
    "step_size",
    "init_state",
    "step",
    "run",
    "ergodic_average",
    "network_average",
]


@dataclass(frozen=True)
class StepSchedule:
    """alpha_k = c / (k + 1) ** exponent, exponent in (1/2, 1]."""

    c: float = 2.0
    exponent: float = 0.6

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"step constant must be positive, got {self.c}")
        if not 0.5 < self.exponent <= 1.0:
            raise ValueError(f"exponent must lie in (0.5, 1], got {self.exponent}")

    def alphas(self, start, stop):
        """Step sizes for rounds ``start .. stop - 1``."""
        k = np.arange(start, stop, dtype=float)
        return self.c / (k + 1.0) ** self.exponent


def step_size(ss: StepSchedule, k: int) -> float:
    if k < 0:
        raise RangeError(f"round index must be >= 0, got {k}")
    return ss.c / (k + 1) ** ss.exponent


@dataclass(frozen=True)
class AgentState:
    x: np.ndarray
    lam: np.ndarray
    z: np.ndarray
    y: np.ndarray
    d: np.ndarray


@dataclass
class SwarmState:
    """Round-``k`` state of all agents, stacked one row per agent.

    ``x`` and ``z`` have shape ``(m, n)``; ``lam`` and ``y`` have shape
    ``(m, p+q)``; ``d`` caches the local Lagrangian gradients at
    ``(x_i, lam_i)``.
    """

    round: int
    x: np.ndarray
    lam: np.ndarray
    z: np.ndarray
    y: np.ndarray
    d: np.ndarray

    @property
    def m(self):
        return self.x.shape[0]

    @property
    def agents(self) -> List[AgentState]:
        return [
            AgentState(self.x[i], self.lam[i], self.z[i], self.y[i], self.d[i])
            for i in range(self.m)
        ]

    def copy(self):
        return SwarmState(
            self.round, self.x.copy(), self.lam.copy(), self.z.copy(), self.y.copy(), self.d.copy()
        )


def network_average(state: SwarmState) -> np.ndarray:
    """Uniform mean of the agents' primal iterates."""
    return state.x.mean(axis=0)


def _local_h(inst, x):
    return np.array([eval_constraints(con, x[i]) for i, con in enumerate(inst.constraints)])


def _local_d(inst, x, lam):
    return np.array([
        primal_grad(inst.objectives[i], inst.constraints[i], x[i], lam[i]) for i in range(inst.m)
    ])


def init_state(inst: ProblemInstance, x0=None, lam0=None) -> SwarmState:
    """Round-0 state: ``y_i = h_i(x_i)`` and ``z_i = d_i = grad_x L_i(x_i, lam_i)``.

    ``x0`` defaults to the Slater point for every agent and ``lam0`` to zero.
    Initial multipliers are projected into the truncated dual set.

    Raises
    ------
    DimensionMismatch
    InfeasibleStart
        If some ``x0_i`` is outside the box.
    """
    m, n, r = inst.m, inst.n, inst.r
    x = np.tile(inst.slater_point, (m, 1)) if x0 is None else np.array(x0, dtype=float)
    lam = np.zeros((m, r)) if lam0 is None else np.array(lam0, dtype=float)
    if x.shape != (m, n):
        raise DimensionMismatch(f"x0 must have shape {(m, n)}, got {x.shape}")
    if lam.shape != (m, r):
        raise DimensionMismatch(f"lam0 must have shape {(m, r)}, got {lam.shape}")
    for i in range(m):
        if not inst.feasible_set.contains(x[i]):
            raise InfeasibleStart(f"x0[{i}] = {x[i].tolist()} lies outside X")
    ds = DualSet.for_instance(inst)
    lam = np.array([project_dual(lam[i], ds) for i in range(m)])
    d = _local_d(inst, x, lam)
    return SwarmState(0, x, lam, d.copy(), _local_h(inst, x), d)


def step(state: SwarmState, inst: ProblemInstance, ws: WeightSchedule, ss: StepSchedule,
         alpha: Optional[float] = None) -> SwarmState:
    """Advance one synchronous round.

    ``alpha`` overrides the scheduled step size (used by tests).

    Raises
    ------
    NonFiniteState
    """
    k = state.round
    a = step_size(ss, k) if alpha is None else float(alpha)
    A, B = ws.A(k), ws.B(k)
    ds = DualSet.for_instance(inst)

    v = A @ state.x
    u = A @ state.lam
    x_new = project_box(v - a * state.z, inst.feasible_set)
    lam_new = np.empty_like(state.lam)
    for i in range(inst.m):
        lam_new[i] = project_dual(u[i] + a * state.y[i], ds)

    h_old = _local_h(inst, state.x)
    h_new = _local_h(inst, x_new)
    d_new = _local_d(inst, x_new, lam_new)
    # new local term plus (mixed tracker minus old local term): when B = I the
    # bracket is exactly zero and the tracker equals the local term bitwise
    y_new = h_new + (B @ state.y - h_old)
    z_new = d_new + (B @ state.z - state.d)

    new = SwarmState(k + 1, x_new, lam_new, z_new, y_new, d_new)
    for name in ("x", "lam", "z", "y"):
        if not np.all(np.isfinite(getattr(new, name))):
            raise NonFiniteState(f"non-finite {name} produced in round {k}", round=k)
    return new


@dataclass
class Trace:
    """Result of :func:`run`.

    ``states`` holds every ``record_every``-th state plus the final one;
    ``xhat`` and ``alpha`` cover every round ``0 .. N`` so that ergodic
    averages never need the full states.
    """

    states: List[SwarmState]
    rows: list
    xhat: np.ndarray
    lam_hat: np.ndarray
    alpha: np.ndarray
    schedule: StepSchedule
    per_round: dict = field(default_factory=dict)

    @property
    def final(self) -> SwarmState:
        return self.states[-1]

    @property
    def rounds(self):
        return self.final.round

    def recorded_rounds(self):
        return [s.round for s in self.states]


def run(inst, sched, ws, ss, x0=None, lam0=None, rounds=1000, record_every=1,
        certificate=None, monitor=("consensus", "tracking")):
    """Run ``rounds`` synchronous rounds and collect a trace.

    Parameters
    ----------
    inst : ProblemInstance
    sched : GraphSchedule or None
        Only used for the precondition checks; pass ``None`` to skip them.
    ws : WeightSchedule
    ss : StepSchedule
    x0, lam0 : array_like, optional
        Initial iterates, see :func:`init_state`.
    rounds : int
    record_every : int
        Stride for stored states and trace rows. The final round is always
        recorded.
    certificate : SaddleCertificate, optional
        Enables gap and distance-to-optimum columns in the rows.
    monitor : iterable of str
        Per-round scalar series to keep in ``trace.per_round``: any of
        ``"consensus"``, ``"tracking"``, ``"distance"``, ``"s_norm"``.

    Raises
    ------
    ValueError
        If the weight schedule or connectivity precondition fails.
    NonFiniteState
        With the failing round index.
    """
    from .network import check_connectivity, validate_weights

    if rounds < 0 or record_every < 1:
        raise ValueError("rounds must be >= 0 and record_every >= 1")
    if sched is not None:
        report = validate_weights(ws, sched)
        if not report.ok:
            raise ValueError(f"weight schedule invalid: {report.messages}")
        if not check_connectivity(sched, sched.connectivity_window):
            raise ValueError(
                f"schedule is not {sched.connectivity_window}-strongly connected"
            )
    state = init_state(inst, x0, lam0)
    balance = analysis.BalanceVector.initial(inst.m)
    monitor = set(monitor)
    series = {name: [] for name in _series_names(monitor)}
    states = [state]
    rows = [analysis.compute_row(state, inst, certificate, balance, ss)]
    xhat = np.empty((rounds + 1, inst.n))
    lam_hat = np.empty((rounds + 1, inst.r))
    xhat[0] = state.x.mean(axis=0)
    lam_hat[0] = state.lam.mean(axis=0)
    _collect(series, state, inst, certificate, balance, monitor)
    for k in range(rounds):
        state = step(state, inst, ws, ss)
        balance = analysis.propagate_balance(balance, ws.B(k))
        xhat[k + 1] = state.x.mean(axis=0)
        lam_hat[k + 1] = state.lam.mean(axis=0)
        _collect(series, state, inst, certificate, balance, monitor)
        if state.round % record_every == 0 or state.round == rounds:
            states.append(state)
            rows.append(analysis.compute_row(state, inst, certificate, balance, ss))
    return Trace(
        states=states,
        rows=rows,
        xhat=xhat,
        lam_hat=lam_hat,
        alpha=ss.alphas(0, rounds + 1),
        schedule=ss,
        per_round={k: np.asarray(v) for k, v in series.items()},
    )


def _series_names(monitor):
    names = []
    if "consensus" in monitor:
        names += ["consensus_x", "consensus_lam"]
    if "tracking" in monitor:
        names += ["tracking_z", "tracking_y"]
    if "distance" in monitor:
        names += ["dist_x", "dist_lam"]
    if "s_norm" in monitor:
        names += ["s_norm"]
    return names


def _collect(series, state, inst, certificate, balance, monitor):
    if "consensus" in monitor:
        series["consensus_x"].append(analysis.consensus_residual(state.x))
        series["consensus_lam"].append(analysis.consensus_residual(state.lam))
    if "tracking" in monitor:
        tz, ty = analysis.tracking_residuals(state, inst)
        series["tracking_z"].append(tz)
        series["tracking_y"].append(ty)
    if "distance" in monitor and certificate is not None:
        series["dist_x"].append(float(np.max(np.linalg.norm(state.x - certificate.x_star, axis=1))))
        series["dist_lam"].append(float(np.max(np.linalg.norm(state.lam - certificate.lam_star, axis=1))))
    if "s_norm" in monitor:
        series["s_norm"].append(analysis.s_norm(state, balance))


def ergodic_average(trace: Trace, s: int, n: int, ss: Optional[StepSchedule] = None) -> np.ndarray:
    """Step-size weighted average of the network-average iterate over rounds ``s..n``.

    Raises
    ------
    RangeError
        Unless ``0 <= s <= n <= trace.rounds``.
    """
    if not 0 <= s <= n <= trace.rounds:
        raise RangeError(f"need 0 <= s <= n <= {trace.rounds}, got s={s}, n={n}")
    ss = trace.schedule if ss is None else ss
    w = ss.alphas(s, n + 1)
    return (w @ trace.xhat[s:n + 1]) / w.sum()

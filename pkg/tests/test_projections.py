import math

import numpy as np
import pytest

from pushpull_pd.problem import BoxSet
from pushpull_pd.projections import DualSet, in_dual_set, project_box, project_dual

BOX = BoxSet([-3, -3], [3, 3])


def test_box_clamp():
    assert np.array_equal(project_box([5, -7], BOX), [3, -3])
    assert np.array_equal(project_box([-3, 4], BOX), [-3, 3])
    assert np.array_equal(project_box([0.5, -1.25], BOX), [0.5, -1.25])


@pytest.mark.parametrize(
    "lam, ds, expected",
    [
        ([-2, 5], DualSet(1, 1, 10), [0, 5]),
        ([3, 4], DualSet(2, 0, 2.5), [1.5, 2.0]),
        ([1, 2, -9], DualSet(2, 1, 10), [1, 2, -9]),
    ],
)
def test_dual_examples(lam, ds, expected):
    assert np.allclose(project_dual(lam, ds), expected, atol=1e-15)


def test_infinite_radius_clips_only():
    assert np.array_equal(project_dual([-1, 50, 3], DualSet(2, 1, math.inf)), [0, 50, 3])


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        DualSet(1, 0, -1)


def _polar_points(r_lo, r_hi, t_lo, t_hi, step):
    r = np.linspace(r_lo, r_hi, int(round((r_hi - r_lo) / step)) + 1)
    t = np.linspace(t_lo, t_hi, int(round((t_hi - t_lo) / step)) + 1)
    rr, tt = np.meshgrid(r, t, indexing="ij")
    return np.stack([rr * np.cos(tt), rr * np.sin(tt)], -1).reshape(-1, 2), rr.ravel(), tt.ravel()


def grid_projection(lam, ds, coarse=1e-2, fine=1e-4):
    """Brute-force nearest point of Q on a grid (p <= 2 plus equality block).

    The orthant ball is gridded in polar coordinates so that its curved
    boundary is represented exactly; a coarse scan is followed by a fine
    scan of a window around the coarse winner.
    """
    p, R = ds.p, ds.radius
    target = lam[:p]
    if p == 1:
        pts = np.linspace(0, R, int(round(R / fine)) + 1)[:, None]
        best = pts[np.argmin(np.sum((pts - target) ** 2, axis=1))]
    else:
        pts, rr, tt = _polar_points(0, R, 0, np.pi / 2, coarse)
        i = np.argmin(np.sum((pts - target) ** 2, axis=1))
        pts, _, _ = _polar_points(
            max(rr[i] - 3 * coarse, 0), min(rr[i] + 3 * coarse, R),
            max(tt[i] - 3 * coarse, 0), min(tt[i] + 3 * coarse, np.pi / 2), fine,
        )
        best = pts[np.argmin(np.sum((pts - target) ** 2, axis=1))]
    # equality coordinates are free; scan a shifted grid around each one
    offsets = np.arange(-1, 1 + fine / 2, fine) + 0.37 * fine
    best_eq = np.array([l + offsets[np.argmin(offsets ** 2)] for l in lam[p:]])
    return np.concatenate([best, best_eq])


def test_matches_grid_oracle():
    rng = np.random.default_rng(0)
    for p, q in [(1, 1), (2, 1), (2, 0), (1, 0)]:
        ds = DualSet(p, q, 1.5)
        for _ in range(10):
            lam = rng.normal(0, 2, p + q)
            assert np.max(np.abs(project_dual(lam, ds) - grid_projection(lam, ds))) <= 1e-3


def _random_pairs(rng, count):
    for _ in range(count):
        p, q = rng.integers(0, 4), rng.integers(0, 3)
        ds = DualSet(int(p), int(q), float(rng.uniform(0, 5)))
        yield ds, rng.normal(0, 4, p + q), rng.normal(0, 4, p + q)


def test_idempotent():
    rng = np.random.default_rng(1)
    for ds, u, _ in _random_pairs(rng, 1000):
        pu = project_dual(u, ds)
        assert np.array_equal(project_dual(pu, ds), pu)
        x = rng.normal(0, 6, 2)
        px = project_box(x, BOX)
        assert np.array_equal(project_box(px, BOX), px)


def test_nonexpansive():
    rng = np.random.default_rng(2)
    for ds, u, v in _random_pairs(rng, 1000):
        assert np.linalg.norm(project_dual(u, ds) - project_dual(v, ds)) <= np.linalg.norm(u - v) + 1e-12
        x, y = rng.normal(0, 6, (2, 2))
        assert np.linalg.norm(project_box(x, BOX) - project_box(y, BOX)) <= np.linalg.norm(x - y) + 1e-12


def _sample_feasible(rng, ds, count):
    ineq = np.abs(rng.normal(size=(count, ds.p)))
    if ds.p:
        ineq /= np.maximum(np.linalg.norm(ineq, axis=1, keepdims=True), 1e-300)
        ineq *= ds.radius * rng.uniform(size=(count, 1))
    return np.hstack([ineq, rng.normal(0, 5, (count, ds.q))])


def test_variational_inequality():
    rng = np.random.default_rng(3)
    for ds, v, _ in _random_pairs(rng, 100):
        pv = project_dual(v, ds)
        W = _sample_feasible(rng, ds, 100)
        assert np.max((W - pv) @ (v - pv)) <= 1e-10
        x = rng.normal(0, 6, 2)
        px = project_box(x, BOX)
        Wx = rng.uniform(-3, 3, (100, 2))
        assert np.max((Wx - px) @ (x - px)) <= 1e-10


def test_output_feasible():
    rng = np.random.default_rng(4)
    for ds, u, _ in _random_pairs(rng, 1000):
        assert in_dual_set(project_dual(u, ds), ds, tol=1e-12)
        assert BOX.contains(project_box(rng.normal(0, 10, 2), BOX))

"""
Per-round diagnostics for push-pull primal-dual runs.

Besides the residuals plotted in a typical experiment (consensus, distance
to the optimum, objective gap, coupled-constraint violation) this module
tracks the quantities used to reason about the method:

* the push-sum balance vector ``v_{k+1} = B_k v_k`` with ``v_0 = 1``,
* the rescaled trackers ``s^k = V_k^{-1} eta^k`` with
  ``eta_i = (z_i, -y_i)``,
* estimates of the limiting row of products of the pull matrices, which
  give the time-varying averaging weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateBalance, NonStochastic, NotConverged, RangeError
from .problem import eval_constraints, eval_objective, primal_grad

__all__ = [
    "TraceRow",
    "BalanceVector",
    "TransformedTracker",
    "AbsProbEstimate",
    "RateFit",
    "consensus_residual",
    "tracking_residuals",
    "violations",
    "compute_row",
    "propagate_balance",
    "transformed_tracker",
    "s_norm",
    "estimate_abs_prob",
    "weighted_average",
    "fit_rate",
    "csv_header",
    "row_to_csv",
]


@dataclass
class TraceRow:
    k: int
    alpha: float
    consensus_x: float
    consensus_lam: float
    tracking_z: float
    tracking_y: float
    violation_ineq: np.ndarray
    violation_eq: np.ndarray
    gap: Optional[float] = None
    s_norm: float = math.nan
    dist_agents: Optional[np.ndarray] = None
    gap_agents: Optional[np.ndarray] = None


def consensus_residual(rows) -> float:
    """max_i ||row_i - mean(rows)||."""
    rows = np.asarray(rows, dtype=float)
    return float(np.max(np.linalg.norm(rows - rows.mean(axis=0), axis=1)))


def tracking_residuals(state, inst):
    """Norms of sum_i z_i - sum_i grad_x L_i and sum_i y_i - sum_i h_i.

    Gradients and constraint values are recomputed from the iterates, not
    read from the cached ``state.d``.
    """
    d = np.array([
        primal_grad(inst.objectives[i], inst.constraints[i], state.x[i], state.lam[i])
        for i in range(inst.m)
    ])
    h = np.array([eval_constraints(con, state.x[i]) for i, con in enumerate(inst.constraints)])
    tz = float(np.linalg.norm(state.z.sum(axis=0) - d.sum(axis=0)))
    ty = float(np.linalg.norm(state.y.sum(axis=0) - h.sum(axis=0)))
    return tz, ty


def violations(inst, x):
    """Coupled-constraint violation at ``x``: (max(H_ineq, 0), |H_eq|)."""
    total = np.sum([eval_constraints(con, x) for con in inst.constraints], axis=0)
    return np.maximum(total[: inst.p], 0.0), np.abs(total[inst.p:])


def _global_f(inst, x):
    return sum(eval_objective(o, x) for o in inst.objectives)


def compute_row(state, inst, certificate=None, balance=None, ss=None) -> TraceRow:
    """Diagnostics for one state.

    ``gap``, ``dist_agents`` and ``gap_agents`` need a certificate;
    ``s_norm`` needs the balance vector of the same round and is NaN
    without it.
    """
    from .engine import step_size

    xhat = state.x.mean(axis=0)
    vi, ve = violations(inst, xhat)
    tz, ty = tracking_residuals(state, inst)
    row = TraceRow(
        k=state.round,
        alpha=step_size(ss, state.round) if ss is not None else math.nan,
        consensus_x=consensus_residual(state.x),
        consensus_lam=consensus_residual(state.lam),
        tracking_z=tz,
        tracking_y=ty,
        violation_ineq=vi,
        violation_eq=ve,
    )
    if balance is not None:
        row.s_norm = s_norm(state, balance)
    if certificate is not None:
        f_star = certificate.f_star
        row.gap = _global_f(inst, xhat) - f_star
        row.dist_agents = np.linalg.norm(state.x - certificate.x_star, axis=1)
        row.gap_agents = np.array([_global_f(inst, xi) - f_star for xi in state.x])
    return row


# --------------------------------------------------------------------------
# balance vector and rescaled trackers

@dataclass
class BalanceVector:
    """Push-sum weights for the two stacked blocks, length ``2m``."""

    v: np.ndarray

    @classmethod
    def initial(cls, m):
        return cls(np.ones(2 * m))

    @property
    def m(self):
        return self.v.shape[0] // 2

    @property
    def primal(self):
        return self.v[: self.m]

    @property
    def dual(self):
        return self.v[self.m:]


def propagate_balance(bv: BalanceVector, colW, tol=1e-9) -> BalanceVector:
    """One push step ``v <- blockdiag(B, B) v``.

    Raises
    ------
    NonStochastic
        If a column of ``colW`` sums to something other than one.
    """
    colW = np.asarray(colW, dtype=float)
    dev = float(np.max(np.abs(colW.sum(axis=0) - 1.0)))
    if dev > tol:
        raise NonStochastic(f"column sums deviate from 1 by {dev:.3g}")
    return BalanceVector(np.concatenate([colW @ bv.primal, colW @ bv.dual]))


@dataclass
class TransformedTracker:
    s_x: np.ndarray  # (m, n): z_i / v_i
    s_lam: np.ndarray  # (m, p+q): -y_i / v_{m+i}
    mean_x: np.ndarray  # (1/2m) sum_i v_i s_x[i]
    mean_lam: np.ndarray

    @property
    def norm(self):
        return math.sqrt(float(np.sum(self.s_x ** 2) + np.sum(self.s_lam ** 2)))


def transformed_tracker(state, bv: BalanceVector, floor=1e-12) -> TransformedTracker:
    """Rescale the trackers by the balance weights.

    The weighted means ``(1/2m) sum_i v_i s_i`` of the two blocks equal
    ``(1/2m) sum_i z_i`` and ``-(1/2m) sum_i y_i``, i.e. they follow the
    network-average Lagrangian gradient.

    Raises
    ------
    DegenerateBalance
        If any balance weight is below ``floor``.
    """
    if np.min(bv.v) < floor:
        raise DegenerateBalance(f"balance weight {np.min(bv.v):.3g} below {floor}")
    two_m = bv.v.shape[0]
    s_x = state.z / bv.primal[:, None]
    s_lam = -state.y / bv.dual[:, None]
    mean_x = (bv.primal @ s_x) / two_m
    mean_lam = (bv.dual @ s_lam) / two_m
    return TransformedTracker(s_x, s_lam, mean_x, mean_lam)


def s_norm(state, bv: BalanceVector) -> float:
    return transformed_tracker(state, bv).norm


# --------------------------------------------------------------------------
# limiting rows of products of pull matrices

@dataclass
class AbsProbEstimate:
    mu: np.ndarray
    spread: float
    horizon: int


def estimate_abs_prob(ws, s=0, horizon=200, tol=1e-8) -> AbsProbEstimate:
    """Estimate the common limit row of ``A(s+T-1) ... A(s)``.

    Returns the mean row of the product when its largest column spread
    (max minus min over rows) is below ``tol``. The estimate is a
    stochastic vector renormalized to sum to one.

    Raises
    ------
    NotConverged
        Carries the achieved spread; a larger ``horizon`` may help.
    """
    if horizon < 1:
        raise RangeError("horizon must be >= 1")
    P = np.eye(ws.m)
    for k in range(s, s + horizon):
        P = ws.A(k) @ P
    spread = float(np.max(np.ptp(P, axis=0)))
    if spread >= tol:
        raise NotConverged(f"row spread {spread:.3g} after {horizon} products", spread)
    mu = np.clip(P.mean(axis=0), 0.0, None)
    return AbsProbEstimate(mu / mu.sum(), spread, horizon)


def weighted_average(rows, weights) -> np.ndarray:
    return np.asarray(weights, dtype=float) @ np.asarray(rows, dtype=float)


# --------------------------------------------------------------------------
# empirical iteration-complexity check

@dataclass
class RateFit:
    n: np.ndarray
    start: np.ndarray
    gap: np.ndarray  # f(ergodic average) - f*
    step_sum: np.ndarray
    product: np.ndarray  # gap * step_sum
    running_max: np.ndarray
    slope: float  # log-log slope of |gap| against n
    constant: float = field(default=math.nan)  # empirical M1 = max(product)

    @property
    def stabilized(self):
        """Last-quartile maximum of the products within 2x of their median."""
        prod = np.abs(self.product)
        tail = prod[int(0.75 * len(prod)):]
        return bool(np.all(np.isfinite(prod)) and tail.max() <= 2.0 * np.median(prod))


def fit_rate(trace, inst, certificate, ss=None, s=None, n_min=100, points=40) -> RateFit:
    """Check the O(1 / sum alpha_k) decay of the ergodic objective gap.

    For ``n`` on a logarithmic grid over ``[n_min, N]`` computes
    ``g(n) = f(xtilde_s^n) - f*`` and ``S(n) = sum_{k=s}^n alpha_k``.
    ``s=None`` uses ``s = floor(n / 2)`` for every ``n``; an integer fixes
    the start round.

    Raises
    ------
    RangeError
    """
    from .engine import ergodic_average

    ss = trace.schedule if ss is None else ss
    N = trace.rounds
    lo = max(n_min, (s + 1) if s is not None else 1)
    if lo > N:
        raise RangeError(f"need at least one grid point in [{lo}, {N}]")
    grid = np.unique(np.round(np.geomspace(lo, N, points)).astype(int))
    starts = grid // 2 if s is None else np.full_like(grid, s)
    f_star = certificate.f_star
    gaps, sums = [], []
    for n, s0 in zip(grid, starts):
        xt = ergodic_average(trace, int(s0), int(n), ss)
        gaps.append(_global_f(inst, xt) - f_star)
        sums.append(float(ss.alphas(int(s0), int(n) + 1).sum()))
    gaps = np.array(gaps)
    sums = np.array(sums)
    prod = gaps * sums
    mask = np.abs(gaps) > 0
    if mask.sum() >= 2:
        slope = float(np.polyfit(np.log(grid[mask]), np.log(np.abs(gaps[mask])), 1)[0])
    else:
        slope = -math.inf
    return RateFit(
        n=grid,
        start=starts,
        gap=gaps,
        step_sum=sums,
        product=prod,
        running_max=np.maximum.accumulate(prod),
        slope=slope,
        constant=float(prod.max()),
    )


# --------------------------------------------------------------------------
# CSV row schema

def csv_header(m, p, q):
    cols = ["k", "alpha", "consensus_x", "consensus_lam", "tracking_z", "tracking_y"]
    cols += [f"viol_ineq_{j + 1}" for j in range(p)]
    cols += [f"viol_eq_{j + 1}" for j in range(q)]
    cols += ["gap", "s_norm"]
    cols += [f"dist_x_{i + 1}" for i in range(m)]
    cols += [f"gap_agent_{i + 1}" for i in range(m)]
    return cols


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v))


def row_to_csv(row: TraceRow, m):
    out = [str(row.k)]
    out += [_fmt(v) for v in (row.alpha, row.consensus_x, row.consensus_lam, row.tracking_z, row.tracking_y)]
    out += [_fmt(v) for v in row.violation_ineq]
    out += [_fmt(v) for v in row.violation_eq]
    out += [_fmt(row.gap), _fmt(row.s_norm)]
    dist = row.dist_agents if row.dist_agents is not None else [None] * m
    gaps = row.gap_agents if row.gap_agents is not None else [None] * m
    out += [_fmt(v) for v in dist]
    out += [_fmt(v) for v in gaps]
    return out

"""
Centralized reference solver used to certify saddle points.

Nothing here reuses the distributed engine or the per-agent evaluation
routines of :mod:`pushpull_pd.problem`: the global Lagrangian is rebuilt
from the stacked coefficient arrays, so agreement with the engine is
evidence rather than tautology.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .errors import NoConvergence

__all__ = [
    "SaddleCertificate",
    "SaddleReport",
    "CentralLagrangian",
    "solve_centralized",
    "min_over_X",
    "verify_saddle",
    "grid_minimize_box",
    "grid_search_primal",
    "certificate_to_dict",
    "certificate_from_dict",
]


class CentralLagrangian:
    """Aggregate L(x, lam) = f(x) + lam^T H(x) with f = sum f_i, H = sum h_i."""

    def __init__(self, inst):
        A, b, c, D = inst.objective_arrays()
        alpha, beta, G, delta = inst.constraint_arrays()
        self.n, self.p, self.q = inst.n, inst.p, inst.q
        self.a_sum = A.sum(axis=0)
        self.b_sum = float(b.sum())
        self.c = c
        self.D = D
        self.alpha_sum = float(alpha.sum())
        self.beta_sum = float(beta.sum())
        self.G_sum = G.sum(axis=0)  # (q, n)
        self.delta_sum = delta.sum(axis=0)  # (q,)
        self.extra = [
            [con.extra_ineq[j] for con in inst.constraints] for j in range(inst.p - 1)
        ]
        self.lo = inst.feasible_set.lo
        self.hi = inst.feasible_set.hi
        self.radius = inst.dual_radius

    # -- primal pieces, batched over leading axes of x -------------------
    def f(self, x):
        x = np.asarray(x, dtype=float)
        z = x @ self.D.T
        return x @ self.a_sum + self.b_sum + np.logaddexp(0.0, z) @ self.c

    def grad_f(self, x):
        return self.a_sum + self.D.T @ (self.c * expit(self.D @ x))

    def H(self, x):
        x = np.asarray(x, dtype=float)
        rows = [self.alpha_sum * np.sum(x * x, axis=-1) + self.beta_sum]
        for group in self.extra:
            rows.append(_apply_rows(group, x))
        if self.q:
            eq = x @ self.G_sum.T + self.delta_sum
            rows += [eq[..., j] for j in range(self.q)]
        return np.stack(rows, axis=-1)

    def jac_H(self, x):
        """(n, p+q) matrix whose columns are gradients of the rows of H."""
        cols = [2.0 * self.alpha_sum * x]
        for group in self.extra:
            cols.append(np.sum([row.grad(x) for row in group], axis=0))
        cols += list(self.G_sum)
        return np.column_stack(cols)

    def value(self, x, lam):
        return self.f(x) + self.H(x) @ lam

    def grad_x(self, x, lam):
        return self.grad_f(x) + self.jac_H(x) @ lam

    # -- projections (kept local on purpose) ------------------------------
    def proj_x(self, x):
        return np.minimum(np.maximum(x, self.lo), self.hi)

    def proj_lam(self, lam):
        out = lam.copy()
        ineq = np.maximum(out[: self.p], 0.0)
        nrm = np.linalg.norm(ineq)
        if math.isfinite(self.radius) and nrm > self.radius:
            ineq *= self.radius / nrm
        out[: self.p] = ineq
        return out

    def residual(self, x, lam):
        """Fixed-point residual of the projected primal-dual map at unit step."""
        rx = x - self.proj_x(x - self.grad_x(x, lam))
        rl = lam - self.proj_lam(lam + self.H(x))
        return float(np.linalg.norm(rx) + np.linalg.norm(rl))


def _apply_rows(group, x):
    if x.ndim == 1:
        return sum(row.value(x) for row in group)
    flat = x.reshape(-1, x.shape[-1])
    vals = np.array([sum(row.value(pt) for row in group) for pt in flat])
    return vals.reshape(x.shape[:-1])


@dataclass
class SaddleCertificate:
    x_star: np.ndarray
    lam_star: np.ndarray
    f_star: float
    kkt_residual: float
    saddle_gap: float
    method: str
    iterations: int = 0

    def __post_init__(self):
        self.x_star = np.asarray(self.x_star, dtype=float)
        self.lam_star = np.asarray(self.lam_star, dtype=float)


@dataclass
class SaddleReport:
    left_violation: float  # max_lam L(x, lam) - L(x, lam_c)
    right_violation: float  # max_x L(x_c, lam_c) - L(x, lam_c)
    probes: int
    tol: float

    @property
    def passed(self):
        return self.left_violation <= self.tol and self.right_violation <= self.tol

    @property
    def gap(self):
        return max(self.left_violation, self.right_violation, 0.0)


def certificate_to_dict(cert: SaddleCertificate) -> dict:
    doc = asdict(cert)
    doc["x_star"] = cert.x_star.tolist()
    doc["lam_star"] = cert.lam_star.tolist()
    return doc


def certificate_from_dict(doc: dict) -> SaddleCertificate:
    return SaddleCertificate(**doc)


def save_certificate(cert, path):
    with open(path, "w") as fh:
        json.dump(certificate_to_dict(cert), fh, indent=1)


def load_certificate(path):
    with open(path) as fh:
        return certificate_from_dict(json.load(fh))


# --------------------------------------------------------------------------
# minimization of L(., lam) over the box

def _pgd(fun, grad, proj, x0, tol, max_iter):
    """Projected gradient descent with backtracking; returns (x, residual)."""
    x = proj(np.asarray(x0, dtype=float))
    fx = fun(x)
    step = 1.0
    best = math.inf
    for _ in range(max_iter):
        g = grad(x)
        res = np.linalg.norm(x - proj(x - g))
        best = min(best, res)
        if res < tol:
            return x, res
        while True:
            x_new = proj(x - step * g)
            f_new = fun(x_new)
            dx = x_new - x
            if f_new <= fx + g @ dx + (0.5 / step) * (dx @ dx) + 1e-15 * abs(fx):
                break
            step *= 0.5
            if step < 1e-14:
                return x, res
        x, fx = x_new, f_new
        step *= 2.0
    raise NoConvergence(f"projected gradient did not reach {tol} in {max_iter} steps", best)


def _newton_polish(grad, proj, lo, hi, x, tol, iters=50, h=1e-6):
    """Projected Newton steps on the free coordinates.

    The Hessian is a central difference of the analytic gradient. Used when
    first-order descent stalls just above ``tol`` on ill-conditioned
    problems. Returns ``(x, residual)``; never makes the residual worse.
    """
    res_of = lambda v: float(np.linalg.norm(v - proj(v - grad(v))))
    res = res_of(x)
    for _ in range(iters):
        if res < tol:
            break
        g = grad(x)
        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
        if not free.any():
            break
        idx = np.flatnonzero(free)
        Hm = np.empty((idx.size, idx.size))
        for col, k in enumerate(idx):
            e = np.zeros_like(x)
            e[k] = h
            Hm[:, col] = (grad(x + e) - grad(x - e))[idx] / (2 * h)
        Hm = 0.5 * (Hm + Hm.T)
        try:
            dx = np.linalg.solve(Hm, -g[idx])
        except np.linalg.LinAlgError:
            break
        t, improved = 1.0, False
        for _ in range(30):
            cand = x.copy()
            cand[idx] += t * dx
            cand = proj(cand)
            r = res_of(cand)
            if r < res:
                x, res, improved = cand, r, True
                break
            t *= 0.5
        if not improved:
            break
    return x, res


def _grid_axis(lo, hi, step):
    count = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, max(count, 2))


def grid_minimize_box(fun, lo, hi, step=1e-3, refine_to=1e-5, chunk=2_000_000):
    """Grid minimum of ``fun`` over a box of dimension 1 or 2.

    ``fun`` is evaluated on arrays of points with shape ``(K, n)``. A full
    grid at ``step`` is scanned in chunks, then windows of +-2 cells around
    the incumbent are rescanned at ten times finer spacing until
    ``refine_to`` is reached. Refinement assumes ``fun`` is convex.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    if n > 2:
        raise ValueError("grid search is limited to n <= 2")
    axes = [_grid_axis(lo[k], hi[k], step) for k in range(n)]
    best_x, best_v = None, math.inf
    if n == 1:
        pts = axes[0][:, None]
        vals = fun(pts)
        i = int(np.argmin(vals))
        best_x, best_v = pts[i], float(vals[i])
    else:
        rows_per_chunk = max(1, chunk // axes[1].size)
        for start in range(0, axes[0].size, rows_per_chunk):
            x0 = axes[0][start:start + rows_per_chunk]
            pts = np.stack(np.meshgrid(x0, axes[1], indexing="ij"), axis=-1).reshape(-1, 2)
            vals = fun(pts)
            i = int(np.argmin(vals))
            if vals[i] < best_v:
                best_x, best_v = pts[i].copy(), float(vals[i])
    h = step
    while h > refine_to * (1 + 1e-9):
        wlo = np.maximum(best_x - 2 * h, lo)
        whi = np.minimum(best_x + 2 * h, hi)
        h = h / 10.0
        sub = [_grid_axis(wlo[k], whi[k], h) for k in range(n)]
        pts = np.stack(np.meshgrid(*sub, indexing="ij"), axis=-1).reshape(-1, n)
        vals = fun(pts)
        i = int(np.argmin(vals))
        if vals[i] <= best_v:
            best_x, best_v = pts[i].copy(), float(vals[i])
    return best_x, best_v


def min_over_X(inst, lam, tol=1e-8, max_iter=20_000, verify=True):
    """Minimize the Lagrangian over the box for fixed multipliers.

    Returns ``(x, q(lam))``. L-BFGS-B does the descent, followed if needed
    by projected Newton polishing; the projected gradient norm at the
    answer must be below ``tol``. For ``n <= 2`` the
    answer is cross-checked by a coarse-to-fine grid scan and the solve is
    restarted from the grid point if that point is strictly better.

    Raises
    ------
    NoConvergence
    """
    L = CentralLagrangian(inst)
    lam = np.asarray(lam, dtype=float)
    fun = lambda x: L.value(x, lam)
    grad = lambda x: L.grad_x(x, lam)

    def descend(x0):
        sol = minimize(
            lambda x: (float(fun(x)), grad(x)),
            L.proj_x(np.asarray(x0, dtype=float)),
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(L.lo, L.hi)),
            options={"gtol": tol * 1e-2, "ftol": 1e-16, "maxiter": max_iter},
        )
        x = L.proj_x(sol.x)
        return x, float(np.linalg.norm(x - L.proj_x(x - grad(x))))

    x, res = descend(inst.slater_point)
    if verify and inst.n <= 2:
        xg, vg = grid_minimize_box(fun, L.lo, L.hi, step=1e-2, refine_to=1e-5)
        if vg < fun(x) - 1e-12:
            x, res = descend(xg)
    if res >= tol:
        x, res = _newton_polish(grad, L.proj_x, L.lo, L.hi, x, tol)
    if res >= tol:
        x2, res2 = _pgd(fun, grad, L.proj_x, x, tol, max_iter)
        x, res = x2, res2
    return x, float(fun(x))


# --------------------------------------------------------------------------
# grid search of the constrained primal problem (n <= 2)

def grid_search_primal(inst, step=1e-3, refine_to=1e-5, feas_tol=0.0):
    """Brute-force minimizer of f over {x in X : sum h_i(x) in K} for n <= 2.

    With one equality row in the plane the feasible set lies on a line,
    which is parametrized and scanned directly; with no equality rows the
    whole box is scanned with infeasible points masked out.
    """
    L = CentralLagrangian(inst)
    n, p, q = inst.n, inst.p, inst.q
    if n > 2:
        raise ValueError("grid search is limited to n <= 2")

    def masked(pts):
        vals = L.f(pts)
        Hv = L.H(pts)
        bad = np.any(Hv[:, :p] > feas_tol, axis=1)
        bad |= np.any(pts < L.lo, axis=1) | np.any(pts > L.hi, axis=1)
        return np.where(bad, np.inf, vals)

    if q == 0:
        x, v = grid_minimize_box(masked, L.lo, L.hi, step, refine_to)
    elif q == 1 and n == 2:
        g = L.G_sum[0]
        gg = g @ g
        if gg == 0:
            raise ValueError("degenerate equality row")
        x0 = -L.delta_sum[0] * g / gg
        u = np.array([-g[1], g[0]]) / math.sqrt(gg)
        span = float(np.linalg.norm(L.hi - L.lo) + np.linalg.norm(x0))
        on_line = lambda t: masked(x0 + t[:, :1] * u)
        t, v = grid_minimize_box(on_line, [-span], [span], step, refine_to)
        x = x0 + t[0] * u
    elif q == n:
        x = np.linalg.solve(L.G_sum, -L.delta_sum)
        v = float(masked(x[None, :])[0])
    else:
        raise ValueError(f"unsupported grid layout n={n}, q={q}")
    if not math.isfinite(v):
        raise ValueError("grid search found no feasible point")
    return x, float(v)


# --------------------------------------------------------------------------
# centralized saddle-point solver

def solve_centralized(
    inst,
    tol=1e-6,
    budget=1_000_000,
    warm_iters=20_000,
    step_c=1.0,
    step_exponent=0.75,
    probes=1000,
    seed=0,
):
    """Certified saddle point of the Lagrangian over X x Q.

    A diminishing-step Arrow-Hurwicz run with ergodic averaging over its
    second half supplies a warm start. If that average does not already
    meet ``tol``, a projected extragradient method with adaptive step
    polishes it until the unit-step fixed-point residual drops below
    ``tol``.

    Raises
    ------
    NoConvergence
        If ``budget`` iterations are spent without reaching ``tol``.
    """
    L = CentralLagrangian(inst)
    x = L.proj_x(inst.slater_point.copy())
    lam = np.zeros(inst.r)
    x_acc = np.zeros_like(x)
    lam_acc = np.zeros_like(lam)
    w_acc = 0.0
    n_ah = min(warm_iters, budget)
    for k in range(n_ah):
        a = step_c / (k + 1) ** step_exponent
        gx = L.grad_x(x, lam)
        hv = L.H(x)
        x, lam = L.proj_x(x - a * gx), L.proj_lam(lam + a * hv)
        if k >= n_ah // 2:
            x_acc += a * x
            lam_acc += a * lam
            w_acc += a
    if w_acc > 0:
        x, lam = x_acc / w_acc, lam_acc / w_acc
    res = L.residual(x, lam)
    best = res
    method = "arrow-hurwicz"
    it = n_ah
    tau = 1.0
    if res >= tol:
        method = "arrow-hurwicz+extragradient"
    while res >= tol:
        if it >= budget:
            raise NoConvergence(f"saddle residual {best:.3e} after {it} iterations", best)
        gx, hv = L.grad_x(x, lam), L.H(x)
        while True:
            xh = L.proj_x(x - tau * gx)
            lh = L.proj_lam(lam + tau * hv)
            gxh, hvh = L.grad_x(xh, lh), L.H(xh)
            diff = math.sqrt(np.sum((gxh - gx) ** 2) + np.sum((hvh - hv) ** 2))
            dist = math.sqrt(np.sum((xh - x) ** 2) + np.sum((lh - lam) ** 2))
            if tau * diff <= 0.7 * dist or dist == 0.0:
                break
            tau *= 0.5
        x = L.proj_x(x - tau * gxh)
        lam = L.proj_lam(lam + tau * hvh)
        it += 1
        if it % 10 == 0 or tau * diff < 0.3 * dist:
            tau = min(tau * 1.5, 10.0)
        res = L.residual(x, lam)
        best = min(best, res)
    report = verify_saddle(inst, x, lam, probes=probes, tol=max(tol, 1e-12), seed=seed)
    return SaddleCertificate(
        x_star=x,
        lam_star=lam,
        f_star=float(L.f(x)),
        kkt_residual=res,
        saddle_gap=report.gap,
        method=method,
        iterations=it,
    )


def _sample_dual(rng, count, p, q, radius, center, spread):
    """Uniform samples from Q_I times a box around ``center`` on the equality block."""
    out = np.empty((count, p + q))
    if p:
        direction = np.abs(rng.standard_normal((count, p)))
        direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
        r = radius if math.isfinite(radius) else spread
        out[:, :p] = direction * (r * rng.uniform(size=(count, 1)) ** (1.0 / p))
    if q:
        out[:, p:] = center[p:] + rng.uniform(-spread, spread, size=(count, q))
    return out


def verify_saddle(inst, x, lam, probes=1000, tol=1e-6, seed=0):
    """Probe the two saddle inequalities at random points of X x Q.

    Primal probes are uniform on the box. Inequality multipliers are uniform
    on the truncated orthant ball; equality multipliers, which range over
    all of R^q, are drawn from a cube of half-width ``max(1, R, 10*||lam||)``
    around ``lam``. ``probes=0`` returns a vacuous pass.
    """
    L = CentralLagrangian(inst)
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if probes <= 0:
        return SaddleReport(0.0, 0.0, 0, tol)
    rng = np.random.default_rng(seed)
    xs = rng.uniform(L.lo, L.hi, size=(probes, inst.n))
    spread = max(1.0, 10.0 * float(np.linalg.norm(lam)))
    if math.isfinite(L.radius):
        spread = max(spread, L.radius)
    lams = _sample_dual(rng, probes, inst.p, inst.q, L.radius, lam, spread)
    center = float(L.value(x, lam))
    left = float(np.max(lams @ L.H(x) - center))
    right = float(np.max(center - L.value(xs, lam)))
    return SaddleReport(max(left, 0.0), max(right, 0.0), probes, tol)

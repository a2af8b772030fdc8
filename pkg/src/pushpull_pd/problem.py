"""
Coupled-constraint convex problem model.

Each of the ``m`` agents holds a private objective

    f_i(x) = a_i^T x + b_i + c_i * log(1 + exp(d_i^T x))

and a private constraint map ``h_i : R^n -> R^(p+q)`` whose first ``p``
rows are convex inequalities and whose last ``q`` rows are affine
equalities. The agents jointly solve

    min_{x in X} sum_i f_i(x)   s.t.   sum_i h_i(x) in R^p_- x {0}^q

over a box ``X``.

Constraint row ordering is fixed everywhere in the package:

    row 0            quadratic row  quad_weight * ||x||^2 + quad_offset
    rows 1 .. p-1    ``extra_ineq`` rows, in list order
    rows p .. p+q-1  affine rows    affine_rows @ x + affine_offsets
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, GenerationFailure, SlaterViolation

__all__ = [
    "LocalObjective",
    "ConvexRow",
    "LocalConstraint",
    "BoxSet",
    "ProblemInstance",
    "softplus",
    "sigmoid",
    "eval_objective",
    "grad_objective",
    "eval_constraints",
    "jac_constraints",
    "primal_grad",
    "slater_values",
    "check_slater",
    "compute_dual_radius",
    "canonical_instance",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
]


def softplus(z):
    """log(1 + exp(z)) without overflow."""
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid(z):
    """Logistic function, overflow-safe for either sign of ``z``."""
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass(frozen=True)
class LocalObjective:
    """Linear-plus-softplus objective of one agent."""

    a: np.ndarray
    b: float
    c: float
    d: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if a.shape != d.shape:
            raise DimensionMismatch(f"a has shape {a.shape}, d has shape {d.shape}")
        if not self.c >= 0:
            raise ValueError(f"logistic weight c must be >= 0, got {self.c}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self):
        return self.a.shape[0]


@dataclass(frozen=True)
class ConvexRow:
    """A smooth convex scalar inequality row given by callables.

    ``value(x)`` returns a float and ``grad(x)`` an array of shape ``(n,)``.
    Convexity is the caller's responsibility.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LocalConstraint:
    """Constraint map ``h_i`` of one agent.

    Parameters
    ----------
    quad_weight, quad_offset : float
        Coefficients of the quadratic inequality row.
    affine_rows : ndarray, shape (q, n)
        Equality row coefficients.
    affine_offsets : ndarray, shape (q,)
    extra_ineq : tuple of ConvexRow, optional
        Additional inequality rows placed after the quadratic row.
    """

    quad_weight: float
    quad_offset: float
    affine_rows: np.ndarray
    affine_offsets: np.ndarray
    extra_ineq: tuple = field(default_factory=tuple)

    def __post_init__(self):
        rows = np.asarray(self.affine_rows, dtype=float)
        offs = np.asarray(self.affine_offsets, dtype=float).reshape(-1)
        if rows.ndim == 1:
            rows = rows.reshape(offs.shape[0], -1)
        if rows.ndim != 2 or rows.shape[0] != offs.shape[0]:
            raise DimensionMismatch(
                f"affine_rows shape {rows.shape} incompatible with offsets {offs.shape}"
            )
        if not self.quad_weight >= 0:
            raise ValueError(f"quad_weight must be >= 0, got {self.quad_weight}")
        object.__setattr__(self, "affine_rows", rows)
        object.__setattr__(self, "affine_offsets", offs)
        object.__setattr__(self, "quad_weight", float(self.quad_weight))
        object.__setattr__(self, "quad_offset", float(self.quad_offset))
        object.__setattr__(self, "extra_ineq", tuple(self.extra_ineq))

    @property
    def p(self):
        return 1 + len(self.extra_ineq)

    @property
    def q(self):
        return self.affine_rows.shape[0]


@dataclass(frozen=True)
class BoxSet:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch(f"lo {lo.shape} vs hi {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite (X is compact)")
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self):
        return self.lo.shape[0]

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def interior_contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lo) and np.all(x < self.hi))


@dataclass(frozen=True)
class ProblemInstance:
    """The full m-agent problem, with its Slater point and dual radius."""

    objectives: tuple
    constraints: tuple
    feasible_set: BoxSet
    slater_point: np.ndarray
    dual_radius: float
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(
            self, "slater_point", np.asarray(self.slater_point, dtype=float).reshape(-1)
        )
        object.__setattr__(self, "dual_radius", float(self.dual_radius))
        if len(self.objectives) != len(self.constraints) or not self.objectives:
            raise DimensionMismatch("need one objective and one constraint per agent")
        n = self.feasible_set.n
        for obj in self.objectives:
            if obj.n != n:
                raise DimensionMismatch(f"objective dimension {obj.n} != box dimension {n}")
        p, q = self.constraints[0].p, self.constraints[0].q
        for con in self.constraints:
            if con.p != p or con.q != q:
                raise DimensionMismatch("all agents must share constraint dimensions")
            if con.affine_rows.shape[1] != n and q > 0:
                raise DimensionMismatch("affine rows must have n columns")
        if self.slater_point.shape != (n,):
            raise DimensionMismatch("slater_point must live in R^n")
        if self.dual_radius < 0:
            raise ValueError("dual_radius must be >= 0")

    @property
    def m(self):
        return len(self.objectives)

    @property
    def n(self):
        return self.feasible_set.n

    @property
    def p(self):
        return self.constraints[0].p

    @property
    def q(self):
        return self.constraints[0].q

    @property
    def r(self):
        """Multiplier dimension p + q."""
        return self.p + self.q

    def objective_value(self, x):
        """Global objective sum_i f_i(x)."""
        return float(sum(eval_objective(o, x) for o in self.objectives))

    def constraint_sum(self, x):
        """sum_i h_i(x), shape (p+q,)."""
        return np.sum([eval_constraints(c, x) for c in self.constraints], axis=0)

    def objective_arrays(self):
        """Stacked objective coefficients ``(A, b, c, D)`` with one row per agent."""
        A = np.array([o.a for o in self.objectives])
        b = np.array([o.b for o in self.objectives])
        c = np.array([o.c for o in self.objectives])
        D = np.array([o.d for o in self.objectives])
        return A, b, c, D

    def constraint_arrays(self):
        """Stacked constraint coefficients ``(alpha, beta, G, delta)``.

        ``G`` has shape ``(m, q, n)`` and ``delta`` shape ``(m, q)``.
        """
        alpha = np.array([c.quad_weight for c in self.constraints])
        beta = np.array([c.quad_offset for c in self.constraints])
        G = np.array([c.affine_rows for c in self.constraints]).reshape(self.m, self.q, self.n)
        delta = np.array([c.affine_offsets for c in self.constraints]).reshape(self.m, self.q)
        return alpha, beta, G, delta

    def with_dual_radius(self, radius):
        return ProblemInstance(
            self.objectives, self.constraints, self.feasible_set,
            self.slater_point, radius, self.seed,
        )


def eval_objective(obj: LocalObjective, x) -> float:
    x = np.asarray(x, dtype=float)
    val = obj.a @ x + obj.b
    if obj.c != 0.0:
        val = val + obj.c * softplus(obj.d @ x)
    return float(val)


def grad_objective(obj: LocalObjective, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if obj.c == 0.0:
        return obj.a.copy()
    return obj.a + (obj.c * sigmoid(obj.d @ x)) * obj.d


def eval_constraints(con: LocalConstraint, x) -> np.ndarray:
    """Evaluate ``h_i(x)``; see the module docstring for row order."""
    x = np.asarray(x, dtype=float)
    out = np.empty(con.p + con.q)
    out[0] = con.quad_weight * (x @ x) + con.quad_offset
    for j, row in enumerate(con.extra_ineq, start=1):
        out[j] = row.value(x)
    if con.q:
        out[con.p:] = con.affine_rows @ x + con.affine_offsets
    return out


def jac_constraints(con: LocalConstraint, x) -> np.ndarray:
    """Transposed Jacobian of ``h_i``: column ``j`` is the gradient of row ``j``.

    Returns an array of shape ``(n, p+q)``.
    """
    x = np.asarray(x, dtype=float)
    J = np.empty((x.shape[0], con.p + con.q))
    J[:, 0] = (2.0 * con.quad_weight) * x
    for j, row in enumerate(con.extra_ineq, start=1):
        J[:, j] = row.grad(x)
    if con.q:
        J[:, con.p:] = con.affine_rows.T
    return J


def primal_grad(obj: LocalObjective, con: LocalConstraint, x, lam) -> np.ndarray:
    """Gradient in x of the local Lagrangian f_i(x) + lam^T h_i(x)."""
    return grad_objective(obj, x) + jac_constraints(con, x) @ np.asarray(lam, dtype=float)


def slater_values(inst: ProblemInstance, point=None):
    """Return ``sum_i h_i(point)`` split into inequality and equality parts."""
    point = inst.slater_point if point is None else np.asarray(point, dtype=float)
    total = inst.constraint_sum(point)
    return total[: inst.p], total[inst.p:]


def check_slater(inst: ProblemInstance, point=None, ineq_margin=1e-6, eq_tol=1e-12):
    """True when ``point`` is strictly feasible: interior of X, inequality
    rows below ``-ineq_margin`` and equality rows within ``eq_tol`` of zero."""
    point = inst.slater_point if point is None else np.asarray(point, dtype=float)
    ineq, eq = slater_values(inst, point)
    return (
        inst.feasible_set.interior_contains(point)
        and bool(np.all(ineq < -ineq_margin))
        and bool(np.all(np.abs(eq) <= eq_tol))
    )


def compute_dual_radius(inst: ProblemInstance, lam_bar=None, min_oracle=None) -> float:
    """Upper bound on the norm of optimal inequality multipliers.

    Returns ``(f(xbar) - q(lam_bar)) / gamma(xbar)`` with
    ``gamma(xbar) = min_j -sum_i h_i^j(xbar)`` over inequality rows and
    ``q(lam) = min_{x in X} L(x, lam)``.

    Parameters
    ----------
    inst : ProblemInstance
    lam_bar : array_like, optional
        Point of the polar cone R^p_+ x R^q. Defaults to zero.
    min_oracle : callable, optional
        ``min_oracle(inst, lam) -> (x, q_value)``. Defaults to
        :func:`pushpull_pd.oracle.min_over_X`.

    Raises
    ------
    SlaterViolation
        If ``gamma(xbar) <= 0``.
    """
    lam_bar = np.zeros(inst.r) if lam_bar is None else np.asarray(lam_bar, dtype=float)
    if np.any(lam_bar[: inst.p] < 0):
        raise ValueError("lam_bar must have nonnegative inequality part")
    ineq, _ = slater_values(inst)
    gamma = float(np.min(-ineq))
    if not gamma > 0:
        raise SlaterViolation(f"gamma(xbar) = {gamma} <= 0; Slater point is not strictly feasible")
    if min_oracle is None:
        from .oracle import min_over_X

        def min_oracle(inst_, lam_):
            return min_over_X(inst_, lam_, tol=1e-10)

    _, q_val = min_oracle(inst, lam_bar)
    f_bar = inst.objective_value(inst.slater_point)
    # q(lam_bar) <= L(xbar, lam_bar) <= f(xbar); clip solver noise at zero
    return max((f_bar - q_val) / gamma, 0.0)


# --------------------------------------------------------------------------
# canonical two-dimensional instance family

_CANONICAL_M = 6
_CANONICAL_N = 2
_CANONICAL_BOX = 3.0


def canonical_instance(seed: int, m: int = _CANONICAL_M, compute_radius: bool = True) -> ProblemInstance:
    """Seeded member of the 6-agent, 2-D test family.

    Coefficients are drawn from ``np.random.default_rng(seed)`` with
    ``a, d, gamma in [-1, 1]^2``, ``b in [-1, 1]``, ``c in [0.5, 2]`` and
    ``alpha in [0.1, 1]``. The offsets are then shifted so that x = 0 is a
    Slater point: the ``delta`` are re-centred to sum to zero and the
    ``beta`` are shifted so that the feasible disc has squared radius drawn
    from ``[0.5, 2]``.

    Raises
    ------
    GenerationFailure
        If no candidate passes the validity checks within 1000 draws.
    """
    rng = np.random.default_rng(seed)
    n = _CANONICAL_N
    box = BoxSet(np.full(n, -_CANONICAL_BOX), np.full(n, _CANONICAL_BOX))
    xbar = np.zeros(n)
    for _ in range(1000):
        a = rng.uniform(-1.0, 1.0, (m, n))
        b = rng.uniform(-1.0, 1.0, m)
        c = rng.uniform(0.5, 2.0, m)
        d = rng.uniform(-1.0, 1.0, (m, n))
        alpha = rng.uniform(0.1, 1.0, m)
        beta = rng.uniform(-1.0, 1.0, m)
        gam = rng.uniform(-1.0, 1.0, (m, n))
        delta = rng.uniform(-1.0, 1.0, m)
        disc_r2 = rng.uniform(0.5, 2.0)

        # sum_i (alpha_i ||xbar||^2 + beta_i) = -disc_r2 * sum(alpha)
        target = -disc_r2 * alpha.sum()
        beta = beta + (target - (alpha.sum() * (xbar @ xbar) + beta.sum())) / m
        delta = delta - delta.mean()
        delta[-1] = -(delta[:-1].sum() + (gam @ xbar).sum())

        if np.linalg.norm(gam.sum(axis=0)) < 0.2:
            continue  # near-degenerate coupled equality
        objectives = [LocalObjective(a[i], b[i], c[i], d[i]) for i in range(m)]
        constraints = [
            LocalConstraint(alpha[i], beta[i], gam[i].reshape(1, n), [delta[i]])
            for i in range(m)
        ]
        inst = ProblemInstance(objectives, constraints, box, xbar, 0.0, seed)
        if not check_slater(inst, ineq_margin=1e-3):
            continue
        if compute_radius:
            inst = inst.with_dual_radius(compute_dual_radius(inst))
        return inst
    raise GenerationFailure(f"no valid instance after 1000 draws (seed={seed})")


# --------------------------------------------------------------------------
# JSON round trip

_FORMAT = "pushpull-instance/1"


def instance_to_dict(inst: ProblemInstance) -> dict:
    if any(con.extra_ineq for con in inst.constraints):
        raise ValueError("instances with callable inequality rows cannot be serialized")
    A, b, c, D = inst.objective_arrays()
    alpha, beta, G, delta = inst.constraint_arrays()
    return {
        "format": _FORMAT,
        "m": inst.m,
        "n": inst.n,
        "p": inst.p,
        "q": inst.q,
        "seed": inst.seed,
        "objectives": {"a": A.tolist(), "b": b.tolist(), "c": c.tolist(), "d": D.tolist()},
        "constraints": {
            "quad_weight": alpha.tolist(),
            "quad_offset": beta.tolist(),
            "affine_rows": G.tolist(),
            "affine_offsets": delta.tolist(),
        },
        "box": {"lo": inst.feasible_set.lo.tolist(), "hi": inst.feasible_set.hi.tolist()},
        "slater_point": inst.slater_point.tolist(),
        "dual_radius": inst.dual_radius,
    }


def instance_from_dict(doc: dict) -> ProblemInstance:
    if doc.get("format") != _FORMAT:
        raise ValueError(f"unsupported instance format {doc.get('format')!r}")
    m, n, q = doc["m"], doc["n"], doc["q"]
    o, k = doc["objectives"], doc["constraints"]
    objectives = [LocalObjective(o["a"][i], o["b"][i], o["c"][i], o["d"][i]) for i in range(m)]
    constraints = [
        LocalConstraint(
            k["quad_weight"][i],
            k["quad_offset"][i],
            np.asarray(k["affine_rows"][i], dtype=float).reshape(q, n),
            k["affine_offsets"][i],
        )
        for i in range(m)
    ]
    inst = ProblemInstance(
        objectives,
        constraints,
        BoxSet(doc["box"]["lo"], doc["box"]["hi"]),
        doc["slater_point"],
        doc["dual_radius"],
        doc.get("seed"),
    )
    if inst.p != doc["p"]:
        raise DimensionMismatch(f"declared p={doc['p']} but data gives p={inst.p}")
    return inst


def save_instance(inst: ProblemInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def load_instance(path) -> ProblemInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def instance_hash(inst: ProblemInstance) -> str:
    """Stable content hash of a serializable instance."""
    import hashlib

    blob = json.dumps(instance_to_dict(inst), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]

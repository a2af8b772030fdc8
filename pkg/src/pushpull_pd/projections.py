"""Euclidean projections onto the primal box and the truncated dual set."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import BoxSet

_RESCALE_SLACK = 1e-14

__all__ = ["DualSet", "project_box", "project_dual", "in_dual_set"]


@dataclass(frozen=True)
class DualSet:
    """{l in R^p_+ : ||l|| <= radius} x R^q.

    ``radius = inf`` drops the ball and leaves the polar cone R^p_+ x R^q.
    """

    p: int
    q: int
    radius: float

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("dimensions must be nonnegative")
        if not self.radius >= 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def for_instance(cls, inst):
        return cls(inst.p, inst.q, inst.dual_radius)


def project_box(x, box: BoxSet) -> np.ndarray:
    """Clamp ``x`` componentwise to ``[box.lo, box.hi]``.

    Works row-wise on a stack of points with shape ``(..., n)``.
    """
    return np.clip(np.asarray(x, dtype=float), box.lo, box.hi)


def project_dual(lam, ds: DualSet) -> np.ndarray:
    """Project a multiplier vector onto ``ds``.

    The equality block passes through. The inequality block is clipped at
    zero and then pulled radially onto the ball if it lies outside; the
    composition is exact because the ball is centred at the origin and
    the orthant is a cone.
    """
    lam = np.array(lam, dtype=float)
    ineq = np.maximum(lam[: ds.p], 0.0)
    if math.isfinite(ds.radius):
        norm = math.sqrt(float(ineq @ ineq))
        # slack keeps P(P(v)) == P(v) bitwise after a rounding-inexact rescale
        if norm > ds.radius * (1.0 + _RESCALE_SLACK):
            ineq = ineq * (ds.radius / norm)
    lam[: ds.p] = ineq
    return lam


def in_dual_set(lam, ds: DualSet, tol=1e-12) -> bool:
    lam = np.asarray(lam, dtype=float)
    ineq = lam[: ds.p]
    return bool(np.all(ineq >= -tol) and np.linalg.norm(ineq) <= ds.radius + tol)

"""Linear programming layer shared by all face tests and region checks.

The backend is scipy's HiGHS solver; the contract here (statuses, the
optimality tolerance, the face threshold) is what everything downstream
relies on, not solver specifics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .nn import AffineMap, HyperRectangle

__all__ = [
    "TAU_FEAS",
    "TAU_OPT",
    "TAU_FACE",
    "TAU_SIGN",
    "Relation",
    "Constraint",
    "LinearProgram",
    "LpStatus",
    "LpResult",
    "solve",
    "box_bounds",
]

# Feasibility tolerance for reported optima.
TAU_FEAS = 1e-8
# Reported cost is within this of the true optimum.
TAU_OPT = 1e-7
# Slack LPs return ~0 on lower-dimensional faces; costs above this
# threshold certify a full-dimensional face.
TAU_FACE = 1e-7
# Points closer than this to a hyperplane are treated as degenerate seeds.
TAU_SIGN = 1e-9


class Relation(str, Enum):
    LE = "<=0"
    EQ = "=0"
    GE = ">=0"


@dataclass(frozen=True)
class Constraint:
    f: AffineMap  # single-output
    rel: Relation = Relation.LE

    def __post_init__(self):
        if self.f.out_dim != 1:
            raise ValueError("constraint functional must be scalar")


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective @ x subject to the constraints."""

    objective: np.ndarray
    constraints: tuple

    def __post_init__(self):
        obj = np.asarray(self.objective, dtype=float)
        if obj.ndim != 1:
            raise ValueError("objective must be a vector")
        obj.setflags(write=False)
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = obj.shape[0]
        for c in self.constraints:
            if c.f.in_dim != n:
                raise ValueError("constraint dimension mismatch with objective")


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    x_opt: Optional[np.ndarray] = None
    cost: Optional[float] = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class LpFailure(RuntimeError):
    """Raised by callers that cannot proceed past a NUMERICAL_FAILURE."""


def solve(lp: LinearProgram) -> LpResult:
    """Solve a small dense LP; variables are free unless constrained."""
    n = lp.objective.shape[0]
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for c in lp.constraints:
        w = c.f.W[0]
        off = c.f.b[0]
        if c.rel is Relation.LE:  # w x + off <= 0
            A_ub.append(w)
            b_ub.append(-off)
        elif c.rel is Relation.GE:  # w x + off >= 0
            A_ub.append(-w)
            b_ub.append(off)
        else:
            A_eq.append(w)
            b_eq.append(-off)
    kwargs = dict(
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=[(None, None)] * n,
    )
    # "highs" picks a method heuristically; on rare numerical trouble retry
    # with the dual simplex and interior-point variants before giving up.
    for method in ("highs", "highs-ds", "highs-ipm"):
        res = linprog(-lp.objective, method=method, **kwargs)
        if res.status in (0, 2, 3):
            break
    if res.status == 0:
        return LpResult(LpStatus.OPTIMAL, x_opt=np.asarray(res.x), cost=-float(res.fun))
    if res.status == 2:
        return LpResult(LpStatus.INFEASIBLE)
    if res.status == 3:
        return LpResult(LpStatus.UNBOUNDED)
    return LpResult(LpStatus.NUMERICAL_FAILURE)


def box_bounds(f: AffineMap, box: HyperRectangle):
    """Exact coordinate-wise interval image of an affine map over a box."""
    if f.in_dim != box.dim:
        raise ValueError(f"map expects dim {f.in_dim}, box has dim {box.dim}")
    pos = np.maximum(f.W, 0.0)
    neg = np.minimum(f.W, 0.0)
    hi = f.b + pos @ box.hi + neg @ box.lo
    lo = f.b + pos @ box.lo + neg @ box.hi
    return lo, hi

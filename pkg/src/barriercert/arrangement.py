"""Hyperplane arrangement core: regions as flip sets, incremental enumeration.

A region is identified by the set of hyperplane indices on whose positive
side it lies (its flip set).  Enumeration proceeds level-wise from a base
region, discovering neighbors through full-dimensional shared faces; each
face test is one slack LP.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import lp
from .lp import TAU_FACE, TAU_SIGN, Constraint, LinearProgram, LpStatus, Relation
from .nn import AffineMap

__all__ = [
    "Arrangement",
    "Region",
    "RegionRecord",
    "RegionTable",
    "DegenerateSeed",
    "LpFailure",
    "rebase",
    "find_interior_region",
    "find_successors",
    "enumerate_regions",
    "interior_point",
]

# Slack variables in face LPs are capped at 1: the tests only care whether
# the optimum exceeds TAU_FACE, and the cap keeps every LP bounded.
SLACK_CAP = 1.0


class DegenerateSeed(ValueError):
    """Seed point lies (numerically) on one of the hyperplanes."""


class LpFailure(RuntimeError):
    """An LP backend failure, tagged with the offending hyperplane index."""

    def __init__(self, message: str, hyperplane: Optional[int] = None):
        super().__init__(message)
        self.hyperplane = hyperplane


@dataclass(frozen=True)
class Region:
    """Full-dimensional cell, keyed by its flipped-hyperplane indices."""

    flips: frozenset

    def __init__(self, flips: Iterable[int]):
        object.__setattr__(self, "flips", frozenset(int(i) for i in flips))

    def flip(self, i: int) -> "Region":
        return Region(self.flips ^ {i})

    def key(self) -> tuple:
        return tuple(sorted(self.flips))


@dataclass
class RegionRecord:
    region: Region
    discovered_by: Optional[int] = None  # hyperplane flipped to reach it
    via_backward: bool = False
    witness: Optional[np.ndarray] = None


class RegionTable:
    """Insert-if-absent table keyed by canonical flip sets."""

    def __init__(self):
        self._records: dict = {}

    def __contains__(self, region: Region) -> bool:
        return region.flips in self._records

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records.values())

    def get(self, region: Region) -> Optional[RegionRecord]:
        return self._records.get(region.flips)

    def insert_if_absent(self, record: RegionRecord) -> bool:
        key = record.region.flips
        if key in self._records:
            return False
        self._records[key] = record
        return True

    def regions(self) -> list:
        return sorted(
            (rec.region for rec in self._records.values()), key=Region.key
        )


@dataclass(frozen=True)
class Arrangement:
    """Ordered list of scalar functionals sharing one input dimension."""

    functionals: tuple

    def __post_init__(self):
        fns = tuple(self.functionals)
        if not fns:
            raise ValueError("arrangement needs at least one hyperplane")
        dims = {f.in_dim for f in fns}
        if len(dims) != 1:
            raise ValueError("all functionals must share one input dimension")
        if any(f.out_dim != 1 for f in fns):
            raise ValueError("functionals must be scalar")
        object.__setattr__(self, "functionals", fns)

    @property
    def n(self) -> int:
        return len(self.functionals)

    @property
    def dim(self) -> int:
        return self.functionals[0].in_dim

    def signs(self, region: Region) -> np.ndarray:
        s = -np.ones(self.n)
        for i in region.flips:
            s[i] = 1.0
        return s

    def stacked(self):
        W = np.vstack([f.W for f in self.functionals])
        b = np.array([f.b[0] for f in self.functionals])
        return W, b


def rebase(arr: Arrangement, region: Region) -> Arrangement:
    """Negate the flipped functionals so the given region becomes all-negative."""
    fns = [
        f.negate() if i in region.flips else f
        for i, f in enumerate(arr.functionals)
    ]
    return Arrangement(tuple(fns))


def find_interior_region(arr: Arrangement, x0) -> Region:
    """Region containing a point that sits on no hyperplane."""
    x0 = np.asarray(x0, dtype=float)
    W, b = arr.stacked()
    vals = W @ x0 + b
    near = np.abs(vals) <= TAU_SIGN
    if np.any(near):
        idx = int(np.flatnonzero(near)[0])
        raise DegenerateSeed(f"seed point lies on hyperplane {idx}")
    return Region(np.flatnonzero(vals > 0.0))


def _slack_bounds(n: int):
    """0 <= x_s <= SLACK_CAP over variables (x_1..x_n, x_s)."""
    e = np.zeros((1, n + 1))
    e[0, n] = 1.0
    return (
        Constraint(AffineMap(e, [0.0]), Relation.GE),
        Constraint(AffineMap(e, [-SLACK_CAP]), Relation.LE),
    )


def _cell_constraints(arr: Arrangement, region: Region, skip: Optional[int] = None):
    """Strict-membership constraints s_j * l_j(x) >= x_s for all j != skip."""
    signs = arr.signs(region)
    out = []
    for j, f in enumerate(arr.functionals):
        if j == skip:
            continue
        W = np.zeros((1, arr.dim + 1))
        W[0, : arr.dim] = -signs[j] * f.W[0]
        W[0, arr.dim] = 1.0
        out.append(Constraint(AffineMap(W, [-signs[j] * f.b[0]]), Relation.LE))
    return out


def _lift(f: AffineMap, dim: int, slack: float) -> Constraint:
    """f(x) + slack * x_s <= 0 over variables (x, x_s)."""
    W = np.zeros((1, dim + 1))
    W[0, :dim] = f.W[0]
    W[0, dim] = slack
    return Constraint(AffineMap(W, [f.b[0]]), Relation.LE)


def _max_slack(arr: Arrangement, constraints) -> lp.LpResult:
    obj = np.zeros(arr.dim + 1)
    obj[arr.dim] = 1.0
    return lp.solve(LinearProgram(obj, tuple(constraints) + _slack_bounds(arr.dim)))


def face_lp(
    arr: Arrangement,
    region: Region,
    i: int,
    add_constr: Sequence[AffineMap] = (),
) -> lp.LpResult:
    """Slack LP deciding whether hyperplane i carries a full-dimensional face.

    Constraints pin x to hyperplane i, keep it strictly inside the region's
    remaining half-spaces (via the shared slack), and push it strictly into
    the negative side of every extra functional.
    """
    constraints = _cell_constraints(arr, region, skip=i)
    f = arr.functionals[i]
    W = np.zeros((1, arr.dim + 1))
    W[0, : arr.dim] = f.W[0]
    constraints.append(Constraint(AffineMap(W, [f.b[0]]), Relation.EQ))
    for g in add_constr:
        constraints.append(_lift(g, arr.dim, 1.0))
    return _max_slack(arr, constraints)


def cell_interior_lp(
    arr: Arrangement, region: Region, add_constr: Sequence[AffineMap] = ()
) -> lp.LpResult:
    """Slack LP for a strictly interior point of the cell (plus extras)."""
    constraints = _cell_constraints(arr, region)
    for g in add_constr:
        constraints.append(_lift(g, arr.dim, 1.0))
    return _max_slack(arr, constraints)


def interior_point(
    arr: Arrangement, region: Region, add_constr: Sequence[AffineMap] = ()
) -> Optional[np.ndarray]:
    res = cell_interior_lp(arr, region, add_constr)
    if res.optimal and res.cost is not None and res.cost > TAU_FACE:
        return res.x_opt[: arr.dim]
    return None


def find_successors(
    arr: Arrangement,
    region: Region,
    table: RegionTable,
    test_hypers: Optional[Iterable[int]] = None,
    add_constr: Sequence[AffineMap] = (),
    via_backward: bool = False,
) -> list:
    """New regions reached by flipping one tested hyperplane across a
    full-dimensional face; defaults to testing the unflipped hyperplanes."""
    if test_hypers is None:
        test_hypers = [i for i in range(arr.n) if i not in region.flips]
    new = []
    for i in sorted(test_hypers):
        res = face_lp(arr, region, i, add_constr)
        if res.status is LpStatus.NUMERICAL_FAILURE:
            raise LpFailure(f"face LP failed on hyperplane {i}", hyperplane=i)
        if res.status is LpStatus.INFEASIBLE:
            continue
        cost = res.cost if res.optimal else SLACK_CAP  # unbounded: any slack works
        if cost is not None and cost > TAU_FACE:
            succ = region.flip(i)
            if table.insert_if_absent(
                RegionRecord(succ, discovered_by=i, via_backward=via_backward)
            ):
                new.append(succ)
    return new


def enumerate_regions(
    arr: Arrangement,
    seed: Region,
    confinement: Sequence[AffineMap] = (),
) -> RegionTable:
    """All full-dimensional regions reachable from the seed, level-wise.

    For plain arrangements this is every full-dimensional region.  Extra
    ``confinement`` functionals restrict enumeration to their common strict
    negative side; they are never flippable.

    Internally the arrangement is rebased so the seed is the all-negative
    region; the returned table is in the original orientation.
    """
    arr_r = rebase(arr, seed)
    base = Region(())
    inner = RegionTable()
    inner.insert_if_absent(RegionRecord(base))
    level = [base]
    while level:
        nxt = []
        for region in sorted(level, key=Region.key):
            nxt.extend(
                find_successors(arr_r, region, inner, add_constr=confinement)
            )
        level = nxt
    # convert back to the original orientation
    table = RegionTable()
    for rec in inner:
        orig = Region(rec.region.flips ^ seed.flips)
        table.insert_if_absent(
            RegionRecord(orig, discovered_by=rec.discovered_by, witness=rec.witness)
        )
    return table

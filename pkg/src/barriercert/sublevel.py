"""Enumeration of the regions meeting one connected component of the
zero-sub-level set of a shallow network.

The traversal is the arrangement enumeration restricted by the network's
per-region zero-crossing constraint: forward passes flip unflipped
hyperplanes through faces that meet the open sub-level set, and a backward
pass un-flips hyperplanes of regions whose cell touches its own zero
crossing.  The backward pass is what recovers regions whose only monotone
paths are masked (the boundary of the sub-level set "folds back" across an
already flipped hyperplane).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .arrangement import (
    Arrangement,
    DegenerateSeed,
    Region,
    RegionRecord,
    RegionTable,
    cell_interior_lp,
    face_lp,
    find_interior_region,
    find_successors,
    interior_point,
    rebase,
)
from .lp import TAU_FACE, Constraint, LinearProgram, LpStatus, Relation, solve
from .nn import AffineMap, ShallowNN, activation_hyperplanes, local_affine

__all__ = [
    "SeedNotNegative",
    "SubLevelComponent",
    "zsub_adjacent",
    "find_successors_fwd_bkwd",
    "enumerate_sub_level_component",
    "detect_fold_back_faces",
    "barrier_arrangement",
]


class SeedNotNegative(ValueError):
    """The network is not strictly negative at the requested seed point."""


def barrier_arrangement(net: ShallowNN) -> Arrangement:
    return Arrangement(tuple(activation_hyperplanes(net)))


@dataclass
class SubLevelComponent:
    """Regions meeting the connected component of {net < 0} around the seed."""

    net: ShallowNN
    arrangement: Arrangement
    seed_region: Region
    seed_point: np.ndarray
    table: RegionTable
    per_region_affine: dict
    confinement: tuple = ()
    boundary_faces: Optional[list] = None

    def regions(self) -> list:
        return self.table.regions()

    def affine_for(self, region: Region) -> AffineMap:
        try:
            return self.per_region_affine[region.flips]
        except KeyError:
            return local_affine(self.net, region.flips)

    def __contains__(self, region: Region) -> bool:
        return region in self.table


def zsub_adjacent(
    arr: Arrangement, region: Region, hyper_index: int, T_R: AffineMap
) -> bool:
    """Does hyperplane ``hyper_index`` carry a full-dimensional face of the
    region that meets the open sub-level set of the region's affine map?"""
    res = face_lp(arr, region, hyper_index, add_constr=(T_R,))
    if res.status is LpStatus.INFEASIBLE:
        return False
    return res.cost is not None and res.cost > TAU_FACE


def find_successors_fwd_bkwd(
    arr: Arrangement,
    region: Region,
    table: RegionTable,
    T_R: AffineMap,
    confinement: Sequence[AffineMap] = (),
    skip: Optional[int] = None,
) -> list:
    """One forward pass plus (when the cell touches its zero crossing) one
    backward pass; returns the newly inserted regions."""
    extra = (T_R,) + tuple(confinement)
    fwd_test = [i for i in range(arr.n) if i not in region.flips and i != skip]
    new = find_successors(arr, region, table, test_hypers=fwd_test, add_constr=extra)
    # backward gate: any strictly interior sub-level point in this cell?
    gate = cell_interior_lp(arr, region, add_constr=extra)
    if gate.optimal and gate.cost is not None and gate.cost > TAU_FACE:
        bwd_test = [i for i in sorted(region.flips) if i != skip]
        new.extend(
            find_successors(
                arr,
                region,
                table,
                test_hypers=bwd_test,
                add_constr=extra,
                via_backward=True,
            )
        )
    return new


def enumerate_sub_level_component(
    n_bf: ShallowNN,
    x0,
    confinement: Sequence[AffineMap] = (),
    use_discovery_marks: bool = True,
    classify_boundary: bool = False,
) -> SubLevelComponent:
    """All regions meeting the connected component of the open sub-level set
    containing ``x0``, optionally confined to the strict negative side of
    extra functionals (whose hyperplanes are never flippable).
    """
    x0 = np.asarray(x0, dtype=float)
    if n_bf(x0) >= -TAU_FACE:
        raise SeedNotNegative(f"net(x0) = {n_bf(x0):.3g} is not strictly negative")
    for g in confinement:
        if g.scalar(x0) >= 0.0:
            raise ValueError("seed point violates a confinement constraint")
    arr = barrier_arrangement(n_bf)
    seed = find_interior_region(arr, x0)

    # work in the rebased arrangement where the seed region is all-negative
    arr_r = rebase(arr, seed)
    base = Region(())

    def orig_flips(region: Region) -> frozenset:
        return region.flips ^ seed.flips

    affines: dict = {}

    def affine_of(region: Region) -> AffineMap:
        flips = orig_flips(region)
        if flips not in affines:
            affines[flips] = local_affine(n_bf, flips)
        return affines[flips]

    inner = RegionTable()
    inner.insert_if_absent(RegionRecord(base))
    frontier = [base]
    while frontier:
        nxt = []
        for region in sorted(frontier, key=Region.key):
            rec = inner.get(region)
            skip = rec.discovered_by if (use_discovery_marks and rec) else None
            nxt.extend(
                find_successors_fwd_bkwd(
                    arr_r,
                    region,
                    inner,
                    affine_of(region),
                    confinement=confinement,
                    skip=skip,
                )
            )
        frontier = nxt

    # convert to the original orientation and attach witnesses
    table = RegionTable()
    per_region_affine = {}
    for rec in inner:
        orig = Region(orig_flips(rec.region))
        witness = interior_point(
            arr_r,
            rec.region,
            add_constr=(affine_of(rec.region),) + tuple(confinement),
        )
        table.insert_if_absent(
            RegionRecord(
                orig,
                discovered_by=rec.discovered_by,
                via_backward=rec.via_backward,
                witness=witness,
            )
        )
        per_region_affine[orig.flips] = affine_of(rec.region)

    component = SubLevelComponent(
        net=n_bf,
        arrangement=arr,
        seed_region=seed,
        seed_point=x0,
        table=table,
        per_region_affine=per_region_affine,
        confinement=tuple(confinement),
    )
    if classify_boundary:
        component.boundary_faces = _classify_boundary(component)
    return component


def _classify_boundary(component: SubLevelComponent) -> list:
    """Faces separating the component from the rest of the arrangement.

    Entries are (region, i) for full-dimensional faces toward regions not in
    the component, and (region, None) for regions whose cell meets its own
    zero crossing.
    """
    arr = component.arrangement
    out = []
    for rec in sorted(component.table, key=lambda r: r.region.key()):
        region = rec.region
        T = component.affine_for(region)
        for i in range(arr.n):
            if region.flip(i) in component.table:
                continue
            res = face_lp(arr, region, i)
            if res.cost is not None and res.cost > TAU_FACE:
                out.append((region, i))
        gate = cell_interior_lp(arr, region, add_constr=(T,) + component.confinement)
        if gate.optimal and gate.cost is not None and gate.cost > TAU_FACE:
            zero = cell_interior_lp(
                arr, region, add_constr=(T.negate(),) + component.confinement
            )
            if zero.status is not LpStatus.INFEASIBLE:
                out.append((region, None))
    return out


def detect_fold_back_faces(
    arr: Arrangement, region: Region, T_R: AffineMap
) -> list:
    """Flipped hyperplanes carrying fold-back faces of the region.

    A fold-back face lies on a flipped hyperplane, meets the open negative
    side of the region's affine map, and its closure touches the affine
    map's zero set.  Used by tests to validate the traversal's completeness
    argument; the production backward pass gates more coarsely.
    """
    out = []
    for i in sorted(region.flips):
        plain = face_lp(arr, region, i)
        if not (plain.cost is not None and plain.cost > TAU_FACE):
            continue
        neg = face_lp(arr, region, i, add_constr=(T_R,))
        if not (neg.cost is not None and neg.cost > TAU_FACE):
            continue
        # closure of the face meets {T = 0}: pure feasibility, no slack
        signs = arr.signs(region)
        cons = []
        for j, f in enumerate(arr.functionals):
            if j == i:
                cons.append(Constraint(f, Relation.EQ))
            else:
                g = f if signs[j] > 0 else f.negate()
                cons.append(Constraint(g, Relation.GE))
        cons.append(Constraint(T_R, Relation.EQ))
        res = solve(LinearProgram(np.zeros(arr.dim), tuple(cons)))
        if res.status is not LpStatus.INFEASIBLE:
            out.append(i)
    return out

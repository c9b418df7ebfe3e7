"""End-to-end certification pipeline.

Stage 1 partitions the safe box into sub-boxes on which the barrier
provably decreases and extracts a single decrease rate gamma.  Stage 2
enumerates the connected component of the barrier's zero-sub-level set
around the seed point, confined to the certified union, and checks that the
component does not touch the confinement boundary.  Stage 3 bounds the
component with a box, inflates it to a one-step reachability ball, and
checks the barrier is strictly positive on every other cell inside that
ball.  Only when every check passes is the verdict Certified.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import lp
from .arrangement import Region, face_lp, find_interior_region, enumerate_regions
from .lp import TAU_FACE, Constraint, LinearProgram, LpStatus, Relation
from .nn import (
    AffineMap,
    HyperRectangle,
    LayerKind,
    NeuralNetwork,
    ShallowNN,
    load_network,
)
from .partition import EmptyPartition, compute_gamma, get_neg_d_set
from .sublevel import SubLevelComponent, enumerate_sub_level_component

__all__ = [
    "Verdict",
    "ProblemInstance",
    "Certificate",
    "certify",
    "check_containment",
    "component_bounding_box",
    "c_ball_radius",
    "check_positivity_outside",
    "lipschitz_estimate",
    "confinement_functionals",
    "load_problem",
    "region_of_point",
    "in_component",
    "UnboundedComponent",
]


class Verdict(str, Enum):
    CERTIFIED = "Certified"
    FAILED_SUBPROBLEM1 = "FailedSubproblem1"
    FAILED_CONTAINMENT = "FailedContainment"
    FAILED_POSITIVITY = "FailedPositivity"
    GAMMA_NOT_STRICT = "GammaNotStrict"


class UnboundedComponent(RuntimeError):
    """A component region is unbounded; the invariant set must be compact."""


@dataclass(frozen=True)
class ProblemInstance:
    n_f: NeuralNetwork
    n_bf: ShallowNN
    safe_set: HyperRectangle
    eps: float
    x0: np.ndarray
    lipschitz: Optional[float] = None  # None = sound product bound

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        object.__setattr__(self, "x0", x0)
        if self.n_f.in_dim != self.n_f.out_dim:
            raise ValueError("dynamics must map the state space to itself")
        if self.n_f.in_dim != self.n_bf.in_dim or self.safe_set.dim != self.n_f.in_dim:
            raise ValueError("dimension mismatch between dynamics, barrier and safe set")
        if x0.shape != (self.safe_set.dim,):
            raise ValueError("x0 has wrong dimension")
        if not self.safe_set.contains(x0):
            raise ValueError("x0 must lie in the safe set")


@dataclass
class Certificate:
    verdict: Verdict
    gamma: float = math.nan
    gamma_valid: bool = False
    x_partial: tuple = ()
    per_box_ratios: tuple = ()
    component: Optional[SubLevelComponent] = None
    component_bbox: Optional[HyperRectangle] = None
    c_ball: Optional[HyperRectangle] = None
    c_ball_radius: float = math.nan
    lipschitz: float = math.nan
    audit: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED


def lipschitz_estimate(n_f: NeuralNetwork) -> float:
    """Sound max-norm Lipschitz bound: product of max absolute row sums."""
    L = 1.0
    for layer in n_f.layers:
        L *= float(np.max(np.sum(np.abs(layer.map.W), axis=1)))
    return L


def confinement_functionals(boxes: Sequence[HyperRectangle], x0):
    """Half-space functionals (negative inside) confining enumeration to the
    certified union of boxes.

    When the boxes tile their bounding box exactly, the union is that box;
    otherwise we fall back to the single box containing the seed point,
    a sound under-approximation.
    """
    boxes = list(boxes)
    if not boxes:
        raise ValueError("need at least one box")
    x0 = np.asarray(x0, dtype=float)
    lo = np.min([b.lo for b in boxes], axis=0)
    hi = np.max([b.hi for b in boxes], axis=0)
    bbox = HyperRectangle(lo, hi)
    total = sum(b.volume for b in boxes)
    if bbox.volume > 0 and abs(total - bbox.volume) <= 1e-9 * bbox.volume:
        box = bbox
    else:
        box = next((b for b in boxes if b.contains(x0)), None)
        if box is None:
            raise ValueError("seed point lies in no certified box")
    n = box.dim
    fns = []
    for i in range(n):
        w = np.zeros((1, n))
        w[0, i] = 1.0
        fns.append(AffineMap(w, [-box.hi[i]]))  # x_i - hi <= 0 inside
        fns.append(AffineMap(-w, [box.lo[i]]))  # lo - x_i <= 0 inside
    return fns, box


def check_containment(
    component: SubLevelComponent,
    x_partial: Sequence[HyperRectangle],
    n_bf: ShallowNN,
) -> bool:
    """True iff no component region has a full-dimensional face on the
    confinement boundary where the barrier can be non-positive."""
    arr = component.arrangement
    confinement = component.confinement
    for rec in sorted(component.table, key=lambda r: r.region.key()):
        region = rec.region
        T = component.affine_for(region)
        signs = arr.signs(region)
        for k, g in enumerate(confinement):
            cons = []
            for j, f in enumerate(arr.functionals):
                W = np.zeros((1, arr.dim + 1))
                W[0, : arr.dim] = -signs[j] * f.W[0]
                W[0, arr.dim] = 1.0
                cons.append(Constraint(AffineMap(W, [-signs[j] * f.b[0]]), Relation.LE))
            for kk, gg in enumerate(confinement):
                W = np.zeros((1, arr.dim + 1))
                W[0, : arr.dim] = gg.W[0]
                if kk == k:
                    cons.append(Constraint(AffineMap(W, [gg.b[0]]), Relation.EQ))
                else:
                    W[0, arr.dim] = 1.0
                    cons.append(Constraint(AffineMap(W, [gg.b[0]]), Relation.LE))
            W = np.zeros((1, arr.dim + 1))
            W[0, : arr.dim] = T.W[0]
            W[0, arr.dim] = 1.0
            cons.append(Constraint(AffineMap(W, [T.b[0]]), Relation.LE))
            obj = np.zeros(arr.dim + 1)
            obj[arr.dim] = 1.0
            e = np.zeros((1, arr.dim + 1))
            e[0, arr.dim] = 1.0
            cons.append(Constraint(AffineMap(e, [0.0]), Relation.GE))
            cons.append(Constraint(AffineMap(e, [-1.0]), Relation.LE))
            res = lp.solve(LinearProgram(obj, tuple(cons)))
            if res.optimal and res.cost is not None and res.cost > TAU_FACE:
                return False
    return True


def _closed_cell_constraints(component: SubLevelComponent, region: Region):
    arr = component.arrangement
    signs = arr.signs(region)
    cons = []
    for j, f in enumerate(arr.functionals):
        g = f if signs[j] > 0 else f.negate()
        cons.append(Constraint(g, Relation.GE))
    for g in component.confinement:
        cons.append(Constraint(g, Relation.LE))
    return cons


def component_bounding_box(component: SubLevelComponent) -> HyperRectangle:
    """Coordinate-wise bounding box of the union of cells intersected with
    the sub-level half-space; two LPs per region and dimension."""
    arr = component.arrangement
    n = arr.dim
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    any_region = False
    for rec in sorted(component.table, key=lambda r: r.region.key()):
        region = rec.region
        T = component.affine_for(region)
        cons = _closed_cell_constraints(component, region)
        cons.append(Constraint(T, Relation.LE))
        for i in range(n):
            obj = np.zeros(n)
            obj[i] = 1.0
            hi_res = lp.solve(LinearProgram(obj, tuple(cons)))
            lo_res = lp.solve(LinearProgram(-obj, tuple(cons)))
            if hi_res.status is LpStatus.UNBOUNDED or lo_res.status is LpStatus.UNBOUNDED:
                raise UnboundedComponent(
                    f"region {region.key()} unbounded along axis {i}"
                )
            if hi_res.optimal and lo_res.optimal:
                any_region = True
                hi[i] = max(hi[i], hi_res.cost)
                lo[i] = min(lo[i], -lo_res.cost)
    if not any_region:
        raise ValueError("component has no feasible sub-level cell")
    return HyperRectangle(lo, hi)


def c_ball_radius(bbox: HyperRectangle, x0, nf_at_x0, L: float) -> float:
    """One-step reachability radius in max norm from the component box."""
    x0 = np.asarray(x0, dtype=float)
    nf_at_x0 = np.asarray(nf_at_x0, dtype=float)
    if L < 0:
        raise ValueError("Lipschitz bound must be non-negative")
    sup_from_x0 = float(np.max(np.maximum(bbox.hi - x0, x0 - bbox.lo)))
    sup_from_fx0 = float(np.max(np.maximum(bbox.hi - nf_at_x0, nf_at_x0 - bbox.lo)))
    return (L + 1.0) * sup_from_x0 + sup_from_fx0


def check_positivity_outside(
    n_bf: ShallowNN,
    component: SubLevelComponent,
    c_ball: HyperRectangle,
    x0,
    audit: Optional[list] = None,
) -> bool:
    """Barrier strictly positive on every cell inside the ball that is not
    part of the component (one minimization LP per such cell)."""
    arr = component.arrangement
    fns, _ = confinement_functionals([c_ball], x0)
    seed = find_interior_region(arr, np.asarray(x0, dtype=float))
    table = enumerate_regions(arr, seed, confinement=fns)
    ok = True
    for rec in sorted(table, key=lambda r: r.region.key()):
        region = rec.region
        if region in component.table:
            continue
        T = component.affine_for(region)
        cons = []
        signs = arr.signs(region)
        for j, f in enumerate(arr.functionals):
            g = f if signs[j] > 0 else f.negate()
            cons.append(Constraint(g, Relation.GE))
        for i in range(c_ball.dim):
            w = np.zeros((1, c_ball.dim))
            w[0, i] = 1.0
            cons.append(Constraint(AffineMap(w, [-c_ball.hi[i]]), Relation.LE))
            cons.append(Constraint(AffineMap(-w, [c_ball.lo[i]]), Relation.LE))
        res = lp.solve(LinearProgram(-T.W[0], tuple(cons)))
        if res.status is LpStatus.INFEASIBLE:
            continue
        if not res.optimal:
            ok = False
            minimum = -math.inf
        else:
            minimum = float(T.W[0] @ res.x_opt + T.b[0])
            if minimum <= TAU_FACE:
                ok = False
        if audit is not None:
            audit.append(
                {"region": list(region.key()), "min_barrier": minimum, "pass": minimum > TAU_FACE}
            )
    return ok


def certify(p: ProblemInstance) -> Certificate:
    """Run the full pipeline; never returns Certified past a failed check."""
    cert = Certificate(verdict=Verdict.FAILED_SUBPROBLEM1)
    audit = cert.audit

    boxes = get_neg_d_set(p.safe_set, p.n_bf, p.n_f, p.eps)
    audit.append({"stage": "partition", "boxes": len(boxes), "eps": p.eps})
    if not boxes:
        return cert
    gamma, valid, ratios = compute_gamma(boxes, p.n_bf, p.n_f)
    cert.x_partial = tuple(boxes)
    cert.per_box_ratios = tuple(ratios)
    cert.gamma = gamma
    cert.gamma_valid = valid
    audit.append({"stage": "gamma", "gamma": gamma, "valid": valid})
    if not valid:
        cert.verdict = Verdict.GAMMA_NOT_STRICT
        return cert

    fns, conf_box = confinement_functionals(boxes, p.x0)
    component = enumerate_sub_level_component(p.n_bf, p.x0, confinement=fns)
    cert.component = component
    audit.append(
        {
            "stage": "component",
            "regions": len(component.table),
            "confinement_box": {"lo": conf_box.lo.tolist(), "hi": conf_box.hi.tolist()},
        }
    )
    contained = check_containment(component, boxes, p.n_bf)
    audit.append({"stage": "containment", "pass": contained})
    if not contained:
        cert.verdict = Verdict.FAILED_CONTAINMENT
        return cert

    bbox = component_bounding_box(component)
    cert.component_bbox = bbox
    L = p.lipschitz if p.lipschitz is not None else lipschitz_estimate(p.n_f)
    cert.lipschitz = L
    radius = c_ball_radius(bbox, p.x0, p.n_f(p.x0), L)
    cert.c_ball_radius = radius
    c_ball = HyperRectangle(p.x0 - radius, p.x0 + radius)
    cert.c_ball = c_ball
    audit.append(
        {
            "stage": "reach_ball",
            "bbox": {"lo": bbox.lo.tolist(), "hi": bbox.hi.tolist()},
            "lipschitz": L,
            "radius": radius,
        }
    )
    positivity_audit: list = []
    positive = check_positivity_outside(p.n_bf, component, c_ball, p.x0, positivity_audit)
    audit.append({"stage": "positivity", "pass": positive, "checks": positivity_audit})
    if not positive:
        cert.verdict = Verdict.FAILED_POSITIVITY
        return cert

    cert.verdict = Verdict.CERTIFIED
    return cert


# --- membership and problem-file helpers ------------------------------------

def region_of_point(component: SubLevelComponent, x) -> Region:
    arr = component.arrangement
    W, b = arr.stacked()
    vals = W @ np.asarray(x, dtype=float) + b
    return Region(np.flatnonzero(vals > 0.0))


def in_component(component: SubLevelComponent, x, tol: float = 1e-7) -> bool:
    """x is in the certified set: barrier non-positive and cell enumerated."""
    if component.net(x) > tol:
        return False
    return region_of_point(component, x) in component.table


def load_problem(path) -> ProblemInstance:
    """Problem instance JSON: dynamics/barrier files, safe box, eps, x0."""
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    required = {"dynamics", "barrier", "safe_set", "eps", "x0"}
    missing = required - set(data)
    if missing:
        raise ValueError(f"problem file missing fields {sorted(missing)}")
    n_f = load_network(path.parent / data["dynamics"])
    barrier = load_network(path.parent / data["barrier"])
    n_bf = ShallowNN.from_network(barrier)
    safe = HyperRectangle(data["safe_set"]["lo"], data["safe_set"]["hi"])
    lip = data.get("lipschitz", "auto")
    lipschitz = None if lip == "auto" else float(lip)
    return ProblemInstance(
        n_f=n_f,
        n_bf=n_bf,
        safe_set=safe,
        eps=float(data["eps"]),
        x0=np.asarray(data["x0"], dtype=float),
        lipschitz=lipschitz,
    )

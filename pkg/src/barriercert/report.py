"""Plot-data export and figure rendering for certified components.

In 2D each enumerated cell (intersected with the sub-level half-space and
the confinement box) is traced into a polygon; in higher dimensions we fall
back to per-region bounding boxes.  Data goes to CSV or JSON; figures are
rendered with matplotlib to a file.
"""

from __future__ import annotations

import csv
import json
from itertools import combinations
from pathlib import Path
from typing import Optional

import numpy as np

from . import lp
from .lp import Constraint, LinearProgram, LpStatus, Relation
from .nn import AffineMap, HyperRectangle
from .sublevel import SubLevelComponent

__all__ = ["region_polygons_2d", "region_boxes", "write_plot_data", "render_figure"]


def _halfspaces(component: SubLevelComponent, region, box: Optional[HyperRectangle]):
    """Rows (a, c) meaning a . x <= c for the closed cell cut to the
    sub-level side and the optional box."""
    arr = component.arrangement
    signs = arr.signs(region)
    rows = []
    for j, f in enumerate(arr.functionals):
        # s_j * f_j(x) >= 0  <=>  -s_j w . x <= s_j b
        rows.append((-signs[j] * f.W[0], signs[j] * f.b[0]))
    T = component.affine_for(region)
    rows.append((T.W[0], -T.b[0]))
    if box is not None:
        for i in range(box.dim):
            e = np.zeros(box.dim)
            e[i] = 1.0
            rows.append((e, box.hi[i]))
            rows.append((-e, -box.lo[i]))
    return rows


def _polygon_vertices(rows, tol: float = 1e-9) -> Optional[np.ndarray]:
    """Vertices of a 2D polytope {a . x <= c}, ordered counter-clockwise."""
    pts = []
    for (a1, c1), (a2, c2) in combinations(rows, 2):
        A = np.stack([a1, a2])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        v = np.linalg.solve(A, np.array([c1, c2]))
        if all(a @ v <= c + 1e-7 for a, c in rows):
            pts.append(v)
    if len(pts) < 3:
        return None
    pts = np.unique(np.round(np.array(pts), 9), axis=0)
    if pts.shape[0] < 3:
        return None
    centroid = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0]))
    return pts[order]


def region_polygons_2d(component: SubLevelComponent, box: Optional[HyperRectangle] = None):
    """(flip-set key, vertex array) for each region with a non-empty cut."""
    assert component.arrangement.dim == 2
    out = []
    for rec in sorted(component.table, key=lambda r: r.region.key()):
        poly = _polygon_vertices(_halfspaces(component, rec.region, box))
        if poly is not None:
            out.append((rec.region.key(), poly))
    return out


def region_boxes(component: SubLevelComponent, box: Optional[HyperRectangle] = None):
    """(flip-set key, HyperRectangle) bounding box per region cut."""
    arr = component.arrangement
    n = arr.dim
    out = []
    for rec in sorted(component.table, key=lambda r: r.region.key()):
        rows = _halfspaces(component, rec.region, box)
        cons = [
            Constraint(AffineMap(a[None, :], [-c]), Relation.LE) for a, c in rows
        ]
        lo = np.empty(n)
        hi = np.empty(n)
        feasible = True
        for i in range(n):
            obj = np.zeros(n)
            obj[i] = 1.0
            up = lp.solve(LinearProgram(obj, tuple(cons)))
            dn = lp.solve(LinearProgram(-obj, tuple(cons)))
            if not (up.optimal and dn.optimal):
                feasible = False
                break
            hi[i] = up.cost
            lo[i] = -dn.cost
        if feasible:
            out.append((rec.region.key(), HyperRectangle(lo, hi)))
    return out


def write_plot_data(component: SubLevelComponent, path, box: Optional[HyperRectangle] = None):
    """CSV (or JSON, by extension) rows describing the component geometry."""
    path = Path(path)
    if component.arrangement.dim == 2:
        polys = region_polygons_2d(component, box)
        if path.suffix == ".json":
            doc = {
                "schema": "barrier-cert/v1",
                "kind": "polygons",
                "regions": [
                    {"flips": list(key), "vertices": poly.tolist()}
                    for key, poly in polys
                ],
            }
            path.write_text(json.dumps(doc, sort_keys=True) + "\n")
        else:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["region", "vertex", "x1", "x2"])
                for rid, (key, poly) in enumerate(polys):
                    for vi, v in enumerate(poly):
                        w.writerow([rid, vi, repr(float(v[0])), repr(float(v[1]))])
    else:
        boxes = region_boxes(component, box)
        if path.suffix == ".json":
            doc = {
                "schema": "barrier-cert/v1",
                "kind": "boxes",
                "regions": [
                    {"flips": list(key), "lo": b.lo.tolist(), "hi": b.hi.tolist()}
                    for key, b in boxes
                ],
            }
            path.write_text(json.dumps(doc, sort_keys=True) + "\n")
        else:
            n = component.arrangement.dim
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(
                    ["region"]
                    + [f"lo{i + 1}" for i in range(n)]
                    + [f"hi{i + 1}" for i in range(n)]
                )
                for rid, (key, b) in enumerate(boxes):
                    w.writerow(
                        [rid]
                        + [repr(float(v)) for v in b.lo]
                        + [repr(float(v)) for v in b.hi]
                    )


def render_figure(
    component: SubLevelComponent,
    path,
    safe_set: Optional[HyperRectangle] = None,
    box: Optional[HyperRectangle] = None,
    title: Optional[str] = None,
):
    """Render the certified component (2D: polygons; >=3D: projected boxes)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Polygon as MplPolygon, Rectangle

    fig, ax = plt.subplots(figsize=(6, 6))
    if component.arrangement.dim == 2:
        for _, poly in region_polygons_2d(component, box):
            ax.add_patch(
                MplPolygon(poly, closed=True, facecolor="tab:green", alpha=0.6, edgecolor="k", lw=0.4)
            )
    else:
        for _, b in region_boxes(component, box):
            ax.add_patch(
                Rectangle(
                    (b.lo[0], b.lo[1]),
                    b.hi[0] - b.lo[0],
                    b.hi[1] - b.lo[1],
                    facecolor="tab:green",
                    alpha=0.4,
                    edgecolor="k",
                    lw=0.3,
                )
            )
    if safe_set is not None:
        ax.add_patch(
            Rectangle(
                (safe_set.lo[0], safe_set.lo[1]),
                safe_set.hi[0] - safe_set.lo[0],
                safe_set.hi[1] - safe_set.lo[1],
                fill=False,
                edgecolor="gray",
                lw=1.2,
            )
        )
    ax.plot([component.seed_point[0]], [component.seed_point[1]], "k+", ms=10)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if title:
        ax.set_title(title)
    ax.relim()
    ax.autoscale_view()
    ax.set_aspect("equal", adjustable="datalim")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)

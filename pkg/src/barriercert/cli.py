"""Command-line interface.

Subcommands mirror the pipeline stages: ``bounds`` (interval enclosure of a
network over a box), ``partition`` (certified decrease boxes + gamma),
``enum`` (sub-level component of a barrier) and ``certify`` (full
pipeline).  Every command prints a JSON document with a run report; exit
codes are 0 success/Certified, 1 sound certification failure, 2 input
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import report as report_mod
from .arrangement import DegenerateSeed, LpFailure
from .certify import (
    ProblemInstance,
    UnboundedComponent,
    Verdict,
    certify,
    load_problem,
)
from .crown import get_fn_bd
from .nn import (
    AffineMap,
    HyperRectangle,
    SchemaError,
    ShallowNN,
    load_network,
)
from .partition import compute_gamma, get_neg_d_set
from .sublevel import SeedNotNegative, enumerate_sub_level_component

SCHEMA = "barrier-cert/v1"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class InputError(ValueError):
    pass


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise InputError(f"cannot parse vector {text!r}") from None


def _emit(doc: dict, out_path=None):
    text = json.dumps(doc, sort_keys=True, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n")
    print(text)


def _box_json(box: HyperRectangle) -> dict:
    return {"lo": box.lo.tolist(), "hi": box.hi.tolist()}


def cmd_bounds(args) -> int:
    t0 = time.perf_counter()
    net = load_network(args.network)
    box = HyperRectangle(_parse_vector(args.lo), _parse_vector(args.hi))
    E = get_fn_bd(net, box)
    doc = {
        "schema": SCHEMA,
        "bounds": E.E.tolist(),
        "report": {
            "command": "bounds",
            "seconds": time.perf_counter() - t0,
        },
    }
    _emit(doc, args.out)
    return EXIT_OK


def cmd_partition(args) -> int:
    t0 = time.perf_counter()
    p = load_problem(args.problem)
    eps = args.eps if args.eps is not None else p.eps
    boxes = get_neg_d_set(p.safe_set, p.n_bf, p.n_f, eps)
    seconds = time.perf_counter() - t0
    doc = {
        "schema": SCHEMA,
        "boxes": [_box_json(b) for b in boxes],
        "report": {
            "command": "partition",
            "seconds": seconds,
            "partitions": len(boxes),
        },
    }
    if not boxes:
        doc["gamma"] = None
        _emit(doc, args.out)
        return EXIT_FAILED
    gamma, valid, ratios = compute_gamma(boxes, p.n_bf, p.n_f)
    doc["gamma"] = gamma
    doc["gamma_valid"] = valid
    doc["per_box_ratios"] = list(ratios)
    _emit(doc, args.out)
    return EXIT_OK if valid else EXIT_FAILED


def _component_json(component) -> dict:
    regions = []
    for rec in sorted(component.table, key=lambda r: r.region.key()):
        T = component.affine_for(rec.region)
        regions.append(
            {
                "flips": list(rec.region.key()),
                "affine": {"W": T.W.tolist(), "b": T.b.tolist()},
                "witness": None if rec.witness is None else rec.witness.tolist(),
                "via_backward": rec.via_backward,
            }
        )
    doc = {
        "seed_flips": list(component.seed_region.key()),
        "regions": regions,
    }
    if component.boundary_faces is not None:
        doc["boundary_faces"] = [
            {"flips": list(region.key()), "hyperplane": idx}
            for region, idx in component.boundary_faces
        ]
    return doc


def cmd_enum(args) -> int:
    t0 = time.perf_counter()
    net = load_network(args.barrier)
    n_bf = ShallowNN.from_network(net)
    x0 = _parse_vector(args.x0)
    confinement = []
    if args.confine_lo is not None or args.confine_hi is not None:
        if args.confine_lo is None or args.confine_hi is None:
            raise InputError("--confine-lo and --confine-hi must be given together")
        box = HyperRectangle(_parse_vector(args.confine_lo), _parse_vector(args.confine_hi))
        for i in range(box.dim):
            w = np.zeros((1, box.dim))
            w[0, i] = 1.0
            confinement.append(AffineMap(w, [-box.hi[i]]))
            confinement.append(AffineMap(-w, [box.lo[i]]))
    component = enumerate_sub_level_component(
        n_bf, x0, confinement=tuple(confinement), classify_boundary=args.classify_boundary
    )
    seconds = time.perf_counter() - t0
    doc = {
        "schema": SCHEMA,
        "component": _component_json(component),
        "report": {
            "command": "enum",
            "seconds": seconds,
            "regions": len(component.table),
        },
    }
    _emit(doc, args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    t0 = time.perf_counter()
    p = load_problem(args.problem)
    if args.eps is not None or args.x0 is not None or args.lipschitz is not None:
        p = ProblemInstance(
            n_f=p.n_f,
            n_bf=p.n_bf,
            safe_set=p.safe_set,
            eps=args.eps if args.eps is not None else p.eps,
            x0=_parse_vector(args.x0) if args.x0 is not None else p.x0,
            lipschitz=(
                p.lipschitz
                if args.lipschitz is None
                else (None if args.lipschitz == "auto" else float(args.lipschitz))
            ),
        )
    cert = certify(p)
    seconds = time.perf_counter() - t0
    outputs = []
    if cert.component is not None and args.plot_data:
        report_mod.write_plot_data(cert.component, args.plot_data)
        outputs.append(str(args.plot_data))
    if cert.component is not None and args.figure:
        report_mod.render_figure(
            cert.component,
            args.figure,
            safe_set=p.safe_set,
            title=f"verdict: {cert.verdict.value}",
        )
        outputs.append(str(args.figure))
    doc = {
        "schema": SCHEMA,
        "verdict": cert.verdict.value,
        "gamma": None if cert.gamma != cert.gamma else cert.gamma,
        "gamma_valid": cert.gamma_valid,
        "x_partial": [_box_json(b) for b in cert.x_partial],
        "per_box_ratios": list(cert.per_box_ratios),
        "lipschitz": None if cert.lipschitz != cert.lipschitz else cert.lipschitz,
        "c_ball_radius": None
        if cert.c_ball_radius != cert.c_ball_radius
        else cert.c_ball_radius,
        "component_bbox": None
        if cert.component_bbox is None
        else _box_json(cert.component_bbox),
        "component": None if cert.component is None else _component_json(cert.component),
        "audit": cert.audit,
        "report": {
            "command": "certify",
            "seconds": seconds,
            "partitions": len(cert.x_partial),
            "regions": 0 if cert.component is None else len(cert.component.table),
            "verdict": cert.verdict.value,
            "outputs": outputs,
        },
    }
    _emit(doc, args.out)
    return EXIT_OK if cert.certified else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barriercert",
        description="Certify shallow ReLU barrier networks over box safe sets.",
    )
    parser.add_argument("--threads", type=int, default=1, help="worker cap (results are thread-count independent)")
    parser.add_argument("--seed", type=int, default=0, help="reserved for randomized tie-breaking")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="interval enclosure of a network over a box")
    b.add_argument("network")
    b.add_argument("--lo", required=True, help="comma-separated lower corner")
    b.add_argument("--hi", required=True, help="comma-separated upper corner")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    pt = sub.add_parser("partition", help="certified decrease boxes + gamma")
    pt.add_argument("problem")
    pt.add_argument("--eps", type=float)
    pt.add_argument("--out")
    pt.set_defaults(func=cmd_partition)

    en = sub.add_parser("enum", help="sub-level component of a shallow barrier")
    en.add_argument("barrier")
    en.add_argument("--x0", required=True, help="comma-separated seed point")
    en.add_argument("--confine-lo")
    en.add_argument("--confine-hi")
    en.add_argument("--classify-boundary", action="store_true")
    en.add_argument("--out")
    en.set_defaults(func=cmd_enum)

    ce = sub.add_parser("certify", help="full certification pipeline")
    ce.add_argument("problem")
    ce.add_argument("--eps", type=float)
    ce.add_argument("--x0")
    ce.add_argument("--lipschitz")
    ce.add_argument("--plot-data")
    ce.add_argument("--figure")
    ce.add_argument("--out")
    ce.set_defaults(func=cmd_certify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        InputError,
        SchemaError,
        SeedNotNegative,
        DegenerateSeed,
        FileNotFoundError,
        ValueError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LpFailure, UnboundedComponent) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

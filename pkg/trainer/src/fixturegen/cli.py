"""Command-line entry point that writes the committed fixture tree.

``pendulum`` and ``bicycle`` each train an open-loop model plus a
controller/barrier pair and export the closed-loop network with a problem
file for the certifier.  ``synthetic`` exports the scaling-suite barrier
grid.  With ``--check`` the certifier CLI is invoked on each exported
problem and its verdict printed; the generator itself never imports the
certification package.
"""

import argparse
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np

from .dynamics import SYSTEMS
from .nets import closed_loop_to_dict, save_json, shallow_to_dict
from .train import (
    DEFAULT_PAIR_CFG,
    make_synthetic,
    train_barrier_pair,
    train_open_loop,
)

CASE_EPS = {"pendulum": 0.2, "bicycle": 0.7}
CASE_LIPSCHITZ = {"pendulum": 0.8, "bicycle": 0.78}
MSE_LIMIT = {"pendulum": 1e-3}

SYNTH_GRID = [(2, 8), (2, 16), (2, 32), (2, 64), (1, 10), (2, 10), (3, 10), (4, 10)]


def _write(doc, path):
    save_json(doc, path)
    print(f"wrote {path}")


def gen_case_study(name, out_dir, seed):
    out = Path(out_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    params, _ = SYSTEMS[name]
    n = params["dim"]

    open_model, open_report = train_open_loop(name, seed=seed)
    limit = MSE_LIMIT.get(name)
    if limit is not None and open_report["held_out_mse"] > limit:
        raise RuntimeError(
            f"{name} open-loop held-out MSE {open_report['held_out_mse']:.2e} "
            f"exceeds {limit:.0e}"
        )
    controller, barrier, pair_report = train_barrier_pair(name, open_model, seed=seed)

    _write(shallow_to_dict(open_model), out / "open_loop.json")
    _write(shallow_to_dict(controller), out / "controller.json")
    _write(shallow_to_dict(barrier), out / "barrier.json")
    _write(closed_loop_to_dict(open_model, controller, n), out / "closed_loop.json")
    safe = params["safe_box"]
    problem = {
        "dynamics": "closed_loop.json",
        "barrier": "barrier.json",
        "safe_set": {"lo": safe[:, 0].tolist(), "hi": safe[:, 1].tolist()},
        "eps": CASE_EPS[name],
        "x0": [0.0] * n,
        "lipschitz": CASE_LIPSCHITZ[name],
    }
    _write(problem, out / "problem.json")
    report = {"open_loop": open_report, "pair": pair_report, "seed": seed,
              "config": DEFAULT_PAIR_CFG[name]}
    _write(report, out / "report.json")
    return out / "problem.json"


def gen_synthetic(out_dir, seed):
    out = Path(out_dir) / "synthetic"
    out.mkdir(parents=True, exist_ok=True)
    suite = []
    for d, width in SYNTH_GRID:
        model, meta = make_synthetic(d, width, seed=seed)
        fname = f"barrier_d{d}_N{width}.json"
        _write(shallow_to_dict(model), out / fname)
        meta["barrier"] = fname
        suite.append(meta)
    _write({"seed": seed, "fixtures": suite}, out / "suite.json")
    return out / "suite.json"


def check_problem(problem_path):
    exe = shutil.which("barriercert")
    if exe is None:
        print("barriercert not on PATH, skipping check")
        return 0
    proc = subprocess.run(
        [exe, "certify", str(problem_path)], capture_output=True, text=True
    )
    try:
        doc = json.loads(proc.stdout)
        print(
            f"check {problem_path}: verdict={doc['verdict']} "
            f"partitions={doc['report']['partitions']} regions={doc['report']['regions']} "
            f"gamma={doc['gamma']}"
        )
    except (json.JSONDecodeError, KeyError):
        print(f"check {problem_path}: exit {proc.returncode}\n{proc.stderr}")
    return proc.returncode


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="barriercert-fixtures",
        description="Train and export the committed network fixtures.",
    )
    parser.add_argument(
        "target", choices=["pendulum", "bicycle", "synthetic", "all"]
    )
    parser.add_argument("--out-dir", default="fixtures")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--check", action="store_true",
        help="run the certifier on each exported problem and report verdicts",
    )
    args = parser.parse_args(argv)

    targets = ["pendulum", "bicycle", "synthetic"] if args.target == "all" else [args.target]
    problems = []
    for t in targets:
        if t == "synthetic":
            gen_synthetic(args.out_dir, args.seed)
        else:
            problems.append(gen_case_study(t, args.out_dir, args.seed))
    rc = 0
    if args.check:
        for p in problems:
            rc = max(rc, check_problem(p))
    return rc


if __name__ == "__main__":
    sys.exit(main())

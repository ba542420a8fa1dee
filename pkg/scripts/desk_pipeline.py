#!/usr/bin/env python3
"""End-to-end desk-scale pipeline: validate the built-in tables, estimate
the bath constant, run full and reduced ensembles, and emit the comparison
bundles.  Results land under runs/desk/.

Usage: python scripts/desk_pipeline.py [--seed 1] [--jobs 2] [--paper-scale]
"""

import argparse
import sys

from triadred.cli import main as cli


def run(args: list[str]) -> None:
    print(f"\n$ triadred {' '.join(args)}", flush=True)
    rc = cli(args)
    if rc != 0:
        sys.exit(rc)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jobs", type=int, default=2)
    ap.add_argument("--paper-scale", action="store_true")
    args = ap.parse_args()

    seed = ["--seed", str(args.seed)]
    jobs = ["--jobs", str(args.jobs)]
    scale = ["--paper-scale"] if args.paper_scale else []

    run(["validate", "--tol", "5e-4"])
    run(["estimate-m", "--out", "runs/desk/bath", *seed, *scale])
    run(["estimate-m", "--levels", "10,20", "--out", "runs/desk/rescaling",
         *seed, *scale])
    run(["simulate", "--model", "full", "--epsilon", "1",
         "--out", "runs/desk/full_eps1", *seed, *jobs, *scale])
    run(["simulate", "--model", "reduced",
         "--m-from", "runs/desk/bath/summary.json",
         "--out", "runs/desk/reduced", *seed, *jobs, *scale])
    m_value = _read_m()
    for figure in ("ct_table", "cf_compare", "pdf_E", "kurt_compare"):
        run(["reproduce", "--figure", figure, "--m", m_value,
             "--out", f"runs/desk/{figure}", *seed, *jobs, *scale])


def _read_m() -> str:
    import json
    from pathlib import Path
    doc = json.loads(Path("runs/desk/bath/summary.json").read_text())
    return str(doc["M"])


if __name__ == "__main__":
    main()

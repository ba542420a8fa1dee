#!/usr/bin/env python3
"""Time-step study of the deterministic bath integrator: end-state error
against a dt/64 reference across a dt-halving ladder, printing the observed
convergence order per rung.

Usage: python scripts/convergence_study.py [--T 1.0] [--seed 6]
"""

import argparse

import numpy as np

from triadred import kernels
from triadred.bath import sample_uniform_sphere
from triadred.integrate import pack_bath_triads
from triadred.model import projected_builtin_model
from triadred.series import RngStream


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--dt-max", type=float, default=4e-3)
    ap.add_argument("--rungs", type=int, default=4)
    args = ap.parse_args()

    cs = projected_builtin_model()
    y0 = sample_uniform_sphere(cs.n, float(cs.n),
                               RngStream(args.seed).generator())
    bt, bf1, bf2, bc = pack_bath_triads(cs.yyy)
    ei = np.empty(0, dtype=np.int64)
    ef = np.empty(0)

    def end_state(dt):
        nsteps = round(args.T / dt)
        out = kernels.fast_bath_run(y0, bt, bf1, bf2, bc, ei, ei, ef, dt,
                                    nsteps, nsteps, kernels.SCHEME_RK5,
                                    False, 0.0, False, 1e12)
        return out[0][-1]

    dts = [args.dt_max / 2 ** r for r in range(args.rungs)]
    ref = end_state(args.dt_max / 64)
    errs = [float(np.linalg.norm(end_state(dt) - ref)) for dt in dts]
    print(f"T = {args.T}, reference dt = {args.dt_max / 64:g}")
    print(f"{'dt':>12} {'error':>14} {'order':>8}")
    for i, (dt, err) in enumerate(zip(dts, errs)):
        order = "" if i == 0 else f"{np.log2(errs[i - 1] / err):8.2f}"
        print(f"{dt:12g} {err:14.4e} {order}")


if __name__ == "__main__":
    main()

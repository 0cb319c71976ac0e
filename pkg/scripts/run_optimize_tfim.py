"""Optimize the step circuit for a TFIM and compare with exact diagonalization.

    python3 scripts/run_optimize_tfim.py --lx 3 --ly 3 --h 3.0 --seed 0
"""
import argparse
import time

import numpy as np

from holosim.device import build_layout, build_template
from holosim.holography import RunSpec
from holosim.lattice import Lattice2D, build_tfim, ed_ground_energy
from holosim.varloop import OptimizerConfig, run_optimization


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lx", type=int, default=3)
    p.add_argument("--ly", type=int, default=3)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--h", type=float, default=3.0)
    p.add_argument("--sigma", type=float, default=OptimizerConfig.sigma)
    p.add_argument("--max-iters", type=int, default=OptimizerConfig.max_iters)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="optional CSV path for the trace")
    args = p.parse_args()

    layout = build_layout(args.lx, 0, 0.0)
    template = build_template(layout, ("vertical", "even", "odd"), 1)
    spec = RunSpec(layout, template, np.zeros(template.num_params), args.ly)
    h = build_tfim(Lattice2D(args.lx, args.ly), args.J, args.h)
    cfg = OptimizerConfig(sigma=args.sigma, max_iters=args.max_iters, seed=args.seed)

    t0 = time.perf_counter()
    _, trace = run_optimization(spec, h, cfg)
    elapsed = time.perf_counter() - t0
    ed = ed_ground_energy(h) / h.lattice.num_sites
    best = trace.best[-1]
    print(f"iterations {trace.iterations}  converged {trace.converged}  {elapsed:.1f}s")
    print(f"best E/site {best:.6f}  ED {ed:.6f}  relative error {abs(best - ed) / abs(ed):.4f}")
    if args.trace:
        trace.to_csv(args.trace)


if __name__ == "__main__":
    main()

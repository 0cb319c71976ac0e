"""Deviation of a local observable from its noiseless value versus ly and noise.

    python3 scripts/stability_scan.py --eps 0 0.005 0.01 0.02 --ly 4 8 12
"""
import argparse

import numpy as np

from holosim.device import build_layout, build_template
from holosim.holography import RunSpec, stability_scan


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lx", type=int, default=2)
    p.add_argument("--bath", type=int, default=1)
    p.add_argument("--sink-fraction", type=float, default=0.5)
    p.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.005, 0.01, 0.02])
    p.add_argument("--ly", type=int, nargs="+", default=[4, 8, 12])
    p.add_argument("--theta-scale", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--observable", default="0,0,Z", help="x,rows_from_end,axis")
    args = p.parse_args()

    layout = build_layout(args.lx, args.bath, args.sink_fraction)
    template = build_template(layout)
    theta = np.random.default_rng(args.seed).normal(scale=args.theta_scale, size=template.num_params)
    spec = RunSpec(layout, template, theta, min(args.ly))
    x, back, axis = args.observable.split(",")
    local = [(int(x), int(back), axis)]

    print("eps      " + "  ".join(f"ly={ly:<8d}" for ly in args.ly))
    for eps in args.eps:
        row = stability_scan(spec, args.ly, eps, local)
        print(f"{eps:<8g} " + "  ".join(f"{d:.6f}   " for _, d in row))


if __name__ == "__main__":
    main()

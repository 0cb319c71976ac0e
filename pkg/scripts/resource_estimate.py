"""Tabulate measurement time for a range of target errors.

    python3 scripts/resource_estimate.py --tau 1e-7 --depth 10 --lx 20
"""
import argparse

from holosim.cli import format_seconds
from holosim.holography import resource_estimate, resource_estimate_local


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tau", type=float, default=1e-7)
    p.add_argument("--depth", type=float, default=10)
    p.add_argument("--lx", type=float, default=20)
    p.add_argument("--ly", type=float, default=10)
    p.add_argument("--C", type=float, default=1.0)
    args = p.parse_args()
    print("delta     energy/site     local observable")
    for delta in (0.1, 0.03, 0.01, 0.003, 0.001):
        e = resource_estimate(args.tau, args.depth, args.lx, delta, args.C)
        l = resource_estimate_local(args.tau, args.depth, args.ly, delta, args.C)
        print(f"{delta:<9g} {format_seconds(e):<15s} {format_seconds(l)}")


if __name__ == "__main__":
    main()

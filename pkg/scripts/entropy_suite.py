"""Run the entropy identity checks and print one line per check.

    python3 scripts/entropy_suite.py --cases 500 --out diagnostics.json
"""
import argparse
import sys

from holosim.entropy import appendix_suite, write_report


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cases", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    args = p.parse_args()
    checks = appendix_suite(args.cases, args.seed)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<34s} {c.value: .3e}  ({c.kind})")
    if args.out:
        write_report(args.out, checks, seed=args.seed)
    return 0 if all(c.passed for c in checks) else 1


if __name__ == "__main__":
    sys.exit(main())

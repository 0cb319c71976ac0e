"""Compare sampled estimates with exact values over random instances.

    python3 scripts/sampling_consistency.py --trials 100 --shots 5000
"""
import argparse

import numpy as np

from holosim.device import NoiseModel, build_layout, build_template
from holosim.holography import (
    MultiTimeObservable,
    RunSpec,
    bases_for,
    estimate_observable,
    exact_expectation,
    sample_histories,
)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--shots", type=int, default=5000)
    p.add_argument("--ly", type=int, default=3)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    layout = build_layout(2, 1, 1.0, top_columns=1)
    template = build_template(layout)
    rng = np.random.default_rng(args.seed)
    z = []
    for trial in range(args.trials):
        theta = rng.normal(size=template.num_params)
        spec = RunSpec(layout, template, theta, args.ly, NoiseModel(args.eps))
        k = int(rng.integers(1, 4))
        sites = rng.choice(2 * args.ly, size=k, replace=False)
        obs = MultiTimeObservable.of(*[(int(s) % 2, int(s) // 2, "XYZ"[rng.integers(3)]) for s in sites])
        r = estimate_observable(sample_histories(spec, bases_for([obs], 2, args.ly), args.shots, trial), obs)
        exact = exact_expectation(spec, obs)
        z.append((r.mean - exact) / r.stderr if r.stderr > 0 else 0.0)
    z = np.array(z)
    print(f"within 5 stderr: {(np.abs(z) <= 5).sum()}/{len(z)}")
    print(f"z-score mean {z.mean():.3f}  std {z.std():.3f}")


if __name__ == "__main__":
    main()

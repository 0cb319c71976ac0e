"""``holosim`` command-line front end."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager

from .config import ConfigError, RunConfig, ed_reference, parse_config
from .entropy import appendix_suite, write_report
from .holography import (
    estimate_observable,
    exact_expectation,
    resource_estimate,
    resource_estimate_local,
    sample_histories,
)
from .lattice import Hamiltonian2D, Lattice2D, group_terms, pass_seed
from .quantum import CapacityError
from .varloop import run_optimization, write_theta_json

THREADS_ENV = "HOLOSIM_THREADS"
log = logging.getLogger("holosim")


class OutputSet:
    """Files written by one command; removed again if the command fails."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.paths = []

    def path(self, name):
        p = os.path.join(self.out_dir, name)
        self.paths.append(p)
        return p

    def discard(self):
        for p in self.paths:
            if os.path.exists(p):
                os.remove(p)


@contextmanager
def outputs(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    out = OutputSet(out_dir)
    try:
        yield out
    except BaseException:
        out.discard()
        raise


def _dump(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _header(cfg: RunConfig, threads):
    return {"config": cfg.to_dict(), "seed": cfg.seed, "threads": threads}


def format_seconds(t):
    """``5e-4`` -> ``"5.0e-4 s"``."""
    mantissa, exp = f"{t:.1e}".split("e")
    return f"{mantissa}e{int(exp)} s"


# ------------------------------------------------------------------ commands


def cmd_simulate(cfg: RunConfig, threads):
    spec = cfg.build_spec()
    limits = cfg.build_limits()
    observables = cfg.build_observables()
    if not observables:
        raise ConfigError("observables", "simulate needs at least one observable")
    results = [None] * len(observables)
    if cfg.mode == "exact":
        for i, o in enumerate(observables):
            results[i] = (exact_expectation(spec, o, limits), 0.0)
    else:
        # one sampled pass per group of basis-compatible observables
        h = Hamiltonian2D(Lattice2D(spec.lx, spec.ly), tuple((1.0, o) for o in observables))
        for k, (bases, members) in enumerate(group_terms(h)):
            rec = sample_histories(spec, bases, cfg.shots, pass_seed(cfg.seed, k), threads, limits)
            for i in members:
                r = estimate_observable(rec, observables[i])
                results[i] = (r.mean, r.stderr)
    rows = [
        {"observable": s, "mean": m, "stderr": se, "shots": cfg.shots, "mode": cfg.mode}
        for s, (m, se) in zip(cfg.observables, results)
    ]
    with outputs(cfg.out_dir) as out:
        doc = _header(cfg, threads)
        doc["results"] = rows
        _dump(out.path("simulate.json"), doc)
    for r in rows:
        print(f"{r['observable']}\t{r['mean']:.6g}\t{r['stderr']:.3g}")
    return 0


def cmd_optimize(cfg: RunConfig, threads):
    spec = cfg.build_spec()
    h = cfg.build_model()
    ocfg = cfg.optimizer_config()

    def progress(it, e, ok, best):
        if it % 500 == 0:
            log.info("iteration %d: proposed %.6f, best %.6f", it, e, best)

    with outputs(cfg.out_dir) as out:
        theta, trace = run_optimization(
            spec, h, ocfg, theta0=spec.theta, threads=threads,
            limits=cfg.build_limits(), callback=progress,
        )
        trace.to_csv(out.path("trace.csv"))
        write_theta_json(
            out.path("theta.json"), theta, spec, ocfg,
            **_header(cfg, threads),
            final_energy_per_site=trace.best[-1],
            ed_energy_per_site=ed_reference(cfg, h),
            iterations=trace.iterations,
            converged=trace.converged,
        )
    print(f"best energy per site {trace.best[-1]:.6f} after {trace.iterations} iterations")
    return 0


def cmd_diagnose(cfg: RunConfig, threads):
    checks = appendix_suite(cfg.diagnostics.fuzz_cases, cfg.seed)
    with outputs(cfg.out_dir) as out:
        doc = write_report(out.path("diagnostics.json"), checks, **_header(cfg, threads))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} = {c.value:.3e}")
    return 0 if doc["all_passed"] else 1


def cmd_estimate_resources(args):
    t = resource_estimate(args.tau, args.depth, args.lx, args.delta, args.C)
    print(format_seconds(t))
    if args.ly is not None:
        print("local observable:", format_seconds(
            resource_estimate_local(args.tau, args.depth, args.ly, args.delta, args.C)))
    return 0


# ------------------------------------------------------------------- parsing


def build_parser():
    p = argparse.ArgumentParser(prog="holosim", description="Holographic 2D simulation on a 1D device.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "estimate multi-time observables"),
        ("optimize", "run the accept-if-lower variational loop"),
        ("diagnose", "run the entropy identity suite"),
    ):
        s = sub.add_parser(name, help=text)
        s.add_argument("-c", "--config", required=True, help="run configuration (JSON)")
        s.add_argument("--seed", type=int, help="overrides the config seed")
        s.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        s.add_argument("--out-dir", help="overrides the config out_dir")
        s.add_argument("-v", "--verbose", action="store_true")
    r = sub.add_parser("estimate-resources", help="time to estimate the energy per site")
    r.add_argument("--tau", type=float, required=True, help="gate time in seconds")
    r.add_argument("--depth", type=float, required=True, help="circuit depth per step")
    r.add_argument("--lx", type=float, required=True, help="number of system qubits")
    r.add_argument("--delta", type=float, required=True, help="target statistical error")
    r.add_argument("--C", type=float, default=1.0, help="model-dependent constant")
    r.add_argument("--ly", type=float, help="also estimate one local observable at this ly")
    return p


def resolve_threads(flag):
    if flag is not None:
        n = flag
    else:
        n = int(os.environ.get(THREADS_ENV, "1"))
    if n < 1:
        raise ConfigError("threads", "must be >= 1")
    return n


COMMANDS = {"simulate": cmd_simulate, "optimize": cmd_optimize, "diagnose": cmd_diagnose}


def _fail(kind, message, key=None):
    doc = {"error": kind, "message": message}
    if key:
        doc["key"] = key
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "estimate-resources":
        try:
            return cmd_estimate_resources(args)
        except ValueError as exc:
            _fail("ValueError", str(exc))
            return 2
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s", stream=sys.stderr,
    )
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out_dir is not None:
            cfg.out_dir = args.out_dir
        threads = resolve_threads(args.threads)
        return COMMANDS[args.command](cfg, threads)
    except ConfigError as exc:
        _fail("ConfigError", str(exc), exc.key)
        return 2
    except CapacityError as exc:
        _fail("CapacityError", str(exc))
        return 2
    except Exception as exc:  # surfaced with context, never a bare traceback
        _fail(type(exc).__name__, f"{args.command} failed: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

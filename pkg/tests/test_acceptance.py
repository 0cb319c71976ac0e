"""End-to-end acceptance checks, one test per criterion."""
import json
import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from holosim.cli import main
from holosim.config import parse_config
from holosim.device import build_layout, build_template
from holosim.entropy import appendix_suite
from holosim.holography import (
    ExactEvaluator,
    MultiTimeObservable,
    RunSpec,
    bases_for,
    brute_force_history_state,
    estimate_observable,
    exact_expectation,
    history_pauli,
    resource_estimate,
    resource_estimate_local,
    sample_histories,
    shot_products,
    stability_scan,
)
from holosim.lattice import (
    Hamiltonian2D,
    Lattice2D,
    cluster_preset,
    cluster_stabilizers,
    ed_ground_energy,
    group_terms,
)
from holosim.quantum import pauli_expectation, reduced_density_matrix
from holosim.varloop import run_optimization

from conftest import record_acceptance

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def reference_family(theta_seed, ly=3):
    """lx=2 with two bath qubits and one sink qubit."""
    lay = build_layout(2, 1, 1.0, top_columns=1)
    assert (len(lay.bath_qubits), len(lay.sink_qubits)) == (2, 1)
    tpl = build_template(lay)
    theta = np.random.default_rng(theta_seed).normal(size=tpl.num_params)
    return RunSpec(lay, tpl, theta, ly)


def random_observable(rng, lx, ly):
    k = int(rng.integers(1, 5))
    sites = rng.choice(lx * ly, size=k, replace=False)
    return MultiTimeObservable.of(*[(int(s) % lx, int(s) // lx, "XYZ"[rng.integers(3)]) for s in sites])


def test_criterion_1_resource_estimate(capsys):
    t0 = time.perf_counter()
    rc = main(["estimate-resources", "--tau", "1e-7", "--depth", "10", "--lx", "20",
               "--delta", "0.01", "--C", "1"])
    printed = capsys.readouterr().out.strip()
    elapsed = time.perf_counter() - t0
    exact = resource_estimate(Fraction(1, 10**7), 10, 20, Fraction(1, 100), 1)
    local = resource_estimate_local(100e-9, 10, 10, 0.1, 1.0)
    ok = (rc == 0 and printed == "5.0e-4 s" and exact == Fraction(5, 10**4)
          and math.isclose(resource_estimate(1e-7, 10, 20, 0.01, 1.0), 5e-4, rel_tol=1e-12)
          and math.isclose(local, 1e-3, rel_tol=1e-12) and elapsed < 1.0)
    assert record_acceptance(1, ok, f"estimate-resources printed {printed!r} (exact {exact}) in {elapsed:.3f}s")


def test_criterion_2_exact_matches_history_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for draw in range(10):
        spec = reference_family(draw)
        psi = brute_force_history_state(spec)
        ev = ExactEvaluator(spec)
        for _ in range(20):
            obs = random_observable(rng, spec.lx, spec.ly)
            worst = max(worst, abs(ev.expectation(obs) - pauli_expectation(psi, history_pauli(spec, obs))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 60
    assert record_acceptance(2, ok, f"max |exact - oracle| = {worst:.2e} over 200 pairs in {elapsed:.1f}s")


def test_criterion_3_causality():
    worst = 0.0
    for draw in range(10):
        base = reference_family(draw, ly=3)
        psi3 = brute_force_history_state(base)
        for extra in (4, 5):
            longer = brute_force_history_state(RunSpec(base.layout, base.template, base.theta, extra))
            for t in range(1, 4):
                rows = list(range(base.lx * t))
                a = reduced_density_matrix(psi3, rows).matrix
                b = reduced_density_matrix(longer, rows).matrix
                worst = max(worst, float(np.abs(a - b).max()))
    ok = worst <= 1e-10
    assert record_acceptance(3, ok, f"max marginal change under appended steps = {worst:.2e}")


def test_criterion_4_cluster_fixed_point():
    t0 = time.perf_counter()
    lx, ly = 3, 4
    spec = cluster_preset(lx, ly)
    stabs = cluster_stabilizers(lx, ly)
    ev = ExactEvaluator(spec)
    worst = max(abs(ev.expectation(s) - 1.0) for s in stabs)
    h = Hamiltonian2D(Lattice2D(lx, ly), tuple((1.0, s) for s in stabs))
    total = bad = 0
    for k, (bases, members) in enumerate(group_terms(h)):
        rec = sample_histories(spec, bases, 1000, seed=100 + k)
        for i in members:
            prods = shot_products(rec, stabs[i])
            total += prods.size
            bad += int((prods != 1).sum())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and bad == 0 and elapsed < 60
    assert record_acceptance(
        4, ok, f"max |<S> - 1| = {worst:.1e}; {total - bad}/{total} shot products = +1 in {elapsed:.1f}s")


def test_criterion_5_sampling_consistency():
    rng = np.random.default_rng(55)
    inside = 0
    for trial in range(100):
        spec = reference_family(1000 + trial)
        obs = random_observable(rng, spec.lx, spec.ly)
        r = estimate_observable(sample_histories(spec, bases_for([obs], 2, 3), 5000, seed=trial), obs)
        inside += abs(r.mean - exact_expectation(spec, obs)) <= 5 * r.stderr + 1e-12
    spec = reference_family(7)
    obs = MultiTimeObservable.parse("X(0,1) Z(1,2)")
    bases = bases_for([obs], 2, 3)
    se1 = estimate_observable(sample_histories(spec, bases, 5000, seed=1), obs).stderr
    se4 = estimate_observable(sample_histories(spec, bases, 20_000, seed=2), obs).stderr
    ratio = se4 / se1
    ok = inside >= 99 and abs(ratio - 0.5) <= 0.2 * 0.5
    assert record_acceptance(5, ok, f"{inside}/100 within 5 stderr; stderr ratio at 4x shots = {ratio:.3f}")


def test_criterion_6_variational_loop():
    cfg = parse_config(os.path.join(ROOT, "configs", "optimize_tfim.json"))
    spec, h = cfg.build_spec(), cfg.build_model()
    assert (h.lattice.lx, h.lattice.ly, h.lattice.boundary) == (3, 3, "open")
    ed = ed_ground_energy(h) / h.lattice.num_sites
    t0 = time.perf_counter()
    _, trace = run_optimization(spec, h, cfg.optimizer_config())
    elapsed = time.perf_counter() - t0
    best = np.array(trace.best)
    rel = abs(best[-1] - ed) / abs(ed)
    ok = (bool(np.all(np.diff(best) <= 0)) and rel <= 0.05 and trace.iterations <= 5000
          and elapsed < 600)
    assert record_acceptance(
        6, ok, f"E/site {best[-1]:.5f} vs ED {ed:.5f} ({100 * rel:.2f}% off) after "
        f"{trace.iterations} iterations in {elapsed:.0f}s")


def test_criterion_7_local_stability():
    t0 = time.perf_counter()
    lay = build_layout(2, 1, 0.5)
    tpl = build_template(lay)
    theta = np.random.default_rng(0).normal(scale=0.5, size=tpl.num_params)
    spec = RunSpec(lay, tpl, theta, 4)
    local = [(0, 0, "Z")]
    d = {ly: v for ly, v in stability_scan(spec, [4, 8, 12], 0.01, local)}
    saturates = abs(d[12] - d[8]) <= 0.5 * abs(d[8] - d[4]) + 1e-3
    monotone = True
    for ly in (4, 8, 12):
        ds = [stability_scan(spec, [ly], eps, local)[0][1] for eps in (0.0, 0.005, 0.01, 0.02)]
        monotone &= all(b >= a - 1e-9 for a, b in zip(ds, ds[1:]))
    elapsed = time.perf_counter() - t0
    ok = saturates and monotone and elapsed < 300
    assert record_acceptance(
        7, ok, f"d(4,8,12) = {d[4]:.5f}, {d[8]:.5f}, {d[12]:.5f}; monotone in eps: {monotone}; "
        f"{elapsed:.1f}s")


def test_criterion_8_entropy_suite():
    t0 = time.perf_counter()
    checks = {c.name: c for c in appendix_suite(fuzz_cases=500, seed=0)}
    elapsed = time.perf_counter() - t0
    needed = ["strong_subadditivity_min", "weak_monotonicity_min", "cluster_cmi_slab_w1",
              "toric_2x2_tee", "cluster_3x3_tee"]
    ok = all(checks[n].passed for n in needed) and elapsed < 120
    summary = ", ".join(f"{n}={checks[n].value:.2e}" for n in needed)
    assert record_acceptance(8, ok, f"{summary} in {elapsed:.1f}s")


def test_criterion_9_cli_determinism(tmp_path):
    run = {
        "layout": {"lx": 2, "bath_per_system": 0, "sink_rail_fraction": 0.5}, "ly": 3,
        "noise": {"epsilon": 0.02}, "mode": "sampled", "shots": 300,
        "model": {"kind": "tfim", "J": 1.0, "h": 2.0, "boundary": "open"},
        "optimizer": {"max_iters": 10, "sigma": 0.2},
        "observables": ["X(0,0) X(1,1)", "Z(1,2)", "Y(0,1)"],
        "out_dir": str(tmp_path / "out"),
    }
    exact = dict(run, mode="exact", shots=None, optimizer={"max_iters": 25, "sigma": 0.2})
    diag = {"noise": {"epsilon": 0.0}, "mode": "exact", "shots": None,
            "diagnostics": {"fuzz_cases": 100}, "out_dir": str(tmp_path / "out")}
    paths = {}
    for name, doc in (("run", run), ("exact", exact), ("diag", diag)):
        paths[name] = tmp_path / f"{name}.json"
        paths[name].write_text(json.dumps(doc))
    commands = [
        ["simulate", "-c", str(paths["run"])],
        ["optimize", "-c", str(paths["run"])],
        ["simulate", "-c", str(paths["exact"]), "--out-dir", str(tmp_path / "out_exact")],
        ["optimize", "-c", str(paths["exact"]), "--out-dir", str(tmp_path / "out_exact")],
        ["diagnose", "-c", str(paths["diag"]), "--out-dir", str(tmp_path / "out_diag")],
    ]

    def snapshot():
        files = {}
        for d in ("out", "out_exact", "out_diag"):
            for f in sorted(os.listdir(tmp_path / d)):
                files[f"{d}/{f}"] = (tmp_path / d / f).read_bytes()
        return files

    codes, snaps = [], []
    for _ in range(2):
        for cmd in commands:
            codes.append(main(cmd + ["--seed", "5", "--threads", "1"]))
        snaps.append(snapshot())
    same = snaps[0] == snaps[1]
    ok = all(c == 0 for c in codes) and same and len(snaps[0]) == 7
    assert record_acceptance(9, ok, f"{len(snaps[0])} output files byte-identical across repeats: {same}")

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holosim.device import NoiseModel, build_layout, build_template
from holosim.holography import (
    ExactEvaluator,
    IncompatibleBasisError,
    MultiTimeObservable,
    RunSpec,
    ShotRecords,
    bases_for,
    brute_force_history_state,
    estimate_observable,
    exact_expectation,
    history_pauli,
    resource_estimate,
    resource_estimate_local,
    sample_histories,
    simulate_shot,
    stability_scan,
)
from holosim.lattice import cluster_preset, cluster_stabilizers
from holosim.quantum import CapacityError, Limits, pauli_expectation, partial_trace


def small_spec(theta_seed=None, ly=3, per_step=False):
    """lx=2, two bath qubits, one sink: the reference instance family."""
    lay = build_layout(2, 1, 1.0, top_columns=1)
    tpl = build_template(lay)
    shape = (ly, tpl.num_params) if per_step else (tpl.num_params,)
    theta = np.zeros(shape) if theta_seed is None else np.random.default_rng(theta_seed).normal(size=shape)
    return RunSpec(lay, tpl, theta, ly)


def random_observable(rng, lx, ly, max_factors=4):
    k = int(rng.integers(1, max_factors + 1))
    sites = rng.choice(lx * ly, size=min(k, lx * ly), replace=False)
    return MultiTimeObservable.of(*[(int(s) % lx, int(s) // lx, "XYZ"[rng.integers(3)]) for s in sites])


def test_reference_instance_has_requested_registers():
    spec = small_spec()
    assert spec.lx == 2
    assert len(spec.layout.bath_qubits) == 2
    assert len(spec.layout.sink_qubits) == 1


def test_observable_parse_and_validation():
    o = MultiTimeObservable.parse("X(0,1) Z(1,1)")
    assert o == MultiTimeObservable.of((0, 1, "X"), (1, 1, "Z"))
    assert str(o) == "X(0,1) Z(1,1)"
    with pytest.raises(ValueError):
        MultiTimeObservable.of((0, 0, "X"), (0, 0, "Z"))
    with pytest.raises(IndexError):
        exact_expectation(small_spec(), MultiTimeObservable.of((0, 5, "Z")))


# ---------------------------------------------------------------- exact mode


def test_zero_theta_gives_product_values():
    spec = small_spec()
    for x in range(2):
        for y in range(3):
            assert exact_expectation(spec, MultiTimeObservable.of((x, y, "Z"))) == pytest.approx(1.0)
            assert exact_expectation(spec, MultiTimeObservable.of((x, y, "X"))) == pytest.approx(0.0)


def test_cluster_stabilizers_exact():
    spec = cluster_preset(3, 4)
    ev = ExactEvaluator(spec)
    for s in cluster_stabilizers(3, 4):
        assert ev.expectation(s) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_exact_matches_brute_force_history(seed):
    rng = np.random.default_rng(100 + seed)
    spec = small_spec(theta_seed=seed, per_step=bool(seed % 2))
    psi = brute_force_history_state(spec)
    ev = ExactEvaluator(spec)
    for _ in range(20):
        obs = random_observable(rng, spec.lx, spec.ly)
        want = pauli_expectation(psi, history_pauli(spec, obs))
        assert ev.expectation(obs) == pytest.approx(want, abs=1e-9)
    assert ev.max_hermiticity_error < 1e-10


def test_exact_matches_brute_force_without_sink_reset():
    from dataclasses import replace

    spec = replace(small_spec(theta_seed=9), reset_sinks=False)
    psi = brute_force_history_state(spec)
    rng = np.random.default_rng(9)
    for _ in range(10):
        obs = random_observable(rng, spec.lx, spec.ly)
        assert exact_expectation(spec, obs) == pytest.approx(
            pauli_expectation(psi, history_pauli(spec, obs)), abs=1e-9)


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1))
def test_single_site_values_are_physical(seed):
    rng = np.random.default_rng(seed)
    lay = build_layout(2, 0, 0.5)
    tpl = build_template(lay)
    spec = RunSpec(lay, tpl, rng.normal(scale=2, size=tpl.num_params), 3, NoiseModel(0.05))
    obs = random_observable(rng, 2, 3, max_factors=1)
    assert -1.0 <= exact_expectation(spec, obs) <= 1.0


def test_exact_mode_respects_density_cap():
    spec = small_spec()
    with pytest.raises(CapacityError):
        exact_expectation(spec, MultiTimeObservable.of((0, 0, "Z")), Limits(density_qubits=4))


# ---------------------------------------------------------- history oracle


def test_zero_theta_history_is_all_zero():
    psi = brute_force_history_state(small_spec())
    assert abs(psi.amplitudes[0]) == pytest.approx(1.0)


def test_causality_of_history_marginals():
    for seed in range(5):
        short = small_spec(theta_seed=seed, ly=2)
        long = RunSpec(short.layout, short.template, short.theta, 4)
        a = brute_force_history_state(short)
        b = brute_force_history_state(long)
        rows = list(range(short.lx * short.ly))
        ra = partial_trace(a.to_density_matrix(), [q for q in range(a.num_qubits) if q not in rows])
        rb = partial_trace(b.to_density_matrix(), [q for q in range(b.num_qubits) if q not in rows])
        assert np.abs(ra.matrix - rb.matrix).max() <= 1e-10


def test_history_rejects_noise():
    from dataclasses import replace

    with pytest.raises(ValueError):
        brute_force_history_state(replace(small_spec(), noise=NoiseModel(0.1)))


# ------------------------------------------------------------ sampling mode


def test_zero_theta_z_shots_all_plus_one():
    rec = sample_histories(small_spec(), bases_for([], 2, 3), 200, seed=1)
    assert (rec.outcomes == 1).all()
    assert rec.outcomes.shape == (200, 3, 2)


def test_zero_theta_x_shots_unbiased():
    rec = sample_histories(small_spec(), [["X", "X"]] * 3, 10_000, seed=2)
    means = rec.outcomes.mean(axis=0)
    assert np.abs(means).max() < 4 / math.sqrt(10_000)


def test_cluster_stabilizer_products_are_deterministic():
    spec = cluster_preset(3, 4)
    for s in cluster_stabilizers(3, 4):
        rec = sample_histories(spec, bases_for([s], 3, 4), 300, seed=5)
        r = estimate_observable(rec, s)
        assert r.mean == 1.0 and r.stderr == 0.0


def test_batched_path_equals_single_shot_reference():
    from dataclasses import replace

    spec = replace(small_spec(theta_seed=4), noise=NoiseModel(0.1))
    bases = [["X", "Z"], ["Y", "X"], ["Z", "Z"]]
    rec = sample_histories(spec, bases, 40, seed=77)
    for s in range(40):
        assert (simulate_shot(spec, bases, 77, s) == rec.outcomes[s]).all()


def test_shots_independent_of_threads_and_prefix():
    spec = small_spec(theta_seed=8)
    bases = [["X", "Z"]] * 3
    a = sample_histories(spec, bases, 2500, seed=3, threads=1)
    b = sample_histories(spec, bases, 2500, seed=3, threads=3)
    c = sample_histories(spec, bases, 100, seed=3)
    assert (a.outcomes == b.outcomes).all()
    assert (a.outcomes[:100] == c.outcomes).all()


def test_estimator_basics():
    ones = ShotRecords(np.ones((50, 2, 2), dtype=np.int8), (("Z", "Z"), ("Z", "Z")), 0)
    r = estimate_observable(ones, MultiTimeObservable.of((0, 0, "Z"), (1, 1, "Z")))
    assert (r.mean, r.stderr, r.shots) == (1.0, 0.0, 50)
    coins = np.random.default_rng(0).choice([-1, 1], size=(10_000, 1, 2)).astype(np.int8)
    r = estimate_observable(ShotRecords(coins, (("Z", "Z"),), 0),
                            MultiTimeObservable.of((0, 0, "Z"), (1, 0, "Z")))
    assert abs(r.mean) < 4 / 100
    assert r.stderr == pytest.approx(np.std(coins[:, 0, 0] * coins[:, 0, 1], ddof=1) / 100)


def test_basis_mismatch_is_an_error():
    rec = sample_histories(small_spec(), [["Z", "Z"]] * 3, 10, seed=0)
    with pytest.raises(IncompatibleBasisError):
        estimate_observable(rec, MultiTimeObservable.of((0, 0, "X")))
    with pytest.raises(IncompatibleBasisError):
        bases_for([MultiTimeObservable.of((0, 0, "X")), MultiTimeObservable.of((0, 0, "Z"))], 2, 3)


def test_cluster_sampled_estimate_consistent_with_exact():
    spec = cluster_preset(3, 3)
    obs = MultiTimeObservable.parse("X(1,1) Z(0,1) Z(2,1) Z(1,0) Z(1,2)")
    r = estimate_observable(sample_histories(spec, bases_for([obs], 3, 3), 500, 4), obs)
    assert abs(r.mean - exact_expectation(spec, obs)) <= 4 * r.stderr + 1e-12


def test_sampled_matches_exact_on_random_theta():
    spec = small_spec(theta_seed=21)
    obs = MultiTimeObservable.parse("X(0,1) Z(1,2)")
    r = estimate_observable(sample_histories(spec, bases_for([obs], 2, 3), 5000, 6), obs)
    assert abs(r.mean - exact_expectation(spec, obs)) <= 5 * r.stderr


def test_csv_round_trip(tmp_path):
    rec = sample_histories(small_spec(theta_seed=2), [["X", "Y"], ["Z", "X"], ["Y", "Z"]], 7, 11)
    path = tmp_path / "shots.csv"
    rec.to_csv(path)
    assert path.read_text().splitlines()[0] == "shot,t,x,basis,outcome"
    back = ShotRecords.from_csv(path)
    assert (back.outcomes == rec.outcomes).all()
    assert back.bases == rec.bases


def test_sampling_respects_pure_cap():
    with pytest.raises(CapacityError):
        sample_histories(small_spec(), [["Z", "Z"]] * 3, 5, 0, limits=Limits(pure_qubits=3))


# --------------------------------------------------------- stability, resources


def test_stability_zero_noise_is_zero():
    lay = build_layout(2, 0, 0.5)
    tpl = build_template(lay)
    spec = RunSpec(lay, tpl, np.random.default_rng(1).normal(size=tpl.num_params), 4)
    for _, d in stability_scan(spec, [2, 4], 0.0, [(0, 0, "Z")]):
        assert d == pytest.approx(0.0, abs=1e-10)


def test_resource_estimate_examples():
    assert resource_estimate(100e-9, 10, 20, 0.01, 1.0) == pytest.approx(5e-4, rel=1e-12)
    assert resource_estimate(100e-9, 10, 20, 0.01, 0.0) == 0.0
    # tau * D * ly / delta^2 = 1e-7 * 10 * 10 / 1e-2
    assert resource_estimate_local(100e-9, 10, 10, 0.1, 1.0) == pytest.approx(1e-3, rel=1e-12)
    for bad in [(0, 10, 20, 0.01), (1e-7, 0, 20, 0.01), (1e-7, 10, 0, 0.01), (1e-7, 10, 20, 0)]:
        with pytest.raises(ValueError):
            resource_estimate(*bad)
    with pytest.raises(ValueError):
        resource_estimate(1e-7, 10, 20, 0.01, -1.0)


@given(st.floats(1e-9, 1e-6), st.integers(1, 50), st.integers(1, 50), st.floats(1e-3, 0.5))
def test_resource_estimate_scaling(tau, depth, lx, delta):
    t = resource_estimate(tau, depth, lx, delta)
    assert resource_estimate(tau, depth, 2 * lx, delta) == pytest.approx(t / 2)
    assert resource_estimate(tau, depth, lx, delta / 2) == pytest.approx(4 * t)

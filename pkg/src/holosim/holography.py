"""2D observables from the 1D device history.

A 2D site ``(x, y)`` is the ``x``-th system qubit of the device measured at
time step ``y``.  Multi-time correlators are evaluated three ways:

* :func:`exact_expectation` - density-matrix evolution of the bath/sink
  register with the measured row's Pauli inserted and traced out each step;
* :func:`sample_histories` + :func:`estimate_observable` - the physical
  repeat-and-average protocol on stochastic trajectories;
* :func:`brute_force_history_state` - every row kept as its own register, no
  tracing, so row expectations can be read off one pure state.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .device import (
    NOISELESS,
    CircuitTemplate,
    NoiseModel,
    RegisterLayout,
    apply_step,
    compile_step,
    uniforms_per_step,
)
from .quantum import (
    DEFAULT_LIMITS,
    DensityMatrix,
    InvalidStateError,
    PauliString,
    PureState,
    TrajectoryBatch,
    apply_operator_left,
    apply_unitary,
    embed,
    measure_pauli_with,
    partial_trace,
)

AXES = ("X", "Y", "Z")
CHUNK_SHOTS = 1024


class IncompatibleBasisError(ValueError):
    """Records were measured in a basis the observable cannot use."""


class SiteCoord(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class MultiTimeObservable:
    """Product of single-site Paulis on the 2D lattice; ``y`` is device time."""

    factors: tuple = ()

    def __post_init__(self):
        fs = []
        for site, axis in self.factors:
            axis = str(axis).upper()
            if axis not in AXES:
                raise ValueError(f"unknown Pauli axis {axis!r}")
            fs.append((SiteCoord(int(site[0]), int(site[1])), axis))
        sites = [s for s, _ in fs]
        if len(set(sites)) != len(sites):
            raise ValueError("duplicate site in observable")
        object.__setattr__(self, "factors", tuple(fs))

    @classmethod
    def of(cls, *triples):
        """``MultiTimeObservable.of((x, y, "Z"), ...)``."""
        return cls(tuple(((x, y), a) for x, y, a in triples))

    @classmethod
    def parse(cls, text):
        """Parse ``"X(0,1) Z(1,1)"``."""
        out = []
        for tok in text.split():
            axis, rest = tok[0], tok[1:].strip("()")
            x, y = (int(v) for v in rest.split(","))
            out.append(((x, y), axis))
        return cls(tuple(out))

    @property
    def sites(self):
        return [s for s, _ in self.factors]

    def by_row(self):
        rows = {}
        for (x, y), a in self.factors:
            rows.setdefault(y, []).append((x, a))
        return rows

    def check_bounds(self, lx, ly):
        for x, y in self.sites:
            if not (0 <= x < lx and 0 <= y < ly):
                raise IndexError(f"site ({x}, {y}) outside the {lx}x{ly} lattice")

    def __str__(self):
        return " ".join(f"{a}({x},{y})" for (x, y), a in self.factors) or "I"

    def to_list(self):
        return [[x, y, a] for (x, y), a in self.factors]


@dataclass(frozen=True, eq=False)
class RunSpec:
    """Everything needed to run the device for ``ly`` steps.

    ``theta`` is either one parameter vector shared by every step or an
    array of shape ``(ly, num_params)`` with one vector per step.
    """

    layout: RegisterLayout
    template: CircuitTemplate
    theta: np.ndarray
    ly: int
    noise: NoiseModel = NOISELESS
    reset_sinks: bool = True

    def __post_init__(self):
        if self.ly < 1:
            raise ValueError("ly must be >= 1")
        theta = np.array(self.theta, dtype=float)
        p = self.template.num_params
        if theta.shape != (p,) and theta.shape != (self.ly, p):
            raise ValueError(
                f"theta has shape {theta.shape}; expected ({p},) or ({self.ly}, {p})"
            )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        self.template.validate_for(self.layout)

    @property
    def per_step(self):
        return self.theta.ndim == 2

    @property
    def lx(self):
        return self.layout.lx

    def theta_at(self, t):
        return self.theta[t] if self.per_step else self.theta

    def compiled(self):
        if self.per_step:
            return [compile_step(self.template, self.theta[t]) for t in range(self.ly)]
        gates = compile_step(self.template, self.theta)
        return [gates] * self.ly

    def with_theta(self, theta):
        return replace(self, theta=theta)


# ---------------------------------------------------------------- exact mode


class ExactEvaluator:
    """Operator-insertion evaluator with a cached unconditioned prefix.

    The full-register state after every step is cached, so an observable
    living on rows ``t0..t1`` costs ``t1 - t0`` extra steps.  Steps after the
    last touched row are trace preserving and are skipped.
    """

    def __init__(self, spec: RunSpec, limits=DEFAULT_LIMITS):
        layout = spec.layout
        limits.check_density(layout.num_qubits)
        self.spec = spec
        self._gates = spec.compiled()
        self._aux = list(layout.aux_qubits)
        self._sys = list(layout.system_qubits)
        self._sys_zero = np.zeros((2 ** len(self._sys),) * 2, dtype=complex)
        self._sys_zero[0, 0] = 1.0
        zero = np.zeros((2 ** len(self._aux),) * 2, dtype=complex)
        zero[0, 0] = 1.0
        self._aux0 = DensityMatrix(len(self._aux), zero)
        self._after = []  # full-register state after step t, nothing inserted
        self.max_hermiticity_error = 0.0

    def advance(self, aux: DensityMatrix, t) -> DensityMatrix:
        """Tensor a fresh system row onto ``aux`` and run step ``t``."""
        spec = self.spec
        full = embed([(self._sys_zero, self._sys), (aux.matrix, self._aux)], spec.layout.num_qubits)
        full.normalized = aux.normalized
        return apply_step(
            full, spec.layout, spec.template, None, spec.noise,
            reset_sinks=spec.reset_sinks, gates=self._gates[t],
        )

    def contract(self, full: DensityMatrix, pauli: PauliString | None) -> DensityMatrix:
        """``Tr_S[(Q ⊗ I) rho]`` over the system row."""
        if pauli is not None and pauli.factors:
            full = apply_operator_left(full, pauli)
        out = partial_trace(full, self._sys)
        herm = float(np.abs(out.matrix - out.matrix.conj().T).max())
        self.max_hermiticity_error = max(self.max_hermiticity_error, herm)
        return out

    def state_after(self, t) -> DensityMatrix:
        """Full-register state right after step ``t`` with no insertions."""
        while len(self._after) <= t:
            k = len(self._after)
            aux = self._aux0 if k == 0 else self.contract(self._after[k - 1], None)
            self._after.append(self.advance(aux, k))
        return self._after[t]

    def _row_pauli(self, row):
        return PauliString(tuple((self._sys[x], a) for x, a in row))

    def expectation(self, obs: MultiTimeObservable) -> float:
        spec = self.spec
        obs.check_bounds(spec.lx, spec.ly)
        rows = obs.by_row()
        if not rows:
            return 1.0
        t0, t1 = min(rows), max(rows)
        full = self.state_after(t0)
        for t in range(t0, t1 + 1):
            if t > t0:
                full = self.advance(aux, t)
            aux = self.contract(full, self._row_pauli(rows[t]) if t in rows else None)
        val = complex(np.trace(aux.matrix))
        if abs(val.imag) > 1e-9:
            raise InvalidStateError(f"expectation has imaginary part {val.imag:.3e}")
        if abs(val.real) > 1 + 1e-9:
            raise InvalidStateError(f"expectation {val.real} outside [-1, 1]")
        return min(1.0, max(-1.0, val.real))


def exact_expectation(spec: RunSpec, obs: MultiTimeObservable, limits=DEFAULT_LIMITS) -> float:
    """Exact multi-time correlator by operator insertion on the density matrix."""
    return ExactEvaluator(spec, limits).expectation(obs)


# ------------------------------------------------------------- history oracle


def history_size(spec: RunSpec):
    layout = spec.layout
    n_sink = len(layout.sink_qubits)
    copies = spec.ly if spec.reset_sinks else 1
    return spec.lx * spec.ly + len(layout.bath_qubits) + n_sink * copies


def history_site(spec: RunSpec, x, y):
    """Qubit index of 2D site ``(x, y)`` in the brute-force history state."""
    return x + spec.lx * y


def history_pauli(spec: RunSpec, obs: MultiTimeObservable) -> PauliString:
    obs.check_bounds(spec.lx, spec.ly)
    return PauliString(tuple((history_site(spec, x, y), a) for (x, y), a in obs.factors))


def brute_force_history_state(spec: RunSpec, limits=DEFAULT_LIMITS) -> PureState:
    """Joint pure state of every row, the bath and the discarded sinks.

    Qubits: rows first (site ``(x, y)`` at ``x + lx * y``), then the bath,
    then one fresh sink register per step.  Resetting a sink is realised by
    switching to a fresh register, so nothing is ever measured or traced.
    """
    if spec.noise.active:
        raise ValueError("the history oracle is noiseless only")
    layout = spec.layout
    n = history_size(spec)
    limits.check_pure(n)
    state = PureState.zeros(n, limits)
    base_bath = spec.lx * spec.ly
    base_sink = base_bath + len(layout.bath_qubits)
    n_sink = len(layout.sink_qubits)
    bath_pos = {q: base_bath + j for j, q in enumerate(layout.bath_qubits)}
    gates = spec.compiled()
    for t in range(spec.ly):
        copy = t if spec.reset_sinks else 0
        where = dict(bath_pos)
        where.update({q: history_site(spec, x, t) for x, q in enumerate(layout.system_qubits)})
        where.update({q: base_sink + copy * n_sink + j for j, q in enumerate(layout.sink_qubits)})
        for targets, u in gates[t]:
            state = apply_unitary(state, u, [where[q] for q in targets])
    return state


# ------------------------------------------------------------- sampling mode


@dataclass(frozen=True)
class ShotRecord:
    shot: int
    outcomes: np.ndarray  # (ly, lx) of +-1
    bases: tuple
    seed: int


@dataclass
class ShotRecords:
    """Outcomes of many shots sharing one basis assignment."""

    outcomes: np.ndarray  # (shots, ly, lx) int8 of +-1
    bases: tuple  # bases[t][x]
    seed: int
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.outcomes.shape[0]

    def __getitem__(self, i):
        return ShotRecord(i, self.outcomes[i], self.bases, self.seed)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def shots(self):
        return len(self)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["shot", "t", "x", "basis", "outcome"])
            n, ly, lx = self.outcomes.shape
            for s in range(n):
                for t in range(ly):
                    for x in range(lx):
                        w.writerow([s, t, x, self.bases[t][x], int(self.outcomes[s, t, x])])

    @classmethod
    def from_csv(cls, path, seed=-1):
        rows = []
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                rows.append((int(r["shot"]), int(r["t"]), int(r["x"]), r["basis"], int(r["outcome"])))
        n = max(r[0] for r in rows) + 1
        ly = max(r[1] for r in rows) + 1
        lx = max(r[2] for r in rows) + 1
        out = np.zeros((n, ly, lx), dtype=np.int8)
        bases = [[None] * lx for _ in range(ly)]
        for s, t, x, b, o in rows:
            out[s, t, x] = o
            bases[t][x] = b
        return cls(out, tuple(tuple(r) for r in bases), seed)


def normalize_bases(bases, lx, ly):
    """Turn an array/nested list or a ``{(x, t): axis}`` dict into ``bases[t][x]``.

    Sites missing from a dict default to Z.
    """
    if isinstance(bases, dict):
        grid = [["Z"] * lx for _ in range(ly)]
        for (x, t), a in bases.items():
            if not (0 <= x < lx and 0 <= t < ly):
                raise IndexError(f"basis entry ({x}, {t}) outside the lattice")
            grid[t][x] = str(a).upper()
    else:
        grid = [[str(a).upper() for a in row] for row in bases]
    if len(grid) != ly or any(len(r) != lx for r in grid):
        raise ValueError(f"basis assignment must be {ly} rows of {lx}")
    for row in grid:
        for a in row:
            if a not in AXES:
                raise ValueError(f"unknown basis {a!r}")
    return tuple(tuple(r) for r in grid)


def bases_for(observables, lx, ly, default="Z"):
    """Single basis assignment serving every observable, or IncompatibleBasisError."""
    want = {}
    for obs in observables:
        for (x, y), a in obs.factors:
            if want.setdefault((x, y), a) != a:
                raise IncompatibleBasisError(f"site ({x}, {y}) needs both {want[(x, y)]} and {a}")
    grid = [[default] * lx for _ in range(ly)]
    for (x, y), a in want.items():
        grid[y][x] = a
    return tuple(tuple(r) for r in grid)


def shot_rng(seed, shot):
    """Generator for one shot; depends only on ``(seed, shot)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shot,)))


def uniforms_per_shot(spec: RunSpec):
    per_step = uniforms_per_step(spec.layout, spec.template, spec.noise, spec.reset_sinks)
    return spec.ly * (per_step + spec.lx)


def _run_chunk(spec, bases, gates, seed, start, stop):
    layout = spec.layout
    count = uniforms_per_shot(spec)
    draws = np.empty((stop - start, count))
    for i, s in enumerate(range(start, stop)):
        draws[i] = shot_rng(seed, s).random(count)
    cols = iter(draws.T)
    draw = cols.__next__
    state = TrajectoryBatch.zeros(layout.num_qubits, stop - start)
    out = np.empty((stop - start, spec.ly, spec.lx), dtype=np.int8)
    for t in range(spec.ly):
        state = apply_step(
            state, layout, spec.template, None, spec.noise,
            reset_sinks=spec.reset_sinks, gates=gates[t], draw=draw,
        )
        for x, q in enumerate(layout.system_qubits):
            out[:, t, x], state = measure_pauli_with(state, q, bases[t][x], draw())
    return out


def sample_histories(spec: RunSpec, bases, shots, seed, threads=1, limits=DEFAULT_LIMITS):
    """Simulate ``shots`` independent device runs with destructive row readout.

    Each shot uses its own generator derived from ``(seed, shot)``, so the
    records do not depend on chunking or ``threads``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    limits.check_pure(spec.layout.num_qubits)
    bases = normalize_bases(bases, spec.lx, spec.ly)
    gates = spec.compiled()
    bounds = [(a, min(a + CHUNK_SHOTS, shots)) for a in range(0, shots, CHUNK_SHOTS)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _run_chunk(spec, bases, gates, seed, *b), bounds))
    else:
        parts = [_run_chunk(spec, bases, gates, seed, a, b) for a, b in bounds]
    return ShotRecords(np.concatenate(parts), bases, int(seed))


def simulate_shot(spec: RunSpec, bases, seed, shot):
    """One shot on a single :class:`PureState`; reference for the batched path."""
    layout = spec.layout
    bases = normalize_bases(bases, spec.lx, spec.ly)
    rng = shot_rng(seed, shot)
    gates = spec.compiled()
    state = PureState.zeros(layout.num_qubits)
    out = np.empty((spec.ly, spec.lx), dtype=np.int8)
    for t in range(spec.ly):
        state = apply_step(
            state, layout, spec.template, None, spec.noise, rng=rng,
            reset_sinks=spec.reset_sinks, gates=gates[t],
        )
        for x, q in enumerate(layout.system_qubits):
            out[t, x], state = measure_pauli_with(state, q, bases[t][x], rng.random())
    return out


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    stderr: float
    shots: int


def mean_and_stderr(values):
    """Compensated mean and standard error (sample std / sqrt(n))."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def shot_products(records: ShotRecords, obs: MultiTimeObservable) -> np.ndarray:
    ly, lx = len(records.bases), len(records.bases[0])
    obs.check_bounds(lx, ly)
    prod = np.ones(len(records), dtype=np.int64)
    for (x, y), a in obs.factors:
        if records.bases[y][x] != a:
            raise IncompatibleBasisError(
                f"site ({x}, {y}) was measured in {records.bases[y][x]}, observable needs {a}"
            )
        prod *= records.outcomes[:, y, x]
    return prod


def estimate_observable(records, obs: MultiTimeObservable) -> EstimatorResult:
    if not isinstance(records, ShotRecords):
        records = list(records)
        records = ShotRecords(
            np.stack([r.outcomes for r in records]), records[0].bases, records[0].seed
        )
    mean, se = mean_and_stderr(shot_products(records, obs))
    return EstimatorResult(mean, se, len(records))


# ------------------------------------------------------ stability, resources


def stability_scan(spec: RunSpec, ly_values, epsilon, local_factors, limits=DEFAULT_LIMITS):
    """``|noisy - noiseless|`` of a local observable near the last row, per ``ly``.

    ``local_factors`` holds ``(x, rows_from_end, axis)``; 0 is the final row.
    The shared parameter vector of ``spec`` is reused for every length.
    """
    if spec.per_step:
        raise ValueError("stability_scan needs a shared parameter vector")
    out = []
    for ly in ly_values:
        obs = MultiTimeObservable.of(*[(x, ly - 1 - back, a) for x, back, a in local_factors])
        clean = replace(spec, ly=ly, noise=NOISELESS)
        noisy = replace(spec, ly=ly, noise=NoiseModel(epsilon))
        d = abs(exact_expectation(noisy, obs, limits) - exact_expectation(clean, obs, limits))
        out.append((ly, d))
    return out


def resource_estimate(tau, depth, lx, delta, C=1.0):
    """Time to estimate the energy per site: ``C * tau * D / (lx * delta**2)``."""
    for name, v in (("tau", tau), ("depth", depth), ("lx", lx), ("delta", delta)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    if C < 0:
        raise ValueError("C must be non-negative")
    return C * tau * depth / (lx * delta**2)


def resource_estimate_local(tau, depth, ly, delta, C=1.0):
    """Time to estimate one local observable: ``C * tau * D * ly / delta**2``."""
    for name, v in (("tau", tau), ("depth", depth), ("ly", ly), ("delta", delta)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    if C < 0:
        raise ValueError("C must be non-negative")
    return C * tau * depth * ly / delta**2

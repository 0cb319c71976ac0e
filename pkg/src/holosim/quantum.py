"""Dense state engines: pure states, density matrices and shot batches.

Bit order: qubit 0 is the least significant bit of a basis-state index.  A
state over ``n`` qubits is viewed as a tensor of shape ``(2,) * n`` in which
qubit ``q`` lives on axis ``n - 1 - q``.  Multi-qubit matrices act on their
targets with ``targets[0]`` as the most significant bit, so
``np.kron(A, B)`` applied to ``[a, b]`` puts ``A`` on qubit ``a``.

Entropies are in nats.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HARD_PURE_QUBITS = 24
HARD_DENSITY_QUBITS = 12

ENTROPY_CUTOFF = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j]).astype(complex)

PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

# R with R P R^dag = Z, used to measure P as Z.
_TO_Z = {"X": H, "Y": H @ S.conj().T, "Z": I2}


class CapacityError(ValueError):
    """Requested state is larger than the configured dense cap."""


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class Limits:
    """Dense-size caps; may only be lowered below the hard caps."""

    pure_qubits: int = HARD_PURE_QUBITS
    density_qubits: int = HARD_DENSITY_QUBITS

    def __post_init__(self):
        if not 0 <= self.pure_qubits <= HARD_PURE_QUBITS:
            raise ValueError(f"pure_qubits must be in [0, {HARD_PURE_QUBITS}]")
        if not 0 <= self.density_qubits <= HARD_DENSITY_QUBITS:
            raise ValueError(f"density_qubits must be in [0, {HARD_DENSITY_QUBITS}]")

    def check_pure(self, n):
        if n > self.pure_qubits:
            raise CapacityError(f"{n} qubits exceeds the pure-state cap of {self.pure_qubits}")

    def check_density(self, n):
        if n > self.density_qubits:
            raise CapacityError(
                f"{n} qubits exceeds the density-matrix cap of {self.density_qubits}"
            )


DEFAULT_LIMITS = Limits()


# ---------------------------------------------------------------- state types


@dataclass
class PureState:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise ValueError("amplitude vector length must be 2**num_qubits")

    @classmethod
    def zeros(cls, n, limits=DEFAULT_LIMITS):
        limits.check_pure(n)
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(n, amps)

    @classmethod
    def from_amplitudes(cls, amps):
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size)))
        if 2**n != amps.size:
            raise ValueError("length is not a power of two")
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise InvalidStateError("zero vector")
        return cls(n, amps / norm)

    @classmethod
    def random(cls, n, rng):
        """Haar-random pure state."""
        v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        return cls(n, v / np.linalg.norm(v))

    def copy(self):
        return PureState(self.num_qubits, self.amplitudes.copy())

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def to_density_matrix(self):
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass
class DensityMatrix:
    """Density matrix; ``normalized=False`` marks operator-insertion intermediates."""

    num_qubits: int
    matrix: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        d = 2**self.num_qubits
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix must be {d}x{d}")

    @classmethod
    def zeros(cls, n, limits=DEFAULT_LIMITS):
        limits.check_density(n)
        m = np.zeros((2**n, 2**n), dtype=complex)
        m[0, 0] = 1.0
        return cls(n, m)

    @classmethod
    def maximally_mixed(cls, n):
        return cls(n, np.eye(2**n, dtype=complex) / 2**n)

    @classmethod
    def random(cls, n, rng, rank=None):
        """Random mixed state from a Ginibre matrix of the given rank."""
        d = 2**n
        rank = d if rank is None else rank
        g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
        m = g @ g.conj().T
        return cls(n, m / np.trace(m).real)

    def copy(self):
        return DensityMatrix(self.num_qubits, self.matrix.copy(), self.normalized)

    def trace(self):
        return complex(np.trace(self.matrix))

    def is_hermitian(self, atol=1e-10):
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=atol))

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        """``self ⊗ other`` with ``other`` on the low qubits."""
        return DensityMatrix(
            self.num_qubits + other.num_qubits,
            np.kron(self.matrix, other.matrix),
            self.normalized and other.normalized,
        )


@dataclass
class TrajectoryBatch:
    """A stack of independent pure-state trajectories, shape ``(shots, 2**n)``."""

    num_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zeros(cls, n, shots, limits=DEFAULT_LIMITS):
        limits.check_pure(n)
        amps = np.zeros((shots, 2**n), dtype=complex)
        amps[:, 0] = 1.0
        return cls(n, amps)

    @property
    def shots(self):
        return self.amplitudes.shape[0]

    def copy(self):
        return TrajectoryBatch(self.num_qubits, self.amplitudes.copy())

    def __getitem__(self, i):
        return PureState(self.num_qubits, self.amplitudes[i].copy())


@dataclass(frozen=True)
class Unitary:
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape not in ((2, 2), (4, 4)):
            raise ValueError("unitary must be 2x2 or 4x4")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-10):
            raise ValueError("matrix is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def arity(self):
        return 1 if self.matrix.shape[0] == 2 else 2


@dataclass(frozen=True)
class PauliString:
    """Product of single-qubit Paulis with +1 phase; empty means identity."""

    factors: tuple = ()

    def __post_init__(self):
        fs = tuple((int(q), str(a).upper()) for q, a in self.factors)
        qs = [q for q, _ in fs]
        if len(set(qs)) != len(qs):
            raise ValueError("duplicate qubit in Pauli string")
        for q, a in fs:
            if a not in ("X", "Y", "Z"):
                raise ValueError(f"unknown Pauli axis {a!r}")
            if q < 0:
                raise ValueError("negative qubit index")
        object.__setattr__(self, "factors", fs)

    @classmethod
    def parse(cls, text):
        """Parse ``"X0 Z3"`` style strings."""
        text = text.strip()
        if not text:
            return cls(())
        return cls(tuple((int(tok[1:]), tok[0]) for tok in text.split()))

    @property
    def qubits(self):
        return [q for q, _ in self.factors]

    def __str__(self):
        return " ".join(f"{a}{q}" for q, a in self.factors) or "I"


# ------------------------------------------------------------ tensor kernels


def _check_targets(n, targets):
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError("targets must be distinct")
    for t in targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} out of range for {n}-qubit state")
    return targets


def _apply_to_axes(tensor, mat, axes):
    k = len(axes)
    op = mat.reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _row_axes(n, targets, offset=0):
    return [offset + n - 1 - t for t in targets]


def _apply_left(dm: DensityMatrix, mat, targets) -> np.ndarray:
    n = dm.num_qubits
    t = dm.matrix.reshape((2,) * (2 * n))
    t = _apply_to_axes(t, mat, _row_axes(n, targets))
    return t.reshape(2**n, 2**n)


def _conjugate(dm_matrix, n, mat, targets):
    t = dm_matrix.reshape((2,) * (2 * n))
    t = _apply_to_axes(t, mat, _row_axes(n, targets))
    t = _apply_to_axes(t, mat.conj(), _row_axes(n, targets, offset=n))
    return t.reshape(2**n, 2**n)


def _pure_apply(amps, n, mat, targets):
    t = amps.reshape((2,) * n)
    return _apply_to_axes(t, mat, _row_axes(n, targets)).reshape(-1)


def _batch_apply(amps, n, mat, targets):
    b = amps.shape[0]
    t = amps.reshape((b,) + (2,) * n)
    return _apply_to_axes(t, mat, _row_axes(n, targets, offset=1)).reshape(b, -1)


def pauli_matrix(axes: str) -> np.ndarray:
    """Dense matrix of a Pauli word, first letter most significant."""
    m = np.eye(1, dtype=complex)
    for a in axes:
        m = np.kron(m, PAULI[a])
    return m


# ---------------------------------------------------------------- operations


def apply_unitary(state, u, targets):
    """Apply ``u`` (Unitary or matrix) to ``targets``; returns a new state."""
    mat = u.matrix if isinstance(u, Unitary) else np.asarray(u, dtype=complex)
    k = int(round(np.log2(mat.shape[0])))
    targets = _check_targets(state.num_qubits, targets)
    if len(targets) != k:
        raise ValueError(f"gate of arity {k} given {len(targets)} targets")
    n = state.num_qubits
    if isinstance(state, PureState):
        return PureState(n, _pure_apply(state.amplitudes, n, mat, targets))
    if isinstance(state, TrajectoryBatch):
        return TrajectoryBatch(n, _batch_apply(state.amplitudes, n, mat, targets))
    if isinstance(state, DensityMatrix):
        return DensityMatrix(n, _conjugate(state.matrix, n, mat, targets), state.normalized)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def apply_operator_left(dm: DensityMatrix, p: PauliString) -> DensityMatrix:
    """``P rho`` (no conjugation); the result is flagged non-normalized."""
    m = dm.matrix
    n = dm.num_qubits
    _check_targets(n, p.qubits)
    out = DensityMatrix(n, m, normalized=False)
    for q, a in p.factors:
        out.matrix = _apply_left(out, PAULI[a], [q])
    return out


def pauli_expectation(state, p: PauliString) -> float:
    """``<psi|P|psi>`` or ``Tr[P rho]``."""
    n = state.num_qubits
    _check_targets(n, p.qubits)
    if isinstance(state, PureState):
        amps = state.amplitudes
        for q, a in p.factors:
            amps = _pure_apply(amps, n, PAULI[a], [q])
        val = np.vdot(state.amplitudes, amps)
        normalized = True
    elif isinstance(state, DensityMatrix):
        val = np.trace(apply_operator_left(state, p).matrix)
        normalized = state.normalized
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise InvalidStateError(f"expectation has imaginary part {val.imag:.3e}")
    re = float(val.real)
    if normalized:
        if abs(re) > 1 + 1e-9:
            raise InvalidStateError(f"expectation {re} outside [-1, 1]")
        re = min(1.0, max(-1.0, re))
    return re


def batch_pauli_values(batch: TrajectoryBatch, p: PauliString) -> np.ndarray:
    """Per-trajectory expectation values of ``p``."""
    n = batch.num_qubits
    amps = batch.amplitudes
    for q, a in p.factors:
        amps = _batch_apply(amps, n, PAULI[a], [q])
    return np.einsum("bi,bi->b", batch.amplitudes.conj(), amps).real


def _bit_mask(n, q):
    return ((np.arange(2**n) >> q) & 1).astype(bool)


def _collapse_z(amps, n, q, u):
    """Measure Z on ``q`` using uniform(s) ``u``; outcome bit 0 iff u < p0.

    Works on a single vector or a batch (leading axis).
    """
    one = _bit_mask(n, q)
    probs = np.abs(amps) ** 2
    p1 = probs[..., one].sum(axis=-1)
    p0 = np.clip(1.0 - p1, 0.0, 1.0)
    bit = ~(np.asarray(u) < p0)
    keep = np.where(bit[..., None], one, ~one)
    norm = np.sqrt(np.where(bit, p1, p0))
    out = np.where(keep, amps, 0.0) / norm[..., None]
    return bit, out


def measure_pauli(state: PureState, q, axis, rng):
    """Projective measurement of a single-qubit Pauli.

    Returns ``(outcome, post_state)`` with outcome in {+1, -1}.
    """
    if not isinstance(state, PureState):
        raise TypeError("measure_pauli needs a PureState")
    return measure_pauli_with(state, q, axis, rng.random())


def measure_pauli_with(state, q, axis, u):
    """Like :func:`measure_pauli` but driven by explicit uniform(s) ``u``.

    For a :class:`TrajectoryBatch`, ``u`` holds one uniform per shot and the
    outcome is an array.
    """
    axis = axis.upper()
    n = state.num_qubits
    (q,) = _check_targets(n, [q])
    rot = _TO_Z[axis]
    batched = isinstance(state, TrajectoryBatch)
    apply = _batch_apply if batched else _pure_apply
    amps = state.amplitudes
    if axis != "Z":
        amps = apply(amps, n, rot, [q])
    bit, amps = _collapse_z(amps, n, q, u)
    if axis != "Z":
        amps = apply(amps, n, rot.conj().T, [q])
    outcome = np.where(bit, -1, 1).astype(np.int8)
    if batched:
        return outcome, TrajectoryBatch(n, amps)
    return int(outcome), PureState(n, amps)


def reset_to_zero(state, qubits, rng=None):
    """Reset ``qubits`` to |0>.

    Density matrices get the exact reset channel.  Pure states are measured in
    Z and flipped on outcome -1, which reproduces the channel on average.
    """
    qubits = _check_targets(state.num_qubits, qubits)
    if isinstance(state, DensityMatrix):
        return _reset_channel(state, qubits)
    if isinstance(state, PureState):
        if rng is None:
            raise ValueError("pure-state reset needs an rng")
        for q in qubits:
            state = reset_qubit_with(state, q, rng.random())
        return state
    raise TypeError(f"unsupported state type {type(state).__name__}")


def reset_qubit_with(state, q, u):
    """Measure-and-flip reset of one qubit driven by uniform(s) ``u``."""
    n = state.num_qubits
    batched = isinstance(state, TrajectoryBatch)
    bit, amps = _collapse_z(state.amplitudes, n, q, u)
    # outcome 1: apply X, i.e. permute amplitudes by flipping bit q
    flipped = amps[..., np.arange(2**n) ^ (1 << q)]
    amps = np.where(np.asarray(bit)[..., None], flipped, amps)
    if batched:
        return TrajectoryBatch(n, amps)
    return PureState(n, amps)


def _einsum_indices(n):
    return list(range(n)), list(range(n, 2 * n))


def partial_trace(dm: DensityMatrix, discard) -> DensityMatrix:
    """Trace out ``discard``; kept qubits keep their relative order."""
    n = dm.num_qubits
    discard = set(_check_targets(n, discard))
    keep = [q for q in range(n) if q not in discard]
    rows, cols = _einsum_indices(n)
    for q in discard:
        cols[n - 1 - q] = rows[n - 1 - q]
    out = [rows[n - 1 - q] for q in reversed(keep)] + [cols[n - 1 - q] for q in reversed(keep)]
    t = dm.matrix.reshape((2,) * (2 * n))
    red = np.einsum(t, rows + cols, out)
    k = len(keep)
    return DensityMatrix(k, np.asarray(red).reshape(2**k, 2**k), dm.normalized)


def embed(parts, n) -> DensityMatrix:
    """Tensor together operators living on disjoint qubit sets.

    ``parts`` is a list of ``(matrix, qubits)`` with ``qubits`` ascending and
    ``matrix`` in the usual bit order over those qubits.  Together the qubit
    sets must cover ``range(n)``.
    """
    covered = sorted(q for _, qs in parts for q in qs)
    if covered != list(range(n)):
        raise ValueError("parts must partition the qubits")
    rows, cols = _einsum_indices(n)
    operands = []
    for mat, qs in parts:
        k = len(qs)
        if list(qs) != sorted(qs):
            raise ValueError("qubits of each part must be ascending")
        t = np.asarray(mat, dtype=complex).reshape((2,) * (2 * k))
        idx = [rows[n - 1 - q] for q in reversed(qs)] + [cols[n - 1 - q] for q in reversed(qs)]
        operands += [t, idx]
    full = np.einsum(*operands, rows + cols)
    return DensityMatrix(n, full.reshape(2**n, 2**n))


def _zero_projector(k):
    m = np.zeros((2**k, 2**k), dtype=complex)
    m[0, 0] = 1.0
    return m


def _reset_channel(dm: DensityMatrix, qubits) -> DensityMatrix:
    if not qubits:
        return dm.copy()
    n = dm.num_qubits
    keep = [q for q in range(n) if q not in set(qubits)]
    red = partial_trace(dm, qubits)
    out = embed([(red.matrix, keep), (_zero_projector(len(qubits)), sorted(qubits))], n)
    out.normalized = dm.normalized
    return out


def depolarize(dm: DensityMatrix, qubits, eps) -> DensityMatrix:
    """``rho -> (1-eps) rho + eps * (I/d) ⊗ Tr_support[rho]`` on ``qubits``."""
    if eps == 0:
        return dm.copy()
    n = dm.num_qubits
    qubits = sorted(_check_targets(n, qubits))
    keep = [q for q in range(n) if q not in set(qubits)]
    k = len(qubits)
    red = partial_trace(dm, qubits)
    mixed = embed([(red.matrix, keep), (np.eye(2**k) / 2**k, qubits)], n)
    return DensityMatrix(n, (1 - eps) * dm.matrix + eps * mixed.matrix, dm.normalized)


def von_neumann_entropy(dm: DensityMatrix) -> float:
    """``-sum lambda ln lambda`` in nats, dropping eigenvalues below 1e-12."""
    if dm.num_qubits == 0:
        return 0.0
    m = dm.matrix
    evals = np.linalg.eigvalsh((m + m.conj().T) / 2)
    if evals.min() < -1e-8:
        raise InvalidStateError(f"negative eigenvalue {evals.min():.3e}")
    return _entropy_of_spectrum(evals)


def _entropy_of_spectrum(p):
    p = p[p > ENTROPY_CUTOFF]
    return max(0.0, float(-np.sum(p * np.log(p))))


def schmidt_spectrum(state: PureState, region) -> np.ndarray:
    """Eigenvalues of the reduced state of ``region`` via an SVD."""
    n = state.num_qubits
    region = _check_targets(n, region)
    rest = [q for q in range(n) if q not in set(region)]
    t = state.amplitudes.reshape((2,) * n)
    order = [n - 1 - q for q in reversed(region)] + [n - 1 - q for q in reversed(rest)]
    m = np.transpose(t, order).reshape(2 ** len(region), 2 ** len(rest))
    s = np.linalg.svd(m, compute_uv=False)
    return s**2


def reduced_density_matrix(state, region) -> DensityMatrix:
    """Reduced state on ``region`` (ascending order kept)."""
    region = sorted(_check_targets(state.num_qubits, region))
    n = state.num_qubits
    if isinstance(state, PureState):
        rest = [q for q in range(n) if q not in set(region)]
        t = state.amplitudes.reshape((2,) * n)
        order = [n - 1 - q for q in reversed(region)] + [n - 1 - q for q in reversed(rest)]
        m = np.transpose(t, order).reshape(2 ** len(region), -1)
        return DensityMatrix(len(region), m @ m.conj().T)
    keep = set(region)
    return partial_trace(state, [q for q in range(n) if q not in keep])


def check_state(state, atol=1e-10):
    """Raise InvalidStateError if a state breaks its type invariants."""
    if isinstance(state, PureState):
        if abs(state.norm() - 1) > atol:
            raise InvalidStateError(f"norm deviates by {abs(state.norm() - 1):.2e}")
        return
    m = state.matrix
    if not np.allclose(m, m.conj().T, atol=atol):
        raise InvalidStateError("matrix is not Hermitian")
    if state.normalized:
        if abs(np.trace(m) - 1) > atol:
            raise InvalidStateError("trace is not 1")
        if np.linalg.eigvalsh(m).min() < -1e-9:
            raise InvalidStateError("matrix is not positive semidefinite")

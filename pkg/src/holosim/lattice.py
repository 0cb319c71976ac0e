"""2D lattice Hamiltonians, exact diagonalisation and reference states.

Sites ``(x, y)`` map to qubit ``x + lx * y`` whenever a 2D state is written
out as one register (ED, brute-force history, toric-code layout aside).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .device import TWO_QUBIT_GENERATORS, build_layout, build_template
from .holography import (
    ExactEvaluator,
    IncompatibleBasisError,
    MultiTimeObservable,
    RunSpec,
    mean_and_stderr,
    sample_histories,
    shot_products,
)
from .quantum import DEFAULT_LIMITS, CapacityError, PauliString, PureState

MAX_ED_SITES = 16
_DENSE_ED_SITES = 10


@dataclass(frozen=True)
class Lattice2D:
    lx: int
    ly: int
    boundary: str = "open"

    def __post_init__(self):
        if self.lx < 1 or self.ly < 1:
            raise ValueError("lattice dimensions must be >= 1")
        if self.boundary not in ("open", "periodic-x"):
            raise ValueError("boundary must be 'open' or 'periodic-x'")

    @property
    def num_sites(self):
        return self.lx * self.ly

    def site_index(self, x, y):
        return x + self.lx * y

    def bonds(self):
        """Nearest-neighbour pairs; a periodic wrap is only added for lx > 2."""
        out = []
        wrap = self.boundary == "periodic-x" and self.lx > 2
        for y in range(self.ly):
            for x in range(self.lx - 1):
                out.append(((x, y), (x + 1, y)))
            if wrap:
                out.append(((self.lx - 1, y), (0, y)))
        for y in range(self.ly - 1):
            for x in range(self.lx):
                out.append(((x, y), (x, y + 1)))
        return out


@dataclass(frozen=True)
class Hamiltonian2D:
    lattice: Lattice2D
    terms: tuple  # ((coefficient, MultiTimeObservable), ...)

    def __post_init__(self):
        terms = tuple((float(c), o) for c, o in self.terms)
        for c, o in terms:
            if not math.isfinite(c):
                raise ValueError("coefficients must be finite")
            o.check_bounds(self.lattice.lx, self.lattice.ly)
        object.__setattr__(self, "terms", terms)

    def to_text(self):
        """One term per line: coefficient then ``x y axis`` triples."""
        lat = self.lattice
        lines = [f"# lattice {lat.lx} {lat.ly} {lat.boundary}"]
        for c, o in self.terms:
            parts = [repr(c)] + [f"{x} {y} {a}" for (x, y), a in o.factors]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, lattice=None):
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                tok = line[1:].split()
                if tok and tok[0] == "lattice" and lattice is None:
                    lattice = Lattice2D(int(tok[1]), int(tok[2]), tok[3] if len(tok) > 3 else "open")
                continue
            tok = line.split()
            if (len(tok) - 1) % 3:
                raise ValueError(f"malformed term line: {line!r}")
            triples = [(int(tok[i]), int(tok[i + 1]), tok[i + 2]) for i in range(1, len(tok), 3)]
            terms.append((float(tok[0]), MultiTimeObservable.of(*triples)))
        if lattice is None:
            raise ValueError("no lattice given and no '# lattice' header found")
        return cls(lattice, tuple(terms))


def build_tfim(lattice: Lattice2D, J, h) -> Hamiltonian2D:
    """``-J sum_<ij> Z_i Z_j - h sum_i X_i``."""
    terms = [(-J, MultiTimeObservable.of((*a, "Z"), (*b, "Z"))) for a, b in lattice.bonds()]
    terms += [
        (-h, MultiTimeObservable.of((x, y, "X")))
        for y in range(lattice.ly)
        for x in range(lattice.lx)
    ]
    return Hamiltonian2D(lattice, tuple(terms))


def cluster_stabilizers(lx, ly):
    """``X_(x,y)`` times Z on every existing nearest neighbour."""
    out = []
    for y in range(ly):
        for x in range(lx):
            f = [(x, y, "X")]
            for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                if 0 <= x + dx < lx and 0 <= y + dy < ly:
                    f.append((x + dx, y + dy, "Z"))
            out.append(MultiTimeObservable.of(*f))
    return out


def cluster_hamiltonian(lx, ly) -> Hamiltonian2D:
    """Minus the sum of cluster stabilizers; ground energy per site is -1."""
    return Hamiltonian2D(Lattice2D(lx, ly), tuple((-1.0, s) for s in cluster_stabilizers(lx, ly)))


# ------------------------------------------------------------------------ ED


def pauli_sparse(n, pauli: PauliString):
    """Sparse matrix of a Pauli string on ``n`` qubits (qubit 0 = LSB)."""
    b = np.arange(2**n, dtype=np.int64)
    xmask = zmask = 0
    ny = 0
    for q, a in pauli.factors:
        if a in ("X", "Y"):
            xmask |= 1 << q
        if a in ("Y", "Z"):
            zmask |= 1 << q
        ny += a == "Y"
    parity = np.zeros(b.size, dtype=np.int64)
    v = b & zmask
    while v.any():
        parity ^= v & 1
        v = v >> 1
    data = (1j**ny) * (1 - 2 * parity)
    return sparse.csr_matrix((data, (b ^ xmask, b)), shape=(2**n, 2**n))


def hamiltonian_matrix(h: Hamiltonian2D):
    lat = h.lattice
    n = lat.num_sites
    if n > MAX_ED_SITES:
        raise CapacityError(f"{n} sites exceeds the ED cap of {MAX_ED_SITES}")
    mat = sparse.csr_matrix((2**n, 2**n), dtype=complex)
    for c, o in h.terms:
        p = PauliString(tuple((lat.site_index(x, y), a) for (x, y), a in o.factors))
        mat = mat + c * pauli_sparse(n, p)
    return mat


def ed_ground_energy(h: Hamiltonian2D) -> float:
    """Lowest eigenvalue of the Hamiltonian (dense up to 10 sites, Lanczos above)."""
    mat = hamiltonian_matrix(h)
    if h.lattice.num_sites <= _DENSE_ED_SITES:
        return float(np.linalg.eigvalsh(mat.toarray())[0])
    val = spla.eigsh(mat, k=1, which="SA", return_eigenvectors=False, tol=1e-12)
    return float(val[0])


# -------------------------------------------------------------------- energy


@dataclass
class EnergyReport:
    total: float
    per_site: float
    terms: list  # (label, coefficient, value, stderr)
    sites: int
    shots: int = 0
    stderr: float = 0.0
    passes: int = 0

    @property
    def per_site_stderr(self):
        return self.stderr / self.sites


def group_terms(h: Hamiltonian2D):
    """Greedy first-fit grouping of terms into measurement passes.

    Returns ``[(bases, term_indices), ...]``; sites a pass leaves free are
    measured in Z.
    """
    passes = []
    for i, (_, o) in enumerate(h.terms):
        for want, members in passes:
            if all(want.get(s, a) == a for s, a in o.factors):
                want.update(dict(o.factors))
                members.append(i)
                break
        else:
            passes.append((dict(o.factors), [i]))
    lat = h.lattice
    out = []
    for want, members in passes:
        grid = [["Z"] * lat.lx for _ in range(lat.ly)]
        for (x, y), a in want.items():
            grid[y][x] = a
        out.append((tuple(tuple(r) for r in grid), members))
    return out


def pass_seed(seed, k):
    return int(np.random.SeedSequence([int(seed), k]).generate_state(1)[0])


def _check_match(spec: RunSpec, h: Hamiltonian2D):
    if (spec.lx, spec.ly) != (h.lattice.lx, h.lattice.ly):
        raise ValueError(
            f"device simulates {spec.lx}x{spec.ly} but the Hamiltonian lives on "
            f"{h.lattice.lx}x{h.lattice.ly}"
        )


def energy_per_site(
    spec: RunSpec,
    h: Hamiltonian2D,
    mode="exact",
    shots=None,
    seed=None,
    threads=1,
    limits=DEFAULT_LIMITS,
) -> EnergyReport:
    """Energy of the device's 2D state, exactly or from sampled passes.

    Sampled mode: per pass, every shot yields one energy sample (sum of the
    harvested terms); passes are independent so their variances add.
    """
    _check_match(spec, h)
    n_sites = h.lattice.num_sites
    if mode == "exact":
        ev = ExactEvaluator(spec, limits)
        terms = [(str(o), c, ev.expectation(o), 0.0) for c, o in h.terms]
        total = math.fsum(c * v for _, c, v, _ in terms)
        return EnergyReport(total, total / n_sites, terms, n_sites)
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if shots is None or seed is None:
        raise ValueError("sampled mode needs shots and seed")
    groups = group_terms(h)
    values = [None] * len(h.terms)
    means, variances = [], []
    for k, (bases, members) in enumerate(groups):
        rec = sample_histories(spec, bases, shots, pass_seed(seed, k), threads, limits)
        acc = np.zeros(shots)
        for i in members:
            c, o = h.terms[i]
            try:
                prod = shot_products(rec, o)
            except IncompatibleBasisError as exc:  # pragma: no cover - grouping guarantees fit
                raise RuntimeError(f"term {o} not measurable in its pass") from exc
            acc += c * prod
            values[i] = (str(o), c) + mean_and_stderr(prod)
        m, se = mean_and_stderr(acc)
        means.append(m)
        variances.append(se**2)
    total = math.fsum(means)
    stderr = math.sqrt(math.fsum(variances))
    return EnergyReport(
        total, total / n_sites, values, n_sites, shots * len(groups), stderr, len(groups)
    )


# ------------------------------------------------------------ cluster preset

_HALF_PI_ROOT2 = np.pi / (2 * np.sqrt(2))
H_ANGLES = np.array([_HALF_PI_ROOT2, 0.0, _HALF_PI_ROOT2])


def _two_qubit_block(**angles):
    block = np.zeros(15)
    for label, v in angles.items():
        block[TWO_QUBIT_GENERATORS.index(label)] = v
    return block


CZ_ANGLES = _two_qubit_block(ZI=-np.pi / 4, IZ=-np.pi / 4, ZZ=np.pi / 4)
SWAP_ANGLES = _two_qubit_block(XX=np.pi / 4, YY=np.pi / 4, ZZ=np.pi / 4)

CLUSTER_SCHEDULE = ("single", "even", "odd", "vertical", "vertical")


def cluster_preset(lx, ly) -> RunSpec:
    """Device run whose measured rows form the ``lx x ly`` open cluster state.

    Bath rail above an all-system rail, no sinks.  Step ``t``: Hadamard the
    fresh system row, CZ along the bath row (which holds row ``t``), CZ
    bath-system (edges to row ``t+1``), then SWAP so row ``t`` is read out
    and row ``t+1`` stays in the bath.  Step 0 also Hadamards the bath; the
    last step skips the vertical CZ.
    """
    layout = build_layout(lx, 0, 0.0)
    template = build_template(layout, CLUSTER_SCHEDULE, 1)
    theta = np.zeros((ly, template.num_params))
    n = layout.n_columns
    slices = iter(template.block_slices)
    verticals_seen = 0
    for kind, layer in zip(template.kinds, template.layers):
        if kind == "vertical":
            verticals_seen += 1
        for slot in layer:
            sl = next(slices)
            if kind == "single":
                if slot[0] < n:
                    theta[:, sl] = H_ANGLES
                else:
                    theta[0, sl] = H_ANGLES
            elif kind == "vertical" and verticals_seen == 1:
                theta[: ly - 1, sl] = CZ_ANGLES
            elif kind == "vertical":
                theta[:, sl] = SWAP_ANGLES
            elif slot[0] >= n:  # horizontal pair on the bath rail
                theta[:, sl] = CZ_ANGLES
    return RunSpec(layout, template, theta, ly)


# --------------------------------------------------------------- toric code


def toric_code_edges(Lx, Ly):
    """Edge indices: horizontal ``(x, y)`` -> ``x + Lx*y``, vertical -> offset by ``Lx*Ly``."""

    def h(x, y):
        return (x % Lx) + Lx * (y % Ly)

    def v(x, y):
        return Lx * Ly + (x % Lx) + Lx * (y % Ly)

    return h, v


def toric_code_stabilizers(Lx, Ly):
    """``(vertex_ops, plaquette_ops)`` as PauliStrings."""
    h, v = toric_code_edges(Lx, Ly)
    verts, plaqs = [], []
    for y in range(Ly):
        for x in range(Lx):
            vq = sorted({h(x, y), h(x - 1, y), v(x, y), v(x, y - 1)})
            pq = sorted({h(x, y), h(x, y + 1), v(x, y), v(x + 1, y)})
            verts.append(PauliString(tuple((q, "X") for q in vq)))
            plaqs.append(PauliString(tuple((q, "Z") for q in pq)))
    return verts, plaqs


def toric_code_ground_state(Lx, Ly, limits=DEFAULT_LIMITS) -> PureState:
    """Project |0...0> onto all vertex stabilizers (plaquettes already +1)."""
    n = 2 * Lx * Ly
    limits.check_pure(n)
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = 1.0
    verts, _ = toric_code_stabilizers(Lx, Ly)
    idx = np.arange(2**n)
    for op in verts:
        mask = sum(1 << q for q in op.qubits)
        amps = 0.5 * (amps + amps[idx ^ mask])
    return PureState(n, amps / np.linalg.norm(amps))

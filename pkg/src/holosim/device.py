"""The 1D device: two-rail register layout, step circuit template, noise.

Qubit ids on the device: bottom-rail column ``c`` is id ``c``; top-rail
position ``c`` is id ``n_columns + c``.  The top rail is aligned with the
bottom rail from column 0 and may be shorter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .quantum import (
    PAULI,
    DensityMatrix,
    PureState,
    TrajectoryBatch,
    apply_unitary,
    depolarize,
    pauli_matrix,
    reset_qubit_with,
    reset_to_zero,
)

SYSTEM, BATH, SINK = "system", "bath", "sink"

PAULI_LABELS = "IXYZ"
TWO_QUBIT_GENERATORS = tuple(a + b for a in PAULI_LABELS for b in PAULI_LABELS)[1:]
ONE_QUBIT_GENERATORS = ("X", "Y", "Z")
_GEN2 = np.array([pauli_matrix(g) for g in TWO_QUBIT_GENERATORS])
_GEN1 = np.array([PAULI[g] for g in ONE_QUBIT_GENERATORS])

LAYER_KINDS = ("vertical", "even", "odd", "single")
_LAYER_ALIASES = {
    "vertical": "vertical",
    "even": "even",
    "even-horizontal": "even",
    "odd": "odd",
    "odd-horizontal": "odd",
    "single": "single",
}


@dataclass(frozen=True)
class RegisterLayout:
    bottom_roles: tuple
    sink_rail: tuple

    def __post_init__(self):
        bottom = tuple(str(r) for r in self.bottom_roles)
        top = tuple(bool(s) for s in self.sink_rail)
        object.__setattr__(self, "bottom_roles", bottom)
        object.__setattr__(self, "sink_rail", top)
        if any(r not in (SYSTEM, BATH) for r in bottom):
            raise ValueError("bottom roles must be 'system' or 'bath'")
        if len(top) > len(bottom):
            raise ValueError("top rail cannot be longer than the bottom rail")
        if self.lx < 1:
            raise ValueError("layout needs at least one system qubit")
        nbrs = self.neighbors
        for q in self.system_qubits:
            if not any(self.role(p) != SYSTEM for p in nbrs[q]):
                raise ValueError(f"system qubit {q} has no bath or sink neighbour")

    @property
    def n_columns(self):
        return len(self.bottom_roles)

    @property
    def n_top(self):
        return len(self.sink_rail)

    @property
    def num_qubits(self):
        return self.n_columns + self.n_top

    def role(self, q):
        n = self.n_columns
        if q < n:
            return self.bottom_roles[q]
        return SINK if self.sink_rail[q - n] else BATH

    def top_id(self, c):
        return self.n_columns + c

    @cached_property
    def system_qubits(self):
        return tuple(c for c, r in enumerate(self.bottom_roles) if r == SYSTEM)

    @cached_property
    def bath_qubits(self):
        return tuple(q for q in range(self.num_qubits) if self.role(q) == BATH)

    @cached_property
    def sink_qubits(self):
        return tuple(q for q in range(self.num_qubits) if self.role(q) == SINK)

    @cached_property
    def aux_qubits(self):
        """Bath and sink ids, ascending."""
        return tuple(q for q in range(self.num_qubits) if self.role(q) != SYSTEM)

    @property
    def lx(self):
        return len(self.system_qubits)

    @property
    def bath_ratio(self):
        return len(self.bath_qubits) / self.lx

    @cached_property
    def adjacency(self):
        n, m = self.n_columns, self.n_top
        pairs = [(c, c + 1) for c in range(n - 1)]
        pairs += [(n + c, n + c + 1) for c in range(m - 1)]
        pairs += [(c, n + c) for c in range(m)]
        return tuple(pairs)

    @cached_property
    def neighbors(self):
        nb = {q: set() for q in range(self.num_qubits)}
        for a, b in self.adjacency:
            nb[a].add(b)
            nb[b].add(a)
        return {q: frozenset(s) for q, s in nb.items()}

    def is_adjacent(self, a, b):
        return b in self.neighbors.get(a, ())

    def to_dict(self):
        return {"bottom_roles": list(self.bottom_roles), "sink_rail": list(self.sink_rail)}


def build_layout(lx, bath_per_system, sink_rail_fraction, top_columns=None) -> RegisterLayout:
    """Bottom rail with a system qubit every ``bath_per_system + 1`` columns.

    The top rail (``top_columns`` long, default the full width) has
    ``ceil(fraction * length)`` sink positions spread evenly, the rest bath.
    """
    if lx < 1:
        raise ValueError("lx must be >= 1")
    if bath_per_system < 0:
        raise ValueError("bath_per_system must be >= 0")
    if not 0.0 <= sink_rail_fraction <= 1.0:
        raise ValueError("sink_rail_fraction must be in [0, 1]")
    period = bath_per_system + 1
    n = lx * period
    bottom = [SYSTEM if c % period == bath_per_system else BATH for c in range(n)]
    m = n if top_columns is None else int(top_columns)
    if not 0 <= m <= n:
        raise ValueError("top_columns must be between 0 and the bottom-rail length")
    n_sink = min(m, math.ceil(sink_rail_fraction * m - 1e-12))
    sinks = {(i * m) // n_sink for i in range(n_sink)} if n_sink else set()
    return RegisterLayout(tuple(bottom), tuple(c in sinks for c in range(m)))


@dataclass(frozen=True)
class CircuitTemplate:
    """Fixed gate geometry of one device step: a list of layers of slots."""

    layers: tuple
    kinds: tuple = ()  # layer kind names when built from a schedule

    def __post_init__(self):
        layers = tuple(tuple(tuple(int(q) for q in slot) for slot in layer) for layer in self.layers)
        for layer in layers:
            seen = [q for slot in layer for q in slot]
            if len(seen) != len(set(seen)):
                raise ValueError("a qubit appears twice within one layer")
            for slot in layer:
                if len(slot) not in (1, 2):
                    raise ValueError("slots hold one or two qubits")
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self):
        return len(self.layers)

    @cached_property
    def slots(self):
        return tuple(slot for layer in self.layers for slot in layer)

    @cached_property
    def block_slices(self):
        out, start = [], 0
        for slot in self.slots:
            size = 15 if len(slot) == 2 else 3
            out.append(slice(start, start + size))
            start += size
        return tuple(out)

    @property
    def num_params(self):
        return sum(15 if len(s) == 2 else 3 for s in self.slots)

    @property
    def num_two_qubit(self):
        return sum(len(s) == 2 for s in self.slots)

    def validate_for(self, layout: RegisterLayout):
        for slot in self.slots:
            for q in slot:
                if not 0 <= q < layout.num_qubits:
                    raise ValueError(f"slot {slot} outside the layout")
            if len(slot) == 2 and not layout.is_adjacent(*slot):
                raise ValueError(f"slot {slot} is not a nearest-neighbour pair")

    def to_dict(self):
        return {
            "layers": [[list(s) for s in layer] for layer in self.layers],
            "kinds": list(self.kinds),
        }


def _layer(layout: RegisterLayout, kind):
    n, m = layout.n_columns, layout.n_top
    if kind == "vertical":
        return [(c, n + c) for c in range(m)]
    if kind == "single":
        return [(q,) for q in range(layout.num_qubits)]
    start = 0 if kind == "even" else 1
    slots = [(c, c + 1) for c in range(start, n - 1, 2)]
    slots += [(n + c, n + c + 1) for c in range(start, m - 1, 2)]
    return slots


def build_template(layout: RegisterLayout, schedule=("vertical", "even", "odd"), repetitions=1):
    """Brickwork step circuit: the schedule of layer kinds, repeated.

    Layer kinds are ``vertical`` (all rail-to-rail pairs), ``even`` and ``odd``
    (horizontal pairs starting at even/odd columns, both rails) and
    ``single`` (a one-qubit slot on every qubit).
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    kinds = []
    for k in schedule:
        if k not in _LAYER_ALIASES:
            raise ValueError(f"unknown layer kind {k!r}")
        kinds.append(_LAYER_ALIASES[k])
    built = [(k, _layer(layout, k)) for _ in range(repetitions) for k in kinds]
    built = [(k, l) for k, l in built if l]
    tpl = CircuitTemplate(tuple(l for _, l in built), tuple(k for k, _ in built))
    tpl.validate_for(layout)
    return tpl


def gate_from_parameters(block) -> np.ndarray:
    """Unitary ``exp(i sum_k theta_k G_k)`` over non-identity Pauli products.

    15 angles give a two-qubit gate (generators ordered as
    ``TWO_QUBIT_GENERATORS``), 3 angles a one-qubit gate over X, Y, Z.
    """
    block = np.asarray(block, dtype=float)
    if block.shape == (15,):
        gens = _GEN2
    elif block.shape == (3,):
        gens = _GEN1
    else:
        raise ValueError(f"parameter block must have length 15 or 3, got {block.size}")
    h = np.tensordot(block, gens, axes=1)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


@dataclass(frozen=True)
class NoiseModel:
    epsilon: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")

    @property
    def active(self):
        return self.enabled and self.epsilon > 0


NOISELESS = NoiseModel(0.0, enabled=False)


def compile_step(template: CircuitTemplate, theta):
    """List of ``(targets, unitary)`` in execution order."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (template.num_params,):
        raise ValueError(
            f"parameter vector has length {theta.size}, template needs {template.num_params}"
        )
    return [
        (slot, gate_from_parameters(theta[sl]))
        for slot, sl in zip(template.slots, template.block_slices)
    ]


def uniforms_per_step(layout, template, noise, reset_sinks=True):
    """Uniform draws one trajectory step consumes (resets + noise)."""
    n = layout.lx + (len(layout.sink_qubits) if reset_sinks else 0)
    if noise.active:
        n += 2 * len(template.slots)
    return n


def apply_step(
    state,
    layout: RegisterLayout,
    template: CircuitTemplate,
    theta,
    noise: NoiseModel = NOISELESS,
    rng=None,
    reset_sinks=True,
    gates=None,
    draw=None,
):
    """One device time step on a state covering every layout qubit.

    Order: reset system qubits, reset sink qubits, then the template layers.
    With noise each gate is followed by depolarisation of its support.
    Density matrices evolve exactly; pure states and trajectory batches are
    stochastic unravellings and need ``rng`` (pure) or ``draw`` (batch: a
    callable returning one uniform per shot).  ``gates`` may carry a
    precompiled :func:`compile_step` result.
    """
    if state.num_qubits != layout.num_qubits:
        raise ValueError("state must cover every layout qubit")
    if gates is None:
        gates = compile_step(template, theta)
    sinks = layout.sink_qubits if reset_sinks else ()
    if isinstance(state, DensityMatrix):
        state = reset_to_zero(state, list(layout.system_qubits) + list(sinks))
        for targets, u in gates:
            state = apply_unitary(state, u, targets)
            if noise.active:
                state = depolarize(state, targets, noise.epsilon)
        return state

    if isinstance(state, PureState):
        if rng is None:
            raise ValueError("trajectory mode needs an rng")
        draw = rng.random
    elif not isinstance(state, TrajectoryBatch) or draw is None:
        raise TypeError("batch trajectories need a draw callable")
    for q in list(layout.system_qubits) + list(sinks):
        state = reset_qubit_with(state, q, draw())
    for targets, u in gates:
        state = apply_unitary(state, u, targets)
        if noise.active:
            state = _pauli_kick(state, targets, noise.epsilon, draw(), draw())
    return state


# index 0 is the identity
_KICKS = {k: [pauli_matrix("".join(p)) for p in product(PAULI_LABELS, repeat=k)] for k in (1, 2)}


def _pauli_kick(state, targets, eps, u_hit, u_which):
    """With probability eps apply a uniformly random Pauli (identity included)."""
    kicks = _KICKS[len(targets)]
    d2 = len(kicks)
    if isinstance(state, PureState):
        if u_hit >= eps:
            return state
        idx = min(int(u_which * d2), d2 - 1)
        return apply_unitary(state, kicks[idx], targets) if idx else state
    hit = np.asarray(u_hit) < eps
    idx = np.minimum((np.asarray(u_which) * d2).astype(int), d2 - 1)
    idx = np.where(hit, idx, 0)
    amps = state.amplitudes.copy()
    for j in np.unique(idx):
        if j == 0:
            continue
        sel = idx == j
        sub = TrajectoryBatch(state.num_qubits, amps[sel])
        amps[sel] = apply_unitary(sub, kicks[j], targets).amplitudes
    return TrajectoryBatch(state.num_qubits, amps)

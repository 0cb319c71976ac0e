"""Accept-if-lower random-perturbation loop over the step circuit parameters."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .holography import RunSpec
from .lattice import Hamiltonian2D, energy_per_site
from .quantum import DEFAULT_LIMITS


@dataclass(frozen=True)
class OptimizerConfig:
    sigma: float = 0.05
    slots_per_move: int = 1
    max_iters: int = 5000
    seed: int = 0
    mode: str = "exact"
    shots: int | None = None
    # sampled mode only: accept iff E' < E - margin * stderr(E' - E)
    acceptance_margin: float = 2.0
    convergence_window: int = 1000
    convergence_tol: float = 1e-6
    per_step: bool = False

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.slots_per_move < 1:
            raise ValueError("slots_per_move must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.mode not in ("exact", "sampled"):
            raise ValueError("mode must be 'exact' or 'sampled'")
        if self.mode == "sampled" and not self.shots:
            raise ValueError("sampled mode needs shots")
        if self.acceptance_margin < 0:
            raise ValueError("acceptance_margin must be >= 0")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")


@dataclass
class OptimizationTrace:
    proposed: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    best: list = field(default_factory=list)
    stderr: list = field(default_factory=list)
    theta: np.ndarray | None = None
    converged: bool = False

    @property
    def iterations(self):
        return len(self.proposed)

    def record(self, energy, accepted, best, se=0.0):
        self.proposed.append(float(energy))
        self.accepted.append(bool(accepted))
        self.best.append(float(best))
        self.stderr.append(float(se))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "proposed_energy", "accepted", "best_energy"])
            for i, (e, a, b) in enumerate(zip(self.proposed, self.accepted, self.best)):
                w.writerow([i, repr(e), int(a), repr(b)])


def parameter_blocks(spec: RunSpec, per_step=None):
    """Index arrays into the flattened parameter vector, one per gate block."""
    per_step = spec.per_step if per_step is None else per_step
    p = spec.template.num_params
    blocks = [np.arange(sl.start, sl.stop) for sl in spec.template.block_slices]
    if not per_step:
        return blocks
    return [t * p + b for t in range(spec.ly) for b in blocks]


def perturb(theta, blocks, config: OptimizerConfig, rng):
    """Add N(0, sigma) noise to ``slots_per_move`` blocks picked without replacement."""
    k = config.slots_per_move
    if k > len(blocks):
        raise ValueError(f"slots_per_move={k} exceeds the {len(blocks)} gate blocks")
    flat = np.array(theta, dtype=float).reshape(-1)
    for b in rng.choice(len(blocks), size=k, replace=False):
        idx = blocks[b]
        flat[idx] += rng.normal(0.0, config.sigma, size=idx.size)
    return flat.reshape(np.shape(theta))


def _iteration_seed(seed, it):
    return int(np.random.SeedSequence([int(seed), int(it), 7]).generate_state(1)[0])


def run_optimization(
    spec: RunSpec,
    hamiltonian: Hamiltonian2D,
    config: OptimizerConfig,
    theta0=None,
    threads=1,
    limits=DEFAULT_LIMITS,
    callback=None,
):
    """Propose, evaluate, keep only improvements.

    ``max_iters`` counts energy evaluations, the starting point included.
    Stops early once the best energy has improved by less than
    ``convergence_tol`` over the last ``convergence_window`` iterations.
    """
    if theta0 is None:
        shape = (spec.ly, spec.template.num_params) if config.per_step else (spec.template.num_params,)
        theta0 = np.zeros(shape)
    theta = np.array(theta0, dtype=float)
    spec = spec.with_theta(theta)
    blocks = parameter_blocks(spec)
    rng = np.random.default_rng(config.seed)

    def evaluate(th, it):
        try:
            if config.mode == "exact":
                rep = energy_per_site(spec.with_theta(th), hamiltonian, "exact", limits=limits)
            else:
                rep = energy_per_site(
                    spec.with_theta(th), hamiltonian, "sampled",
                    shots=config.shots, seed=_iteration_seed(config.seed, it),
                    threads=threads, limits=limits,
                )
        except Exception as exc:
            raise RuntimeError(f"energy evaluation failed at iteration {it}: {exc}") from exc
        return rep.per_site, rep.per_site_stderr

    trace = OptimizationTrace()
    e_cur, se_cur = evaluate(theta, 0)
    trace.record(e_cur, True, e_cur, se_cur)
    w = config.convergence_window
    for it in range(1, config.max_iters):
        cand = perturb(theta, blocks, config, rng)
        e, se = evaluate(cand, it)
        margin = 0.0
        if config.mode == "sampled":
            margin = config.acceptance_margin * math.hypot(se, se_cur)
        ok = e < e_cur - margin
        if ok:
            theta, e_cur, se_cur = cand, e, se
        trace.record(e, ok, e_cur, se)
        if callback is not None:
            callback(it, e, ok, e_cur)
        if it >= w and trace.best[it - w] - trace.best[it] < config.convergence_tol:
            trace.converged = True
            break
    trace.theta = theta
    return theta, trace


def theta_document(theta, spec: RunSpec, optimizer: OptimizerConfig | None = None, **extra):
    """JSON-ready description of a parameter vector and the device it fits."""
    doc = {
        "theta": np.asarray(theta, dtype=float).reshape(-1).tolist(),
        "shape": list(np.shape(theta)),
        "layout": spec.layout.to_dict(),
        "template": spec.template.to_dict(),
        "ly": spec.ly,
    }
    if optimizer is not None:
        doc["optimizer"] = asdict(optimizer)
    doc.update(extra)
    return doc


def write_theta_json(path, theta, spec, optimizer=None, **extra):
    with open(path, "w") as fh:
        json.dump(theta_document(theta, spec, optimizer, **extra), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_theta_json(path):
    with open(path) as fh:
        doc = json.load(fh)
    return np.array(doc["theta"], dtype=float).reshape(doc["shape"])

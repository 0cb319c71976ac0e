"""Declarative run configuration: one JSON document per run.

Every section is a dataclass; unknown keys are rejected by name and the
physics-affecting knobs (noise rate, mode, shots) have no defaults.
"""
from __future__ import annotations

import json
import os
from dataclasses import MISSING, asdict, dataclass, field, fields

import numpy as np

from .device import LAYER_KINDS, _LAYER_ALIASES, NoiseModel, build_layout, build_template
from .holography import MultiTimeObservable, RunSpec
from .lattice import (
    MAX_ED_SITES,
    Hamiltonian2D,
    Lattice2D,
    build_tfim,
    cluster_hamiltonian,
    cluster_preset,
)
from .quantum import Limits
from .varloop import OptimizerConfig, read_theta_json

MODES = ("exact", "sampled")
THETA_SOURCES = ("zeros", "file", "preset")
PRESETS = ("cluster",)
MODEL_KINDS = ("tfim", "cluster", "file")


class ConfigError(ValueError):
    """Schema or cap violation; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass
class LayoutConfig:
    lx: int
    bath_per_system: int = 0
    sink_rail_fraction: float = 0.0
    top_columns: int | None = None


@dataclass
class TemplateConfig:
    schedule: list = field(default_factory=lambda: ["vertical", "even", "odd"])
    repetitions: int = 1


@dataclass
class ThetaConfig:
    source: str = "zeros"
    path: str | None = None
    name: str | None = None
    per_step: bool = False


@dataclass
class NoiseConfig:
    epsilon: float


@dataclass
class ModelConfig:
    kind: str = "tfim"
    J: float = 1.0
    h: float = 1.0
    boundary: str = "open"
    path: str | None = None


@dataclass
class OptimizerSection:
    sigma: float = OptimizerConfig.sigma
    slots_per_move: int = OptimizerConfig.slots_per_move
    max_iters: int = OptimizerConfig.max_iters
    acceptance_margin: float = OptimizerConfig.acceptance_margin
    convergence_window: int = OptimizerConfig.convergence_window
    convergence_tol: float = OptimizerConfig.convergence_tol


@dataclass
class DiagnosticsConfig:
    suite: str = "appendix"
    fuzz_cases: int = 500


@dataclass
class LimitsConfig:
    pure_qubits: int = Limits.pure_qubits
    density_qubits: int = Limits.density_qubits


@dataclass
class RunConfig:
    noise: NoiseConfig
    mode: str
    shots: int | None
    layout: LayoutConfig | None = None
    ly: int | None = None
    template: TemplateConfig = field(default_factory=TemplateConfig)
    theta: ThetaConfig = field(default_factory=ThetaConfig)
    model: ModelConfig | None = None
    observables: list = field(default_factory=list)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    limits: LimitsConfig = field(default_factory=LimitsConfig)
    seed: int = 0
    out_dir: str = "."

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    # -- derived objects

    def build_limits(self) -> Limits:
        return Limits(self.limits.pure_qubits, self.limits.density_qubits)

    def require_device(self):
        if self.layout is None:
            raise ConfigError("layout", "this command needs a layout section")
        if self.ly is None:
            raise ConfigError("ly", "this command needs ly")

    def build_spec(self) -> RunSpec:
        self.require_device()
        noise = NoiseModel(self.noise.epsilon)
        if self.theta.source == "preset":
            spec = cluster_preset(self.layout.lx, self.ly)
            return RunSpec(spec.layout, spec.template, spec.theta, self.ly, noise)
        lay = self.layout
        layout = build_layout(lay.lx, lay.bath_per_system, lay.sink_rail_fraction, lay.top_columns)
        template = build_template(layout, tuple(self.template.schedule), self.template.repetitions)
        p = template.num_params
        shape = (self.ly, p) if self.theta.per_step else (p,)
        if self.theta.source == "zeros":
            theta = np.zeros(shape)
        else:
            theta = read_theta_json(self.theta.path)
            if theta.shape != shape:
                raise ConfigError("theta.path", f"holds shape {theta.shape}, template needs {shape}")
        return RunSpec(layout, template, theta, self.ly, noise)

    def build_model(self) -> Hamiltonian2D:
        m = self.model
        if m is None:
            raise ConfigError("model", "this command needs a model section")
        self.require_device()
        if m.kind == "tfim":
            return build_tfim(Lattice2D(self.layout.lx, self.ly, m.boundary), m.J, m.h)
        if m.kind == "cluster":
            return cluster_hamiltonian(self.layout.lx, self.ly)
        with open(m.path) as fh:
            return Hamiltonian2D.from_text(fh.read())

    def build_observables(self):
        return [MultiTimeObservable.parse(s) for s in self.observables]

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            mode=self.mode, shots=self.shots, seed=self.seed,
            per_step=self.theta.per_step, **asdict(self.optimizer),
        )

    def check_caps(self):
        """Raise before any simulation if the run would exceed a dense cap."""
        if self.layout is None:
            return None
        spec = self.build_spec()
        limits = self.build_limits()
        n = spec.layout.num_qubits
        try:
            if self.mode == "exact":
                limits.check_density(n)
            else:
                limits.check_pure(n)
        except ValueError as exc:
            raise ConfigError("layout", str(exc)) from exc
        return spec


# ------------------------------------------------------------------ parsing


def _from_dict(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, f"unknown key {key!r}")
    kwargs = {}
    for name, f in known.items():
        where = f"{path}.{name}" if path else name
        if name not in data:
            if f.default is MISSING and f.default_factory is MISSING:
                raise ConfigError(where, "required key is missing")
            continue
        value = data[name]
        sub = _SECTIONS.get((cls, name))
        if sub is not None and value is not None:
            value = _from_dict(sub, value, where)
        kwargs[name] = value
    return cls(**kwargs)


_SECTIONS = {
    (RunConfig, "layout"): LayoutConfig,
    (RunConfig, "template"): TemplateConfig,
    (RunConfig, "theta"): ThetaConfig,
    (RunConfig, "noise"): NoiseConfig,
    (RunConfig, "model"): ModelConfig,
    (RunConfig, "optimizer"): OptimizerSection,
    (RunConfig, "diagnostics"): DiagnosticsConfig,
    (RunConfig, "limits"): LimitsConfig,
}


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _require(cond, key, message):
    if not cond:
        raise ConfigError(key, message)


def validate(cfg: RunConfig, base_dir="."):
    if cfg.layout is not None or cfg.ly is not None:
        _validate_device(cfg)
    _validate_rest(cfg, base_dir)
    return cfg


def _validate_device(cfg):
    lay = cfg.layout
    _require(lay is not None, "layout", "ly is given, so a layout section is needed")
    _require(_is_int(lay.lx) and lay.lx >= 1, "layout.lx", "must be an integer >= 1")
    _require(_is_int(lay.bath_per_system) and lay.bath_per_system >= 0,
             "layout.bath_per_system", "must be an integer >= 0")
    _require(_is_real(lay.sink_rail_fraction) and 0 <= lay.sink_rail_fraction <= 1,
             "layout.sink_rail_fraction", "must be a number in [0, 1]")
    _require(lay.top_columns is None or (_is_int(lay.top_columns) and lay.top_columns >= 0),
             "layout.top_columns", "must be null or an integer >= 0")
    _require(_is_int(cfg.ly) and cfg.ly >= 1, "ly", "must be an integer >= 1")


def _validate_rest(cfg, base_dir):
    _require(_is_real(cfg.noise.epsilon) and 0 <= cfg.noise.epsilon <= 1,
             "noise.epsilon", "must be a number in [0, 1]")
    _require(cfg.mode in MODES, "mode", f"must be one of {MODES}")
    if cfg.mode == "sampled":
        _require(_is_int(cfg.shots) and cfg.shots >= 1, "shots", "sampled mode needs an integer >= 1")
    else:
        _require(cfg.shots is None, "shots", "must be null in exact mode")
    _require(_is_int(cfg.seed) and cfg.seed >= 0, "seed", "must be an integer >= 0")

    tpl = cfg.template
    _require(isinstance(tpl.schedule, list) and tpl.schedule, "template.schedule",
             "must be a non-empty list")
    for kind in tpl.schedule:
        _require(kind in _LAYER_ALIASES, "template.schedule",
                 f"unknown layer kind {kind!r}; expected one of {LAYER_KINDS}")
    _require(_is_int(tpl.repetitions) and tpl.repetitions >= 1, "template.repetitions",
             "must be an integer >= 1")

    th = cfg.theta
    _require(th.source in THETA_SOURCES, "theta.source", f"must be one of {THETA_SOURCES}")
    _require(isinstance(th.per_step, bool), "theta.per_step", "must be a boolean")
    if th.source == "file":
        _require(isinstance(th.path, str), "theta.path", "file source needs a path")
        th.path = os.path.normpath(os.path.join(base_dir, th.path))
        _require(os.path.exists(th.path), "theta.path", f"no such file {th.path}")
    if th.source == "preset":
        _require(th.name in PRESETS, "theta.name", f"must be one of {PRESETS}")
        _require(th.per_step, "theta.per_step", "the cluster preset is per-step")

    if cfg.model is not None:
        m = cfg.model
        _require(m.kind in MODEL_KINDS, "model.kind", f"must be one of {MODEL_KINDS}")
        _require(_is_real(m.J) and _is_real(m.h), "model", "J and h must be numbers")
        _require(m.boundary in ("open", "periodic-x"), "model.boundary",
                 "must be 'open' or 'periodic-x'")
        if m.kind == "file":
            _require(isinstance(m.path, str), "model.path", "file model needs a path")
            m.path = os.path.normpath(os.path.join(base_dir, m.path))

    _require(isinstance(cfg.observables, list), "observables", "must be a list of strings")
    if cfg.observables:
        _require(cfg.layout is not None, "observables", "need a layout and ly")
    for i, s in enumerate(cfg.observables):
        try:
            MultiTimeObservable.parse(s).check_bounds(cfg.layout.lx, cfg.ly)
        except (ValueError, IndexError, TypeError) as exc:
            raise ConfigError(f"observables[{i}]", str(exc)) from exc

    opt = cfg.optimizer
    _require(_is_real(opt.sigma) and opt.sigma >= 0, "optimizer.sigma", "must be >= 0")
    _require(_is_int(opt.slots_per_move) and opt.slots_per_move >= 1,
             "optimizer.slots_per_move", "must be an integer >= 1")
    _require(_is_int(opt.max_iters) and opt.max_iters >= 1, "optimizer.max_iters",
             "must be an integer >= 1")
    _require(_is_real(opt.acceptance_margin) and opt.acceptance_margin >= 0,
             "optimizer.acceptance_margin", "must be >= 0")
    _require(_is_int(opt.convergence_window) and opt.convergence_window >= 1,
             "optimizer.convergence_window", "must be an integer >= 1")
    _require(_is_real(opt.convergence_tol) and opt.convergence_tol >= 0,
             "optimizer.convergence_tol", "must be >= 0")

    _require(cfg.diagnostics.suite == "appendix", "diagnostics.suite", "only 'appendix' is shipped")
    _require(_is_int(cfg.diagnostics.fuzz_cases) and cfg.diagnostics.fuzz_cases >= 1,
             "diagnostics.fuzz_cases", "must be an integer >= 1")
    try:
        cfg.build_limits()
    except ValueError as exc:
        raise ConfigError("limits", str(exc)) from exc
    _require(isinstance(cfg.out_dir, str), "out_dir", "must be a string")


def config_from_dict(data, base_dir=".") -> RunConfig:
    return validate(_from_dict(RunConfig, data, ""), base_dir)


def parse_config(path) -> RunConfig:
    """Load, schema-check and cap-check a run configuration file."""
    if not os.path.exists(path):
        raise ConfigError("", f"config file not found: {path}")
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"{path} is not valid JSON: {exc}") from exc
    cfg = config_from_dict(data, os.path.dirname(os.path.abspath(path)))
    cfg.check_caps()
    return cfg


def ed_reference(cfg: RunConfig, hamiltonian):
    """ED ground energy per site, or None when the lattice is too large."""
    from .lattice import ed_ground_energy

    if hamiltonian.lattice.num_sites > MAX_ED_SITES:
        return None
    return ed_ground_energy(hamiltonian) / hamiltonian.lattice.num_sites

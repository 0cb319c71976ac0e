"""Emulator for simulating 2D quantum states as the measurement history of a 1D device."""
from .device import (
    NOISELESS,
    CircuitTemplate,
    NoiseModel,
    RegisterLayout,
    apply_step,
    build_layout,
    build_template,
    compile_step,
    gate_from_parameters,
)
from .entropy import (
    RegionSpec,
    TEEResult,
    cmi,
    local_constraint,
    region_entropy,
    tee_extract,
    weak_monotonicity,
)
from .holography import (
    MultiTimeObservable,
    RunSpec,
    brute_force_history_state,
    estimate_observable,
    exact_expectation,
    resource_estimate,
    resource_estimate_local,
    sample_histories,
    stability_scan,
)
from .lattice import (
    Hamiltonian2D,
    Lattice2D,
    build_tfim,
    cluster_preset,
    cluster_stabilizers,
    ed_ground_energy,
    energy_per_site,
    toric_code_ground_state,
)
from .quantum import (
    DEFAULT_LIMITS,
    CapacityError,
    DensityMatrix,
    Limits,
    PauliString,
    PureState,
    Unitary,
)
from .varloop import OptimizationTrace, OptimizerConfig, perturb, run_optimization

__version__ = "0.1.0"

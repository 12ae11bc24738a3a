"""Spin initialisation and readout of a charged quantum dot in a single-mode
or bi-modal optical cavity, simulated with a Lindblad master equation."""

from .core import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    SpaceMismatchError,
    Superoperator,
    annihilation,
    basis_projector,
    embed,
    liouvillian,
    ptrace_emitter,
    vacuum_state,
)
from .dynamics import (
    IntegrationError,
    IntegratorConfig,
    PositivityWarning,
    SteadyStateError,
    Trajectory,
    evolve,
    excited_population,
    steady_state,
)
from .experiments import (
    ExperimentResult,
    Setup,
    SweepGrid,
    run_dephasing_study,
    run_pulsed_initialisation,
    run_readout,
    run_steady_state_initialisation,
)
from .metrics import (
    ReadoutStats,
    emitted_photons,
    optimal_threshold,
    readout_fidelity,
    readout_stats,
    trace_distance,
)
from .model import (
    BIMODAL,
    SINGLE,
    CavityMode,
    CavityQDModel,
    DriveSpec,
    PulseEnvelope,
    SystemParams,
    build_drive_hamiltonian,
    build_static_hamiltonian,
    collapse_channels,
    evaluate_envelope,
    ghz,
    purcell_factor,
)
from .optimize import OptimizationSpec, minimize_scan

__version__ = "0.1.0"

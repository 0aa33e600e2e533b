"""Exact two-photon scattering on a two-level emitter in a 1D waveguide.

Direct time-domain integration of the two-excitation wavefunction over a
discretized bidirectional mode continuum, with transmission, directional
correlation, and entanglement observables.
"""

__version__ = "0.1.0"

from .core import (
    Branch,
    CalibrationError,
    Grid,
    GridCoverageError,
    GridResolutionError,
    PhysicalParams,
    SimulationError,
    SingleExcitationState,
    StabilityError,
    TwoExcitationState,
    build_grid,
    default_grid,
    detuning,
    mirror_single_state,
    mirror_state,
)
from .wavepackets import (
    UNCORRELATED,
    PulseSpec,
    TwoPhotonInputSpec,
    build_excited_emitter_state,
    build_single_photon_state,
    build_two_photon_state,
    phase_matching_factor,
    single_photon_profile,
)
from .dynamics import (
    CalibrationResult,
    IntegratorConfig,
    Trajectory,
    calibrate_coupling,
    evolve,
    evolve_single,
    fit_decay_rate,
    max_stable_dt,
    rhs_single_excitation,
    rhs_two_excitation,
)
from .observables import (
    ScatterReport,
    ZGrid,
    bell_fidelities,
    build_scatter_report,
    directional_counts,
    excitation_probability,
    max_excitation,
    photon_density,
    real_space_wavepacket,
    sector_probabilities,
    transmissions,
)
from .oracles import (
    FactorizationReport,
    SinglePhotonResult,
    factorization_check,
    lorentzian_transmission,
    lorentzian_transmission_amplitude,
    monochromatic_limit_sweep,
    single_photon_scatter,
)
from .config import ConfigError, RunConfig, parse_config, serialize_config

__all__ = [
    "Branch", "CalibrationError", "CalibrationResult", "ConfigError",
    "FactorizationReport", "Grid", "GridCoverageError", "GridResolutionError",
    "IntegratorConfig", "PhysicalParams", "PulseSpec", "RunConfig",
    "ScatterReport", "SimulationError", "SinglePhotonResult",
    "SingleExcitationState", "StabilityError", "Trajectory",
    "TwoExcitationState", "TwoPhotonInputSpec", "UNCORRELATED", "ZGrid",
    "bell_fidelities", "build_excited_emitter_state", "build_grid",
    "build_scatter_report", "build_single_photon_state",
    "build_two_photon_state", "calibrate_coupling", "default_grid",
    "detuning", "directional_counts", "evolve", "evolve_single",
    "excitation_probability", "factorization_check", "fit_decay_rate",
    "lorentzian_transmission", "lorentzian_transmission_amplitude",
    "max_excitation", "max_stable_dt", "mirror_single_state", "mirror_state",
    "monochromatic_limit_sweep", "parse_config", "phase_matching_factor",
    "photon_density", "real_space_wavepacket", "rhs_single_excitation",
    "rhs_two_excitation", "sector_probabilities", "serialize_config",
    "single_photon_profile", "single_photon_scatter", "transmissions",
]

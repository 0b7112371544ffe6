"""Multi-photon stimulated Raman scattering in a chain of two-level atoms.

Each photon crosses the medium atom by atom and is tracked exactly as a
pair of medium vectors (one per photon spin). Repeating the sweep photon by
photon gives three evolution modes: an exact branch tree, an exact
sector-blocked density matrix and Monte Carlo trajectories.
"""
from .errors import CapacityError, ConfigError, FitError, ResourceError, ShapeError, SRSError, UndefinedError
from .evolution import (
    KrausResult,
    PhotonSeries,
    SectorMixture,
    TrajectoryStats,
    TreeResult,
    run_exact_tree,
    run_kraus,
    run_mc,
)
from .observables import (
    PulseMetrics,
    ScalingFit,
    cooperative_slope,
    expansion_residuals,
    fit_loglog,
    pulse_metrics,
    second_photon_probabilities,
    sf_limit_study,
)
from .state import (
    MAX_ATOMS,
    BasisConfig,
    MediumState,
    ModelParams,
    basis_state,
    excitation_profile,
    inner,
    new_all_excited,
    new_all_ground,
)
from .sweep import PhotonSpin, SweepResult, VertexRules, parse_pattern, sweep, sweep_subchannels

__version__ = "0.1.0"

__all__ = [
    "BasisConfig", "CapacityError", "ConfigError", "FitError", "KrausResult", "MAX_ATOMS", "MediumState",
    "ModelParams", "PhotonSeries", "PhotonSpin", "PulseMetrics", "ResourceError", "SRSError", "ScalingFit",
    "SectorMixture", "ShapeError", "SweepResult", "TrajectoryStats", "TreeResult", "UndefinedError",
    "VertexRules", "basis_state", "cooperative_slope", "excitation_profile", "expansion_residuals",
    "fit_loglog", "inner", "new_all_excited", "new_all_ground", "parse_pattern", "pulse_metrics",
    "run_exact_tree", "run_kraus", "run_mc", "second_photon_probabilities", "sf_limit_study", "sweep",
    "sweep_subchannels", "__version__",
]

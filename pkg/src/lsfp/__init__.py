"""Large-scale fading precoding for multi-cell massive MIMO downlink."""

from .channel import LinkBudget, normalized_snr, pathloss_db, sample_fading
from .duality import DualitySolveConfig, algorithm3
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateBeamformerError,
    DomainError,
    IllConditionedError,
    LsfpError,
    SolverFailure,
)
from .feasibility import BisectionConfig, algorithm1, algorithm2, feasibility_check
from .geometry import build_hex_torus, drop_users, neighborhoods, wrapped_distance
from .harness import TrialConfig, outage_rate, run_trials, summarize
from .precoders import algorithm4, algorithm5, algorithm6, no_lsfp, pa_only, zf_lsfp
from .sinr import BeamformerPowerSet, SolveReport, SystemParams, build_stacked, sinr_scalar

__version__ = "0.1.0"

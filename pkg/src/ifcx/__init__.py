"""Error exponents of the two-user discrete memoryless interference channel."""
from __future__ import annotations

from .baseline import BaselineResult, baseline_exponents
from .channel import ChannelError, ChannelSpec, CompositionPair, load_channel, output_dist, save_channel, z_channel
from .feasible import Coupling, FeasibleSet, check_feasible, project_feasible, sample_feasible
from .info import JointDist, JointPair, cond_kl_to_channel, entropy, expected_log_channel, mutual_info
from .lower_bound import RegionVerdict, ThetaMix, lower_bound, lower_bound_r1zero, region_contains
from .montecarlo import CodebookConfig, estimate_error, generate_codebook, ml_decode_user1, quantize_composition
from .solver import SolveOptions, SolveResult, minimize, oracle_minimize
from .theorem1 import (
    ExponentResult,
    GallagerParams,
    RatePair,
    exponent_fixed,
    exponent_optimized,
    exponent_user2,
    f1,
    f2,
    g_term,
    maxmin_over_comps,
)

__version__ = "0.1.0"

"""Fixed-outage rates of Rayleigh block-fading channels with and without H-ARQ."""

from .channel_stats import (
    ChannelParams,
    DistributionEstimate,
    log_fading_quantile,
    mean_mutual_info,
    mi_sum_cdf,
    mi_sum_distribution,
    mi_sum_quantile,
    sample_block_mi,
    std_mutual_info,
)
from .harq import (
    HarqAnalysis,
    HarqConfig,
    cc_rate,
    expected_rounds_approx,
    expected_rounds_ir,
    ir_rate,
    optimize_cc_rate,
    optimize_initial_rate,
)
from .mc_sim import SimConfig, SimReport, simulate, simulate_sweep
from .outage_capacity import (
    CapacityResult,
    OutageSpec,
    affine_approx_capacity,
    chebyshev_bounds,
    eps_outage_capacity,
    gap_ec_fd,
    gaussian_approx_capacity,
    outage_probability,
)
from .special_math import DomainError, NumericalError, QuadratureError

__version__ = "0.1.0"

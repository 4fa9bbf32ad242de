"""Fixed-length coding without H-ARQ: outage probability and epsilon-outage capacity.

A codeword spans ``L`` independent fading blocks and the transmitter only
knows the channel statistics. The rate is the largest one whose outage
probability stays at or below ``epsilon``. Besides the exact value this
module gives the high-SNR affine approximation, the Gaussian (CLT)
approximation, Chebyshev bounds and the gap to ergodic capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .channel_stats import (
    ChannelParams,
    log_fading_quantile,
    mean_mutual_info,
    mi_sum_cdf,
    mi_sum_quantile,
    std_mutual_info,
)
from .special_math import DomainError, q_inverse

__all__ = [
    "OutageSpec",
    "CapacityResult",
    "outage_probability",
    "eps_outage_capacity",
    "affine_approx_capacity",
    "gaussian_approx_capacity",
    "chebyshev_bounds",
    "gap_ec_fd",
]

Method = Literal["exact", "gaussian_approx", "affine_approx", "chebyshev_lower", "chebyshev_upper"]


@dataclass(frozen=True)
class OutageSpec:
    epsilon: float
    diversity: int = 1

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if int(self.diversity) != self.diversity or self.diversity < 1:
            raise DomainError(f"diversity must be an integer >= 1, got {self.diversity!r}")
        object.__setattr__(self, "diversity", int(self.diversity))


@dataclass(frozen=True)
class CapacityResult:
    """One capacity figure with the method that produced it.

    ``negative`` flags a Gaussian approximation below zero; such values are
    reported unclamped.
    """

    rate: float
    method: Method
    params: ChannelParams
    spec: OutageSpec

    @property
    def snr_db(self) -> float:
        return self.params.snr_db

    @property
    def snr(self) -> float:
        return self.params.snr

    @property
    def negative(self) -> bool:
        return self.rate < 0.0


def outage_probability(params: ChannelParams, L: int, rate: float) -> float:
    """``P[(1/L) sum_{i<=L} log2(1 + snr |h_i|^2) <= rate]``."""
    if rate < 0:
        raise DomainError(f"rate must be >= 0, got {rate!r}")
    return float(mi_sum_cdf(params, L, L * rate))


def eps_outage_capacity(params: ChannelParams, spec: OutageSpec) -> CapacityResult:
    L = spec.diversity
    rate = mi_sum_quantile(params, L, spec.epsilon) / L
    return CapacityResult(rate, "exact", params, spec)


def affine_approx_capacity(params: ChannelParams, spec: OutageSpec) -> CapacityResult:
    """``log2(snr)`` plus the epsilon-quantile of the averaged ``log2 |h|^2``."""
    rate = math.log2(params.snr) + log_fading_quantile(spec.diversity, spec.epsilon)
    return CapacityResult(rate, "affine_approx", params, spec)


def gaussian_approx_capacity(params: ChannelParams, spec: OutageSpec) -> CapacityResult:
    mu = mean_mutual_info(params)
    sigma = std_mutual_info(params)
    rate = mu - sigma / math.sqrt(spec.diversity) * q_inverse(spec.epsilon)
    return CapacityResult(rate, "gaussian_approx", params, spec)


def chebyshev_bounds(params: ChannelParams, spec: OutageSpec) -> tuple[CapacityResult, CapacityResult]:
    """Chebyshev sandwich ``mu -/+ sigma / sqrt(L eps)`` around the exact capacity.

    The lower bound is clamped at zero since rates are nonnegative.
    """
    mu = mean_mutual_info(params)
    half = std_mutual_info(params) / math.sqrt(spec.diversity * spec.epsilon)
    lower = CapacityResult(max(mu - half, 0.0), "chebyshev_lower", params, spec)
    upper = CapacityResult(mu + half, "chebyshev_upper", params, spec)
    return lower, upper


def gap_ec_fd(params: ChannelParams, spec: OutageSpec) -> tuple[float, float]:
    """Ergodic capacity minus outage capacity: (exact, Gaussian approximation)."""
    mu = mean_mutual_info(params)
    exact = mu - eps_outage_capacity(params, spec).rate
    approx = std_mutual_info(params) / math.sqrt(spec.diversity) * q_inverse(spec.epsilon)
    return exact, approx

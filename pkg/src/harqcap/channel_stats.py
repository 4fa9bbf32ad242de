"""Statistics of per-block mutual information under Rayleigh fading.

The per-block mutual information is ``Y = log2(1 + snr * E)`` with
``E ~ Exp(1)``. Its law is known in closed form,

    P[Y <= y] = 1 - exp(-(2**y - 1) / snr),             y >= 0
    f(y)      = ln2 * 2**y / snr * exp(-(2**y - 1) / snr)

so sums over blocks are handled by discretising ``Y`` on a uniform lattice
(each lattice point carries the exact probability of its rounding cell)
and convolving. The CDF of a k-fold sum is tabulated at the half-lattice
cell edges and linearly interpolated in between. For ``k = 1`` this
reproduces the closed form exactly at the edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from scipy import fft as sp_fft
from scipy.signal import fftconvolve

from .special_math import (
    DomainError,
    NumericalError,
    adaptive_simpson,
    gauss_laguerre,
    integrate_expweighted,
    scaled_exp_integral_e1,
)

__all__ = [
    "ChannelParams",
    "DistributionEstimate",
    "MutualInfoDist",
    "counter_rng",
    "single_block_cdf",
    "single_block_pdf",
    "mean_mutual_info",
    "std_mutual_info",
    "sample_block_mi",
    "mi_sum_distribution",
    "mi_sum_cdf",
    "mi_sum_quantile",
    "mi_sum_cdf_table",
    "log_fading_distribution",
    "log_fading_quantile",
]

LOG2E = 1.0 / math.log(2.0)
LN2 = math.log(2.0)

# single-block CDF interpolation error target that fixes the lattice step
_CDF_INTERP_TOL = 1e-7
# largest FFT / lattice size for one k-fold sum; the step grows beyond it
_MAX_POINTS = 1 << 22
# probability below which the far tails of a tabulated CDF are trimmed
_TRIM = 1e-15


@dataclass(frozen=True)
class ChannelParams:
    """Average SNR (linear) and optional intra-round diversity order F."""

    snr: float
    intra_round_diversity: int = 1

    def __post_init__(self):
        snr = float(self.snr)
        if not (snr > 0.0) or not math.isfinite(snr):
            raise DomainError(f"snr must be a finite positive ratio, got {self.snr!r}")
        if int(self.intra_round_diversity) != self.intra_round_diversity or self.intra_round_diversity < 1:
            raise DomainError("intra_round_diversity must be an integer >= 1")
        object.__setattr__(self, "snr", snr)
        object.__setattr__(self, "intra_round_diversity", int(self.intra_round_diversity))

    @classmethod
    def from_db(cls, snr_db: float, intra_round_diversity: int = 1) -> "ChannelParams":
        return cls(10.0 ** (float(snr_db) / 10.0), intra_round_diversity)

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)


@dataclass(frozen=True)
class DistributionEstimate:
    """A scalar law held either as a tabulated CDF or as raw draws.

    ``grid_cdf``: ``values`` are ascending abscissae with CDF ``cdf_values``
    and the CDF is piecewise linear between them (0 to the left, 1 to the
    right). ``empirical``: ``values`` are the draws in generation order.
    """

    kind: Literal["grid_cdf", "empirical"]
    values: np.ndarray
    cdf_values: np.ndarray | None = None
    sample_count: int | None = None
    seed: int | None = None
    _sorted: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.kind == "grid_cdf":
            cdf = np.asarray(self.cdf_values, dtype=float)
            if cdf.shape != values.shape:
                raise ValueError("grid and CDF arrays differ in shape")
            if np.any(np.diff(values) <= 0):
                raise ValueError("grid abscissae must be strictly increasing")
            if np.any(np.diff(cdf) < 0) or cdf[0] < 0 or cdf[-1] > 1:
                raise ValueError("CDF values must be nondecreasing within [0, 1]")
            object.__setattr__(self, "cdf_values", cdf)
        elif self.kind == "empirical":
            if not np.all(np.isfinite(values)):
                raise ValueError("empirical draws must be finite")
            object.__setattr__(self, "sample_count", int(values.size))
            object.__setattr__(self, "_sorted", np.sort(values))
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    def cdf(self, t):
        t_arr = np.asarray(t, dtype=float)
        if self.kind == "grid_cdf":
            out = np.interp(t_arr, self.values, self.cdf_values, left=0.0, right=1.0)
        else:
            out = np.searchsorted(self._sorted, t_arr, side="right") / self._sorted.size
        return float(out) if out.ndim == 0 else out

    def quantile(self, p: float) -> float:
        p = float(p)
        if not (0.0 < p < 1.0):
            raise DomainError(f"quantile needs 0 < p < 1, got {p!r}")
        if self.kind == "empirical":
            return float(np.quantile(self._sorted, p))
        cdf, xs = self.cdf_values, self.values
        i = int(np.searchsorted(cdf, p, side="left"))
        if i == 0:
            return float(xs[0])
        if i >= cdf.size:
            raise NumericalError(
                f"quantile bracket failure: p={p!r} above tabulated mass {cdf[-1]!r} "
                f"on [{xs[0]!r}, {xs[-1]!r}]"
            )
        lo, hi = cdf[i - 1], cdf[i]
        frac = (p - lo) / (hi - lo)
        return float(xs[i - 1] + frac * (xs[i] - xs[i - 1]))

    def mean(self) -> float:
        if self.kind == "empirical":
            return float(np.mean(self.values))
        # integral of (1 - F) for nonnegative laws, corrected for mass below 0
        xs, cdf = self.values, self.cdf_values
        return float(xs[-1] - np.trapezoid(cdf, xs))


@dataclass(frozen=True)
class MutualInfoDist:
    """Law of the sum (or average) of ``blocks`` i.i.d. per-block mutual informations."""

    snr: float
    blocks: int
    mode: Literal["sum", "average"]
    representation: DistributionEstimate

    def cdf(self, t):
        return self.representation.cdf(t)

    def quantile(self, p: float) -> float:
        return self.representation.quantile(p)


# ---------------------------------------------------------------------------
# random numbers
# ---------------------------------------------------------------------------

def counter_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream)``.

    Philox is counter based, so distinct streams are independent and a
    stream's output never depends on how many other streams were drawn.
    """
    seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
    stream = int(stream) & 0xFFFF_FFFF_FFFF_FFFF
    return np.random.Generator(np.random.Philox(key=(seed << 64) | stream))


def exponential_draws(rng: np.random.Generator, shape) -> np.ndarray:
    # inverse-CDF method: -ln(U)
    return rng.standard_exponential(shape, method="inv")


def sample_block_mi(params: ChannelParams, count: int, seed: int) -> DistributionEstimate:
    """Draw ``count`` per-round mutual informations ``(1/F) sum_l log2(1 + snr e_l)``."""
    if count < 1:
        raise DomainError("count must be >= 1")
    F = params.intra_round_diversity
    e = exponential_draws(counter_rng(seed), (int(count), F))
    draws = np.log2(1.0 + params.snr * e).mean(axis=1)
    return DistributionEstimate("empirical", draws, seed=int(seed))


# ---------------------------------------------------------------------------
# single-block law and moments
# ---------------------------------------------------------------------------

def single_block_cdf(snr: float, y):
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    out = -np.expm1(-np.expm1(y * LN2) / snr)
    return float(out) if out.ndim == 0 else out


def single_block_pdf(snr: float, y):
    y = np.asarray(y, dtype=float)
    u = np.exp2(y) / snr
    out = np.where(y >= 0, LN2 * u * np.exp(-(u - 1.0 / snr)), 0.0)
    return float(out) if out.ndim == 0 else out


def mean_mutual_info(params: ChannelParams) -> float:
    """Ergodic capacity ``log2(e) e^{1/snr} E1(1/snr)`` in bits per symbol."""
    return LOG2E * scaled_exp_integral_e1(1.0 / params.snr)


@lru_cache(maxsize=512)
def _second_moment(snr: float) -> float:
    def f(x):
        return np.log2(1.0 + snr * x) ** 2

    # Gauss-Laguerre loses accuracy once the log's branch point at -1/snr
    # crowds the origin; past 10 dB an adaptive rule resolves it instead
    rule = gauss_laguerre(200) if snr <= 10.0 else adaptive_simpson(f)
    return integrate_expweighted(f, rule)


def std_mutual_info(params: ChannelParams) -> float:
    """Standard deviation of the per-round mutual information.

    With intra-round diversity F the per-round variance shrinks by 1/F.
    """
    mu = mean_mutual_info(params)
    var = _second_moment(params.snr) - mu * mu
    if not var > 0.0:
        raise NumericalError(f"non-positive variance {var!r} at snr={params.snr!r}")
    return math.sqrt(var / params.intra_round_diversity)


# ---------------------------------------------------------------------------
# lattice machinery
# ---------------------------------------------------------------------------

def _mi_step(snr: float) -> float:
    # max |f'| = ln2^2 e^{1/snr} max_{u >= 1/snr} u |1-u| e^{-u}, u = 2^y / snr
    u0 = 1.0 / snr
    cands = [u0] + [u for u in ((3 - math.sqrt(5)) / 2, (3 + math.sqrt(5)) / 2) if u > u0]
    slope = LN2 ** 2 * max(u * abs(1 - u) * math.exp(u0 - u) for u in cands)
    return min(math.sqrt(8.0 * _CDF_INTERP_TOL / slope), 0.01)


def _mi_upper(snr: float) -> float:
    mu = mean_mutual_info(ChannelParams(snr))
    sigma = std_mutual_info(ChannelParams(snr))
    # also cover the point where the upper tail drops below 1e-16
    return max(mu + 12.0 * sigma, math.log2(1.0 + 36.8 * snr))


@dataclass(frozen=True)
class _Lattice:
    """Masses of a variable rounded to ``origin + j * step``."""

    origin: float
    step: float
    masses: np.ndarray
    support_min: float  # -inf when the law is unbounded below


def _build_lattice(cdf: Callable[[np.ndarray], np.ndarray], origin: float, upper: float,
                   step: float, support_min: float) -> _Lattice:
    n = int(math.ceil((upper - origin) / step)) + 1
    edges = origin + (np.arange(n + 1) - 0.5) * step
    c = cdf(edges)
    return _Lattice(origin, step, np.diff(c), support_min)


def _mi_lattice(snr: float, step: float, upper: float) -> _Lattice:
    return _build_lattice(lambda t: single_block_cdf(snr, t), 0.0, upper, step, 0.0)


def _tabulate(lat: _Lattice, masses: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """CDF of the k-fold sum at cell edges, tails trimmed."""
    masses = np.clip(masses, 0.0, None)
    cdf = np.minimum(np.cumsum(masses), 1.0)
    cdf = np.maximum.accumulate(cdf)
    origin = k * lat.origin
    edges = origin + (np.arange(cdf.size) + 0.5) * lat.step
    lo = int(np.searchsorted(cdf, _TRIM, side="right"))
    hi = int(np.searchsorted(cdf, 1.0 - _TRIM, side="left")) + 1
    lo = max(lo - 1, 0)
    edges, cdf = edges[lo:hi], cdf[lo:hi]
    if lo == 0:
        # anchor the left end at the bottom of the support
        left = max(origin - 0.5 * lat.step, k * lat.support_min)
        edges = np.concatenate(([left], edges))
        cdf = np.concatenate(([0.0], cdf))
    return edges, cdf


def _kfold(lat: _Lattice, k: int) -> tuple[np.ndarray, np.ndarray]:
    if k == 1:
        return _tabulate(lat, lat.masses, 1)
    n = lat.masses.size
    size = sp_fft.next_fast_len(k * (n - 1) + 1, real=True)
    spec = sp_fft.rfft(lat.masses, size)
    masses = sp_fft.irfft(spec ** k, size)[: k * (n - 1) + 1]
    return _tabulate(lat, masses, k)


def _fit_step(step: float, width: float, k: int) -> float:
    return max(step, k * width / _MAX_POINTS)


@lru_cache(maxsize=64)
def _mi_sum_table(snr: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    upper = _mi_upper(snr)
    step = _fit_step(_mi_step(snr), upper, k)
    return _kfold(_mi_lattice(snr, step, upper), k)


def _require_flat(params: ChannelParams):
    if params.intra_round_diversity != 1:
        raise NotImplementedError(
            "exact sum distributions are only available for intra_round_diversity == 1; "
            "use the Gaussian approximation or Monte Carlo for F > 1"
        )


def _check_blocks(k: int):
    if int(k) != k or k < 1:
        raise DomainError(f"block count must be an integer >= 1, got {k!r}")


# ---------------------------------------------------------------------------
# public distribution operations
# ---------------------------------------------------------------------------

def mi_sum_distribution(params: ChannelParams, k: int,
                        mode: Literal["sum", "average"] = "sum") -> MutualInfoDist:
    """Tabulated law of ``sum_{i<=k} log2(1 + snr |h_i|^2)`` (or its average)."""
    _check_blocks(k)
    _require_flat(params)
    edges, cdf = _mi_sum_table(params.snr, int(k))
    if mode == "average":
        edges = edges / k
    elif mode != "sum":
        raise ValueError(f"mode must be 'sum' or 'average', got {mode!r}")
    rep = DistributionEstimate("grid_cdf", edges, cdf)
    return MutualInfoDist(params.snr, int(k), mode, rep)


def mi_sum_cdf(params: ChannelParams, k: int, threshold):
    """``P[sum_{i<=k} log2(1 + snr |h_i|^2) <= threshold]``."""
    t = np.asarray(threshold, dtype=float)
    if np.any(t < 0):
        raise DomainError("threshold must be >= 0")
    if k == 1:
        _require_flat(params)
        out = single_block_cdf(params.snr, t)
        return out
    return mi_sum_distribution(params, k).cdf(t)


def mi_sum_quantile(params: ChannelParams, k: int, p: float) -> float:
    """Threshold ``y`` with ``mi_sum_cdf(params, k, y) = p``."""
    if k == 1:
        _require_flat(params)
        if not (0.0 < p < 1.0):
            raise DomainError(f"quantile needs 0 < p < 1, got {p!r}")
        # single block inverts in closed form
        return math.log2(1.0 - params.snr * math.log1p(-p))
    return mi_sum_distribution(params, k).quantile(p)


def mi_sum_cdf_table(params: ChannelParams, k_max: int, thresholds) -> np.ndarray:
    """CDFs of the 1..k_max-fold sums evaluated at ``thresholds``.

    Returns an array of shape ``(k_max, len(thresholds))``. Only the part
    of the lattice below ``max(thresholds)`` is convolved, which is exact
    for nonnegative summands and keeps long ladders cheap.
    """
    _check_blocks(k_max)
    _require_flat(params)
    t = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if np.any(t < 0):
        raise DomainError("thresholds must be >= 0")
    upper = float(t.max()) if t.size else 0.0
    out = np.zeros((int(k_max), t.size))
    if upper <= 0.0:
        return out
    step = _fit_step(_mi_step(params.snr), upper, 1)
    lat = _mi_lattice(params.snr, step, upper + 2 * step)
    base = lat.masses
    n = base.size
    edges = (np.arange(n) + 0.5) * step
    cur = base
    for k in range(1, int(k_max) + 1):
        cdf = np.maximum.accumulate(np.minimum(np.cumsum(np.clip(cur, 0.0, None)), 1.0))
        out[k - 1] = np.interp(t, np.concatenate(([0.0], edges)), np.concatenate(([0.0], cdf)))
        if k < k_max:
            cur = fftconvolve(cur, base)[:n]
    return out


# ---------------------------------------------------------------------------
# SNR-free offset law: (1/k) sum log2 |h_i|^2
# ---------------------------------------------------------------------------

def _log_fading_cdf(z):
    return -np.expm1(-np.exp2(np.asarray(z, dtype=float)))


@lru_cache(maxsize=64)
def _log_fading_table(k: int) -> tuple[np.ndarray, np.ndarray]:
    # P[log2 E <= z] ~ 2^z below, exp(-2^z) above
    step0 = math.sqrt(8.0 * _CDF_INTERP_TOL / 0.1485)
    lower = math.log2(_TRIM / k) - 2.0
    upper = 6.0
    step = _fit_step(step0, upper - lower, k)
    origin = step * math.floor(lower / step)
    lat = _build_lattice(_log_fading_cdf, origin, upper, step, -math.inf)
    return _kfold(lat, k)


def log_fading_distribution(k: int) -> DistributionEstimate:
    """Tabulated law of ``(1/k) sum_{i<=k} log2 |h_i|^2``."""
    _check_blocks(k)
    edges, cdf = _log_fading_table(int(k))
    return DistributionEstimate("grid_cdf", edges / k, cdf)


def log_fading_quantile(k: int, p: float) -> float:
    """p-quantile of ``(1/k) sum log2 |h_i|^2``; SNR independent."""
    return log_fading_distribution(k).quantile(p)

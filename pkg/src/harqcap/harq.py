"""Long-term rates of hybrid-ARQ under a post-H-ARQ outage constraint.

A message is sent at initial rate ``R_init`` (bits per symbol per round).
With incremental redundancy (IR) the receiver accumulates mutual
information across rounds, with Chase combining (CC) it accumulates SNR.
Transmission stops at the first round where decoding succeeds, or after
``M`` rounds. The long-term rate is ``R_init / E[X]`` where ``X`` is the
number of rounds used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal

import numpy as np

from .channel_stats import (
    ChannelParams,
    mean_mutual_info,
    mi_sum_cdf,
    mi_sum_cdf_table,
    mi_sum_quantile,
    std_mutual_info,
)
from .outage_capacity import OutageSpec, eps_outage_capacity
from .special_math import DomainError, erlang_cdf, erlang_quantile, q_function, q_inverse, q_tail_integral

__all__ = [
    "HarqConfig",
    "HarqAnalysis",
    "ak_probability",
    "expected_rounds_ir",
    "ir_rate",
    "ir_rates",
    "ir_rate_gaussian",
    "expected_rounds_approx",
    "gap_ec_ir",
    "early_termination_probability",
    "min_rounds_heuristic",
    "ir_rate_vs_initial_rate",
    "optimize_initial_rate",
    "cc_expected_rounds",
    "cc_rate",
    "cc_affine",
    "optimize_cc_rate",
]

Protocol = Literal["IR", "CC"]

_OPT_GRID = 2000
_OPT_TOL = 1e-6


@dataclass(frozen=True)
class HarqConfig:
    """Protocol settings.

    ``initial_rate`` of ``None`` means the outage-tight default. ``b`` and
    ``T`` only enter through ``R_init = b / T``, so ``symbols_per_round``
    is carried as metadata and never used in computation.
    """

    protocol: Protocol
    max_rounds: int
    epsilon: float
    initial_rate: float | None = None
    symbols_per_round: int | None = None

    def __post_init__(self):
        proto = str(self.protocol).upper()
        if proto not in ("IR", "CC"):
            raise DomainError(f"protocol must be IR or CC, got {self.protocol!r}")
        object.__setattr__(self, "protocol", proto)
        _check_rounds(self.max_rounds)
        _check_eps(self.epsilon)
        if self.initial_rate is not None and not self.initial_rate > 0:
            raise DomainError("initial_rate must be positive when given")


@dataclass(frozen=True)
class HarqAnalysis:
    """Analytic summary of one H-ARQ operating point.

    ``per_round_stop_cdf[k-1]`` is ``P[X <= k]``; its last entry is 1 since
    round M always ends the process. Outage is reported separately.
    """

    protocol: Protocol
    params: ChannelParams
    max_rounds: int
    epsilon: float
    initial_rate: float
    expected_rounds: float
    longterm_rate: float
    outage_at_termination: float
    per_round_stop_cdf: tuple[float, ...]

    @property
    def snr_db(self) -> float:
        return self.params.snr_db


def _check_rounds(M):
    if int(M) != M or M < 1:
        raise DomainError(f"number of rounds must be an integer >= 1, got {M!r}")


def _check_eps(eps):
    if not (0.0 < eps < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {eps!r}")


def _analysis(protocol, params, M, eps, r_init, stay_probs, outage) -> HarqAnalysis:
    # stay_probs[k-1] = P[X > k] for k = 1..M-1
    stay = [float(a) for a in stay_probs]
    ex = 1.0 + sum(stay)
    stop_cdf = tuple([1.0 - a for a in stay] + [1.0])
    return HarqAnalysis(protocol, params, int(M), float(eps), float(r_init), ex,
                        float(r_init) / ex, float(outage), stop_cdf)


# ---------------------------------------------------------------------------
# incremental redundancy
# ---------------------------------------------------------------------------

def ak_probability(params: ChannelParams, k: int, r_init: float) -> float:
    """``A_k``: accumulated mutual information after k rounds is at most ``r_init``."""
    if r_init < 0:
        raise DomainError("r_init must be >= 0")
    return float(mi_sum_cdf(params, k, r_init))


def expected_rounds_ir(params: ChannelParams, M: int, r_init):
    """``E[X] = 1 + sum_{k=1}^{M-1} A_k(r_init)``; vectorised over ``r_init``."""
    _check_rounds(M)
    r = np.asarray(r_init, dtype=float)
    if np.any(r < 0):
        raise DomainError("r_init must be >= 0")
    if M == 1:
        out = np.ones_like(r)
    else:
        out = 1.0 + mi_sum_cdf_table(params, M - 1, r.ravel()).sum(axis=0).reshape(r.shape)
    return float(out) if out.ndim == 0 else out


def ir_rate(params: ChannelParams, M: int, epsilon: float,
            initial_rate: float | None = None) -> HarqAnalysis:
    """IR long-term rate, by default at ``R_init = M * C_eps^M``."""
    _check_rounds(M)
    _check_eps(epsilon)
    if initial_rate is None:
        initial_rate = M * eps_outage_capacity(params, OutageSpec(epsilon, M)).rate
    table = mi_sum_cdf_table(params, M, [initial_rate])[:, 0]
    outage = float(mi_sum_cdf(params, M, initial_rate))
    return _analysis("IR", params, M, epsilon, initial_rate, table[:-1], outage)


def ir_rates(params: ChannelParams, Ms: Iterable[int], epsilon: float) -> list[HarqAnalysis]:
    """:func:`ir_rate` for several round limits sharing one convolution ladder."""
    Ms = [int(m) for m in Ms]
    for m in Ms:
        _check_rounds(m)
    _check_eps(epsilon)
    r_inits = [mi_sum_quantile(params, m, epsilon) for m in Ms]
    table = mi_sum_cdf_table(params, max(Ms), r_inits)
    out = []
    for j, (m, r) in enumerate(zip(Ms, r_inits)):
        out.append(_analysis("IR", params, m, epsilon, r, table[: m - 1, j], table[m - 1, j]))
    return out


def ir_rate_gaussian(params: ChannelParams, M: int, epsilon: float) -> float:
    """Closed-form Gaussian approximation to the IR long-term rate."""
    _check_rounds(M)
    _check_eps(epsilon)
    mu, sigma, q = mean_mutual_info(params), std_mutual_info(params), q_inverse(epsilon)
    num = M * (mu - sigma / math.sqrt(M) * q)
    k = np.arange(1, M)
    den = M - np.sum(q_function((M - k) / np.sqrt(k) * mu / sigma - np.sqrt(M / k) * q)) if M > 1 else M
    return float(num / den)


def expected_rounds_approx(params: ChannelParams, M: int, epsilon: float) -> float:
    """Large-M expansion of ``E[X]`` at the default initial rate."""
    _check_rounds(M)
    _check_eps(epsilon)
    ratio = std_mutual_info(params) / mean_mutual_info(params)
    q = q_inverse(epsilon)
    rootM = math.sqrt(M)
    return M - ratio * q * rootM + 0.5 * (1.0 - epsilon) - ratio * rootM * q_tail_integral(q)


def gap_ec_ir(params: ChannelParams, M: int, epsilon: float) -> tuple[float, float, float]:
    """Ergodic capacity minus IR rate: exact, full approximation, and ``0.5(1-eps)mu/M``."""
    mu, sigma = mean_mutual_info(params), std_mutual_info(params)
    exact = mu - ir_rate(params, M, epsilon).longterm_rate
    return (exact, *_gap_ec_ir_approx(mu, sigma, M, epsilon))


def _gap_ec_ir_approx(mu, sigma, M, epsilon):
    ratio = sigma / mu
    q = q_inverse(epsilon)
    rootM = math.sqrt(M)
    tail = ratio * rootM * q_tail_integral(q)
    half = 0.5 * (1.0 - epsilon)
    full = mu * (half - tail) / (M - ratio * q * rootM - tail + half)
    return full, half * mu / M


def early_termination_probability(params: ChannelParams, M: int, epsilon: float) -> float:
    """Gaussian estimate of ``P[X <= M - 1]`` at the default initial rate."""
    _check_rounds(M)
    if M < 2:
        raise DomainError("early termination needs M >= 2")
    _check_eps(epsilon)
    mu, sigma, q = mean_mutual_info(params), std_mutual_info(params), q_inverse(epsilon)
    return q_function((mu - math.sqrt(M) * sigma * q) / (sigma * math.sqrt(M - 1)))


def min_rounds_heuristic(params: ChannelParams, epsilon: float) -> float:
    """Smallest M, roughly, for which early termination is more likely than not."""
    _check_eps(epsilon)
    if epsilon >= 0.5:
        raise DomainError("heuristic needs epsilon < 0.5")
    mu, sigma, q = mean_mutual_info(params), std_mutual_info(params), q_inverse(epsilon)
    return (mu / (sigma * q)) ** 2


def ir_rate_vs_initial_rate(params: ChannelParams, M: int, r_init) -> np.ndarray:
    """``R_init / E[X]`` over an array of initial rates."""
    r = np.asarray(r_init, dtype=float)
    return r / np.asarray(expected_rounds_ir(params, M, r))


def _golden_max(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _maximize(objective: Callable[[np.ndarray], np.ndarray], hi: float,
              n_grid: int = _OPT_GRID, tol: float = _OPT_TOL) -> tuple[float, float]:
    """Global max of a 1-d objective on ``(0, hi]``.

    Every local maximum of a dense grid is bracketed by its neighbours and
    refined by golden section; the right endpoint is always a candidate.
    """
    xs = np.linspace(hi / n_grid, hi, n_grid)
    ys = np.asarray(objective(xs), dtype=float)

    def scalar(x):
        return float(objective(np.array([x]))[0])

    best_x, best_y = float(xs[-1]), float(ys[-1])
    peaks = [i for i in range(n_grid)
             if (i == 0 or ys[i] >= ys[i - 1]) and (i == n_grid - 1 or ys[i] >= ys[i + 1])]
    for i in peaks:
        if i == n_grid - 1:
            continue
        a, b = float(xs[max(i - 1, 0)]), float(xs[i + 1])
        if i == 0:
            a = 0.5 * float(xs[0])
        x, y = _golden_max(scalar, a, b, tol)
        if y > best_y:
            best_x, best_y = x, y
    return best_x, best_y


def optimize_initial_rate(params: ChannelParams, M: int, epsilon: float) -> tuple[float, float]:
    """Maximise ``R_init / E[X]`` over ``R_init <= A_M^{-1}(eps)``.

    Returns ``(r_opt, rate_opt)``. ``E[X]`` is tabulated once on a grid
    fine enough to match the lattice and interpolated inside the search.
    """
    _check_rounds(M)
    _check_eps(epsilon)
    base = ir_rate(params, M, epsilon)
    r_max = base.initial_rate
    if M == 1:
        return r_max, base.longterm_rate
    n_fine = int(max(4 * _OPT_GRID, min(r_max / 5e-4, 400_000)))
    grid = np.linspace(0.0, r_max, n_fine + 1)
    ex_grid = expected_rounds_ir(params, M, grid)
    ex_grid[-1] = base.expected_rounds

    def objective(r):
        return r / np.interp(r, grid, ex_grid)

    r_opt, rate_opt = _maximize(objective, r_max)
    if rate_opt <= base.longterm_rate:
        return r_max, base.longterm_rate
    return r_opt, rate_opt


# ---------------------------------------------------------------------------
# Chase combining
# ---------------------------------------------------------------------------

def cc_expected_rounds(t, M: int):
    """``E[X]`` for CC when decoding needs ``sum |h_i|^2 > t``; free of SNR.

    Evaluates ``M - e^{-t} sum_{k=1}^{M-1} (M-k) t^{k-1} / (k-1)!``.
    """
    _check_rounds(M)
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    term = np.ones_like(t)  # t^{k-1}/(k-1)!
    for k in range(1, M):
        if k > 1:
            term = term * t / (k - 1)
        total = total + (M - k) * term
    out = M - np.exp(-t) * total
    return float(out) if out.ndim == 0 else out


def cc_rate(params: ChannelParams, M: int, epsilon: float,
            initial_rate: float | None = None) -> HarqAnalysis:
    """CC long-term rate; by default ``R_init = log2(1 + F^{-1}_eps(sum |h|^2) snr)``."""
    _check_rounds(M)
    _check_eps(epsilon)
    if initial_rate is None:
        t = erlang_quantile(epsilon, M)
        initial_rate = math.log2(1.0 + t * params.snr)
    else:
        t = (2.0 ** initial_rate - 1.0) / params.snr
    stay = [erlang_cdf(t, k) for k in range(1, M)]
    outage = erlang_cdf(t, M)
    res = _analysis("CC", params, M, epsilon, initial_rate, stay, outage)
    # the closed form and the sum of A_k agree; keep the closed form as E[X]
    ex = cc_expected_rounds(t, M)
    return HarqAnalysis(res.protocol, params, res.max_rounds, res.epsilon, res.initial_rate,
                        ex, res.initial_rate / ex, outage, res.per_round_stop_cdf)


def cc_affine(params: ChannelParams, M: int, epsilon: float) -> tuple[float, float]:
    """High-SNR CC rate ``prelog * log2(snr) + offset``: returns ``(prelog, offset)``."""
    _check_rounds(M)
    _check_eps(epsilon)
    t = erlang_quantile(epsilon, M)
    ex = cc_expected_rounds(t, M)
    return 1.0 / ex, math.log2(t) / ex


def optimize_cc_rate(params: ChannelParams, M: int, epsilon: float) -> tuple[float, float]:
    """Maximise ``log2(1 + t snr) / E[X](t)`` over ``t <= F^{-1}_eps(sum |h|^2)``.

    Searching in the combined-gain threshold ``t`` rather than in rate keeps
    the objective well scaled at high SNR. Returns ``(r_opt, rate_opt)``.
    """
    base = cc_rate(params, M, epsilon)
    if M == 1:
        return base.initial_rate, base.longterm_rate
    t_max = erlang_quantile(epsilon, M)
    snr = params.snr

    def objective(t):
        return np.log2(1.0 + t * snr) / cc_expected_rounds(t, M)

    t_opt, rate_opt = _maximize(objective, t_max)
    if rate_opt <= base.longterm_rate:
        return base.initial_rate, base.longterm_rate
    return math.log2(1.0 + t_opt * snr), rate_opt

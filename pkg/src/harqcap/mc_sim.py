"""Message-level Monte Carlo of the H-ARQ protocol.

Each message draws an independent ``|h|^2 ~ Exp(1)`` per round (and per
sub-channel when intra-round diversity is on). The receiver tries to
decode after every round; an ACK ends the message, otherwise the next
round is sent until round ``M``. An outage is a message that is still not
decodable after ``M`` rounds.

Messages are processed in fixed-size batches. Batch ``b`` always draws
from the Philox stream ``(seed, b)`` and contributes integer counts only,
so reports do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel_stats import ChannelParams, counter_rng, exponential_draws, mi_sum_quantile
from .harq import HarqConfig
from .special_math import DomainError, erlang_quantile

__all__ = [
    "SimConfig",
    "SimReport",
    "default_initial_rate",
    "batch_draws",
    "message_outcomes",
    "simulate",
    "simulate_sweep",
    "derive_seed",
    "worker_count",
]

WORKERS_ENV = "HARQCAP_WORKERS"
_DEFAULT_BATCH = 1 << 16
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelParams
    harq: HarqConfig
    messages: int
    seed: int
    batch_size: int | None = None

    def __post_init__(self):
        if int(self.messages) != self.messages or self.messages < 1:
            raise DomainError("messages must be an integer >= 1")
        batch = min(_DEFAULT_BATCH, self.messages) if self.batch_size is None else int(self.batch_size)
        if batch < 1 or batch > self.messages:
            raise DomainError("batch_size must be in [1, messages]")
        object.__setattr__(self, "batch_size", int(batch))
        object.__setattr__(self, "messages", int(self.messages))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFF_FFFF_FFFF_FFFF)


@dataclass(frozen=True)
class SimReport:
    protocol: str
    snr: float
    snr_db: float
    max_rounds: int
    epsilon: float
    initial_rate: float
    messages: int
    seed: int
    empirical_rate: float
    empirical_expected_rounds: float
    empirical_outage: float
    rounds_histogram: tuple[int, ...]
    rate_std_error: float
    outage_std_error: float
    ci95_rate: float
    ci95_outage: float
    outage_interval: tuple[float, float]

    def empirical_stay_probability(self, k: int) -> float:
        """Fraction of messages needing more than ``k`` rounds."""
        return sum(self.rounds_histogram[k:]) / self.messages


def worker_count(workers: int | None = None) -> int:
    """Threads to use: explicit value, else ``$HARQCAP_WORKERS``, else the CPU count (max 8)."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else min(os.cpu_count() or 1, 8)
    return max(1, int(workers))


def default_initial_rate(channel: ChannelParams, harq: HarqConfig) -> float:
    """Initial rate that makes the post-H-ARQ outage exactly ``epsilon``."""
    if harq.initial_rate is not None:
        return float(harq.initial_rate)
    if channel.intra_round_diversity != 1:
        raise DomainError("with intra-round diversity the initial rate must be given explicitly")
    M, eps = harq.max_rounds, harq.epsilon
    if harq.protocol == "IR":
        return mi_sum_quantile(channel, M, eps)
    return math.log2(1.0 + erlang_quantile(eps, M) * channel.snr)


def batch_draws(config: SimConfig, batch: int) -> np.ndarray:
    """Channel gains of batch ``batch``, shape ``(messages, M, F)``."""
    start = batch * config.batch_size
    n = min(config.batch_size, config.messages - start)
    if n <= 0:
        raise IndexError(f"batch {batch} is past the last message")
    shape = (n, config.harq.max_rounds, config.channel.intra_round_diversity)
    return exponential_draws(counter_rng(config.seed, batch), shape)


def message_outcomes(protocol: str, snr: float, r_init: float,
                     gains: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rounds used and outage flag per message.

    Decoding after round ``m`` needs the accumulated metric to exceed
    ``r_init`` strictly; ties count as failures.
    """
    if protocol == "IR":
        per_round = np.log2(1.0 + snr * gains).mean(axis=2)
        metric = np.cumsum(per_round, axis=1)
    else:
        combined = np.cumsum(gains, axis=1)
        metric = np.log2(1.0 + snr * combined).mean(axis=2)
    decoded = metric > r_init
    M = gains.shape[1]
    rounds = np.where(decoded.any(axis=1), decoded.argmax(axis=1) + 1, M)
    outage = ~decoded[:, -1]
    return rounds, outage


def _run_batch(config: SimConfig, r_init: float, batch: int) -> tuple[np.ndarray, int]:
    gains = batch_draws(config, batch)
    rounds, outage = message_outcomes(config.harq.protocol, config.channel.snr, r_init, gains)
    hist = np.bincount(rounds - 1, minlength=config.harq.max_rounds).astype(np.int64)
    return hist, int(outage.sum())


def _wilson(successes: int, n: int) -> tuple[float, float]:
    p = successes / n
    z2 = _Z95 * _Z95
    centre = (p + z2 / (2 * n)) / (1 + z2 / n)
    half = _Z95 / (1 + z2 / n) * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n))
    return max(centre - half, 0.0), min(centre + half, 1.0)


def simulate(config: SimConfig, workers: int | None = None) -> SimReport:
    r_init = default_initial_rate(config.channel, config.harq)
    M = config.harq.max_rounds
    n_batches = -(-config.messages // config.batch_size)
    nthreads = min(worker_count(workers), n_batches)
    if nthreads == 1:
        parts = [_run_batch(config, r_init, b) for b in range(n_batches)]
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(lambda b: _run_batch(config, r_init, b), range(n_batches)))

    hist = np.zeros(M, dtype=np.int64)
    outages = 0
    for h, o in parts:
        hist += h
        outages += o
    N = config.messages
    ks = np.arange(1, M + 1, dtype=np.int64)
    total = int((ks * hist).sum())
    total_sq = int((ks * ks * hist).sum())
    mean_x = total / N
    var_x = (total_sq - total * total / N) / (N - 1) if N > 1 else 0.0
    var_x = max(var_x, 0.0)
    se_mean = math.sqrt(var_x / N)
    rate = r_init / mean_x
    se_rate = r_init * se_mean / (mean_x * mean_x)
    p_out = outages / N
    se_out = math.sqrt(p_out * (1.0 - p_out) / N)
    lo, hi = _wilson(outages, N)
    return SimReport(
        protocol=config.harq.protocol,
        snr=config.channel.snr,
        snr_db=config.channel.snr_db,
        max_rounds=M,
        epsilon=config.harq.epsilon,
        initial_rate=r_init,
        messages=N,
        seed=config.seed,
        empirical_rate=rate,
        empirical_expected_rounds=mean_x,
        empirical_outage=p_out,
        rounds_histogram=tuple(int(c) for c in hist),
        rate_std_error=se_rate,
        outage_std_error=se_out,
        ci95_rate=_Z95 * se_rate,
        ci95_outage=0.5 * (hi - lo),
        outage_interval=(lo, hi),
    )


def derive_seed(seed: int, snr_db: float) -> int:
    """Per-point seed keyed by the SNR value, so reordering a grid reorders the reports."""
    bits = struct.unpack("<Q", struct.pack("<d", float(snr_db)))[0]
    ss = np.random.SeedSequence([int(seed) & 0xFFFF_FFFF_FFFF_FFFF, bits])
    return int(ss.generate_state(1, np.uint64)[0])


def simulate_sweep(base: SimConfig, snr_grid: Sequence[float],
                   workers: int | None = None) -> list[SimReport]:
    """One :func:`simulate` run per SNR (dB) in ``snr_grid``."""
    if len(snr_grid) == 0:
        raise DomainError("snr grid is empty")
    reports = []
    for snr_db in snr_grid:
        channel = ChannelParams.from_db(snr_db, base.channel.intra_round_diversity)
        cfg = replace(base, channel=channel, seed=derive_seed(base.seed, snr_db))
        reports.append(simulate(cfg, workers))
    return reports

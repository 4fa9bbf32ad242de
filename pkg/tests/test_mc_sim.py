import math

import numpy as np
import pytest

from harqcap import harq
from harqcap.channel_stats import ChannelParams, mi_sum_cdf
from harqcap.mc_sim import (
    SimConfig,
    batch_draws,
    default_initial_rate,
    derive_seed,
    message_outcomes,
    simulate,
    simulate_sweep,
    worker_count,
)
from harqcap.special_math import DomainError, erlang_cdf


def _config(protocol="IR", M=3, snr_db=10.0, n=20_000, seed=9, **kw):
    return SimConfig(ChannelParams.from_db(snr_db), harq.HarqConfig(protocol, M, 0.05), n, seed, **kw)


def _decode_one(protocol, snr, r_init, gains):
    # straightforward per-message loop, independent of the vectorised path
    acc_mi, acc_gain = 0.0, np.zeros(gains.shape[1])
    for m in range(gains.shape[0]):
        if protocol == "IR":
            acc_mi += float(np.mean(np.log2(1 + snr * gains[m])))
            ok = acc_mi > r_init
        else:
            acc_gain = acc_gain + gains[m]
            ok = float(np.mean(np.log2(1 + snr * acc_gain))) > r_init
        if ok:
            return m + 1, False
    return gains.shape[0], True


@pytest.mark.parametrize("protocol, F", [("IR", 1), ("CC", 1), ("IR", 2), ("CC", 3)])
def test_vectorised_decoder_matches_loop(protocol, F):
    cfg = SimConfig(ChannelParams.from_db(5.0, F), harq.HarqConfig(protocol, 4, 0.05, initial_rate=4.0),
                    10_000, 21)
    gains = batch_draws(cfg, 0)
    rounds, outage = message_outcomes(protocol, cfg.channel.snr, 4.0, gains)
    for i in range(gains.shape[0]):
        assert (rounds[i], outage[i]) == _decode_one(protocol, cfg.channel.snr, 4.0, gains[i])


def test_ties_fail_to_decode():
    gains = np.array([[[1.0], [1.0]]])
    r = math.log2(2.0)
    rounds, outage = message_outcomes("IR", 1.0, r, gains)
    assert rounds[0] == 2  # first round hits the threshold exactly
    rounds, outage = message_outcomes("IR", 1.0, 2 * r, gains)
    assert outage[0]


@pytest.mark.parametrize("workers", [4, 8])
def test_thread_count_does_not_change_report(workers):
    cfg = _config(n=50_000, batch_size=4096)
    assert simulate(cfg, workers) == simulate(cfg, 1)


def test_env_worker_cap(monkeypatch):
    monkeypatch.setenv("HARQCAP_WORKERS", "3")
    assert worker_count() == 3
    assert worker_count(5) == 5
    monkeypatch.delenv("HARQCAP_WORKERS")
    assert worker_count() >= 1


@pytest.mark.parametrize("protocol", ["IR", "CC"])
def test_stay_probabilities_match_analytics(protocol):
    cfg = _config(protocol, M=3, n=200_000)
    rep = simulate(cfg)
    p = cfg.channel
    r = rep.initial_rate
    t = (2 ** r - 1) / p.snr
    for k in (1, 2):
        analytic = mi_sum_cdf(p, k, r) if protocol == "IR" else erlang_cdf(t, k)
        se = math.sqrt(analytic * (1 - analytic) / rep.messages)
        assert abs(rep.empirical_stay_probability(k) - analytic) < 4 * se


def test_report_bookkeeping():
    rep = simulate(_config(n=30_000))
    assert sum(rep.rounds_histogram) == rep.messages
    ks = np.arange(1, 4)
    assert rep.empirical_expected_rounds == pytest.approx((ks * rep.rounds_histogram).sum() / rep.messages)
    assert rep.empirical_rate == pytest.approx(rep.initial_rate / rep.empirical_expected_rounds)
    lo, hi = rep.outage_interval
    assert lo <= rep.empirical_outage <= hi
    assert rep.ci95_rate == pytest.approx(1.959963984540054 * rep.rate_std_error)


def test_default_initial_rates():
    p = ChannelParams.from_db(10)
    assert default_initial_rate(p, harq.HarqConfig("IR", 2, 0.01)) == pytest.approx(1.49620839799, abs=1e-5)
    assert default_initial_rate(p, harq.HarqConfig("CC", 2, 0.01)) == pytest.approx(1.31356361756, rel=1e-10)
    with pytest.raises(DomainError):
        default_initial_rate(ChannelParams(10.0, 2), harq.HarqConfig("IR", 2, 0.01))


def test_sweep_seeds_follow_snr_value():
    base = _config(n=5_000)
    fwd = simulate_sweep(base, [0.0, 10.0])
    rev = simulate_sweep(base, [10.0, 0.0])
    assert fwd[0] == rev[1] and fwd[1] == rev[0]
    assert fwd[0].seed == derive_seed(base.seed, 0.0) != derive_seed(base.seed, 10.0)
    with pytest.raises(DomainError):
        simulate_sweep(base, [])


def test_config_validation():
    with pytest.raises(DomainError):
        _config(n=0)
    with pytest.raises(DomainError):
        _config(n=100, batch_size=101)
    assert _config(n=100).batch_size == 100

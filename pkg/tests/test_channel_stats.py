import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harqcap.channel_stats import (
    ChannelParams,
    DistributionEstimate,
    counter_rng,
    log_fading_distribution,
    log_fading_quantile,
    mean_mutual_info,
    mi_sum_cdf,
    mi_sum_cdf_table,
    mi_sum_distribution,
    mi_sum_quantile,
    sample_block_mi,
    single_block_cdf,
    single_block_pdf,
    std_mutual_info,
)
from harqcap.special_math import DomainError, NumericalError

# moments from scipy.integrate.quad on log2(1 + snr x) e^{-x}
MOMENTS_REF = {0: (0.860347382271, 0.605761163063), 10: (2.90651480841, 1.31500685398),
               20: (5.88404823368, 1.70366969642), 30: (9.14361949104, 1.82017459793)}
# two-block CDF by nested quadrature, keyed by (snr_db, threshold)
CDF2_REF = {(0, 0.5): 0.0587854922781, (0, 2): 0.65109473535, (0, 5): 0.999607559923,
            (10, 0.5): 0.000739699244007, (10, 2): 0.0218644946039, (10, 5): 0.332278634938,
            (20, 0.5): 7.57183794882e-06, (20, 2): 0.000250642189954, (20, 5): 0.0072385623418}
# 1% point of the two-block sum, brentq on the quadrature CDF
Q2_REF = {0: 0.204379062303, 10: 1.49620839799, 20: 5.36271143177}
# (1/2)(log2 E1 + log2 E2): product of exponentials has CDF 1 - 2 sqrt(w) K1(2 sqrt(w))
LOGFADE2_REF = {0.01: -4.64926044604, 0.5: -0.669841605271, 0.9: 0.684514985319}

EULER_GAMMA = 0.5772156649015329


# ---------------------------------------------------------------- params

def test_params_db_roundtrip():
    p = ChannelParams.from_db(13.0)
    assert p.snr == pytest.approx(10 ** 1.3)
    assert p.snr_db == pytest.approx(13.0)


@pytest.mark.parametrize("snr", [0.0, -1.0, float("inf"), float("nan")])
def test_params_reject_bad_snr(snr):
    with pytest.raises(DomainError):
        ChannelParams(snr)


def test_params_reject_bad_diversity():
    with pytest.raises(DomainError):
        ChannelParams(1.0, 0)


# ---------------------------------------------------------------- moments

@pytest.mark.parametrize("snr_db", sorted(MOMENTS_REF))
def test_moments_reference(snr_db):
    mu_ref, sigma_ref = MOMENTS_REF[snr_db]
    p = ChannelParams.from_db(snr_db)
    assert mean_mutual_info(p) == pytest.approx(mu_ref, rel=1e-10)
    assert std_mutual_info(p) == pytest.approx(sigma_ref, rel=1e-7)


def test_mean_high_snr_affine():
    p = ChannelParams.from_db(60)
    assert mean_mutual_info(p) == pytest.approx(math.log2(p.snr) - EULER_GAMMA / math.log(2), abs=1e-4)


def test_std_shrinks_with_intra_round_diversity():
    s1 = std_mutual_info(ChannelParams.from_db(10))
    s4 = std_mutual_info(ChannelParams.from_db(10, 4))
    assert s4 == pytest.approx(s1 / 2)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-10, max_value=50))
def test_std_below_high_snr_limit(snr_db):
    # sigma grows towards pi log2(e) / sqrt(6) from below
    assert 0 < std_mutual_info(ChannelParams.from_db(snr_db)) < math.pi / math.log(2) / math.sqrt(6)


# ---------------------------------------------------------------- single block

@given(st.floats(min_value=0.01, max_value=1e4), st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_single_block_closed_form_quantile(snr, p):
    q = mi_sum_quantile(ChannelParams(snr), 1, p)
    assert single_block_cdf(snr, q) == pytest.approx(p, rel=1e-10)


def test_single_block_pdf_integrates_to_cdf():
    from scipy import integrate
    val = integrate.quad(lambda y: single_block_pdf(10.0, y), 0, 2.5)[0]
    assert val == pytest.approx(single_block_cdf(10.0, 2.5), rel=1e-10)


# ---------------------------------------------------------------- sums

@pytest.mark.parametrize("key", sorted(CDF2_REF))
def test_two_block_cdf_reference(key):
    snr_db, t = key
    assert mi_sum_cdf(ChannelParams.from_db(snr_db), 2, t) == pytest.approx(CDF2_REF[key], abs=1e-6)


@pytest.mark.parametrize("snr_db", sorted(Q2_REF))
def test_two_block_quantile_reference(snr_db):
    assert mi_sum_quantile(ChannelParams.from_db(snr_db), 2, 0.01) == pytest.approx(Q2_REF[snr_db], abs=1e-5)


@pytest.mark.parametrize("snr_db, k", [(0, 3), (10, 5), (30, 8)])
def test_sum_mean_matches_k_mu(snr_db, k):
    p = ChannelParams.from_db(snr_db)
    dist = mi_sum_distribution(p, k)
    assert dist.representation.mean() == pytest.approx(k * mean_mutual_info(p), rel=1e-5)


@pytest.mark.parametrize("snr_db, k", [(0, 4), (20, 3)])
def test_sum_cdf_agrees_with_monte_carlo(snr_db, k):
    p = ChannelParams.from_db(snr_db)
    draws = sample_block_mi(p, 200_000 * k, seed=11).values.reshape(-1, k).sum(axis=1)
    for t in np.quantile(draws, [0.05, 0.3, 0.7]):
        emp = np.mean(draws <= t)
        assert mi_sum_cdf(p, k, t) == pytest.approx(emp, abs=4 * math.sqrt(emp * (1 - emp) / draws.size))


def test_average_mode_rescales():
    p = ChannelParams.from_db(10)
    s = mi_sum_distribution(p, 4, "sum")
    a = mi_sum_distribution(p, 4, "average")
    assert a.quantile(0.2) == pytest.approx(s.quantile(0.2) / 4, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([0.0, 10.0, 25.0]), st.integers(min_value=1, max_value=6))
def test_cdf_monotone_in_blocks(snr_db, k):
    # adding a nonnegative summand can only lower the CDF
    p = ChannelParams.from_db(snr_db)
    t = np.linspace(0.1, 3 * mean_mutual_info(p), 7)
    assert np.all(np.asarray(mi_sum_cdf(p, k + 1, t)) <= np.asarray(mi_sum_cdf(p, k, t)) + 1e-9)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([0.0, 10.0, 30.0]), st.integers(min_value=2, max_value=8),
       st.floats(min_value=1e-3, max_value=0.99))
def test_quantile_inverts_cdf(snr_db, k, prob):
    p = ChannelParams.from_db(snr_db)
    assert mi_sum_cdf(p, k, mi_sum_quantile(p, k, prob)) == pytest.approx(prob, abs=1e-7)


def test_cdf_table_matches_individual_laws():
    p = ChannelParams.from_db(10)
    t = np.array([0.5, 2.0, 4.0, 7.0])
    table = mi_sum_cdf_table(p, 4, t)
    assert table.shape == (4, 4)
    for k in range(1, 5):
        assert table[k - 1] == pytest.approx(np.asarray(mi_sum_cdf(p, k, t)), abs=1e-6)


def test_negative_threshold_rejected():
    with pytest.raises(DomainError):
        mi_sum_cdf(ChannelParams(1.0), 2, -0.1)


def test_intra_round_diversity_not_tabulated():
    with pytest.raises(NotImplementedError):
        mi_sum_cdf(ChannelParams(1.0, 2), 2, 1.0)


# ---------------------------------------------------------------- offset law

def test_log_fading_single_block_closed_form():
    assert log_fading_quantile(1, 0.01) == pytest.approx(math.log2(-math.log1p(-0.01)), abs=1e-5)


@pytest.mark.parametrize("prob", sorted(LOGFADE2_REF))
def test_log_fading_two_blocks(prob):
    assert log_fading_quantile(2, prob) == pytest.approx(LOGFADE2_REF[prob], abs=1e-5)


def test_log_fading_mean():
    d = log_fading_distribution(16)
    assert d.mean() == pytest.approx(-EULER_GAMMA / math.log(2), abs=1e-4)


# ---------------------------------------------------------------- estimates, rng

def test_grid_estimate_validation():
    with pytest.raises(ValueError):
        DistributionEstimate("grid_cdf", np.array([0.0, 1.0]), np.array([0.6, 0.5]))
    with pytest.raises(ValueError):
        DistributionEstimate("other", np.array([0.0]))


def test_grid_quantile_bracket_failure():
    d = DistributionEstimate("grid_cdf", np.array([0.0, 1.0]), np.array([0.0, 0.5]))
    with pytest.raises(NumericalError):
        d.quantile(0.9)


def test_empirical_estimate():
    d = sample_block_mi(ChannelParams.from_db(10), 100_000, seed=3)
    assert d.kind == "empirical" and d.sample_count == 100_000 and d.seed == 3
    assert d.mean() == pytest.approx(MOMENTS_REF[10][0], abs=5 * MOMENTS_REF[10][1] / math.sqrt(1e5))


def test_counter_streams_independent_of_order():
    a = counter_rng(5, 2).random(4)
    counter_rng(5, 1).random(1000)
    b = counter_rng(5, 2).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, counter_rng(5, 3).random(4))

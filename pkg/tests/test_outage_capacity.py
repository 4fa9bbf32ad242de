import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harqcap.channel_stats import ChannelParams, mean_mutual_info, std_mutual_info
from harqcap.outage_capacity import (
    OutageSpec,
    affine_approx_capacity,
    chebyshev_bounds,
    eps_outage_capacity,
    gap_ec_fd,
    gaussian_approx_capacity,
    outage_probability,
)
from harqcap.special_math import DomainError

# two-block 1% point (brentq over a quadrature CDF), halved to a per-block rate
C2_REF = {0: 0.204379062303 / 2, 10: 1.49620839799 / 2, 20: 5.36271143177 / 2}

SNRS = st.sampled_from([-5.0, 0.0, 10.0, 20.0, 35.0])
EPS = st.floats(min_value=0.005, max_value=0.4)


@pytest.mark.parametrize("snr_db", [0, 10, 30])
def test_single_block_closed_form(snr_db):
    p = ChannelParams.from_db(snr_db)
    expected = math.log2(1 + p.snr * math.log(1 / 0.95))
    assert eps_outage_capacity(p, OutageSpec(0.05)).rate == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("snr_db", sorted(C2_REF))
def test_two_block_reference(snr_db):
    r = eps_outage_capacity(ChannelParams.from_db(snr_db), OutageSpec(0.01, 2))
    assert r.rate == pytest.approx(C2_REF[snr_db], abs=5e-6)
    assert r.method == "exact" and r.snr_db == pytest.approx(snr_db)


@settings(max_examples=20, deadline=None)
@given(SNRS, st.integers(min_value=1, max_value=12), EPS)
def test_outage_at_capacity_is_eps(snr_db, L, eps):
    p = ChannelParams.from_db(snr_db)
    c = eps_outage_capacity(p, OutageSpec(eps, L)).rate
    assert outage_probability(p, L, c) == pytest.approx(eps, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(SNRS, st.integers(min_value=1, max_value=10), EPS)
def test_chebyshev_sandwich(snr_db, L, eps):
    p = ChannelParams.from_db(snr_db)
    spec = OutageSpec(eps, L)
    lo, hi = chebyshev_bounds(p, spec)
    c = eps_outage_capacity(p, spec).rate
    assert lo.rate <= c <= hi.rate
    assert lo.rate >= 0


@settings(max_examples=15, deadline=None)
@given(SNRS, st.integers(min_value=1, max_value=10), EPS)
def test_capacity_below_ergodic_and_growing_in_L(snr_db, L, eps):
    # holds for eps < 1/2, where the quantile sits below the mean
    p = ChannelParams.from_db(snr_db)
    c1 = eps_outage_capacity(p, OutageSpec(eps, L)).rate
    c2 = eps_outage_capacity(p, OutageSpec(eps, L + 1)).rate
    assert c1 < c2 < mean_mutual_info(p)


def test_gaussian_negative_is_flagged_not_clamped():
    r = gaussian_approx_capacity(ChannelParams.from_db(0), OutageSpec(0.01, 1))
    assert r.rate < 0 and r.negative
    assert r.rate == pytest.approx(0.860347382271 - 0.605761163063 * 2.32634787404084, rel=1e-7)


def test_gaussian_improves_with_L():
    p = ChannelParams.from_db(10)
    errs = [abs(gaussian_approx_capacity(p, OutageSpec(0.05, L)).rate
                - eps_outage_capacity(p, OutageSpec(0.05, L)).rate) for L in (2, 8, 32)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("L", [1, 3, 10])
def test_affine_tight_at_high_snr(L):
    p = ChannelParams.from_db(60)
    spec = OutageSpec(0.01, L)
    assert affine_approx_capacity(p, spec).rate == pytest.approx(eps_outage_capacity(p, spec).rate, abs=2e-3)


def test_gap_parts():
    p = ChannelParams.from_db(20)
    spec = OutageSpec(0.05, 8)
    exact, approx = gap_ec_fd(p, spec)
    assert exact == pytest.approx(mean_mutual_info(p) - eps_outage_capacity(p, spec).rate)
    assert approx == pytest.approx(std_mutual_info(p) / math.sqrt(8) * 1.6448536269514722, rel=1e-9)
    assert exact == pytest.approx(approx, rel=0.1)


@pytest.mark.parametrize("args", [(0.0, 1), (1.0, 1), (0.1, 0), (0.1, 2.5)])
def test_spec_validation(args):
    with pytest.raises(DomainError):
        OutageSpec(*args)


def test_negative_rate_rejected():
    with pytest.raises(DomainError):
        outage_probability(ChannelParams(1.0), 1, -1.0)

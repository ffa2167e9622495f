"""Ratio-sum tests.

Frozen constants were computed offline with mpmath at 30 digits through
independent routes: exact rational binomials plus mp-quadrature q values,
summed term by term (no package code involved).
"""

import math

import pytest
from hypothesis import given, settings, strategies as st

import sbplab as s
from sbplab.errors import DomainError
from sbplab.moments import FAST_PATH_MIN_N

HSET = settings(max_examples=80, deadline=None, derandomize=True)

# critical_rows(alpha_c(1), n) oracles, delta = 0.05
TOTAL_30 = 5.40311235631456178438
I1_30 = 0.43230420177917545886
I2_30 = 2.81227674144731357544
I3_30 = 2.15853141308807275008
TOTAL_31 = 5.42495225711869992243
I1_31 = 0.566021498269741298454
I2_31 = 2.70966338724499782865
I3_31 = 2.14926737160396079533

# 1 - q(1/n)/p at K = 1
GAP_100 = 0.0565597487268652967
GAP_10000 = 0.0056560034213855558506


def _critical(n):
    return s.ModelParams.critical_rows(s.alpha_c(1.0), n)


@pytest.mark.parametrize("n,tot,i1,i2,i3", [
    (30, TOTAL_30, I1_30, I2_30, I3_30),
    (31, TOTAL_31, I1_31, I2_31, I3_31),
])
def test_small_n_oracle(n, tot, i1, i2, i3):
    r = s.ratio_exact(_critical(n))
    assert r.total == pytest.approx(tot, rel=1e-12)
    assert r.i1 == pytest.approx(i1, rel=1e-11)
    assert r.i2 == pytest.approx(i2, rel=1e-11)
    assert r.i3 == pytest.approx(i3, rel=1e-11)
    assert r.endpoint_high == pytest.approx(1.0, abs=1e-9)
    assert r.endpoint_low == r.endpoint_high


def test_m_zero_total_is_exactly_one():
    params = s.ModelParams(K=1.0, alpha=0.0, n=57, m=0)
    r = s.ratio_exact(params)
    assert r.total == 1.0
    assert r.log_total == 0.0
    assert r.i1 + r.i2 + r.i3 == pytest.approx(1.0, rel=1e-12)
    assert r.b_value == 0.0
    assert r.gaussian_limit == 1.0


def test_m_zero_large_n_no_quadrature_needed():
    # runs instantly even above the fast-path threshold
    params = s.ModelParams(K=1.0, alpha=0.0, n=10 ** 6, m=0)
    assert s.ratio_exact(params).total == 1.0


def test_region_sum_identity():
    for n, delta in ((64, 0.05), (101, 0.12), (200, 0.2)):
        r = s.ratio_exact(_critical(n), delta=delta)
        assert r.i1 + r.i2 + r.i3 == pytest.approx(r.total, rel=1e-9)


def test_total_at_least_one():
    # q >= p^2 pointwise forces every summand to dominate its binomial
    # weight, so the total can never dip below 1
    for params in (_critical(100),
                   s.ModelParams(K=1.0, alpha=0.9, n=100),
                   s.ModelParams(K=0.5, alpha=0.3, n=77)):
        assert s.ratio_exact(params).total >= 1.0


@given(delta=st.floats(min_value=0.01, max_value=0.24))
@HSET
def test_total_invariant_to_delta(delta):
    base = s.ratio_exact(_critical(60), delta=0.05).total
    assert s.ratio_exact(_critical(60), delta=delta).total == \
        pytest.approx(base, rel=1e-12)


def test_endpoint_summands_one_at_criticality():
    for n in (200, 1000):
        r = s.ratio_exact(_critical(n))
        assert r.endpoint_high == pytest.approx(1.0, abs=1e-7)
        assert r.endpoint_low == r.endpoint_high


def test_totals_over_n_bounded_with_shrinking_steps():
    totals = [s.ratio_exact(_critical(n)).total
              for n in (200, 400, 800, 1600)]
    assert all(t <= 10.0 for t in totals)
    assert all(t >= 1.0 for t in totals)
    # the exact totals approach the limit from above
    diffs = [a - b for a, b in zip(totals, totals[1:])]
    assert all(d > 0 for d in diffs)
    assert diffs[0] > diffs[1] > diffs[2]


def test_central_region_grows_toward_clt_value():
    rs = [s.ratio_exact(_critical(n)) for n in (200, 400, 800, 1600)]
    i1s = [r.i1 for r in rs]
    assert i1s == sorted(i1s)
    clt = 1.0 / math.sqrt(1.0 - 4.0 * rs[-1].b_value ** 2)
    assert all(r.i1 < clt for r in rs)


def test_central_limit_at_large_n_fast_path():
    r = s.ratio_exact(_critical(10 ** 5))
    clt = 1.0 / math.sqrt(1.0 - 4.0 * r.b_value ** 2)
    assert r.i1 == pytest.approx(clt, rel=1e-3)
    # the central mass sits a factor e^{2B^2} above the reference
    # constant stored in gaussian_limit
    assert r.i1 > 1.4 * r.gaussian_limit
    assert r.i1 == pytest.approx(
        math.exp(2.0 * r.b_value ** 2) * r.gaussian_limit, rel=1e-3)


def test_fast_path_matches_exact_quadrature():
    params = _critical(2 * FAST_PATH_MIN_N)
    re_ = s.ratio_exact(params, _mode="exact")
    rf = s.ratio_exact(params, _mode="fast")
    assert rf.total == pytest.approx(re_.total, rel=1e-8)
    assert rf.i1 == pytest.approx(re_.i1, rel=1e-8)
    assert rf.i3 == pytest.approx(re_.i3, rel=1e-8)


def test_monotone_in_m_full_sweep():
    n = 500
    cap = round(s.alpha_c(1.0) * n)
    totals = s.ratio_monotone_in_alpha(1.0, n, list(range(0, cap + 1)))
    assert totals[0] == 1.0
    assert totals[1] > 1.0
    for a, b in zip(totals, totals[1:]):
        assert b >= a - 1e-12
    assert totals[-1] <= 10.0


def test_monotone_rejects_m_above_cap():
    cap = round(s.alpha_c(1.0) * 500)
    with pytest.raises(DomainError):
        s.ratio_monotone_in_alpha(1.0, 500, [cap + 1])
    with pytest.raises(DomainError):
        s.ratio_monotone_in_alpha(1.0, 500, [-1])


def test_sorted_accumulation_agrees():
    params = _critical(500)
    up = s.ratio_totals_sorted(params)
    down = s.ratio_totals_sorted(params, descending=True)
    assert up == pytest.approx(down, rel=1e-10)
    assert up == pytest.approx(s.ratio_exact(params).total, rel=1e-10)


def test_middle_region_decays_where_gap_is_certified():
    # delta = 0.2 starts the middle band exactly at the certified
    # free-energy-gap boundary; the decay rate is then visible at desk n
    rates = []
    for n in (500, 1000, 2000):
        r = s.ratio_exact(_critical(n), delta=0.2)
        rates.append(math.log(r.i2) / n)
    assert all(rate < -0.003 for rate in rates)
    assert max(rates) / min(rates) <= 2.0
    # at the default delta the sign arrives later
    r = s.ratio_exact(_critical(2000), delta=0.05)
    assert math.log(r.i2) / 2000 < 0


def test_endpoint_band_concentrates_on_corners():
    for n in (400, 500, 1000):
        r = s.ratio_exact(_critical(n))
        excess = r.i3 - r.endpoint_low - r.endpoint_high
        assert 0.0 <= excess <= math.exp(-math.sqrt(n) / 2.0)
        assert r.i3 >= 2.0 - 1e-9


def test_b_value_and_limit_formulas():
    r = s.ratio_exact(_critical(100))
    p = r.params
    b = math.sqrt(p.m / p.n) * (1.0 - s.mu2(p.K)) / 2.0
    assert r.b_value == pytest.approx(b, rel=1e-14)
    assert r.gaussian_limit == pytest.approx(
        math.exp(-2 * b * b) / math.sqrt(1 - 4 * b * b), rel=1e-14)


def test_gaussian_limit_infinite_past_threshold():
    # 4B^2 >= 1 happens above criticality; the reference constant
    # degenerates and is reported as inf
    r = s.ratio_exact(s.ModelParams(K=1.0, alpha=2.5, n=10))
    assert math.isinf(r.gaussian_limit)
    assert r.total > 1.0


@pytest.mark.parametrize("delta", [0.0, -0.1, 0.25, 0.3])
def test_bad_delta_rejected(delta):
    with pytest.raises(DomainError):
        s.ratio_exact(_critical(30), delta=delta)


def test_oversized_n_rejected():
    params = s.ModelParams(K=1.0, alpha=0.0, n=10 ** 7 + 1, m=0)
    with pytest.raises(DomainError):
        s.ratio_exact(params)


def test_report_to_dict():
    d = s.ratio_exact(_critical(30)).to_dict()
    assert d["params"]["n"] == 30
    assert set(d) == {"params", "total", "i1", "i2", "i3", "delta",
                      "b_value", "gaussian_limit", "log_total",
                      "endpoint_low", "endpoint_high"}


def test_endpoint_gap_frozen_values():
    rep = s.q_endpoint_decay(1.0, [100, 10000])
    assert rep.gaps[0] == pytest.approx(GAP_100, rel=1e-8)
    assert rep.gaps[1] == pytest.approx(GAP_10000, rel=1e-8)


def test_endpoint_decay_fit_k1():
    rep = s.q_endpoint_decay(1.0, [100, 1000, 10 ** 4, 10 ** 5, 10 ** 6])
    assert rep.ok
    assert all(g > 0 for g in rep.gaps)
    assert -0.6 <= rep.slope <= -0.4
    assert rep.c == pytest.approx(0.5656, abs=1e-3)
    assert rep.residual <= 1e-4


def test_endpoint_decay_k_sweep():
    for k in (0.5, 1.0, 2.0):
        rep = s.q_endpoint_decay(k, [100, 1000, 10 ** 4])
        assert rep.ok
        assert rep.c > 0.3 * math.exp(-k * k / 2.0)


def test_endpoint_decay_input_validation():
    with pytest.raises(DomainError):
        s.q_endpoint_decay(1.0, [100])
    with pytest.raises(DomainError):
        s.q_endpoint_decay(1.0, [5, 100])


def test_endpoint_decay_to_dict():
    d = s.q_endpoint_decay(1.0, [100, 1000]).to_dict()
    assert d["ok"] is True
    assert len(d["gaps"]) == 2

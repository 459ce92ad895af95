from fractions import Fraction

import pytest

from mcfrac.errors import BudgetExceeded, ZeroDenominator
from mcfrac.exactmath import PiRatio, normalize
from mcfrac.seriesgen import (
    LU_MAX_K,
    bernoulli,
    brouncker_certified,
    brouncker_qk_series,
    brouncker_qk_value,
    brouncker_raw_series,
    difference_series,
    lebesgue_aj,
    lu_cf_series,
    lu_cf_value,
    lu_quotient,
)

Q8_SHIFTED = [
    Fraction(1),
    Fraction(-5, 4),
    Fraction(49, 32),
    Fraction(-235, 128),
    Fraction(4411, 2048),
    Fraction(-20275, 8192),
    Fraction(183077, 65536),
    Fraction(-815195, 262144),
    Fraction(28754131, 8388608),
    Fraction(-125799895, 33554432),
    Fraction(1091975567, 268435456),
    Fraction(-4702048685, 1073741824),
    Fraction(80679143663, 17179869184),
    Fraction(-346250976095, 68719476736),
    Fraction(2947620308941, 549755813888),
]


def test_bernoulli_numbers():
    assert bernoulli(0) == 1
    assert bernoulli(1) == Fraction(-1, 2)
    assert bernoulli(2) == Fraction(1, 6)
    assert bernoulli(3) == 0
    assert bernoulli(4) == Fraction(-1, 30)
    assert bernoulli(12) == Fraction(-691, 2730)
    with pytest.raises(ValueError):
        bernoulli(-1)


def test_brouncker_value_small_cases():
    assert brouncker_qk_value(1, 0) == 4
    # 4/(1 + 4n + 1/(2 + 8n)) at n = 0
    assert brouncker_qk_value(2, 0) == Fraction(8, 3)


def test_brouncker_truncations_interleave():
    # q2 < q4 < q6 < q8 < q9 < q7 < q5 < q3 < q1
    order = [2, 4, 6, 8, 9, 7, 5, 3, 1]
    for n in range(51):
        values = [brouncker_qk_value(k, n) for k in order]
        assert all(a < b for a, b in zip(values, values[1:])), n


def test_brouncker_value_zero_denominator():
    with pytest.raises(ZeroDenominator):
        brouncker_qk_value(1, Fraction(-1, 4))


def test_brouncker_q8_shifted_expansion():
    series = brouncker_qk_series(8, 15)
    assert [series.coeff(m) for m in range(1, 16)] == Q8_SHIFTED
    assert series.coeff(0) == 0


def test_brouncker_q9_minus_q8_vanishes_through_16():
    gap = brouncker_raw_series(9, 16) - brouncker_raw_series(8, 16)
    assert gap.is_zero_through(16)
    assert brouncker_certified(8, 16)


def test_brouncker_series_refuses_uncertified_order():
    assert not brouncker_certified(2, 10)
    with pytest.raises(BudgetExceeded):
        brouncker_qk_series(2, 10)


def test_landau_difference_leading_term():
    # E_0(n) - E_0(n+1), pi-scaled, starts at 11/96 n^-3
    series = difference_series("landau", 4)
    assert series.coeff(1) == 0
    assert series.coeff(2) == 0
    assert series.coeff(3) == Fraction(11, 96)


def test_lebesgue_first_coefficient():
    pi = PiRatio.pi()
    assert lebesgue_aj(1) == (12 - pi**2) / (18 * pi**2)


def test_lebesgue_difference_leading_term():
    series = difference_series("lebesgue", 4)
    assert series.coeff(1) == 0
    assert series.coeff(2) == 0
    assert series.coeff(3) == 2 * lebesgue_aj(1)


def test_euler_difference_coefficients():
    series = difference_series("euler", 4)
    assert [series.coeff(m) for m in range(1, 5)] == [
        Fraction(0),
        Fraction(1, 2),
        Fraction(-2, 3),
        Fraction(3, 4),
    ]


def test_difference_series_rejects_bad_order():
    with pytest.raises(ValueError):
        difference_series("euler", 0)


def test_lebesgue_difference_needs_enough_terms():
    with pytest.raises(BudgetExceeded):
        difference_series("lebesgue", 12, lebesgue_terms=2)


def test_lu_quotients():
    assert lu_quotient(1) == Fraction(1, 2)
    assert lu_quotient(2) == Fraction(1, 6)
    assert lu_quotient(3) == Fraction(-1, 6)
    assert lu_quotient(13) == -lu_quotient(12)
    with pytest.raises(BudgetExceeded):
        lu_quotient(LU_MAX_K + 1)


def test_lu_value_matches_series():
    # R_2(n) = (1/2)/(n + 1/6)
    assert lu_cf_value(2, 1) == Fraction(3, 7)
    series = lu_cf_series(2, 4)
    assert [series.coeff(m) for m in range(1, 5)] == [
        Fraction(1, 2),
        Fraction(-1, 12),
        Fraction(1, 72),
        Fraction(-1, 432),
    ]


def test_lu_value_rejects_zero():
    with pytest.raises(ZeroDenominator):
        lu_cf_value(3, 0)


def test_lebesgue_coefficients_are_nonrational():
    assert not normalize(lebesgue_aj(2)).is_rational

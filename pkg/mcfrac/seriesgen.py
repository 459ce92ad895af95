from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

from .errors import BudgetExceeded, ZeroDenominator
from .exactmath import (
    PiRatio,
    Scalar,
    TruncSeries,
    log_shift_series,
    series_reciprocal,
    series_shift_substitute,
)
from .families import Family, family_by_tag

BROUNCKER_START = 8
BROUNCKER_MAX = 96

_BERNOULLI: list[Fraction] = [Fraction(1)]
_BERNOULLI_LOCK = threading.Lock()


@dataclass(frozen=True)
class BernoulliTable:
    values: tuple[Fraction, ...]

    def __getitem__(self, index: int) -> Fraction:
        return self.values[index]


def bernoulli(m: int) -> Fraction:
    """B_m for z/(e^z - 1), from sum_{j<=m} C(m+1, j) B_j = 0."""
    if m < 0:
        raise ValueError("bernoulli index must be >= 0")
    with _BERNOULLI_LOCK:
        while len(_BERNOULLI) <= m:
            top = len(_BERNOULLI)
            if top > 1 and top % 2:
                _BERNOULLI.append(Fraction(0))
                continue
            acc = sum(comb(top + 1, j) * _BERNOULLI[j] for j in range(top))
            _BERNOULLI.append(-acc / (top + 1))
        return _BERNOULLI[m]


def bernoulli_table(m: int) -> BernoulliTable:
    bernoulli(m)
    with _BERNOULLI_LOCK:
        return BernoulliTable(tuple(_BERNOULLI[: m + 1]))


# ------------------------------------------------------------------------------
# Brouncker continued fraction for (Gamma(n+1/2)/Gamma(n+1))^2
# ------------------------------------------------------------------------------


def _brouncker_numerators(k: int) -> list[int]:
    # inner partial numerators 1^2, 3^2, ..., (2k-3)^2, innermost last
    return [(2 * i - 1) ** 2 for i in range(1, k)]


def brouncker_qk_value(k: int, n: Fraction | int) -> Fraction:
    if k < 1:
        raise ValueError("k must be >= 1")
    n = Fraction(n)
    tail = Fraction(0)
    for numerator in reversed(_brouncker_numerators(k)):
        denominator = 2 + 8 * n + tail
        if not denominator:
            raise ZeroDenominator("division by zero in continued fraction", k=k, n=str(n))
        tail = numerator / denominator
    head = 1 + 4 * n + tail
    if not head:
        raise ZeroDenominator("division by zero in continued fraction", k=k, n=str(n))
    return 4 / head


def _x_series(order: int) -> TruncSeries:
    return TruncSeries.monomial(1, 1, order)


@lru_cache(maxsize=128)
def brouncker_raw_series(k: int, order: int) -> TruncSeries:
    """q_k(n) in x = 1/n, without the certification check."""
    x = _x_series(order)
    tail = TruncSeries.zero(order)
    for numerator in reversed(_brouncker_numerators(k)):
        # c^2 / (2 + 8n + T) = c^2 x / (8 + 2x + xT)
        denominator = TruncSeries.from_coeffs([8, 2], valid_order=order) + x * tail
        tail = (x * series_reciprocal(denominator)).scale(numerator)
    # 4 / (1 + 4n + T) = 4x / (4 + x + xT)
    denominator = TruncSeries.from_coeffs([4, 1], valid_order=order) + x * tail
    return (x * series_reciprocal(denominator)).scale(4).truncate(order)


def brouncker_certified(k: int, order: int) -> bool:
    """q(n) lies between q_k(n) and q_{k+1}(n), so their agreement through ``order``
    fixes the expansion of q(n) through that order."""
    gap = brouncker_raw_series(k + 1, order) - brouncker_raw_series(k, order)
    return gap.is_zero_through(order)


@lru_cache(maxsize=64)
def brouncker_certified_k(order: int) -> int:
    k = max(BROUNCKER_START, order // 2 + order % 2)
    k += k % 2
    while k <= BROUNCKER_MAX:
        if brouncker_certified(k, order):
            return k
        k += 2
    raise BudgetExceeded(
        f"order exceeds residual guarantee: no q_k with k <= {BROUNCKER_MAX} certifies "
        f"order {order}",
        order=order,
    )


def brouncker_qk_series(k: int, order: int) -> TruncSeries:
    """q_k(n+1) in x = 1/n through x^order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not brouncker_certified(k, order):
        raise BudgetExceeded(
            f"order exceeds residual guarantee: q_{k + 1} - q_{k} does not vanish "
            f"through x^{order}",
            k=k,
            order=order,
        )
    return series_shift_substitute(brouncker_raw_series(k, order))


# ------------------------------------------------------------------------------
# Lebesgue coefficients
# ------------------------------------------------------------------------------


@lru_cache(maxsize=None)
def lebesgue_aj(j: int) -> PiRatio:
    if j < 1:
        raise ValueError("j must be >= 1")
    pi = PiRatio.pi()
    bracket = PiRatio.from_fraction(1)
    for k in range(1, j + 1):
        term = bernoulli(2 * k) / factorial(2 * k) * pi ** (2 * k)
        bracket = bracket - term if k % 2 else bracket + term
    scale = Fraction(8) * bernoulli(2 * j) / (2 * j) * (2 ** (2 * j - 1) - 1)
    return scale * bracket / pi**2


def lebesgue_terms_for(order: int) -> int:
    """Smallest M such that W_M(n) - W_M(n+1) is exact through x^order."""
    return max(1, (order - 1) // 2)


def lebesgue_w_series(terms: int, order: int) -> TruncSeries:
    """W_M(n) = sum a_j/(n+1)^(2j), the shift of sum a_j x^(2j)."""
    coeffs: list[Scalar] = [Fraction(0)] * (order + 1)
    for j in range(1, terms + 1):
        if 2 * j <= order:
            coeffs[2 * j] = lebesgue_aj(j)
    return series_shift_substitute(TruncSeries(0, tuple(coeffs), order))


# ------------------------------------------------------------------------------
# v(n) - v(n+1) - [MC_0(n) - MC_0(n+1)]
# ------------------------------------------------------------------------------


def _landau_difference(order: int) -> TruncSeries:
    # pi-scaled: -q(n+1) + ln(n+7/4) - ln(n+3/4)
    q_next = brouncker_qk_series(brouncker_certified_k(order), order)
    return log_shift_series(Fraction(3, 4), Fraction(7, 4), order) - q_next


def _lebesgue_difference(order: int, terms: int | None) -> TruncSeries:
    needed = lebesgue_terms_for(order)
    if terms is None:
        terms = needed
    elif terms < needed:
        raise BudgetExceeded(
            f"order exceeds residual guarantee: W_{terms} is exact only through "
            f"x^{2 * terms + 2}",
            terms=terms,
            order=order,
        )
    w = lebesgue_w_series(terms, order)
    return w - series_shift_substitute(w)


def _euler_difference(order: int) -> TruncSeries:
    # ln(1 + 1/n) - 1/(n+1)
    coeffs = []
    for m in range(1, order + 1):
        value = Fraction(1, m) - 1
        coeffs.append(value if m % 2 else -value)
    return TruncSeries(1, tuple(coeffs), order)


def difference_series(
    family: str | Family, order: int, *, lebesgue_terms: int | None = None
) -> TruncSeries:
    if order < 1:
        raise ValueError("order must be >= 1")
    family = family_by_tag(family)
    if family.tag == "landau":
        series = _landau_difference(order)
    elif family.tag == "lebesgue":
        series = _lebesgue_difference(order, lebesgue_terms)
    else:
        series = _euler_difference(order)
    return series.with_min_order(1)


# ------------------------------------------------------------------------------
# Lu-type continued fraction for gamma
# ------------------------------------------------------------------------------

_LU_EVEN_QUOTIENTS = {
    1: Fraction(1, 2),
    2: Fraction(1, 6),
    4: Fraction(3, 5),
    6: Fraction(79, 126),
    8: Fraction(7230, 6241),
    10: Fraction(4146631, 3833346),
    12: Fraction(306232774533, 179081182865),
}
LU_MAX_K = 13


def lu_quotient(j: int) -> Fraction:
    if not 1 <= j <= LU_MAX_K:
        raise BudgetExceeded(f"quotient a_{j} is not tabulated (1 <= j <= {LU_MAX_K})", j=j)
    if j == 1 or j % 2 == 0:
        return _LU_EVEN_QUOTIENTS[j]
    return -_LU_EVEN_QUOTIENTS[j - 1]


def lu_cf_value(k: int, n: Fraction | int) -> Fraction:
    """R_k(n) = a_1/(n + a_2 n/(n + ... + a_k n/n))."""
    n = Fraction(n)
    if not n:
        raise ZeroDenominator("division by zero in continued fraction", k=k, n="0")
    if k == 1:
        return lu_quotient(1) / n
    tail = lu_quotient(k)
    for j in range(k - 1, 1, -1):
        denominator = n + tail
        if not denominator:
            raise ZeroDenominator("division by zero in continued fraction", k=k, n=str(n))
        tail = lu_quotient(j) * n / denominator
    denominator = n + tail
    if not denominator:
        raise ZeroDenominator("division by zero in continued fraction", k=k, n=str(n))
    return lu_quotient(1) / denominator


def lu_cf_series(k: int, order: int) -> TruncSeries:
    x = _x_series(order)
    if k == 1:
        return x.scale(lu_quotient(1))
    one = TruncSeries.constant(1, order)
    tail = TruncSeries.constant(lu_quotient(k), order)
    for j in range(k - 1, 1, -1):
        # a_j n/(n + U) = a_j / (1 + xU)
        tail = series_reciprocal(one + x * tail).scale(lu_quotient(j))
    return (x * series_reciprocal(one + x * tail)).scale(lu_quotient(1)).truncate(order)

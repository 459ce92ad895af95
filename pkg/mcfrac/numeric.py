from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Literal

import mpmath
from mpmath import MPContext, MPIntervalContext

from .correction import CFApprox, cf_evaluate_exact
from .errors import NumericError, QuadratureFailed, TailBoundUnavailable
from .exactmath import PiRatio, Scalar, normalize
from .families import Family, family_by_tag
from .seriesgen import bernoulli, lebesgue_aj

GUARD_BITS = 24
C1_LITERAL = ("0.98943127383114695173", "0.98943127383114695175")
C1_PARTIAL_TERMS = 10_000
C1_MAX_EULER_MACLAURIN = 400
LEBESGUE_MAX_N = 8
QUAD_MAX_PANELS = 4096
QUAD_ERROR_INFLATION = 4

_LOCAL = threading.local()


def interval_context(bits: int) -> MPIntervalContext:
    """Interval context at ``bits``; one per thread and precision, never shared."""
    cache = getattr(_LOCAL, "interval", None)
    if cache is None:
        cache = _LOCAL.interval = {}
    ctx = cache.get(bits)
    if ctx is None:
        ctx = MPIntervalContext()
        ctx.prec = bits
        cache[bits] = ctx
    return ctx


def float_context(bits: int) -> MPContext:
    cache = getattr(_LOCAL, "float", None)
    if cache is None:
        cache = _LOCAL.float = {}
    ctx = cache.get(bits)
    if ctx is None:
        ctx = MPContext()
        ctx.prec = bits
        cache[bits] = ctx
    return ctx


def _check_precision(bits: int) -> None:
    if bits < 64:
        raise NumericError(f"precision must be >= 64 bits, got {bits}")


@dataclass(frozen=True)
class Enclosure:
    """Closed interval [lo, hi] certified to contain a real quantity.

    Endpoints are exact binary floats; every constructing operation rounds outward.
    """

    lo: Any
    hi: Any
    bits: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise NumericError("enclosure with lo > hi")

    @classmethod
    def from_interval(cls, value: Any, bits: int) -> Enclosure:
        lo_raw, hi_raw = value._mpi_
        return cls(mpmath.mp.make_mpf(lo_raw), mpmath.mp.make_mpf(hi_raw), bits)

    @classmethod
    def from_exact(cls, value: Scalar | int, bits: int) -> Enclosure:
        ctx = interval_context(bits)
        return cls.from_interval(enclose_scalar(value, ctx), bits)

    @classmethod
    def from_decimals(cls, lo: str, hi: str, bits: int) -> Enclosure:
        ctx = interval_context(bits)
        return cls.from_interval(ctx.mpf([ctx.mpf(lo).a, ctx.mpf(hi).b]), bits)

    def to_interval(self, ctx: MPIntervalContext) -> Any:
        return ctx.mpf([self.lo, self.hi])

    @property
    def width(self) -> Any:
        return mpmath.mp.make_mpf(mpmath.libmp.mpf_sub(self.hi._mpf_, self.lo._mpf_, 64, "u"))

    @property
    def mid(self) -> Any:
        ctx = float_context(self.bits + 8)
        return (ctx.mpf(self.lo) + ctx.mpf(self.hi)) / 2

    def contains(self, value: Scalar | int | str | Enclosure) -> bool:
        other = value if isinstance(value, Enclosure) else _coerce_enclosure(value, self.bits)
        return self.lo <= other.lo and other.hi <= self.hi

    def intersects(self, other: Enclosure) -> bool:
        return not (self.hi < other.lo or other.hi < self.lo)

    def intersection(self, other: Enclosure) -> Enclosure:
        if not self.intersects(other):
            raise NumericError("enclosures are disjoint")
        lo = self.lo if self.lo >= other.lo else other.lo
        hi = self.hi if self.hi <= other.hi else other.hi
        return Enclosure(lo, hi, max(self.bits, other.bits))

    def relative_width(self) -> float:
        magnitude = min(abs(self.lo), abs(self.hi))
        if self.lo <= 0 <= self.hi or not magnitude:
            return math.inf
        return float(self.width / magnitude)

    def render(self, digits: int = 30) -> dict[str, Any]:
        ctx = float_context(max(self.bits, int(digits * 3.33) + 16))
        radius = ctx.mpf(self.width) / 2
        return {
            "value": ctx.nstr(self.mid, digits),
            "err_bound": ctx.nstr(radius, 3),
            "bits": self.bits,
        }

    def __str__(self) -> str:
        return f"[{mpmath.nstr(self.lo, 25)}, {mpmath.nstr(self.hi, 25)}]"


Verdict = Literal["certified-true", "inconclusive", "certified-false"]


def certify_less(lhs: Enclosure, rhs: Enclosure) -> Verdict:
    """Strict lhs < rhs decided only when the intervals are disjoint."""
    if lhs.hi < rhs.lo:
        return "certified-true"
    if lhs.lo >= rhs.hi:
        return "certified-false"
    return "inconclusive"


def _coerce_enclosure(value: Scalar | int | str, bits: int) -> Enclosure:
    if isinstance(value, str):
        ctx = interval_context(bits + GUARD_BITS)
        return Enclosure.from_interval(ctx.mpf(value), bits)
    return Enclosure.from_exact(value, bits + GUARD_BITS)


def enclose_fraction(value: Fraction | int, ctx: MPIntervalContext) -> Any:
    value = Fraction(value)
    if value.denominator == 1:
        return ctx.mpf(value.numerator)
    return ctx.mpf(value.numerator) / ctx.mpf(value.denominator)


def _horner(terms: list[tuple[int, Fraction]], x: Any, ctx: MPIntervalContext) -> Any:
    acc = ctx.mpf(0)
    degree = terms[-1][0] if terms else 0
    lookup = dict(terms)
    for d in range(degree, -1, -1):
        acc = acc * x
        coeff = lookup.get(d)
        if coeff:
            acc = acc + enclose_fraction(coeff, ctx)
    return acc


def enclose_scalar(value: Scalar | int, ctx: MPIntervalContext) -> Any:
    if isinstance(value, PiRatio):
        value = normalize(value)
    if not isinstance(value, PiRatio):
        return enclose_fraction(value, ctx)
    pi = ctx.pi
    return _horner(value.numerator_terms(), pi, ctx) / _horner(value.denominator_terms(), pi, ctx)


def to_decimal(value: Scalar | int, digits: int = 30) -> str:
    bits = int(digits * 3.33) + 2 * GUARD_BITS
    enclosure = Enclosure.from_exact(value, bits)
    return float_context(bits).nstr(enclosure.mid, digits)


# ------------------------------------------------------------------------------
# Exact sequences
# ------------------------------------------------------------------------------

_G_TERMS: list[Fraction] = [Fraction(1)]
_G_SUMS: list[Fraction] = [Fraction(1)]
_G_LOCK = threading.Lock()


def landau_G(n: int) -> Fraction:
    """G(n) = sum_{k<=n} (binom(2k, k)/4^k)^2, extended incrementally."""
    if n < 0:
        raise ValueError("n must be >= 0")
    with _G_LOCK:
        while len(_G_SUMS) <= n:
            k = len(_G_SUMS)
            term = _G_TERMS[-1] * Fraction(2 * k - 1, 2 * k) ** 2
            _G_TERMS.append(term)
            _G_SUMS.append(_G_SUMS[-1] + term)
        return _G_SUMS[n]


def _harmonic_split(a: int, b: int) -> tuple[int, int]:
    # sum_{k=a}^{b-1} 1/k as an unreduced p/q
    if b - a == 1:
        return 1, a
    m = (a + b) // 2
    p1, q1 = _harmonic_split(a, m)
    p2, q2 = _harmonic_split(m, b)
    return p1 * q2 + p2 * q1, q1 * q2


def harmonic(n: int) -> Fraction:
    if n < 1:
        raise ValueError("n must be >= 1")
    p, q = _harmonic_split(1, n + 1)
    return Fraction(p, q)


# ------------------------------------------------------------------------------
# Constants
# ------------------------------------------------------------------------------


@lru_cache(maxsize=32)
def gamma_reference(bits: int) -> Enclosure:
    """Euler's constant from Euler-Maclaurin on H_N - ln N.

    The expansion alternates in sign past the first term, so gamma lies between the
    truncations after K and K+1 correction terms.
    """
    _check_precision(bits)
    n_terms = max(1000, bits)
    target = Fraction(1, 2 ** (bits + GUARD_BITS))
    partial = harmonic(n_terms) - Fraction(1, 2 * n_terms)
    k = 1
    while True:
        partial += bernoulli(2 * k) / (2 * k * Fraction(n_terms) ** (2 * k))
        omitted = bernoulli(2 * k + 2) / ((2 * k + 2) * Fraction(n_terms) ** (2 * k + 2))
        if abs(omitted) < target:
            break
        k += 1
    ctx = interval_context(bits + GUARD_BITS)
    low, high = sorted((partial, partial + omitted))
    bracket = ctx.mpf([enclose_fraction(low, ctx).a, enclose_fraction(high, ctx).b])
    return Enclosure.from_interval(bracket - ctx.ln(ctx.mpf(n_terms)), bits)


@lru_cache(maxsize=32)
def const_c0(bits: int) -> Enclosure:
    """c0 = (gamma + 4 ln 2)/pi."""
    _check_precision(bits)
    ctx = interval_context(bits + GUARD_BITS)
    gamma = gamma_reference(bits + GUARD_BITS).to_interval(ctx)
    value = (gamma + 4 * ctx.ln(ctx.mpf(2))) / ctx.pi
    return Enclosure.from_interval(value, bits)


def _log_derivative(order: int, x: Any, ctx: MPIntervalContext) -> Any:
    if order == 0:
        return ctx.ln(x)
    sign = 1 if order % 2 else -1
    return sign * ctx.mpf(math.factorial(order - 1)) / x**order


def _g_derivative(order: int, x: Any, ctx: MPIntervalContext) -> Any:
    # g = 1/(4x^2 - 1) = (1/(2x-1) - 1/(2x+1))/2
    scale = ctx.mpf(math.factorial(order)) * ctx.mpf(2) ** order / 2
    if order % 2:
        scale = -scale
    return scale * (1 / (2 * x - 1) ** (order + 1) - 1 / (2 * x + 1) ** (order + 1))


def _c1_term_derivative(order: int, x: Any, ctx: MPIntervalContext) -> Any:
    """d^order/dx^order of ln(x)/(4x^2 - 1), by Leibniz."""
    total = ctx.mpf(0)
    for i in range(order + 1):
        total += math.comb(order, i) * _log_derivative(i, x, ctx) * _g_derivative(order - i, x, ctx)
    return total


def _c1_integral_tail(start: int, ctx: MPIntervalContext, eps: Any) -> Any:
    """int_start^inf ln(x)/(4x^2 - 1) dx via 1/(4x^2-1) = sum 4^-m x^-2m."""
    k = ctx.mpf(start)
    ln_k = ctx.ln(k)
    total = ctx.mpf(0)
    m = 1
    while True:
        odd = 2 * m - 1
        term = (ln_k / odd + ctx.mpf(1) / odd**2) / (ctx.mpf(4) ** m * k**odd)
        total += term
        # positive terms with ratio below 1/(4 start^2) < 1/2
        if term.b < eps.a:
            return total + ctx.mpf([0, (2 * term).b])
        m += 1


@lru_cache(maxsize=16)
def _c1_partial_sum(terms: int, bits: int) -> Enclosure:
    ctx = interval_context(bits)
    total = ctx.mpf(0)
    for k in range(2, terms):
        kk = ctx.mpf(k)
        total += ctx.ln(kk) / (4 * kk * kk - 1)
    return Enclosure.from_interval(total, bits)


@lru_cache(maxsize=16)
def _c1_series_accelerated(bits: int) -> Enclosure:
    """sum_{k>=2} ln k/(4k^2 - 1) with an Euler-Maclaurin tail from k = C1_PARTIAL_TERMS."""
    work = bits + GUARD_BITS
    ctx = interval_context(work)
    start = C1_PARTIAL_TERMS
    eps = ctx.mpf(2) ** (-(bits + 8))
    x = ctx.mpf(start)
    tail = _c1_integral_tail(start, ctx, eps) + _c1_term_derivative(0, x, ctx) / 2
    j = 1
    while True:
        if j > C1_MAX_EULER_MACLAURIN:
            raise TailBoundUnavailable(
                f"tail bound unavailable: Euler-Maclaurin cannot certify 2^-{bits}", bits=bits
            )
        derivative = _c1_term_derivative(2 * j - 1, x, ctx)
        correction = enclose_fraction(bernoulli(2 * j), ctx) / ctx.mpf(math.factorial(2 * j))
        tail -= correction * derivative
        # |R_J| <= 4/(2 pi)^(2J) |f^(2J-1)(start)|, f^(2J) of one sign beyond start
        remainder = 4 * abs(derivative) / (2 * ctx.pi) ** (2 * j)
        if remainder.b < eps.a:
            tail += ctx.mpf([-remainder.b, remainder.b])
            break
        j += 1
    partial = _c1_partial_sum(start, work).to_interval(ctx)
    return Enclosure.from_interval(partial + tail, bits)


def _c1_from_series(series: Any, ctx: MPIntervalContext, bits: int) -> Any:
    gamma = gamma_reference(bits).to_interval(ctx)
    ln2 = ctx.ln(ctx.mpf(2))
    return (8 * series + 4 * (gamma + 2 * ln2)) / ctx.pi**2


def c1_partial_bracket(terms: int, bits: int = 96) -> Enclosure:
    """c1 from a direct partial sum; f is decreasing, so the tail from ``terms`` lies
    between the integrals from ``terms`` and ``terms - 1``."""
    ctx = interval_context(bits)
    partial = _c1_partial_sum(terms, bits).to_interval(ctx)
    eps = ctx.mpf(2) ** (-bits)
    upper_tail = _c1_integral_tail(terms - 1, ctx, eps)
    lower_tail = _c1_integral_tail(terms, ctx, eps)
    series = ctx.mpf([(partial + lower_tail).a, (partial + upper_tail).b])
    return Enclosure.from_interval(_c1_from_series(series, ctx, bits), bits)


@lru_cache(maxsize=32)
def const_c1(bits: int, mode: Literal["accelerated", "literal"] = "accelerated") -> Enclosure:
    """c1 = (8/pi^2) sum ln k/(4k^2 - 1) + (4/pi^2)(gamma + 2 ln 2)."""
    _check_precision(bits)
    if mode == "literal":
        literal = Enclosure.from_decimals(*C1_LITERAL, bits)
        bracket = c1_partial_bracket(C1_PARTIAL_TERMS)
        if not literal.intersects(bracket):
            raise NumericError(
                "literal c1 disagrees with the direct partial sum", bracket=str(bracket)
            )
        return literal
    if mode != "accelerated":
        raise NumericError(f"unknown c1 mode: {mode}")
    work = bits + GUARD_BITS
    ctx = interval_context(work)
    series = _c1_series_accelerated(bits).to_interval(ctx)
    return Enclosure.from_interval(_c1_from_series(series, ctx, work), bits)


# ------------------------------------------------------------------------------
# Lebesgue constants L_{n/2}
# ------------------------------------------------------------------------------


def _lebesgue_mc0(n: int, ctx: MPIntervalContext, bits: int) -> Any:
    c1 = const_c1(bits).to_interval(ctx)
    return 4 * ctx.ln(ctx.mpf(n + 1)) / ctx.pi**2 + c1


def lebesgue_enclosure(n: int, N: int, bits: int) -> Enclosure:
    """Two-sided bound on L_{n/2} from the Bernoulli-series expansion: 2N terms below,
    2N+1 terms above."""
    if n < 0 or N < 1:
        raise ValueError("need n >= 0 and N >= 1")
    _check_precision(bits)
    work = bits + GUARD_BITS
    ctx = interval_context(work)
    base = _lebesgue_mc0(n, ctx, work)
    inverse_square = 1 / ctx.mpf(n + 1) ** 2
    power = ctx.mpf(1)
    lower = base
    for j in range(1, 2 * N + 1):
        power = power * inverse_square
        lower = lower + enclose_scalar(lebesgue_aj(j), ctx) * power
    upper = lower + enclose_scalar(lebesgue_aj(2 * N + 1), ctx) * power * inverse_square
    return Enclosure.from_interval(ctx.mpf([lower.a, upper.b]), bits)


def best_lebesgue_enclosure(n: int, bits: int, max_n: int = LEBESGUE_MAX_N) -> Enclosure:
    best = lebesgue_enclosure(n, 1, bits)
    for N in range(2, max_n + 1):
        best = best.intersection(lebesgue_enclosure(n, N, bits))
    return best


def lebesgue_quadrature(n: int, tol: float = 1e-20) -> Enclosure:
    """(1/pi) int_0^pi |sin((n+1)t/2)/sin(t/2)| dt, panel-wise between integrand zeros.

    Each panel's quadrature error estimate is inflated and folded into the interval.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if tol <= 0:
        raise QuadratureFailed("tolerance must be positive")
    bits = max(64, int(-math.log2(tol)) + 32)
    ctx = float_context(bits)
    half = ctx.mpf(n + 1) / 2

    def integrand(t: Any) -> Any:
        return ctx.sin(half * t) / ctx.sin(t / 2)

    # zeros of the integrand at 2j pi/(n+1), as fractions of pi
    cuts = [Fraction(2 * j, n + 1) for j in range((n + 1) // 2 + 1)]
    if cuts[-1] != 1:
        cuts.append(Fraction(1))
    points = [ctx.pi * cut.numerator / cut.denominator for cut in cuts]
    pending = list(zip(points[:-1], points[1:]))
    budget = ctx.mpf(tol) / (8 * ctx.pi)
    total = ctx.mpf(0)
    error = ctx.mpf(0)
    panels = 0
    while pending:
        a, b = pending.pop()
        panels += 1
        if panels > QUAD_MAX_PANELS:
            raise QuadratureFailed(
                f"tolerance {tol} not reached within {QUAD_MAX_PANELS} panels", n=n
            )
        value, estimate = ctx.quad(integrand, [a, b], error=True)
        if estimate > budget * (b - a) and b - a > ctx.mpf(2) ** (-bits // 2):
            midpoint = (a + b) / 2
            pending.extend([(a, midpoint), (midpoint, b)])
            continue
        total += abs(value)
        error += QUAD_ERROR_INFLATION * estimate
    value = total / ctx.pi
    radius = error / ctx.pi + ctx.mpf(2) ** (-bits + 8) * (1 + abs(value))
    if 2 * radius > tol:
        raise QuadratureFailed(f"tolerance {tol} not reached (error {ctx.nstr(radius, 3)})", n=n)
    ictx = interval_context(bits)
    return Enclosure.from_interval(ictx.mpf([value - radius, value + radius]), bits)


def lebesgue_value(n: int, bits: int, *, quadrature: bool = False) -> Enclosure:
    """L_{n/2}: exact at n = 0, otherwise the Bernoulli-series bounds, refined by
    quadrature on request."""
    if n == 0:
        return Enclosure.from_exact(1, bits)
    enclosure = best_lebesgue_enclosure(n, bits)
    if quadrature:
        oracle = lebesgue_quadrature(n, tol=float(2 ** -min(bits, 200)) * 64)
        if enclosure.intersects(oracle):
            enclosure = enclosure.intersection(oracle)
    return enclosure


# ------------------------------------------------------------------------------
# Approximants and error terms
# ------------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _enclosed_terms(cf: CFApprox, bits: int) -> tuple[tuple[Enclosure, Enclosure], ...]:
    return tuple(
        (Enclosure.from_exact(num, bits), Enclosure.from_exact(den, bits)) for num, den in cf.terms
    )


def cf_enclosure(cf: CFApprox, n: int | Fraction, bits: int) -> Enclosure:
    """MC_k(n) evaluated innermost-first in interval arithmetic."""
    if not cf.terms:
        return Enclosure.from_exact(0, bits)
    if cf.family.tag != "lebesgue":
        return Enclosure.from_exact(cf_evaluate_exact(cf, n), bits)
    work = bits + GUARD_BITS
    ctx = interval_context(work)
    n_shift = enclose_fraction(Fraction(n) + cf.family.shift, ctx)
    argument = n_shift**2 if cf.family.template == "quadratic" else n_shift
    tail = ctx.mpf(0)
    for num, den in reversed(_enclosed_terms(cf, work)):
        tail = num.to_interval(ctx) / (argument + den.to_interval(ctx) + tail)
    return Enclosure.from_interval(tail * enclose_scalar(cf.outer_scale, ctx), bits)


def mc0_enclosure(family: str | Family, n: int, bits: int) -> Enclosure:
    family = family_by_tag(family)
    work = bits + GUARD_BITS
    ctx = interval_context(work)
    if family.tag == "landau":
        c0 = const_c0(work).to_interval(ctx)
        value = ctx.ln(enclose_fraction(Fraction(4 * n + 3, 4), ctx)) / ctx.pi + c0
    elif family.tag == "lebesgue":
        value = _lebesgue_mc0(n, ctx, work)
    else:
        value = ctx.mpf(0)
    return Enclosure.from_interval(value, bits)


def target_enclosure(
    family: str | Family, n: int, bits: int, *, quadrature: bool = False
) -> Enclosure:
    """G(n), L_{n/2}, or H_n - ln n - gamma."""
    family = family_by_tag(family)
    if family.tag == "landau":
        return Enclosure.from_exact(landau_G(n), bits)
    if family.tag == "lebesgue":
        return lebesgue_value(n, bits, quadrature=quadrature)
    if n < 1:
        raise NumericError("Euler error terms need n >= 1")
    work = bits + GUARD_BITS
    ctx = interval_context(work)
    gamma = gamma_reference(work).to_interval(ctx)
    value = enclose_fraction(harmonic(n), ctx) - ctx.ln(ctx.mpf(n)) - gamma
    return Enclosure.from_interval(value, bits)


def error_term(
    family: str | Family, cf: CFApprox, n: int, bits: int, *, quadrature: bool = False
) -> Enclosure:
    """E_k(n) = target - MC_0(n) - MC_k(n)."""
    _check_precision(bits)
    family = family_by_tag(family)
    work = bits + GUARD_BITS
    ctx = interval_context(work)
    value = (
        target_enclosure(family, n, work, quadrature=quadrature).to_interval(ctx)
        - mc0_enclosure(family, n, work).to_interval(ctx)
        - cf_enclosure(cf, n, work).to_interval(ctx)
    )
    return Enclosure.from_interval(value, bits)

from __future__ import annotations

import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from math import comb, gcd, lcm

from sympy.polys.domains import QQ
from sympy.polys.fields import field

from .errors import (
    Inconsistent,
    NonInvertibleSeries,
    NonLinearDependence,
    SeriesError,
    Underdetermined,
    ValidityExceeded,
)

PI_FIELD, _PI_GEN = field("pi", QQ)
_RATIONAL_PATTERN = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")
_TOKEN_PATTERN = re.compile(r"\s*(?:(\d+)|(pi|π)|(\*\*|[-+*/^()]))")


def _to_qq(value: Fraction | int) -> object:
    value = Fraction(value)
    return QQ(value.numerator, value.denominator)


def _qq_to_fraction(value: object) -> Fraction:
    return Fraction(int(value.numerator), int(value.denominator))


class PiRatio:
    """Element of Q(pi), with pi a formal transcendental.

    Backed by a sympy ``FracElement``; field arithmetic cancels by the polynomial gcd, so
    numerator and denominator stay content-reduced with a positive leading denominator
    coefficient. Instances are immutable.
    """

    __slots__ = ("_value",)

    def __init__(self, value: object) -> None:
        if isinstance(value, PiRatio):
            value = value._value
        elif isinstance(value, (int, Fraction)):
            value = PI_FIELD(_to_qq(value))
        object.__setattr__(self, "_value", value)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("PiRatio is immutable")

    @classmethod
    def pi(cls) -> PiRatio:
        return cls(_PI_GEN)

    @classmethod
    def from_fraction(cls, value: Fraction | int) -> PiRatio:
        return cls(PI_FIELD(_to_qq(value)))

    @classmethod
    def parse(cls, text: str) -> PiRatio:
        """Parse integers, ``pi``, + - * / ^ (or **) with integer exponents, and parentheses.

        Nothing is evaluated through Python; anything else raises ``SeriesError``.
        """
        return cls(_PiExprParser(text).parse())

    # -- structure -------------------------------------------------------------------------

    def _poly_terms(self, poly: object) -> list[tuple[int, Fraction]]:
        terms = [(monom[0], _qq_to_fraction(coeff)) for monom, coeff in poly.terms()]
        return sorted(terms)

    def numerator_terms(self) -> list[tuple[int, Fraction]]:
        """(degree, coefficient) pairs of the numerator, ascending degree."""
        return self._poly_terms(self._value.numer)

    def denominator_terms(self) -> list[tuple[int, Fraction]]:
        return self._poly_terms(self._value.denom)

    @property
    def is_rational(self) -> bool:
        return self._value.numer.degree() <= 0 and self._value.denom.degree() <= 0

    def to_fraction(self) -> Fraction:
        if not self.is_rational:
            raise SeriesError(f"{self} is not rational")
        num = _qq_to_fraction(self._value.numer.LC) if self._value.numer else Fraction(0)
        return num / _qq_to_fraction(self._value.denom.LC)

    # -- arithmetic ------------------------------------------------------------------------

    @staticmethod
    def _coerce(other: object) -> object | None:
        if isinstance(other, PiRatio):
            return other._value
        if isinstance(other, (int, Fraction)):
            return PI_FIELD(_to_qq(other))
        return None

    def __add__(self, other: object) -> PiRatio:
        value = self._coerce(other)
        if value is None:
            return NotImplemented
        return PiRatio(self._value + value)

    __radd__ = __add__

    def __sub__(self, other: object) -> PiRatio:
        value = self._coerce(other)
        if value is None:
            return NotImplemented
        return PiRatio(self._value - value)

    def __rsub__(self, other: object) -> PiRatio:
        value = self._coerce(other)
        if value is None:
            return NotImplemented
        return PiRatio(value - self._value)

    def __mul__(self, other: object) -> PiRatio:
        value = self._coerce(other)
        if value is None:
            return NotImplemented
        return PiRatio(self._value * value)

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> PiRatio:
        value = self._coerce(other)
        if value is None:
            return NotImplemented
        if not value:
            raise ZeroDivisionError("PiRatio division by zero")
        return PiRatio(self._value / value)

    def __rtruediv__(self, other: object) -> PiRatio:
        value = self._coerce(other)
        if value is None:
            return NotImplemented
        if not self._value:
            raise ZeroDivisionError("PiRatio division by zero")
        return PiRatio(value / self._value)

    def __neg__(self) -> PiRatio:
        return PiRatio(-self._value)

    def __pow__(self, exponent: int) -> PiRatio:
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return PiRatio(1 / (self._value**-exponent))
        return PiRatio(self._value**exponent)

    def __bool__(self) -> bool:
        return bool(self._value.numer)

    def __eq__(self, other: object) -> bool:
        value = self._coerce(other)
        if value is None:
            return NotImplemented
        lhs = self._value.numer * value.denom
        rhs = value.numer * self._value.denom
        return lhs == rhs

    def __hash__(self) -> int:
        if self.is_rational:
            return hash(self.to_fraction())
        return hash((tuple(self.numerator_terms()), tuple(self.denominator_terms())))

    # -- rendering -------------------------------------------------------------------------

    def __str__(self) -> str:
        num_terms, den_terms = self._integer_terms()
        numerator = _format_poly(num_terms)
        if den_terms == [(0, 1)]:
            return numerator
        if len(num_terms) > 1:
            numerator = f"({numerator})"
        denominator = _format_poly(den_terms)
        if len(den_terms) > 1 or (den_terms[0][0] > 0 and den_terms[0][1] != 1):
            denominator = f"({denominator})"
        return f"{numerator}/{denominator}"

    def __repr__(self) -> str:
        return f"PiRatio({str(self)!r})"

    def _integer_terms(self) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
        num = self.numerator_terms()
        den = self.denominator_terms()
        if not num:
            return [(0, 0)], [(0, 1)]
        scale = 1
        for _, coeff in num + den:
            scale = lcm(scale, coeff.denominator)
        num_int = [(deg, int(c * scale)) for deg, c in num]
        den_int = [(deg, int(c * scale)) for deg, c in den]
        content = 0
        for _, c in num_int + den_int:
            content = gcd(content, c)
        # positive leading coefficient of the denominator
        if den_int[-1][1] < 0:
            content = -content
        num_int = [(deg, c // content) for deg, c in num_int]
        den_int = [(deg, c // content) for deg, c in den_int]
        return num_int, den_int


def _format_monomial(degree: int, coeff: int, *, first: bool) -> str:
    magnitude = abs(coeff)
    if degree == 0:
        body = str(magnitude)
    else:
        power = "pi" if degree == 1 else f"pi^{degree}"
        body = power if magnitude == 1 else f"{magnitude}*{power}"
    if first:
        return f"-{body}" if coeff < 0 else body
    return f" - {body}" if coeff < 0 else f" + {body}"


def _format_poly(terms: list[tuple[int, int]]) -> str:
    parts = [
        _format_monomial(deg, coeff, first=index == 0)
        for index, (deg, coeff) in enumerate(terms)
    ]
    return "".join(parts)


class _PiExprParser:
    """Recursive descent over the Q(pi) expressions that ``str(PiRatio)`` produces."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _tokenize(self, text: str) -> list[tuple[str, str]]:
        tokens: list[tuple[str, str]] = []
        index = 0
        while index < len(text):
            if text[index:].strip() == "":
                break
            match = _TOKEN_PATTERN.match(text, index)
            if match is None:
                raise SeriesError(f"unexpected character in {text!r}", position=index)
            number, pi, op = match.groups()
            if number is not None:
                tokens.append(("int", number))
            elif pi is not None:
                tokens.append(("pi", pi))
            else:
                tokens.append(("op", "^" if op == "**" else op))
            index = match.end()
        return tokens

    def _peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _take_op(self, *ops: str) -> str | None:
        token = self._peek()
        if token is not None and token[0] == "op" and token[1] in ops:
            self.pos += 1
            return token[1]
        return None

    def parse(self) -> object:
        if not self.tokens:
            raise SeriesError("empty expression")
        value = self._expr()
        if self._peek() is not None:
            raise SeriesError(f"trailing input in {self.text!r}", position=self.pos)
        return value

    def _expr(self) -> object:
        value = self._term()
        while (op := self._take_op("+", "-")) is not None:
            rhs = self._term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def _term(self) -> object:
        value = self._factor()
        while (op := self._take_op("*", "/")) is not None:
            rhs = self._factor()
            if op == "*":
                value = value * rhs
            elif not rhs:
                raise SeriesError(f"division by zero in {self.text!r}")
            else:
                value = value / rhs
        return value

    def _factor(self) -> object:
        op = self._take_op("+", "-")
        if op is not None:
            value = self._factor()
            return -value if op == "-" else value
        return self._power()

    def _power(self) -> object:
        base = self._atom()
        if self._take_op("^") is None:
            return base
        negative = self._take_op("-") is not None
        token = self._peek()
        if token is None or token[0] != "int":
            raise SeriesError(f"exponent must be an integer in {self.text!r}")
        self.pos += 1
        exponent = int(token[1])
        if not negative:
            return base**exponent
        if not base:
            raise SeriesError(f"division by zero in {self.text!r}")
        return 1 / base**exponent

    def _atom(self) -> object:
        token = self._peek()
        if token is None:
            raise SeriesError(f"unexpected end of {self.text!r}")
        self.pos += 1
        kind, text = token
        if kind == "int":
            return PI_FIELD(QQ(int(text)))
        if kind == "pi":
            return _PI_GEN
        if text == "(":
            value = self._expr()
            if self._take_op(")") is None:
                raise SeriesError(f"unbalanced parentheses in {self.text!r}")
            return value
        raise SeriesError(f"unexpected {text!r} in {self.text!r}")


Scalar = Fraction | PiRatio


def as_scalar(value: Scalar | int) -> Scalar:
    if isinstance(value, int):
        return Fraction(value)
    return value


def normalize(value: Scalar) -> Scalar:
    """Collapse a rational PiRatio back to Fraction."""
    if isinstance(value, PiRatio) and value.is_rational:
        return value.to_fraction()
    return value


def format_scalar(value: Scalar | int) -> str:
    value = normalize(as_scalar(value))
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return str(value)


def parse_scalar(text: str) -> Scalar:
    match = _RATIONAL_PATTERN.match(text)
    if match:
        num, den = match.groups()
        return Fraction(int(num), int(den or 1))
    return normalize(PiRatio.parse(text))


# ------------------------------------------------------------------------------
# Truncated power series in x = 1/n
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncSeries:
    """Power series sum c_i x^(min_order+i), trusted through x^valid_order."""

    min_order: int
    coeffs: tuple[Scalar, ...]
    valid_order: int

    def __post_init__(self) -> None:
        if len(self.coeffs) != self.valid_order - self.min_order + 1:
            raise SeriesError(
                "coefficient count does not match order window",
                min_order=self.min_order,
                valid_order=self.valid_order,
                count=len(self.coeffs),
            )

    @classmethod
    def from_coeffs(
        cls, coeffs: Sequence[Scalar | int], *, min_order: int = 0, valid_order: int | None = None
    ) -> TruncSeries:
        values = [as_scalar(c) for c in coeffs]
        top = min_order + len(values) - 1 if valid_order is None else valid_order
        values = values[: top - min_order + 1]
        values += [Fraction(0)] * (top - min_order + 1 - len(values))
        return cls(min_order, tuple(values), top)

    @classmethod
    def zero(cls, valid_order: int, *, min_order: int = 0) -> TruncSeries:
        return cls(min_order, (Fraction(0),) * (valid_order - min_order + 1), valid_order)

    @classmethod
    def constant(cls, value: Scalar | int, valid_order: int) -> TruncSeries:
        return cls.from_coeffs([value], valid_order=valid_order)

    @classmethod
    def monomial(cls, value: Scalar | int, power: int, valid_order: int) -> TruncSeries:
        return cls.from_coeffs([value], min_order=power, valid_order=valid_order)

    def coeff(self, order: int) -> Scalar:
        if order > self.valid_order:
            raise ValidityExceeded(
                f"coefficient x^{order} requested beyond valid order {self.valid_order}",
                order=order,
                valid_order=self.valid_order,
            )
        if order < self.min_order:
            return Fraction(0)
        return self.coeffs[order - self.min_order]

    def __getitem__(self, order: int) -> Scalar:
        return self.coeff(order)

    def leading_order(self) -> int | None:
        for index, value in enumerate(self.coeffs):
            if value:
                return self.min_order + index
        return None

    def is_zero_through(self, order: int) -> bool:
        return all(not self.coeff(m) for m in range(self.min_order, order + 1))

    def truncate(self, order: int) -> TruncSeries:
        if order > self.valid_order:
            raise ValidityExceeded(
                f"cannot extend series from order {self.valid_order} to {order}",
                order=order,
                valid_order=self.valid_order,
            )
        if order < self.min_order:
            return TruncSeries(order + 1, (), order)
        return TruncSeries(self.min_order, self.coeffs[: order - self.min_order + 1], order)

    def with_min_order(self, min_order: int) -> TruncSeries:
        """Re-window so the stored coefficients start at ``min_order``.

        Dropping nonzero coefficients is an error.
        """
        if min_order <= self.min_order:
            pad = (Fraction(0),) * (self.min_order - min_order)
            return TruncSeries(min_order, pad + self.coeffs, self.valid_order)
        dropped = self.coeffs[: min_order - self.min_order]
        if any(dropped):
            raise SeriesError(f"series has nonzero terms below x^{min_order}")
        return TruncSeries(min_order, self.coeffs[min_order - self.min_order :], self.valid_order)

    def mul_x(self, power: int) -> TruncSeries:
        return TruncSeries(self.min_order + power, self.coeffs, self.valid_order + power)

    def scale(self, factor: Scalar | int) -> TruncSeries:
        factor = as_scalar(factor)
        return TruncSeries(
            self.min_order, tuple(c * factor for c in self.coeffs), self.valid_order
        )

    def map(self, fn: Callable[[Scalar], Scalar]) -> TruncSeries:
        return TruncSeries(self.min_order, tuple(fn(c) for c in self.coeffs), self.valid_order)

    def __add__(self, other: TruncSeries) -> TruncSeries:
        return series_add(self, other)

    def __sub__(self, other: TruncSeries) -> TruncSeries:
        return series_add(self, -other)

    def __neg__(self) -> TruncSeries:
        return TruncSeries(self.min_order, tuple(-c for c in self.coeffs), self.valid_order)

    def __mul__(self, other: TruncSeries | Scalar | int) -> TruncSeries:
        if isinstance(other, TruncSeries):
            return series_mul(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def items(self) -> list[tuple[int, Scalar]]:
        return [(self.min_order + i, c) for i, c in enumerate(self.coeffs)]

    def __str__(self) -> str:
        terms = [f"{format_scalar(c)}*x^{m}" for m, c in self.items() if c]
        body = " + ".join(terms) if terms else "0"
        return f"{body} + O(x^{self.valid_order + 1})"


def series_add(a: TruncSeries, b: TruncSeries) -> TruncSeries:
    valid = min(a.valid_order, b.valid_order)
    low = min(a.min_order, b.min_order)
    if valid < low:
        return TruncSeries(valid + 1, (), valid)
    coeffs = tuple(a.coeff(m) + b.coeff(m) for m in range(low, valid + 1))
    return TruncSeries(low, coeffs, valid)


def series_mul(a: TruncSeries, b: TruncSeries) -> TruncSeries:
    valid = min(a.valid_order + b.min_order, b.valid_order + a.min_order)
    low = a.min_order + b.min_order
    if valid < low:
        return TruncSeries(valid + 1, (), valid)
    size = valid - low + 1
    out: list[Scalar] = [Fraction(0)] * size
    for i, ca in enumerate(a.coeffs[:size]):
        if not ca:
            continue
        for j, cb in enumerate(b.coeffs[: size - i]):
            if cb:
                out[i + j] = out[i + j] + ca * cb
    return TruncSeries(low, tuple(out), valid)


def series_reciprocal(s: TruncSeries, *, laurent: bool = False) -> TruncSeries:
    lead = s.leading_order()
    if lead is None:
        raise NonInvertibleSeries("non-invertible series: no nonzero coefficient in window")
    if lead != 0 and not (laurent and lead > 0):
        if lead < 0:
            raise NonInvertibleSeries(f"non-invertible series: pole of order {-lead}")
        raise NonInvertibleSeries(
            f"non-invertible series: leading coefficient of x^0 is zero (leads at x^{lead})"
        )
    base = s.coeffs[lead - s.min_order :]
    size = len(base)
    inverse_lead = 1 / base[0]
    out: list[Scalar] = [inverse_lead]
    for i in range(1, size):
        acc: Scalar = Fraction(0)
        for j in range(1, i + 1):
            if base[j]:
                acc = acc + base[j] * out[i - j]
        out.append(-acc * inverse_lead)
    # x^-lead times the reciprocal of the unit part
    return TruncSeries(-lead, tuple(out), s.valid_order - 2 * lead)


def series_shift_substitute(s: TruncSeries) -> TruncSeries:
    """Series of f(n+1) given f(n) = s(1/n): compose with x/(1+x)."""
    top = s.valid_order
    low = s.min_order
    out: dict[int, Scalar] = {}
    for m, c in s.items():
        if not c:
            continue
        if m == 0:
            out[0] = out.get(0, Fraction(0)) + c
            continue
        if m > 0:
            for t in range(m, top + 1):
                weight = comb(t - 1, m - 1)
                if (t - m) % 2:
                    weight = -weight
                out[t] = out.get(t, Fraction(0)) + c * weight
        else:
            k = -m
            for t in range(m, min(top, 0) + 1):
                weight = comb(k, t - m)
                if weight:
                    out[t] = out.get(t, Fraction(0)) + c * weight
    coeffs = tuple(out.get(t, Fraction(0)) for t in range(low, top + 1))
    return TruncSeries(low, coeffs, top)


def log_shift_series(a: Scalar | int, b: Scalar | int, order: int) -> TruncSeries:
    """ln(n+b) - ln(n+a) in x = 1/n through x^order."""
    if order < 1:
        raise SeriesError("log_shift_series needs order >= 1")
    a = as_scalar(a)
    b = as_scalar(b)
    coeffs = []
    for m in range(1, order + 1):
        value = (b**m - a**m) / m
        coeffs.append(value if m % 2 else -value)
    return TruncSeries(1, tuple(coeffs), order)


# ------------------------------------------------------------------------------
# Sequential affine solving of leading coefficients
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class LeadingEquation:
    """``coefficient(assignment)`` must vanish; it is affine in ``unknown`` given the
    values of every unknown solved before it."""

    unknown: str
    coefficient: Callable[[Mapping[str, Scalar]], Scalar]
    label: str = ""


def probe_affine(fn: Callable[[Scalar], Scalar], *, name: str = "u") -> Scalar:
    """Root of an affine map ``fn``; verified by evaluating ``fn`` at the root."""
    constant = as_scalar(fn(Fraction(0)))
    slope = as_scalar(fn(Fraction(1))) - constant
    if not slope:
        if not constant:
            raise Underdetermined(f"{name}: coefficient vanishes identically", unknown=name)
        raise Inconsistent(
            f"{name}: coefficient does not depend on the unknown but equals "
            f"{format_scalar(constant)}",
            unknown=name,
        )
    root = normalize(-constant / slope)
    residual = as_scalar(fn(root))
    if residual:
        raise NonLinearDependence(
            f"{name}: coefficient is not affine in the unknown", unknown=name
        )
    return root


def solve_leading(
    equations: Sequence[LeadingEquation], known: Mapping[str, Scalar] | None = None
) -> dict[str, Scalar]:
    assignment: dict[str, Scalar] = dict(known or {})
    solved: dict[str, Scalar] = {}
    for equation in equations:

        def probe(value: Scalar, equation: LeadingEquation = equation) -> Scalar:
            return equation.coefficient({**assignment, equation.unknown: value})

        root = probe_affine(probe, name=equation.label or equation.unknown)
        assignment[equation.unknown] = root
        solved[equation.unknown] = root
    return solved

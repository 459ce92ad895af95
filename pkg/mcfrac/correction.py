from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import AutoVanishViolated, DerivationError, ZeroDenominator
from .exactmath import (
    LeadingEquation,
    Scalar,
    TruncSeries,
    as_scalar,
    format_scalar,
    normalize,
    series_reciprocal,
    series_shift_substitute,
    solve_leading,
)
from .families import Family, family_by_tag
from .seriesgen import (
    brouncker_certified_k,
    difference_series,
    lebesgue_terms_for,
    lu_cf_series,
)

RESIDUAL_EXTRA = 2


@dataclass(frozen=True)
class CFApprox:
    """MC_k(n) = outer_scale * num_1/(D_1 + num_2/(D_2 + ...)).

    D_j is (n+shift)^2 + den_j for quadratic families and n + den_j for linear ones.
    """

    family: Family
    terms: tuple[tuple[Scalar, Scalar], ...] = ()
    uncertified: bool = False

    @property
    def depth(self) -> int:
        return len(self.terms)

    @property
    def outer_scale(self) -> Scalar:
        return self.family.outer_scale

    @property
    def numerators(self) -> list[Scalar]:
        return [num for num, _ in self.terms]

    @property
    def denominators(self) -> list[Scalar]:
        return [den for _, den in self.terms]

    def with_term(self, num: Scalar | int, den: Scalar | int) -> CFApprox:
        return replace(self, terms=self.terms + ((as_scalar(num), as_scalar(den)),))

    def replace_term(
        self, level: int, *, num: Scalar | int | None = None, den: Scalar | int | None = None
    ) -> CFApprox:
        """Copy with level ``level`` (1-based) altered; used for sensitivity probes."""
        old_num, old_den = self.terms[level - 1]
        new = (
            old_num if num is None else as_scalar(num),
            old_den if den is None else as_scalar(den),
        )
        terms = self.terms[: level - 1] + (new,) + self.terms[level:]
        return replace(self, terms=terms)

    def describe(self) -> str:
        if not self.terms:
            return "0"
        shift = self.family.shift
        n_part = f"(n+{format_scalar(shift)})" if shift else "n"
        if self.family.template == "quadratic":
            n_part = f"{n_part}^2"
        body = ""
        for num, den in reversed(self.terms):
            inner = f" + {body}" if body else ""
            body = f"{format_scalar(num)}/({n_part} + {format_scalar(den)}{inner})"
        scale = format_scalar(self.outer_scale)
        return body if scale == "1" else f"({scale})*{body}"


@dataclass(frozen=True)
class DerivationReport:
    cf: CFApprox
    limit_constant: Scalar
    limit_exponent: int
    residual_series: TruncSeries
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def family(self) -> Family:
        return self.cf.family

    @property
    def depth(self) -> int:
        return self.cf.depth


def cf_series(cf: CFApprox, order: int) -> TruncSeries:
    """MC_k(n) / outer_scale in x = 1/n through x^order."""
    family = cf.family
    one_plus_shift = TruncSeries.from_coeffs(
        [1, 2 * family.shift, family.shift**2], valid_order=order
    )
    one = TruncSeries.constant(1, order)
    x = TruncSeries.monomial(1, 1, order)
    x2 = TruncSeries.monomial(1, 2, order)
    tail = TruncSeries.zero(order)
    for num, den in reversed(cf.terms):
        inner = TruncSeries.constant(den, order) + tail
        if family.template == "quadratic":
            # num/((n+s)^2 + den + T) = num x^2 / ((1+sx)^2 + x^2 (den + T))
            tail = (x2 * series_reciprocal(one_plus_shift + x2 * inner)).scale(num)
        else:
            # num/(n + den + T) = num x / (1 + x (den + T))
            tail = (x * series_reciprocal(one + x * inner)).scale(num)
    return tail.truncate(order)


def cf_difference_series(cf: CFApprox, order: int) -> TruncSeries:
    """MC_k(n) - MC_k(n+1), without the family's outer scale."""
    values = cf_series(cf, order)
    return values - series_shift_substitute(values)


def _lebesgue_terms(depth: int, order: int) -> int:
    return max(2 * depth + 1, lebesgue_terms_for(order))


def base_difference(family: Family, depth: int, order: int) -> TruncSeries:
    if family.tag == "lebesgue":
        return difference_series(family, order, lebesgue_terms=_lebesgue_terms(depth, order))
    return difference_series(family, order)


def full_difference(cf: CFApprox, order: int, base: TruncSeries | None = None) -> TruncSeries:
    """E_k(n) - E_k(n+1) in x = 1/n (outer scale removed)."""
    if base is None:
        base = base_difference(cf.family, cf.depth, order)
    return base.truncate(order) - cf_difference_series(cf, order)


def _level_targets(family: Family, level: int) -> tuple[int, int, int]:
    """Orders fixing the partial numerator, the denominator constant, and the last
    order that must vanish once both are fixed."""
    if family.template == "quadratic":
        return 4 * level - 1, 4 * level + 1, 4 * level + 2
    return 2 * level, 2 * level + 1, 2 * level + 1


def _first_target(family: Family) -> int:
    return 3 if family.template == "quadratic" else 2


def _assert_vanishing(series: TruncSeries, low: int, high: int, *, stage: str) -> None:
    for order in range(low, high + 1):
        value = series.coeff(order)
        if value:
            raise AutoVanishViolated(
                f"auto-vanish violated at x^{order} ({stage}): {format_scalar(value)}",
                order=order,
                stage=stage,
            )


def derive(
    family: str | Family,
    depth: int,
    *,
    uncertified: bool = False,
    extra: int = RESIDUAL_EXTRA,
) -> DerivationReport:
    family = family_by_tag(family)
    if depth < 0:
        raise DerivationError(f"depth must be >= 0, got {depth}")
    if depth > family.certified_depth and not uncertified:
        raise DerivationError(
            f"depth {depth} exceeds the certified limit {family.certified_depth} for "
            f"{family.tag}; pass uncertified to derive anyway",
            depth=depth,
        )

    limit_exponent = family.limit_exponent(depth)
    final_order = limit_exponent + 1 + extra
    base = base_difference(family, depth, final_order)
    _assert_vanishing(base, 1, _first_target(family) - 1, stage="base")

    cf = CFApprox(family=family, uncertified=depth > family.certified_depth)
    for level in range(1, depth + 1):
        num_order, den_order, check_order = _level_targets(family, level)
        prior = cf

        def numerator_coefficient(
            assignment: Mapping[str, Scalar], prior: CFApprox = prior, order: int = num_order
        ) -> Scalar:
            trial = prior.with_term(assignment["num"], 0)
            return full_difference(trial, order, base).coeff(order)

        def denominator_coefficient(
            assignment: Mapping[str, Scalar], prior: CFApprox = prior, order: int = den_order
        ) -> Scalar:
            trial = prior.with_term(assignment["num"], assignment["den"])
            return full_difference(trial, order, base).coeff(order)

        solved = solve_leading(
            [
                LeadingEquation("num", numerator_coefficient, label=f"level {level} numerator"),
                LeadingEquation("den", denominator_coefficient, label=f"level {level} denominator"),
            ]
        )
        cf = prior.with_term(solved["num"], solved["den"])
        _assert_vanishing(
            full_difference(cf, check_order, base), 1, check_order, stage=f"level {level}"
        )

    residual = full_difference(cf, final_order, base)
    _assert_vanishing(residual, 1, limit_exponent, stage="residual")
    leading = residual.coeff(limit_exponent + 1)
    if not leading:
        raise DerivationError(
            f"leading residual at x^{limit_exponent + 1} vanishes; limit constant undefined"
        )
    constant = normalize(leading / limit_exponent * family.outer_scale)
    notes = _notes(family, depth, base)
    return DerivationReport(
        cf=cf,
        limit_constant=constant,
        limit_exponent=limit_exponent,
        residual_series=residual.with_min_order(limit_exponent + 1),
        notes=notes,
    )


def _notes(family: Family, depth: int, base: TruncSeries) -> tuple[str, ...]:
    notes = []
    if family.tag == "landau":
        notes.append(f"brouncker truncation q_{brouncker_certified_k(base.valid_order)}")
    if family.tag == "lebesgue":
        notes.append(f"W_{_lebesgue_terms(depth, base.valid_order)}")
    if (family.tag, depth) in {("landau", 5), ("lebesgue", 3)}:
        notes.append("deepest denominator constant derived, uncorroborated")
    if depth > family.certified_depth:
        notes.append("uncertified depth")
    return tuple(notes)


def cf_evaluate_exact(cf: CFApprox, n: Fraction | int) -> Scalar:
    if not cf.terms:
        return Fraction(0)
    n = Fraction(n)
    family = cf.family
    argument = (n + family.shift) ** 2 if family.template == "quadratic" else n + family.shift
    tail: Scalar = Fraction(0)
    for num, den in reversed(cf.terms):
        denominator = argument + den + tail
        if not denominator:
            raise ZeroDenominator("zero denominator in correction function", n=str(n))
        tail = num / denominator
    return normalize(tail * family.outer_scale)


@dataclass(frozen=True)
class LuLimit:
    k: int
    exponent: int
    constant: Fraction
    residual_series: TruncSeries


def lu_limit(k: int, *, extra: int = RESIDUAL_EXTRA) -> LuLimit:
    """Limit of n^(k+1) (H_n - ln n - R_k(n) - gamma) for the Lu-type fraction R_k."""
    exponent = k + 1
    order = exponent + 1 + extra
    values = lu_cf_series(k, order)
    series = difference_series("euler", order) - (values - series_shift_substitute(values))
    _assert_vanishing(series, 1, exponent, stage=f"R_{k}")
    constant = normalize(series.coeff(exponent + 1) / exponent)
    return LuLimit(
        k=k,
        exponent=exponent,
        constant=constant,
        residual_series=series.with_min_order(exponent + 1),
    )

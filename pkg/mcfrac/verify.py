from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .correction import CFApprox, DerivationReport, cf_evaluate_exact, derive
from .errors import EnclosuresTooWide, NumericError, QuadratureFailed
from .exactmath import Scalar, format_scalar
from .families import Family, family_by_tag
from .numeric import (
    GUARD_BITS,
    Enclosure,
    Verdict,
    certify_less,
    cf_enclosure,
    enclose_fraction,
    enclose_scalar,
    error_term,
    float_context,
    interval_context,
    landau_G,
    lebesgue_quadrature,
    mc0_enclosure,
    target_enclosure,
)

DEFAULT_BITS = 192
DEFAULT_WORKERS = 4
MAX_ESCALATIONS = 4
RATE_WIDTH_LIMIT = 0.01
DEFAULT_SCHEDULES = {
    "landau": [2**k for k in range(5, 11)],
    "lebesgue": [2**k for k in range(5, 11)],
    "euler": [2**k for k in range(6, 11)],
}


@dataclass(frozen=True)
class RateFit:
    family: str
    depth: int
    samples: tuple[tuple[int, Enclosure], ...]
    fitted_exponent: Any
    fitted_constant: Enclosure
    target_exponent: int
    target_constant: Scalar
    ratios: tuple[Any, ...] = ()
    loglog_exponent: Any = None
    raw_constant: Enclosure | None = None
    bits: int = DEFAULT_BITS

    def constant_error(self) -> float:
        """Relative distance of the fitted constant from the target."""
        ctx = float_context(self.bits)
        target = ctx.mpf(Enclosure.from_exact(self.target_constant, self.bits).mid)
        return float(abs(self.fitted_constant.mid - target) / abs(target))

    def exponent_error(self) -> float:
        return float(abs(self.fitted_exponent - self.target_exponent))


@dataclass(frozen=True)
class PointVerdict:
    n: int
    verdict: Verdict
    bits: int
    detail: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class InequalityReport:
    theorem: str
    n_range: tuple[int, int]
    verdicts: tuple[PointVerdict, ...]
    precision: int

    def count(self, verdict: Verdict) -> int:
        return sum(1 for item in self.verdicts if item.verdict == verdict)

    @property
    def any_false(self) -> bool:
        return self.count("certified-false") > 0

    @property
    def any_inconclusive(self) -> bool:
        return self.count("inconclusive") > 0

    @property
    def all_certified(self) -> bool:
        return not self.any_false and not self.any_inconclusive


# ------------------------------------------------------------------------------
# Rate fitting
# ------------------------------------------------------------------------------


def _validate_schedule(schedule: Sequence[int]) -> list[int]:
    values = list(schedule)
    if len(values) < 4:
        raise ValueError("rate schedule needs at least 4 points")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("rate schedule must be strictly increasing")
    if values[0] < 1:
        raise ValueError("rate schedule must start at n >= 1")
    return values


def _sample_errors(
    report: DerivationReport, schedule: list[int], bits: int
) -> list[tuple[int, Enclosure]]:
    return [(n, error_term(report.family, report.cf, n, bits)) for n in schedule]


def rate_fit(
    family: str | Family,
    depth: int,
    schedule: Sequence[int] | None = None,
    *,
    bits: int = DEFAULT_BITS,
    report: DerivationReport | None = None,
    max_escalations: int = MAX_ESCALATIONS,
) -> RateFit:
    """Fit E_k(n) ~ C n^-s from successive ratios over a geometric schedule."""
    family = family_by_tag(family)
    values = _validate_schedule(schedule or DEFAULT_SCHEDULES[family.tag])
    if report is None:
        report = derive(family, depth)

    work = bits
    for _ in range(max_escalations + 1):
        samples = _sample_errors(report, values, work)
        usable = [(n, e) for n, e in samples if e.relative_width() < RATE_WIDTH_LIMIT]
        if len(usable) == len(samples):
            break
        work *= 2
    else:
        raise EnclosuresTooWide(
            f"enclosures too wide at {work // 2} bits for rate fit", family=family.tag
        )

    ctx = float_context(work)
    mids = [(n, ctx.mpf(e.mid)) for n, e in usable]
    ratios = tuple(
        ctx.log(e1 / e2) / ctx.log(ctx.mpf(n2) / n1)
        for (n1, e1), (n2, e2) in zip(mids, mids[1:])
    )
    logs = [(ctx.log(n), ctx.log(abs(e))) for n, e in mids]
    mean_x = sum(x for x, _ in logs) / len(logs)
    mean_y = sum(y for _, y in logs) / len(logs)
    slope = sum((x - mean_x) * (y - mean_y) for x, y in logs) / sum(
        (x - mean_x) ** 2 for x, _ in logs
    )

    exponent = report.limit_exponent
    ictx = interval_context(work + GUARD_BITS)
    (n_prev, c_prev), (n_last, c_last) = (
        (n, e.to_interval(ictx) * enclose_fraction(Fraction(n) ** exponent, ictx))
        for n, e in usable[-2:]
    )
    # n^L E(n) = C (1 + a/n + O(n^-2)); cancel the 1/n term between the last two points
    constant = (c_last * n_last - c_prev * n_prev) / (n_last - n_prev)
    return RateFit(
        family=family.tag,
        depth=report.depth,
        samples=tuple(samples),
        fitted_exponent=ratios[-1],
        fitted_constant=Enclosure.from_interval(constant, work),
        raw_constant=Enclosure.from_interval(c_last, work),
        target_exponent=exponent,
        target_constant=report.limit_constant,
        ratios=ratios,
        loglog_exponent=-slope,
        bits=work,
    )


# ------------------------------------------------------------------------------
# Certified inequalities
# ------------------------------------------------------------------------------


def _combine(verdicts: Sequence[Verdict]) -> Verdict:
    if "certified-false" in verdicts:
        return "certified-false"
    if all(v == "certified-true" for v in verdicts):
        return "certified-true"
    return "inconclusive"


def _escalate(
    check: Callable[[int, int], tuple[Verdict, dict[str, str]]],
    n: int,
    bits: int,
    max_escalations: int,
) -> PointVerdict:
    work = bits
    verdict: Verdict = "inconclusive"
    detail: dict[str, str] = {}
    for attempt in range(max_escalations + 1):
        work = bits * 2**attempt
        try:
            verdict, detail = check(n, work)
        except (NumericError, ZeroDivisionError) as exc:
            verdict, detail = "inconclusive", {"error": str(exc)}
        if verdict != "inconclusive":
            break
    return PointVerdict(n=n, verdict=verdict, bits=work, detail=detail)


def _run_points(
    theorem: str,
    points: Sequence[int],
    check: Callable[[int, int], tuple[Verdict, dict[str, str]]],
    bits: int,
    workers: int,
    max_escalations: int,
    n_range: tuple[int, int],
) -> InequalityReport:
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        verdicts = list(executor.map(lambda n: _escalate(check, n, bits, max_escalations), points))
    precision = max((item.bits for item in verdicts), default=bits)
    return InequalityReport(
        theorem=theorem, n_range=n_range, verdicts=tuple(verdicts), precision=precision
    )


def _bound(constant: Scalar, shift: Fraction, power: int, n: int, bits: int) -> Enclosure:
    ctx = interval_context(bits + GUARD_BITS)
    value = enclose_scalar(constant, ctx) / enclose_fraction(n + shift, ctx) ** power
    return Enclosure.from_interval(value, bits)


def _double_inequality(
    family: str,
    cf: CFApprox,
    constant: Scalar,
    lower_shift: Fraction,
    upper_shift: Fraction,
    power: int,
    lower_scale: Scalar,
    upper_scale: Scalar,
    quadrature_fallback: bool = False,
) -> Callable[[int, int], tuple[Verdict, dict[str, str]]]:
    def check(n: int, bits: int) -> tuple[Verdict, dict[str, str]]:
        lower = _bound(constant * lower_scale, lower_shift, power, n, bits)
        upper = _bound(constant * upper_scale, upper_shift, power, n, bits)
        value = error_term(family, cf, n, bits)
        verdict = _combine([certify_less(lower, value), certify_less(value, upper)])
        if verdict == "inconclusive" and quadrature_fallback and n > 0:
            try:
                value = error_term(family, cf, n, bits, quadrature=True)
            except QuadratureFailed:
                pass
            else:
                verdict = _combine([certify_less(lower, value), certify_less(value, upper)])
        return verdict, {"error_term": str(value), "lower": str(lower), "upper": str(upper)}

    return check


def check_theorem2(
    n_max: int,
    bits: int = DEFAULT_BITS,
    *,
    report: DerivationReport | None = None,
    lower_scale: Scalar = Fraction(1),
    upper_scale: Scalar = Fraction(1),
    workers: int = DEFAULT_WORKERS,
    max_escalations: int = MAX_ESCALATIONS,
) -> InequalityReport:
    """C2/(n+7/4)^10 < G(n) - (1/pi) ln(n+3/4) - c0 - MC_2(n) < C2/(n+3/4)^10."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    report = report or derive("landau", 2)
    check = _double_inequality(
        "landau",
        report.cf,
        report.limit_constant,
        Fraction(7, 4),
        Fraction(3, 4),
        10,
        lower_scale,
        upper_scale,
    )
    return _run_points(
        "landau-thm2", range(n_max + 1), check, bits, workers, max_escalations, (0, n_max)
    )


def check_theorem4(
    n_max: int,
    bits: int = DEFAULT_BITS,
    *,
    report: DerivationReport | None = None,
    lower_scale: Scalar = Fraction(1),
    upper_scale: Scalar = Fraction(1),
    workers: int = DEFAULT_WORKERS,
    max_escalations: int = MAX_ESCALATIONS,
) -> InequalityReport:
    """C1/(n+13/8)^6 < L_{n/2} - (4/pi^2) ln(n+1) - c1 - MC_1(n) < C1/(n+5/8)^6."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    report = report or derive("lebesgue", 1)
    check = _double_inequality(
        "lebesgue",
        report.cf,
        report.limit_constant,
        Fraction(13, 8),
        Fraction(5, 8),
        6,
        lower_scale,
        upper_scale,
        quadrature_fallback=True,
    )
    return _run_points(
        "lebesgue-thm4", range(n_max + 1), check, bits, workers, max_escalations, (0, n_max)
    )


def _decreasing(
    family: str, cf: CFApprox, quadrature_fallback: bool
) -> Callable[[int, int], tuple[Verdict, dict[str, str]]]:
    def check(n: int, bits: int) -> tuple[Verdict, dict[str, str]]:
        current = error_term(family, cf, n, bits)
        following = error_term(family, cf, n + 1, bits)
        verdict = certify_less(following, current)
        if verdict == "inconclusive" and quadrature_fallback:
            try:
                if n > 0:
                    current = error_term(family, cf, n, bits, quadrature=True)
                following = error_term(family, cf, n + 1, bits, quadrature=True)
            except QuadratureFailed:
                pass
            else:
                verdict = certify_less(following, current)
        return verdict, {"current": str(current), "next": str(following)}

    return check


def check_landau_monotone(
    n_max: int,
    bits: int = DEFAULT_BITS,
    *,
    cf: CFApprox | None = None,
    workers: int = DEFAULT_WORKERS,
    max_escalations: int = MAX_ESCALATIONS,
) -> InequalityReport:
    """E_2(n) > E_2(n+1) for 0 <= n < n_max; empty (vacuously certified) when n_max = 0."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    cf = cf or derive("landau", 2).cf
    check = _decreasing("landau", cf, quadrature_fallback=False)
    return _run_points(
        "landau-monotone", range(n_max), check, bits, workers, max_escalations, (0, n_max)
    )


def check_lebesgue_monotone(
    n_max: int,
    bits: int = DEFAULT_BITS,
    *,
    cf: CFApprox | None = None,
    workers: int = DEFAULT_WORKERS,
    max_escalations: int = MAX_ESCALATIONS,
) -> InequalityReport:
    """E_1(n) > E_1(n+1) for the Lebesgue family."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    cf = cf or derive("lebesgue", 1).cf
    check = _decreasing("lebesgue", cf, quadrature_fallback=True)
    return _run_points(
        "lebesgue-monotone", range(n_max), check, bits, workers, max_escalations, (0, n_max)
    )


THEOREMS: dict[str, Callable[..., InequalityReport]] = {
    "landau-thm2": check_theorem2,
    "lebesgue-thm4": check_theorem4,
    "landau-monotone": check_landau_monotone,
    "lebesgue-monotone": check_lebesgue_monotone,
}


def run_theorem(name: str, n_max: int, bits: int = DEFAULT_BITS, **kwargs: Any) -> InequalityReport:
    try:
        checker = THEOREMS[name]
    except KeyError:
        raise ValueError(f"Unknown theorem: {name}") from None
    return checker(n_max, bits, **kwargs)


def rate_summary(fit: RateFit) -> dict[str, Any]:
    return {
        "exponent_error": fit.exponent_error(),
        "constant_error": fit.constant_error(),
        "within_tolerance": fit.exponent_error() < 0.05 and fit.constant_error() < 0.01,
        "loglog_gap": None
        if fit.loglog_exponent is None
        else float(abs(fit.loglog_exponent - fit.target_exponent)),
    }


# ------------------------------------------------------------------------------
# Point evaluation
# ------------------------------------------------------------------------------

EXACT_DISPLAY_CHARS = 200


@dataclass(frozen=True)
class PointEvaluation:
    family: str
    depth: int
    n: int
    approximant: Enclosure
    mc0: Enclosure
    target: Enclosure
    error: Enclosure
    exact_target: str | None = None
    exact_approximant: str | None = None
    quadrature: Enclosure | None = None
    oracles_agree: bool | None = None


def _short_exact(value: Scalar | None) -> str | None:
    if value is None:
        return None
    text = format_scalar(value)
    return text if len(text) <= EXACT_DISPLAY_CHARS else None


def evaluate_point(
    report: DerivationReport, n: int, bits: int = DEFAULT_BITS, *, cross_check: bool = True
) -> PointEvaluation:
    """Approximant, reference value and error term at n; Lebesgue targets are
    cross-checked against quadrature when requested."""
    family = report.family
    cf = report.cf
    if n < 0 or (family.tag == "euler" and n < 1):
        raise ValueError(f"n out of range for {family.tag}: {n}")
    exact_target = exact_approximant = None
    if family.tag == "landau":
        exact_target = _short_exact(landau_G(n))
    if family.tag != "lebesgue":
        exact_approximant = _short_exact(cf_evaluate_exact(cf, n))

    quadrature = None
    agree = None
    target = target_enclosure(family, n, bits)
    if family.tag == "lebesgue" and n > 0 and cross_check:
        quadrature = lebesgue_quadrature(n)
        agree = target.intersects(quadrature)
    return PointEvaluation(
        family=family.tag,
        depth=report.depth,
        n=n,
        approximant=cf_enclosure(cf, n, bits),
        mc0=mc0_enclosure(family, n, bits),
        target=target,
        error=error_term(family, cf, n, bits),
        exact_target=exact_target,
        exact_approximant=exact_approximant,
        quadrature=quadrature,
        oracles_agree=agree,
    )

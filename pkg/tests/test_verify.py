from fractions import Fraction

import pytest

from mcfrac.correction import derive
from mcfrac.errors import EnclosuresTooWide
from mcfrac.numeric import Enclosure
from mcfrac.verify import (
    InequalityReport,
    PointVerdict,
    check_landau_monotone,
    check_lebesgue_monotone,
    check_theorem2,
    check_theorem4,
    evaluate_point,
    rate_fit,
    rate_summary,
    run_theorem,
)


def test_landau_double_bound_small_range_is_certified():
    report = check_theorem2(12, workers=2)
    assert report.theorem == "landau-thm2"
    assert report.n_range == (0, 12)
    assert len(report.verdicts) == 13
    assert report.all_certified


def test_landau_double_bound_with_doubled_lower_constant_fails_for_large_n():
    report = check_theorem2(20, lower_scale=Fraction(2), workers=2)
    assert report.any_false
    # 2 (n + 3/4)^10 > (n + 7/4)^10 once n >= 14
    assert report.verdicts[-1].verdict == "certified-false"
    assert report.verdicts[-1].detail["lower"]


def test_landau_monotone_holds():
    report = check_landau_monotone(30, workers=2)
    assert len(report.verdicts) == 30
    assert report.all_certified


def test_landau_monotone_detects_perturbed_denominator():
    cf = derive("landau", 2).cf
    lambda_2 = cf.denominators[1]
    perturbed = cf.replace_term(2, den=lambda_2 * Fraction(9, 10))
    report = check_landau_monotone(30, cf=perturbed, workers=2)
    assert report.any_false
    assert report.verdicts[-1].verdict == "certified-false"


def test_empty_range_is_vacuously_certified():
    report = check_landau_monotone(0)
    assert report.verdicts == ()
    assert report.all_certified


def test_negative_range_is_rejected():
    with pytest.raises(ValueError):
        check_theorem2(-1)


@pytest.mark.slow
def test_lebesgue_double_bound_small_range_is_certified():
    report = check_theorem4(6, workers=2)
    assert report.all_certified


@pytest.mark.slow
def test_lebesgue_monotone_small_range():
    report = check_lebesgue_monotone(6, workers=2)
    assert report.all_certified


@pytest.mark.slow
@pytest.mark.parametrize(
    ("theorem", "n_max"),
    [
        ("landau-thm2", 500),
        ("lebesgue-thm4", 200),
        ("landau-monotone", 200),
        ("lebesgue-monotone", 200),
    ],
)
def test_full_acceptance_ranges_are_certified(theorem, n_max):
    report = run_theorem(theorem, n_max)
    assert report.n_range == (0, n_max)
    assert len(report.verdicts) >= n_max
    assert report.all_certified


def test_run_theorem_dispatch():
    report = run_theorem("landau-monotone", 3, workers=1)
    assert report.theorem == "landau-monotone"
    with pytest.raises(ValueError):
        run_theorem("riemann", 3)


def test_escalation_is_recorded(monkeypatch):
    calls = []

    def fake_error_term(family, cf, n, bits, *, quadrature=False):
        calls.append(bits)
        if bits < 384:
            return Enclosure.from_decimals("-1", "1", bits)
        return Enclosure.from_exact(Fraction(1, (n + 2) ** 10), bits)

    monkeypatch.setattr("mcfrac.verify.error_term", fake_error_term)
    report = check_landau_monotone(1, 192, workers=1)
    assert report.verdicts[0].verdict == "certified-true"
    assert report.verdicts[0].bits == 384
    assert report.precision == 384
    assert 192 in calls and 384 in calls


def test_escalation_gives_up_inconclusive(monkeypatch):
    def always_wide(family, cf, n, bits, *, quadrature=False):
        return Enclosure.from_decimals("-1", "1", bits)

    monkeypatch.setattr("mcfrac.verify.error_term", always_wide)
    report = check_landau_monotone(2, 64, workers=1, max_escalations=1)
    assert report.any_inconclusive
    assert not report.any_false
    assert all(item.bits == 128 for item in report.verdicts)


def test_inequality_report_counts():
    report = InequalityReport(
        theorem="landau-thm2",
        n_range=(0, 2),
        verdicts=(
            PointVerdict(n=0, verdict="certified-true", bits=192),
            PointVerdict(n=1, verdict="inconclusive", bits=384),
            PointVerdict(n=2, verdict="certified-true", bits=192),
        ),
        precision=384,
    )
    assert report.count("certified-true") == 2
    assert report.any_inconclusive
    assert not report.all_certified


def test_rate_fit_euler_first_correction():
    fit = rate_fit("euler", 1)
    assert fit.target_exponent == 3
    assert len(fit.ratios) == len(fit.samples) - 1
    summary = rate_summary(fit)
    assert summary["exponent_error"] < 0.05
    assert summary["constant_error"] < 0.01
    assert summary["within_tolerance"]


def test_rate_fit_landau_first_correction():
    fit = rate_fit("landau", 1, [64, 128, 256, 512, 1024])
    assert fit.target_exponent == 6
    assert fit.exponent_error() < 0.05
    assert fit.constant_error() < 0.01
    assert abs(fit.loglog_exponent - 6) < 0.25


def test_rate_fit_extrapolated_constant_beats_last_sample():
    fit = rate_fit("landau", 1, [64, 128, 256, 512, 1024])
    target = Enclosure.from_exact(fit.target_constant, fit.bits).mid
    raw_error = abs(fit.raw_constant.mid - target) / abs(target)
    assert fit.constant_error() < raw_error
    # raw n^L E(n) still carries the 1/n bias
    assert raw_error < 0.01


@pytest.mark.slow
@pytest.mark.parametrize(
    ("family", "depth"),
    [("landau", k) for k in (1, 2, 3)]
    + [("lebesgue", k) for k in (1, 2)]
    + [("euler", k) for k in range(1, 9)],
)
def test_rate_fit_meets_tolerance(family, depth):
    summary = rate_summary(rate_fit(family, depth))
    assert summary["exponent_error"] < 0.05
    assert summary["constant_error"] < 0.01
    assert summary["within_tolerance"]


@pytest.mark.parametrize(
    "schedule",
    [[64, 128, 256], [64, 64, 128, 256], [0, 2, 4, 8], [256, 128, 64, 32]],
)
def test_rate_schedule_validation(schedule):
    with pytest.raises(ValueError):
        rate_fit("euler", 1, schedule)


def test_rate_fit_reports_wide_enclosures(monkeypatch):
    def always_wide(family, cf, n, bits, *, quadrature=False):
        return Enclosure.from_decimals("-1", "1", bits)

    monkeypatch.setattr("mcfrac.verify.error_term", always_wide)
    with pytest.raises(EnclosuresTooWide):
        rate_fit("euler", 1, [8, 16, 32, 64], max_escalations=1)


def test_evaluate_point_landau():
    report = derive("landau", 2)
    point = evaluate_point(report, 3)
    assert point.exact_target == "381/256"
    assert point.exact_approximant is not None
    assert point.quadrature is None
    assert point.error.lo > 0


def test_evaluate_point_lebesgue_cross_check():
    report = derive("lebesgue", 1)
    point = evaluate_point(report, 4)
    assert point.quadrature is not None
    assert point.oracles_agree is True
    assert point.exact_approximant is None
    skipped = evaluate_point(report, 4, cross_check=False)
    assert skipped.quadrature is None
    assert skipped.oracles_agree is None


def test_evaluate_point_rejects_bad_n():
    with pytest.raises(ValueError):
        evaluate_point(derive("euler", 1), 0)
    with pytest.raises(ValueError):
        evaluate_point(derive("landau", 1), -2)

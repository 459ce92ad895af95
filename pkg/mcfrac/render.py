from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any

import mpmath
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from .cache import to_document
from .correction import DerivationReport
from .exactmath import format_scalar
from .numeric import to_decimal
from .verify import InequalityReport, PointEvaluation, RateFit, rate_summary

BASE_DIR = Path(__file__).resolve().parent
DEFAULT_DIGITS = 30


@lru_cache(maxsize=1)
def get_environment() -> Environment:
    return Environment(
        loader=FileSystemLoader(str(BASE_DIR / "templates")),
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
        autoescape=False,
    )


def render_template(name: str, **context: Any) -> str:
    return get_environment().get_template(name).render(**context)


def dumps(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def overall_verdict(report: InequalityReport) -> str:
    if report.any_false:
        return "certified-false"
    if report.any_inconclusive:
        return "inconclusive"
    return "certified-true"


# derive ------------------------------------------------------------------------


def derivation_json(report: DerivationReport, bits: int) -> str:
    return to_document(report, bits).dumps()


def derivation_table(report: DerivationReport, digits: int = DEFAULT_DIGITS) -> str:
    terms = [
        {
            "level": level,
            "num": format_scalar(num),
            "den": format_scalar(den),
            "num_decimal": to_decimal(num, digits),
            "den_decimal": to_decimal(den, digits),
        }
        for level, (num, den) in enumerate(report.cf.terms, start=1)
    ]
    width = max([len(term["num"]) for term in terms] + [digits + 4, len("numerator")])
    return render_template(
        "derive.txt.j2",
        family=report.family,
        depth=report.depth,
        uncertified=report.cf.uncertified,
        formula=report.cf.describe(),
        terms=terms,
        width=width,
        limit_exponent=report.limit_exponent,
        limit_constant=format_scalar(report.limit_constant),
        limit_decimal=to_decimal(report.limit_constant, digits),
        notes=list(report.notes),
    )


# eval --------------------------------------------------------------------------


def evaluation_payload(point: PointEvaluation, digits: int = DEFAULT_DIGITS) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "family": point.family,
        "depth": point.depth,
        "n": point.n,
        "bits": point.error.bits,
        "approximant": point.approximant.render(digits),
        "mc0": point.mc0.render(digits),
        "target": point.target.render(digits),
        "error_term": point.error.render(digits),
    }
    if point.exact_target is not None:
        payload["target"]["exact"] = point.exact_target
    if point.exact_approximant is not None:
        payload["approximant"]["exact"] = point.exact_approximant
    if point.quadrature is not None:
        payload["quadrature"] = point.quadrature.render(digits)
        payload["oracles_agree"] = point.oracles_agree
    return payload


def evaluation_table(point: PointEvaluation, digits: int = DEFAULT_DIGITS) -> str:
    payload = evaluation_payload(point, digits)
    rows = []
    for label, key in (
        ("target", "target"),
        ("MC_0(n)", "mc0"),
        (f"MC_{point.depth}(n)", "approximant"),
        (f"E_{point.depth}(n)", "error_term"),
        ("quadrature", "quadrature"),
    ):
        if key not in payload:
            continue
        entry = payload[key]
        rows.append({"label": label, "value": entry["value"], "err_bound": entry["err_bound"]})
        if "exact" in entry:
            rows.append({"label": "  exact", "value": entry["exact"], "err_bound": None})
    return render_template(
        "eval.txt.j2",
        family=point.family,
        depth=point.depth,
        n=point.n,
        bits=payload["bits"],
        rows=rows,
        oracles_agree=point.oracles_agree,
    )


# verify ------------------------------------------------------------------------


def inequality_payload(report: InequalityReport) -> dict[str, Any]:
    return {
        "theorem": report.theorem,
        "n_range": list(report.n_range),
        "precision": report.precision,
        "overall": overall_verdict(report),
        "counts": _verdict_counts(report),
        "verdicts": [
            {"n": item.n, "verdict": item.verdict, "bits": item.bits} for item in report.verdicts
        ],
    }


def _verdict_counts(report: InequalityReport) -> dict[str, int]:
    return {
        verdict: report.count(verdict)
        for verdict in ("certified-true", "certified-false", "inconclusive")
    }


def inequality_table(report: InequalityReport, max_rows: int = 40) -> str:
    failures = [item for item in report.verdicts if item.verdict != "certified-true"]
    return render_template(
        "verify.txt.j2",
        theorem=report.theorem,
        n_range=report.n_range,
        precision=report.precision,
        counts=_verdict_counts(report),
        overall=overall_verdict(report),
        failures=failures[:max_rows],
    )


# rate --------------------------------------------------------------------------


def rate_payload(fit: RateFit, digits: int = 12) -> dict[str, Any]:
    summary = rate_summary(fit)
    return {
        "family": fit.family,
        "depth": fit.depth,
        "bits": fit.bits,
        "samples": [{"n": n, "error_term": e.render(digits)} for n, e in fit.samples],
        "ratios": [_nstr(value, digits) for value in fit.ratios],
        "fitted_exponent": _nstr(fit.fitted_exponent, digits),
        "loglog_exponent": _nstr(fit.loglog_exponent, digits),
        "fitted_constant": fit.fitted_constant.render(digits),
        "raw_constant": None if fit.raw_constant is None else fit.raw_constant.render(digits),
        "target_exponent": fit.target_exponent,
        "target_constant": format_scalar(fit.target_constant),
        "target_decimal": to_decimal(fit.target_constant, digits),
        **summary,
    }


def rate_table(fit: RateFit, digits: int = 12) -> str:
    payload = rate_payload(fit, digits)
    return render_template(
        "rate.txt.j2",
        family=fit.family,
        depth=fit.depth,
        bits=fit.bits,
        samples=[
            {"n": sample["n"], "value": sample["error_term"]["value"]}
            for sample in payload["samples"]
        ],
        ratios=payload["ratios"],
        fitted_exponent=payload["fitted_exponent"],
        target_exponent=fit.target_exponent,
        loglog_exponent=payload["loglog_exponent"],
        fitted_constant=payload["fitted_constant"]["value"],
        raw_constant=(payload["raw_constant"] or {}).get("value"),
        target_constant=payload["target_constant"],
        target_decimal=payload["target_decimal"],
        within_tolerance=payload["within_tolerance"],
    )


def _nstr(value: Any, digits: int) -> str | None:
    if value is None:
        return None
    return mpmath.nstr(value, digits)


# cache -------------------------------------------------------------------------


def cache_payload(entries: list[tuple[str, int, Path]]) -> list[dict[str, Any]]:
    return [
        {"family": family, "depth": depth, "path": str(path)} for family, depth, path in entries
    ]


def cache_table(entries: list[tuple[str, int, Path]], cache_dir: Path) -> str:
    return render_template("cache.txt.j2", entries=cache_payload(entries), cache_dir=cache_dir)

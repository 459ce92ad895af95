from __future__ import annotations

import json
import os
import re
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .correction import CFApprox, DerivationReport, derive
from .errors import CacheError, McfracError
from .exactmath import TruncSeries, format_scalar, parse_scalar
from .families import Family, family_by_tag
from .logging import log_action
from .numeric import to_decimal

DOC_PREFIX = "coefficients.v1"
DOC_PATTERN = re.compile(r"^coefficients\.v1\.(?P<family>[a-z]+)\.(?P<depth>\d+)\.json$")


class TermDoc(BaseModel):
    model_config = ConfigDict(extra="ignore")

    num: str
    den: str


class ResidualDoc(BaseModel):
    model_config = ConfigDict(extra="ignore")

    order: int
    coeff: str


class CoefficientDoc(BaseModel):
    model_config = ConfigDict(extra="ignore")

    kind: Literal["mcfrac.coefficients"] = "mcfrac.coefficients"
    schema_version: Literal["v1"] = "v1"
    family: str
    depth: int = Field(ge=0)
    shift: str
    template: Literal["quadratic", "linear"]
    outer_scale: str
    terms: list[TermDoc] = Field(default_factory=list)
    limit_constant: str
    limit_exponent: int
    residual: list[ResidualDoc] = Field(default_factory=list)
    uncertified: bool = False
    notes: list[str] = Field(default_factory=list)
    decimals: dict[str, str] = Field(default_factory=dict)
    bits: int

    def dumps(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def _decimal_digits(bits: int) -> int:
    return max(20, int(bits * 0.30103) - 5)


def to_document(report: DerivationReport, bits: int = 192) -> CoefficientDoc:
    family = report.family
    digits = _decimal_digits(bits)
    decimals: dict[str, str] = {"limit_constant": to_decimal(report.limit_constant, digits)}
    for level, (num, den) in enumerate(report.cf.terms, start=1):
        decimals[f"num_{level}"] = to_decimal(num, digits)
        decimals[f"den_{level}"] = to_decimal(den, digits)
    return CoefficientDoc(
        family=family.tag,
        depth=report.depth,
        shift=format_scalar(family.shift),
        template=family.template,
        outer_scale=format_scalar(family.outer_scale),
        terms=[
            TermDoc(num=format_scalar(num), den=format_scalar(den))
            for num, den in report.cf.terms
        ],
        limit_constant=format_scalar(report.limit_constant),
        limit_exponent=report.limit_exponent,
        residual=[
            ResidualDoc(order=order, coeff=format_scalar(coeff))
            for order, coeff in report.residual_series.items()
        ],
        uncertified=report.cf.uncertified,
        notes=list(report.notes),
        decimals=decimals,
        bits=bits,
    )


def from_document(doc: CoefficientDoc) -> DerivationReport:
    family = family_by_tag(doc.family)
    if family.template != doc.template or format_scalar(family.shift) != doc.shift:
        raise CacheError(f"cached document does not match family {family.tag}")
    try:
        terms = tuple((parse_scalar(t.num), parse_scalar(t.den)) for t in doc.terms)
        residual = [(r.order, parse_scalar(r.coeff)) for r in doc.residual]
        constant = parse_scalar(doc.limit_constant)
    except (McfracError, ValueError, ZeroDivisionError) as exc:
        raise CacheError(f"unparseable coefficient in cached document: {exc}") from exc
    if len(terms) != doc.depth:
        raise CacheError("cached document depth does not match its terms")
    orders = [order for order, _ in residual]
    if not orders or orders != list(range(orders[0], orders[0] + len(orders))):
        raise CacheError("cached residual series is not contiguous")
    series = TruncSeries.from_coeffs(
        [coeff for _, coeff in residual], min_order=orders[0], valid_order=orders[-1]
    )
    cf = CFApprox(family=family, terms=terms, uncertified=doc.uncertified)
    return DerivationReport(
        cf=cf,
        limit_constant=constant,
        limit_exponent=doc.limit_exponent,
        residual_series=series,
        notes=tuple(doc.notes),
    )


def document_path(family: str | Family, depth: int, cache_dir: Path) -> Path:
    tag = family_by_tag(family).tag
    return cache_dir / f"{DOC_PREFIX}.{tag}.{depth}.json"


def parse_document(text: str) -> CoefficientDoc:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CacheError(f"corrupt cache document: {exc.msg}") from exc
    try:
        return CoefficientDoc.model_validate(data)
    except ValidationError as exc:
        count = exc.error_count()
        raise CacheError(f"foreign or incomplete cache document: {count} errors") from exc


def load_cached(family: str | Family, depth: int, cache_dir: Path) -> DerivationReport | None:
    path = document_path(family, depth, cache_dir)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        return None
    except OSError as exc:
        raise CacheError(f"cannot read {path}: {exc}") from exc
    doc = parse_document(text)
    if doc.family != family_by_tag(family).tag or doc.depth != depth:
        raise CacheError(f"{path.name} holds {doc.family} depth {doc.depth}")
    return from_document(doc)


def store(report: DerivationReport, cache_dir: Path, bits: int = 192) -> Path:
    path = document_path(report.family, report.depth, cache_dir)
    doc = to_document(report, bits)
    try:
        cache_dir.mkdir(parents=True, exist_ok=True)
        tmp_path = path.with_suffix(".json.tmp")
        tmp_path.write_text(doc.dumps(), encoding="utf-8")
        os.replace(tmp_path, path)
    except OSError as exc:
        raise CacheError(f"cannot write {path}: {exc}") from exc
    return path


def list_entries(cache_dir: Path) -> list[tuple[str, int, Path]]:
    if not cache_dir.is_dir():
        return []
    entries = []
    for path in cache_dir.iterdir():
        match = DOC_PATTERN.match(path.name)
        if match and path.is_file():
            entries.append((match["family"], int(match["depth"]), path))
    return sorted(entries)


def clear(cache_dir: Path) -> int:
    removed = 0
    for _, _, path in list_entries(cache_dir):
        try:
            path.unlink()
        except FileNotFoundError:
            continue
        removed += 1
    return removed


def derive_cached(
    family: str | Family,
    depth: int,
    cache_dir: Path | None,
    *,
    uncertified: bool = False,
    bits: int = 192,
) -> tuple[DerivationReport, bool]:
    """Cached derivation; returns (report, hit). Corrupt documents count as misses."""
    family = family_by_tag(family)
    if cache_dir is not None:
        try:
            cached = load_cached(family, depth, cache_dir)
        except CacheError as exc:
            log_action(
                {"action": "cache.miss", "family": family.tag, "depth": depth, "reason": str(exc)}
            )
            cached = None
        if cached is not None and (uncertified or not cached.cf.uncertified):
            return cached, True

    report = derive(family, depth, uncertified=uncertified)
    if cache_dir is not None:
        try:
            store(report, cache_dir, bits)
        except CacheError as exc:
            log_action({"action": "cache.store", "ok": False, "message": str(exc)})
    return report, False

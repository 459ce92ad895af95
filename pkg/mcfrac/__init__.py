"""Exact multiple-correction continued fractions."""

from .correction import CFApprox, DerivationReport, derive
from .families import Family, all_families, family_by_tag

__all__ = [
    "CFApprox",
    "DerivationReport",
    "Family",
    "all_families",
    "derive",
    "family_by_tag",
]

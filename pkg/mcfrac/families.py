from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Literal

from .errors import UnknownFamily
from .exactmath import PiRatio, Scalar

Template = Literal["quadratic", "linear"]


@dataclass(frozen=True)
class Family:
    tag: str
    shift: Fraction
    template: Template
    outer_scale: Scalar
    certified_depth: int
    mc0: str
    display: str

    def limit_exponent(self, depth: int) -> int:
        return 4 * depth + 2 if self.template == "quadratic" else 2 * depth + 1


@lru_cache(maxsize=1)
def _load_families() -> tuple[list[Family], dict[str, Family]]:
    families = [
        Family(
            tag="landau",
            shift=Fraction(3, 4),
            template="quadratic",
            outer_scale=1 / PiRatio.pi(),
            certified_depth=5,
            mc0="(1/pi)*ln(n+3/4) + c0",
            display="Landau constants G(n)",
        ),
        Family(
            tag="lebesgue",
            shift=Fraction(1),
            template="quadratic",
            outer_scale=Fraction(1),
            certified_depth=3,
            mc0="(4/pi^2)*ln(n+1) + c1",
            display="Lebesgue constants L(n/2)",
        ),
        Family(
            tag="euler",
            shift=Fraction(0),
            template="linear",
            outer_scale=Fraction(1),
            certified_depth=10,
            mc0="0",
            display="Euler-Mascheroni constant",
        ),
    ]
    family_map = {family.tag: family for family in families}
    return families, family_map


def all_families() -> list[Family]:
    families, _ = _load_families()
    return list(families)


def family_by_tag(tag: str | Family, families: Iterable[Family] | None = None) -> Family:
    if isinstance(tag, Family):
        return tag
    key = tag.strip().lower()
    if families is None:
        _, family_map = _load_families()
        try:
            return family_map[key]
        except KeyError:
            raise UnknownFamily(f"Unknown family: {tag}") from None

    for family in families:
        if family.tag == key:
            return family
    raise UnknownFamily(f"Unknown family: {tag}")


def certified_depth(family: str | Family) -> int:
    return family_by_tag(family).certified_depth


def mc0_description(family: str | Family) -> str:
    return family_by_tag(family).mc0

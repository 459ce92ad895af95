from fractions import Fraction

import pytest

from mcfrac.errors import UnknownFamily
from mcfrac.families import all_families, certified_depth, family_by_tag, mc0_description


def test_family_lookup_is_case_insensitive():
    assert family_by_tag(" Landau ").tag == "landau"
    family = family_by_tag("EULER")
    assert family_by_tag(family) is family


def test_unknown_family_is_key_error():
    with pytest.raises(UnknownFamily) as excinfo:
        family_by_tag("zeta")
    assert isinstance(excinfo.value, KeyError)
    assert excinfo.value.error_kind == "invalid_family"


def test_lookup_within_explicit_list():
    families = [family for family in all_families() if family.tag != "euler"]
    assert family_by_tag("lebesgue", families).shift == 1
    with pytest.raises(UnknownFamily):
        family_by_tag("euler", families)


def test_family_parameters():
    assert [certified_depth(tag) for tag in ("landau", "lebesgue", "euler")] == [5, 3, 10]
    assert mc0_description("lebesgue") == "(4/pi^2)*ln(n+1) + c1"
    assert mc0_description("euler") == "0"
    landau = family_by_tag("landau")
    assert landau.shift == Fraction(3, 4)
    assert landau.limit_exponent(2) == 10
    assert family_by_tag("euler").limit_exponent(8) == 17


def test_all_families_returns_a_copy():
    families = all_families()
    families.clear()
    assert len(all_families()) == 3

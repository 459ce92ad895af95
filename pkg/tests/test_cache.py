import json

import pytest

from mcfrac.cache import (
    ResidualDoc,
    clear,
    derive_cached,
    document_path,
    from_document,
    list_entries,
    load_cached,
    parse_document,
    store,
    to_document,
)
from mcfrac.correction import derive
from mcfrac.errors import CacheError


def test_store_and_load_preserve_exact_coefficients(tmp_path):
    report = derive("lebesgue", 2)
    path = store(report, tmp_path)
    assert path == tmp_path / "coefficients.v1.lebesgue.2.json"

    loaded = load_cached("lebesgue", 2, tmp_path)
    assert loaded.cf.terms == report.cf.terms
    assert loaded.limit_constant == report.limit_constant
    assert loaded.limit_exponent == report.limit_exponent
    assert loaded.residual_series.items() == report.residual_series.items()


def test_rewriting_a_loaded_document_is_byte_identical(tmp_path):
    store(derive("landau", 2), tmp_path)
    path = document_path("landau", 2, tmp_path)
    original = path.read_bytes()

    store(load_cached("landau", 2, tmp_path), tmp_path)
    assert path.read_bytes() == original


def test_document_shape():
    doc = to_document(derive("euler", 1))
    data = json.loads(doc.dumps())
    assert data["kind"] == "mcfrac.coefficients"
    assert data["schema_version"] == "v1"
    assert data["terms"] == [{"num": "1/2", "den": "1/6"}]
    assert data["limit_constant"] == "-1/72"
    assert data["decimals"]["den_1"].startswith("0.16666")


def test_missing_document_is_none(tmp_path):
    assert load_cached("euler", 3, tmp_path) is None


@pytest.mark.parametrize(
    "text",
    ["{not json", json.dumps({"kind": "other"}), json.dumps([1, 2, 3])],
)
def test_parse_document_rejects_garbage(text):
    with pytest.raises(CacheError):
        parse_document(text)


def test_mismatched_depth_is_rejected(tmp_path):
    store(derive("euler", 2), tmp_path)
    document_path("euler", 2, tmp_path).rename(document_path("euler", 3, tmp_path))
    with pytest.raises(CacheError):
        load_cached("euler", 3, tmp_path)


def test_non_contiguous_residual_is_rejected():
    doc = to_document(derive("euler", 2))
    first = doc.residual[0]
    doc.residual = [first, ResidualDoc(order=first.order + 2, coeff="1")]
    with pytest.raises(CacheError):
        from_document(doc)


@pytest.mark.parametrize(
    "constant", ["__import__('os').getcwd()", "pi.evalf()", "1/(pi - pi)"]
)
def test_coefficients_outside_the_pi_grammar_are_rejected(constant):
    doc = to_document(derive("euler", 1))
    doc.limit_constant = constant
    with pytest.raises(CacheError):
        from_document(doc)


def test_corrupt_cache_entry_counts_as_miss(tmp_path):
    path = document_path("euler", 2, tmp_path)
    path.write_text("{truncated", encoding="utf-8")

    report, hit = derive_cached("euler", 2, tmp_path)
    assert hit is False
    assert report.depth == 2
    # the fresh derivation replaced the corrupt file
    assert parse_document(path.read_text(encoding="utf-8")).depth == 2

    _, hit = derive_cached("euler", 2, tmp_path)
    assert hit is True


def test_uncertified_entries_need_opt_in(tmp_path):
    store(derive("euler", 11, uncertified=True), tmp_path)
    report, hit = derive_cached("euler", 11, tmp_path, uncertified=True)
    assert hit is True
    assert report.cf.uncertified


def test_no_cache_dir_always_derives():
    report, hit = derive_cached("landau", 1, None)
    assert hit is False
    assert report.depth == 1


def test_list_and_clear(tmp_path):
    store(derive("euler", 1), tmp_path)
    store(derive("landau", 1), tmp_path)
    (tmp_path / "notes.txt").write_text("keep me", encoding="utf-8")

    entries = list_entries(tmp_path)
    assert [(family, depth) for family, depth, _ in entries] == [("euler", 1), ("landau", 1)]

    assert clear(tmp_path) == 2
    assert list_entries(tmp_path) == []
    assert (tmp_path / "notes.txt").exists()
    assert list_entries(tmp_path / "missing") == []

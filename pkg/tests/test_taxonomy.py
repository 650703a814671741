import pytest

from regcore.taxonomy import (
    MAIN_ORDER,
    Taxonomy,
    TaxonomyError,
    default_taxonomy,
    parse_taxonomy_lines,
)


def test_main_order_is_canonical():
    assert MAIN_ORDER == ("NA", "IN", "OP", "ID", "HI", "IP", "LY", "SP")


def test_default_taxonomy_shape(taxonomy):
    assert taxonomy.label_order == MAIN_ORDER
    assert len(taxonomy.subs) == 33
    # every sub-register maps to one of the eight mains
    for code in taxonomy.subs:
        assert taxonomy.main_of(code) in MAIN_ORDER


def test_main_of_identity_on_mains(taxonomy):
    for code in MAIN_ORDER:
        assert taxonomy.main_of(code) == code


def test_main_of_unknown_raises(taxonomy):
    with pytest.raises(TaxonomyError):
        taxonomy.main_of("XX")


def test_is_valid_and_is_main(taxonomy):
    assert taxonomy.is_valid("NA")
    assert taxonomy.is_main("NA")
    sub = sorted(taxonomy.subs)[0]
    assert taxonomy.is_valid(sub)
    assert not taxonomy.is_main(sub)
    assert not taxonomy.is_valid("nope")


def test_sort_key_orders_mains_before_their_position(taxonomy):
    codes = ["SP", "NA", "IP"]
    assert sorted(codes, key=taxonomy.sort_key) == ["NA", "IP", "SP"]


def test_sort_key_groups_subs_after_main(taxonomy):
    subs_of_na = sorted(c for c in taxonomy.subs if taxonomy.main_of(c) == "NA")
    ordered = sorted(["IN", subs_of_na[0], "NA"], key=taxonomy.sort_key)
    assert ordered[0] == "NA"
    assert ordered[1] == subs_of_na[0]
    assert ordered[2] == "IN"


def test_index_matches_main_order(taxonomy):
    for i, code in enumerate(MAIN_ORDER):
        assert taxonomy.index(code) == i


def test_parse_taxonomy_lines_roundtrip(taxonomy):
    lines = ["# comment", ""]
    for code in MAIN_ORDER:
        lines.append(f"{code}\t{code}\tname of {code}")
    lines.append("NA.sub\tNA\tSome sub")
    tax = parse_taxonomy_lines(lines)
    assert tax.label_order == MAIN_ORDER
    assert tax.main_of("NA.sub") == "NA"


def test_parse_taxonomy_rejects_missing_main():
    lines = [f"{c}\t{c}\t{c}" for c in MAIN_ORDER[:-1]]
    with pytest.raises(TaxonomyError):
        parse_taxonomy_lines(lines)


def test_parse_taxonomy_rejects_sub_with_unknown_main():
    lines = [f"{c}\t{c}\t{c}" for c in MAIN_ORDER]
    lines.append("ZZ.sub\tZZ\tbad")
    with pytest.raises(TaxonomyError):
        parse_taxonomy_lines(lines)


def test_parse_taxonomy_rejects_duplicate_code():
    lines = [f"{c}\t{c}\t{c}" for c in MAIN_ORDER]
    lines.append("NA\tNA\tagain")
    with pytest.raises(TaxonomyError):
        parse_taxonomy_lines(lines)


def test_taxonomy_rejects_wrong_main_order():
    order = ("IN", "NA", "OP", "ID", "HI", "IP", "LY", "SP")
    lines = [f"{c}\t{c}\t{c}" for c in order]
    with pytest.raises(TaxonomyError):
        parse_taxonomy_lines(lines)


def test_default_taxonomy_is_cached():
    assert default_taxonomy() is default_taxonomy()

import pytest

from specforge.acsl import (
    COUNT_CSV_HEADER, ClauseKind, CountRow, MalformedClause, classify_clause, count, count_csv_row,
    extract_annotations, strip_annotations,
)
from specforge.ctokens import code_token_equivalent

from conftest import LISTINGS, PROGRAMS, read


@pytest.mark.parametrize("name, expected", [
    ("bsearch_baseline_spec.c", {"requires": 1, "ensures": 1, "assigns": 1,
                                 "loop_invariant": 1, "loop_assigns": 1, "loop_variant": 1}),
    ("alias5_eva_spec.c", {"requires": 5}),
    ("tritype_eva_spec.c", {"requires": 3, "ensures": 1}),
    ("tritype_baseline_spec.c", {"ensures": 5}),
    ("bugkpath_pc_spec.c", {"requires": 3, "ensures": 1, "assigns": 1}),
])
def test_listing_counts(name, expected):
    assert count(read(LISTINGS / name)).nonzero() == expected


@pytest.mark.parametrize("text, kind", [
    ("requires \\valid(p);", ClauseKind.REQUIRES),
    ("ensures \\result >= 0;", ClauseKind.ENSURES),
    ("assigns \\nothing;", ClauseKind.ASSIGNS),
    ("assert x > 0;", ClauseKind.ASSERT),
    ("loop invariant 0 <= i <= n;", ClauseKind.LOOP_INVARIANT),
    ("loop assigns i;", ClauseKind.LOOP_ASSIGNS),
    ("loop variant n - i;", ClauseKind.LOOP_VARIANT),
    ("for b1: ensures \\result == 1;", ClauseKind.ENSURES),
    ("check requires x > 0;", ClauseKind.REQUIRES),
    ("predicate sorted(int *a, integer n) = \\true;", ClauseKind.PREDICATE),
    ("frobnicate x;", ClauseKind.OTHER),
])
def test_classify(text, kind):
    assert classify_clause(text) is kind


def test_binder_semicolons_do_not_split():
    src = "/*@ requires \\forall integer i; 0 <= i < n ==> a[i] == 0;\n    ensures \\result == 0; */\nint f(int *a, int n);\n"
    anns = extract_annotations(src)
    assert [a.kind for a in anns] == [ClauseKind.REQUIRES, ClauseKind.ENSURES]
    assert anns[0].text.endswith("a[i] == 0;")
    assert anns[0].enclosing_function == "f"


def test_behaviors_count_as_separate_clauses():
    src = ("/*@ requires n >= 0;\n  behavior empty:\n    assumes n == 0;\n    ensures \\result == 0;\n"
           "  behavior other:\n    assumes n > 0;\n    ensures \\result > 0;\n  complete behaviors;\n*/\nint f(int n);\n")
    row = count(src)
    assert row["behavior"] == 2 and row["ensures"] == 2 and row["requires"] == 1


def test_enclosing_function_for_loop_annotations():
    anns = extract_annotations(read(LISTINGS / "palindrome_impl_spec.c"))
    assert {a.enclosing_function for a in anns} == {"isPalindrome"}


def test_malformed_clause():
    with pytest.raises(MalformedClause):
        count("/*@ frobnicate x */ int f(void);")


def test_strip_roundtrip_on_listings():
    for name, original in [("bsearch_baseline_spec.c", "bsearch.c"), ("tritype_eva_spec.c", "tritype.c")]:
        stripped = strip_annotations(read(LISTINGS / name))
        assert count(stripped).total == 0
        assert code_token_equivalent(stripped, read(PROGRAMS / original))
        assert "/*@" not in stripped and "//@" not in stripped


def test_strip_keeps_tokens_apart():
    assert code_token_equivalent(strip_annotations("int/*@ ghost int g; */x;"), "int x;")


def test_count_row_arithmetic_and_csv():
    a, b = CountRow({"requires": 2}), CountRow({"ensures": 1, "requires": 1})
    total = a + b
    assert total["requires"] == 3 and total.total == 4
    assert CountRow.from_dict(total.to_dict()) == total
    row = count_csv_row(total, "p", "baseline", "eva_set", 0)
    assert len(row) == len(COUNT_CSV_HEADER) and row[-1] == "4"

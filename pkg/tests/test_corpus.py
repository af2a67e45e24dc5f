import json

import pytest

from specforge.corpus import (
    AmbiguousLocator, DuplicateId, ManifestSyntax, MissingSource, MutationKind, MutationOp, PatchConflict,
    VariantKind, VariantSpec, anonymize, apply_mutation, apply_patch, load_manifest, materialize_variant,
    write_variants,
)
from specforge.ctokens import code_token_equivalent

from conftest import FIXTURES, PROGRAMS, read

MANIFEST = FIXTURES / "corpus" / "manifest.json"


@pytest.fixture(scope="module")
def corpus():
    return load_manifest(MANIFEST)


def variant(corpus, pid, kind):
    spec = next(v for v in corpus.variants_of(pid) if v.kind is VariantKind(kind))
    return materialize_variant(corpus.program(pid), spec)


def test_manifest_loads(corpus):
    assert [p.id for p in corpus.programs] == ["palindrome", "levenshtein", "apache", "bsearch"]
    assert corpus.program("palindrome").notes == "two-pointer check"
    assert len(corpus.variants) == 6


def test_patch_variant_matches_buggy_source(corpus):
    assert variant(corpus, "palindrome", "buggy").source == read(PROGRAMS / "palindrome_buggy.c")


def test_mutation_variant_matches_buggy_source(corpus):
    assert variant(corpus, "levenshtein", "buggy").source == read(PROGRAMS / "levenshtein_buggy.c")


def test_bug_then_anonymize(corpus):
    v = variant(corpus, "levenshtein", "buggy_anonymized")
    assert dict(v.rename_map) == {"min": "f1", "levenshtein": "f2"}
    assert "matrix[0][x]" in v.source and "levenshtein" not in v.source


def test_anonymize_apache(corpus):
    v = variant(corpus, "apache", "anonymized")
    assert v.rename_map == (("mystrlen", "f1"), ("mystrncmp", "f2"), ("testme", "f3"))


def test_anonymize_keeps_main_and_skips_taken_names():
    src = "int f1 = 0;\nint helper(int a) { return a + f1; }\nint main(void) { return helper(1); }\n"
    out, mapping = anonymize(src)
    assert mapping == (("helper", "f2"),)
    assert "int main(void) { return f2(1); }" in out


def test_anonymize_strip_comments():
    out, _ = anonymize("int g(void){return 1;/* one */}\n", strip_comments=True)
    assert "one" not in out and code_token_equivalent(out, "int f1(void){return 1;}")


def test_token_replace():
    src = read(PROGRAMS / "palindrome.c")
    op = MutationOp(MutationKind.TOKEN_REPLACE, "strlen(str) - 1", replacement="strlen(str)")
    assert apply_mutation(src, op) == read(PROGRAMS / "palindrome_buggy.c")


@pytest.mark.parametrize("src, op, expected", [
    ("int f(){return 3;}", MutationOp(MutationKind.OFF_BY_ONE, "return 3"), "int f(){return 4;}"),
    ("int f(int i){return i < 3;}", MutationOp(MutationKind.OFF_BY_ONE, "i < 3", replacement="-1"),
     "int f(int i){return i < 2;}"),
    ("int f(int i){return i + 1 < 3;}", MutationOp(MutationKind.OFF_BY_ONE, "i + 1 < 3"), None),
    ("int f(int a){return a < b;}", MutationOp(MutationKind.OFF_BY_ONE, "a < b"), "int f(int a){return a <= b;}"),
    ("int f(int a,int b){return a+b;}", MutationOp(MutationKind.OPERATOR_SWAP, "a+b", replacement="-"),
     "int f(int a,int b){return a-b;}"),
])
def test_mutation_kinds(src, op, expected):
    if expected is None:
        with pytest.raises(AmbiguousLocator):
            apply_mutation(src, op)
    else:
        assert apply_mutation(src, op) == expected


def test_line_locator():
    src = "int f(){\n  int a = 1;\n  int b = 1;\n  return a + b;\n}\n"
    out = apply_mutation(src, MutationOp(MutationKind.OFF_BY_ONE, "1", line=3))
    assert "int b = 2;" in out and "int a = 1;" in out


def test_ambiguous_locator():
    with pytest.raises(AmbiguousLocator):
        apply_mutation("int f(){int a = 1; int b = 1; return 0;}", MutationOp(MutationKind.OFF_BY_ONE, "= 1"))


def test_noop_mutation_is_a_conflict():
    with pytest.raises(PatchConflict):
        apply_mutation("int f(){return 1;}", MutationOp(MutationKind.TOKEN_REPLACE, "1", replacement="1"))


def test_patch_is_strict():
    src = read(PROGRAMS / "palindrome.c")
    patch = read(FIXTURES / "corpus" / "palindrome.patch")
    shifted = "// header\n" + src
    with pytest.raises(PatchConflict):
        apply_patch(shifted, patch)


def test_variant_spec_invariants():
    with pytest.raises(ManifestSyntax):
        VariantSpec("p", VariantKind.BUGGY)
    with pytest.raises(ManifestSyntax):
        VariantSpec("p", VariantKind.ANONYMIZED, patch="--- a\n")


def _manifest(tmp_path, data):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    return path


def test_manifest_errors(tmp_path):
    (tmp_path / "a.c").write_text("int f(void){return 0;}\n")
    (tmp_path / "proto.c").write_text("int f(void);\n")
    entry = {"id": "a", "path": "a.c", "suite": "basic"}
    with pytest.raises(DuplicateId):
        load_manifest(_manifest(tmp_path, {"programs": [entry, entry]}))
    with pytest.raises(MissingSource):
        load_manifest(_manifest(tmp_path, {"programs": [{**entry, "path": "nope.c"}]}))
    with pytest.raises(ManifestSyntax):
        load_manifest(_manifest(tmp_path, {"programs": [{**entry, "id": "bad id"}]}))
    with pytest.raises(ManifestSyntax):
        load_manifest(_manifest(tmp_path, {"programs": [{**entry, "path": "proto.c"}]}))
    with pytest.raises(ManifestSyntax):
        load_manifest(_manifest(tmp_path, {"programs": [entry], "variants": [{"program_id": "zz", "kind": "anonymized"}]}))
    with pytest.raises(ManifestSyntax):
        load_manifest(_manifest(tmp_path, {"programs": [{**entry, "suite": "other"}]}))


def test_write_variants(tmp_path, corpus):
    written = write_variants(corpus, tmp_path)
    assert len(written) == 6
    assert (tmp_path / "buggy" / "palindrome.c").read_text() == read(PROGRAMS / "palindrome_buggy.c")

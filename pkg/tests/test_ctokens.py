import pytest

from specforge.ctokens import (
    TokenClass, code_token_equivalent, code_tokens, defined_functions, find_functions, lex,
)
from specforge.errors import UnsupportedSyntax, UnterminatedComment, UnterminatedLiteral

from conftest import LISTINGS, PROGRAMS, read


def classes(src):
    return [(t.cls, t.text) for t in lex(src) if t.cls is not TokenClass.WHITESPACE]


def test_lossless_on_listings():
    for path in list(LISTINGS.glob("*.c")) + list(PROGRAMS.glob("*.c")):
        src = read(path)
        assert "".join(t.text for t in lex(src)) == src, path.name


def test_token_classes():
    toks = classes("/*@ requires x > 0; */ int f(int x); // note\n//@ assert x;\n/* c */")
    assert toks[0][0] is TokenClass.ACSL_BLOCK
    assert (TokenClass.COMMENT, "// note") in toks
    assert (TokenClass.ACSL_LINE, "//@ assert x;") in toks
    assert toks[-1] == (TokenClass.COMMENT, "/* c */")


def test_comment_markers_inside_strings_are_code():
    toks = classes('char *s = "/*@ not acsl */"; char c = \'/\';')
    assert all(cls is TokenClass.CODE for cls, _ in toks)


def test_directive_is_one_token():
    toks = lex("#include <stdio.h>\nint x;\n")
    assert toks[0].text == "#include <stdio.h>" and toks[0].is_directive


def test_positions_are_one_based():
    toks = code_tokens(lex("int\n  x;"))
    assert (toks[1].line, toks[1].col) == (2, 3)


@pytest.mark.parametrize("src, err", [
    ("int x; /* open", UnterminatedComment),
    ('char *s = "abc;\n', UnterminatedLiteral),
    ("int a ??= 1;", UnsupportedSyntax),
    ("int a\\\n= 1;", UnsupportedSyntax),
])
def test_lex_errors(src, err):
    with pytest.raises(err) as info:
        lex(src)
    assert info.value.line >= 1


def test_equivalence_ignores_annotations_comments_and_layout():
    a = "int f(int x){return x;}"
    b = "/*@ requires x >= 0;\n  ensures \\result == x; */\nint f(int x) {\n  // id\n  return x;\n}\n"
    assert code_token_equivalent(a, b)


def test_equivalence_reports_first_divergence():
    eq = code_token_equivalent("int f(){return 1;}", "int f(){return 2;}")
    assert not eq
    assert eq.divergence.token_a.text == "1" and eq.divergence.token_b.text == "2"


def test_directive_whitespace_is_collapsed():
    assert code_token_equivalent("#define  N   3\nint x;", "#define N 3\nint x;")


def test_find_functions():
    src = "int g(int);\nstatic int (*fp)(int) = g;\nint h = g(2);\nint f(int a) { return g(a); }\nint main(void){return 0;}"
    decls = find_functions(code_tokens(lex(src)))
    assert [(d.name, d.is_definition) for d in decls] == [("g", False), ("f", True), ("main", True)]
    assert [d.name for d in defined_functions(src)] == ["f", "main"]

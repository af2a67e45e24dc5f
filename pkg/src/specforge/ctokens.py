"""Lossless C lexer that separates code, comments and ACSL annotations.

The lexer is intentionally shallow: it knows enough about C to never split a
string or character literal, to keep preprocessor directives as single
tokens, and to recognise ``/*@ ... */`` and ``//@ ...`` annotation comments.
Concatenating the text of every token reproduces the input exactly.

Offsets in :class:`Token` are Python string indices (code points).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

from .errors import UnsupportedSyntax, UnterminatedComment, UnterminatedLiteral


class TokenClass(str, enum.Enum):
    CODE = "code"
    COMMENT = "comment"
    ACSL_BLOCK = "acsl_block"
    ACSL_LINE = "acsl_line"
    WHITESPACE = "whitespace"


ACSL_CLASSES = frozenset({TokenClass.ACSL_BLOCK, TokenClass.ACSL_LINE})


class Token(NamedTuple):
    cls: TokenClass
    text: str
    start: int
    end: int
    line: int
    col: int

    @property
    def is_code(self) -> bool:
        return self.cls is TokenClass.CODE

    @property
    def is_acsl(self) -> bool:
        return self.cls in ACSL_CLASSES

    @property
    def is_directive(self) -> bool:
        return self.cls is TokenClass.CODE and self.text.startswith("#")


_WS = re.compile(r"[ \t\r\n\f\v]+")
_IDENT = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_NUMBER = re.compile(r"\.?[0-9](?:[eEpP][+-]|[0-9A-Za-z_.])*")
_STRING = re.compile(r"(?:u8|[uUL])?\"(?:\\.|[^\"\\\n])*\"")
_CHAR = re.compile(r"(?:u8|[uUL])?'(?:\\.|[^'\\\n])*'")
_LITERAL_START = re.compile(r"(?:u8|[uUL])?[\"']")
# Directive body stops before a comment that is not inside a quoted string.
_DIRECTIVE = re.compile(
    r"#(?:[^\n\"'/]|\"(?:\\.|[^\"\\\n])*\"|'(?:\\.|[^'\\\n])*'|/(?![/*])|[\"'])*"
)
_TRIGRAPH = re.compile(r"\?\?[=/'()!<>\-]")
_PUNCTUATORS = sorted(
    """%:%: ... <<= >>= -> ++ -- << >> <= >= == != && || *= /= %= += -= &= ^= |=
    ## <: :> <% %> %: [ ] ( ) { } . & * + - ~ ! / % < > ^ | ? : ; = , #""".split(),
    key=len,
    reverse=True,
)


_PUNCT_RE = re.compile("|".join(re.escape(p) for p in _PUNCTUATORS))


def _punctuator(text: str, pos: int) -> str | None:
    m = _PUNCT_RE.match(text, pos)
    return m.group() if m else None


def _position(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _check_splice(text: str, pos: int) -> None:
    if text.startswith("\\\n", pos) or text.startswith("\\\r\n", pos):
        line, col = _position(text, pos)
        raise UnsupportedSyntax("line-continuation splice is not supported", line, col)


def lex(source: str) -> list[Token]:
    """Split ``source`` into a lossless list of tokens.

    Raises :class:`UnterminatedComment`, :class:`UnterminatedLiteral` or
    :class:`UnsupportedSyntax` (trigraphs, backslash-newline).
    """
    tokens: list[Token] = []
    pos = 0
    line, col = 1, 1
    at_line_start = True
    n = len(source)

    while pos < n:
        ch = source[pos]
        cls = TokenClass.CODE

        if ch in " \t\r\n\f\v":
            end = _WS.match(source, pos).end()
            cls = TokenClass.WHITESPACE
        elif source.startswith("/*", pos):
            close = source.find("*/", pos + 2)
            if close < 0:
                raise UnterminatedComment("unterminated block comment", line, col)
            end = close + 2
            cls = TokenClass.ACSL_BLOCK if source.startswith("/*@", pos) else TokenClass.COMMENT
        elif source.startswith("//", pos):
            end = source.find("\n", pos)
            end = n if end < 0 else end
            if source[pos:end].endswith("\\") or source[pos:end].endswith("\\\r"):
                raise UnsupportedSyntax("line-continuation splice is not supported", line, col)
            cls = TokenClass.ACSL_LINE if source.startswith("//@", pos) else TokenClass.COMMENT
        elif ch == "#" and at_line_start:
            end = _DIRECTIVE.match(source, pos).end()
            _check_splice(source, end - 1)
            while end > pos + 1 and source[end - 1] in " \t\r\f\v":
                end -= 1
        elif m := _LITERAL_START.match(source, pos):
            lit = (_STRING if m.group().endswith('"') else _CHAR).match(source, pos)
            if lit is None:
                stop = source.find("\n", pos)
                stop = n if stop < 0 else stop
                if source[pos:stop].endswith("\\") or source[pos:stop].endswith("\\\r"):
                    raise UnsupportedSyntax("line-continuation splice is not supported", line, col)
                raise UnterminatedLiteral("unterminated literal", line, col)
            end = lit.end()
        elif m := _IDENT.match(source, pos):
            end = m.end()
        elif m := _NUMBER.match(source, pos):
            end = m.end()
        elif ch == "\\":
            _check_splice(source, pos)
            end = pos + 1
        else:
            if ch == "?" and _TRIGRAPH.match(source, pos):
                raise UnsupportedSyntax("trigraphs are not supported", line, col)
            punct = _punctuator(source, pos)
            end = pos + (len(punct) if punct else 1)

        text = source[pos:end]
        if cls is TokenClass.CODE:
            if "??" in text and (tri := _TRIGRAPH.search(text)):
                tline, tcol = _position(source, pos + tri.start())
                raise UnsupportedSyntax("trigraphs are not supported", tline, tcol)
            at_line_start = False
        elif cls is TokenClass.WHITESPACE and "\n" in text:
            at_line_start = True

        tokens.append(Token(cls, text, pos, end, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = end
    return tokens


def code_tokens(tokens: Iterable[Token]) -> list[Token]:
    return [t for t in tokens if t.cls is TokenClass.CODE]


def code_key(token: Token) -> str:
    """Comparison key of a code token; directives compare modulo spacing."""
    if token.is_directive:
        return " ".join(token.text.split())
    return token.text


@dataclass(frozen=True)
class Divergence:
    index: int
    token_a: Token | None
    token_b: Token | None
    context_a: str
    context_b: str

    def describe(self) -> str:
        def side(tok: Token | None, ctx: str) -> str:
            if tok is None:
                return "<end of file>"
            return f"{tok.text!r} at {tok.line}:{tok.col} in `{ctx}`"

        return f"code token #{self.index}: {side(self.token_a, self.context_a)} vs {side(self.token_b, self.context_b)}"


@dataclass(frozen=True)
class Equivalence:
    equal: bool
    divergence: Divergence | None = None

    def __bool__(self) -> bool:
        return self.equal


def _line_of(source: str, tok: Token | None) -> str:
    if tok is None:
        return ""
    start = source.rfind("\n", 0, tok.start) + 1
    end = source.find("\n", tok.start)
    return source[start : len(source) if end < 0 else end].strip()


def code_token_equivalent(a: str, b: str) -> Equivalence:
    """Compare two C sources on code tokens only.

    Whitespace, plain comments and ACSL annotations are ignored. When the
    sources differ, the first differing pair of tokens is reported.
    """
    ca = code_tokens(lex(a))
    cb = code_tokens(lex(b))
    for i in range(max(len(ca), len(cb))):
        ta = ca[i] if i < len(ca) else None
        tb = cb[i] if i < len(cb) else None
        if ta is None or tb is None or code_key(ta) != code_key(tb):
            return Equivalence(False, Divergence(i, ta, tb, _line_of(a, ta), _line_of(b, tb)))
    return Equivalence(True)


# -- top-level function discovery -------------------------------------------

C_KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Alignas _Alignof _Atomic _Bool _Complex _Generic _Imaginary _Noreturn
    _Static_assert _Thread_local __attribute__ __asm__ asm __declspec""".split()
)


@dataclass(frozen=True)
class FunctionDecl:
    """A function declarator found at file scope.

    Indices refer to the code-token list the declaration was found in.
    ``body`` is ``(open_brace_index, close_brace_index)`` for definitions and
    ``None`` for prototypes. ``decl_start`` is the first code token of the
    enclosing declaration.
    """

    name: str
    name_index: int
    decl_start: int
    body: tuple[int, int] | None

    @property
    def is_definition(self) -> bool:
        return self.body is not None


def _match_close(toks: Sequence[Token], i: int, open_: str, close: str) -> int:
    depth = 0
    for j in range(i, len(toks)):
        t = toks[j].text
        if t == open_:
            depth += 1
        elif t == close:
            depth -= 1
            if depth == 0:
                return j
    return len(toks) - 1


def find_functions(ctoks: Sequence[Token]) -> list[FunctionDecl]:
    """Locate file-scope function prototypes and definitions in ``ctoks``."""
    found: list[FunctionDecl] = []
    decl_start = 0
    i = 0
    n = len(ctoks)
    while i < n:
        tok = ctoks[i]
        text = tok.text
        if tok.is_directive:
            decl_start = i + 1
            i += 1
            continue
        if text == ";":
            decl_start = i + 1
        elif text == "{":
            # aggregate bodies at file scope
            i = _match_close(ctoks, i, "{", "}")
        elif text == "=":
            # initialiser: calls inside it are not declarations
            depth = 0
            while i + 1 < n:
                t = ctoks[i + 1].text
                if depth == 0 and t in (";", ","):
                    break
                if t in "({[":
                    depth += 1
                elif t in ")}]":
                    depth -= 1
                i += 1
        elif (
            _IDENT.fullmatch(text)
            and text not in C_KEYWORDS
            and i + 1 < n
            and ctoks[i + 1].text == "("
            and not (i > 0 and ctoks[i - 1].text in (".", "->"))
        ):
            close = _match_close(ctoks, i + 1, "(", ")")
            j = close + 1
            while j < n and ctoks[j].text in ("__attribute__", "__asm__", "asm"):
                j = _match_close(ctoks, j + 1, "(", ")") + 1
            nxt = ctoks[j].text if j < n else ""
            if nxt == "{":
                end = _match_close(ctoks, j, "{", "}")
                found.append(FunctionDecl(text, i, decl_start, (j, end)))
                decl_start = end + 1
                i = end + 1
                continue
            if nxt in (";", ",", "="):
                found.append(FunctionDecl(text, i, decl_start, None))
            i = close + 1
            continue
        elif text == "(":
            # parenthesised declarators such as (*fp)(int)
            i = _match_close(ctoks, i, "(", ")") + 1
            continue
        i += 1
    return found


def defined_functions(source: str) -> list[FunctionDecl]:
    return [f for f in find_functions(code_tokens(lex(source))) if f.is_definition]


def iter_classes(tokens: Iterable[Token], *classes: TokenClass) -> Iterator[Token]:
    wanted = set(classes)
    return (t for t in tokens if t.cls in wanted)

"""Extraction, classification, counting and removal of ACSL annotations."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .ctokens import Token, TokenClass, code_tokens, find_functions, lex
from .errors import SpecforgeError


class MalformedClause(SpecforgeError):
    def __init__(self, text: str, line: int):
        super().__init__(f"unrecognised ACSL clause without terminating ';' at line {line}: {text!r}")
        self.text = text
        self.line = line


class ClauseKind(str, enum.Enum):
    REQUIRES = "requires"
    ENSURES = "ensures"
    ASSIGNS = "assigns"
    ASSERT = "assert"
    LOOP_INVARIANT = "loop_invariant"
    LOOP_ASSIGNS = "loop_assigns"
    LOOP_VARIANT = "loop_variant"
    BEHAVIOR = "behavior"
    LOGIC = "logic"
    PREDICATE = "predicate"
    GHOST = "ghost"
    OTHER = "other"


CORE_KINDS = (ClauseKind.REQUIRES, ClauseKind.ENSURES, ClauseKind.ASSIGNS)

_SIMPLE = {
    "requires": ClauseKind.REQUIRES,
    "ensures": ClauseKind.ENSURES,
    "assigns": ClauseKind.ASSIGNS,
    "assert": ClauseKind.ASSERT,
    "behavior": ClauseKind.BEHAVIOR,
    "logic": ClauseKind.LOGIC,
    "predicate": ClauseKind.PREDICATE,
    "ghost": ClauseKind.GHOST,
}
_LOOP = {
    "invariant": ClauseKind.LOOP_INVARIANT,
    "assigns": ClauseKind.LOOP_ASSIGNS,
    "variant": ClauseKind.LOOP_VARIANT,
}
# keywords that open a legitimate clause even when they classify as OTHER
_KNOWN_KEYWORDS = frozenset(_SIMPLE) | {
    "loop", "assumes", "terminates", "decreases", "allocates", "frees", "exits",
    "returns", "breaks", "continues", "complete", "disjoint", "axiomatic", "lemma",
    "axiom", "inductive", "type", "global", "invariant", "check", "admit", "for",
    "reads", "model", "volatile", "import", "module", "smoke", "behaviors",
}
_FOR_PREFIX = re.compile(r"^for\s+[A-Za-z_]\w*(?:\s*,\s*[A-Za-z_]\w*)*\s*:\s*")
_WORD = re.compile(r"[A-Za-z_]\w*")
_BINDERS = ("\\forall", "\\exists", "\\let", "\\lambda")
_BEHAVIOR_HEAD = re.compile(r"^behavior\s+[A-Za-z_]\w*\s*$")


def classify_clause(clause_text: str) -> ClauseKind:
    """Map a clause to its kind by its leading keyword(s); total."""
    text = " ".join(clause_text.split())
    text = _FOR_PREFIX.sub("", text)
    words = _WORD.findall(text[:64])
    if not words or not text.startswith(words[0]):
        return ClauseKind.OTHER
    first = words[0]
    if first in ("check", "admit") and len(words) > 1:
        return classify_clause(text[len(first):])
    if first == "loop":
        if len(words) > 1:
            return _LOOP.get(words[1], ClauseKind.OTHER)
        return ClauseKind.OTHER
    return _SIMPLE.get(first, ClauseKind.OTHER)


@dataclass(frozen=True)
class Annotation:
    kind: ClauseKind
    text: str
    span: tuple[int, int]
    line: int
    enclosing_function: str | None = None


def _clean(token: Token) -> list[tuple[str, int]]:
    """Characters of an annotation body paired with their source offsets.

    Drops the comment delimiters, the ``@`` margin at the start of each line
    and ``//`` comments nested in the annotation.
    """
    text = token.text
    if token.cls is TokenClass.ACSL_BLOCK:
        body_start, body_end = 3, len(text) - 2
    else:
        body_start, body_end = 3, len(text)
    out: list[tuple[str, int]] = []
    i = body_start
    line_start = False
    quote = ""
    while i < body_end:
        ch = text[i]
        if quote:
            out.append((ch, token.start + i))
            if ch == "\\" and i + 1 < body_end:
                out.append((text[i + 1], token.start + i + 1))
                i += 2
                continue
            if ch == quote:
                quote = ""
            i += 1
            continue
        if ch == "\n":
            line_start = True
            out.append((" ", token.start + i))
            i += 1
            continue
        if line_start and ch in " \t\r":
            out.append((" ", token.start + i))
            i += 1
            continue
        if line_start and ch == "@":
            while i < body_end and text[i] == "@":
                i += 1
            line_start = False
            continue
        line_start = False
        if text.startswith("//", i):
            while i < body_end and text[i] != "\n":
                i += 1
            continue
        if ch in "'\"":
            quote = ch
        out.append((ch, token.start + i))
        i += 1
    return out


def _split(chars: list[tuple[str, int]]) -> list[tuple[list[tuple[str, int]], bool]]:
    """Split cleaned characters into clauses; bool marks a terminating ';'."""
    clauses: list[tuple[list[tuple[str, int]], bool]] = []
    cur: list[tuple[str, int]] = []
    depth = 0
    pending_binders = 0
    quote = ""
    i = 0
    n = len(chars)
    while i < n:
        ch, off = chars[i]
        if quote:
            cur.append((ch, off))
            if ch == "\\" and i + 1 < n:
                cur.append(chars[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = ""
            i += 1
            continue
        if ch in "'\"":
            quote = ch
        elif ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth = max(0, depth - 1)
        elif ch == "\\" and depth == 0:
            for b in _BINDERS:
                end = i + len(b)
                if "".join(c for c, _ in chars[i:end]) == b and (end >= n or not (chars[end][0].isalnum() or chars[end][0] == "_")):
                    pending_binders += 1
                    break
        elif ch == ";" and depth == 0:
            if pending_binders:
                pending_binders -= 1
            else:
                cur.append((ch, off))
                clauses.append((cur, True))
                cur = []
                i += 1
                continue
        elif ch == ":" and depth == 0 and _BEHAVIOR_HEAD.match("".join(c for c, _ in cur).strip()):
            cur.append((ch, off))
            clauses.append((cur, True))
            cur = []
            i += 1
            continue
        cur.append((ch, off))
        i += 1
    if cur:
        clauses.append((cur, False))
    return clauses


def _annotations_in(token: Token) -> list[Annotation]:
    result = []
    for chars, terminated in _split(_clean(token)):
        text = " ".join("".join(c for c, _ in chars).split())
        if not text or text == ";":
            continue
        kind = classify_clause(text)
        if not terminated and kind is ClauseKind.OTHER:
            first = _WORD.match(text)
            if first is None or first.group() not in _KNOWN_KEYWORDS:
                raise MalformedClause(text, token.line)
        first_off = next(off for c, off in chars if not c.isspace())
        last_off = next(off for c, off in reversed(chars) if not c.isspace())
        line = token.line + token.text.count("\n", 0, first_off - token.start)
        result.append(Annotation(kind, text, (first_off, last_off + 1), line))
    return result


def _owner_lookup(tokens: list[Token]):
    ctoks = code_tokens(tokens)
    regions: list[tuple[int, int, str]] = []
    for fn in find_functions(ctoks):
        lo = ctoks[fn.decl_start - 1].end if fn.decl_start > 0 else 0
        if fn.body is not None:
            hi = ctoks[fn.body[1]].end
        else:
            hi = ctoks[fn.name_index].start
        regions.append((lo, hi, fn.name))

    def owner(offset: int) -> str | None:
        for lo, hi, name in regions:
            if lo <= offset < hi:
                return name
        return None

    return owner


def extract_annotations(source: str) -> list[Annotation]:
    """Return one :class:`Annotation` per ACSL clause, in source order."""
    tokens = lex(source)
    annotations: list[Annotation] = []
    owner = None
    for tok in tokens:
        if not tok.is_acsl:
            continue
        if owner is None:
            owner = _owner_lookup(tokens)
        for ann in _annotations_in(tok):
            annotations.append(
                Annotation(ann.kind, ann.text, ann.span, ann.line, owner(ann.span[0]))
            )
    return annotations


@dataclass
class CountRow:
    """Per-kind clause tallies."""

    counts: dict[ClauseKind, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.counts = {k: int(self.counts.get(k, 0)) for k in ClauseKind}
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be non-negative")

    def __getitem__(self, kind: ClauseKind | str) -> int:
        return self.counts[ClauseKind(kind)]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __add__(self, other: "CountRow") -> "CountRow":
        return CountRow({k: self.counts[k] + other.counts[k] for k in ClauseKind})

    def nonzero(self) -> dict[str, int]:
        return {k.value: v for k, v in self.counts.items() if v}

    def to_dict(self) -> dict[str, int]:
        d = {k.value: v for k, v in self.counts.items()}
        d["total"] = self.total
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, int]) -> "CountRow":
        return cls({ClauseKind(k): v for k, v in data.items() if k != "total"})


COUNT_CSV_HEADER = ["program", "variant", "set", "sample"] + [k.value for k in ClauseKind] + ["total"]


def count_csv_row(row: CountRow, program: str = "", variant: str = "", set_: str = "", sample: int | str = "") -> list[str]:
    return [program, variant, set_, str(sample)] + [str(row.counts[k]) for k in ClauseKind] + [str(row.total)]


def count(source_or_annotations: str | Iterable[Annotation]) -> CountRow:
    if isinstance(source_or_annotations, str):
        annotations = extract_annotations(source_or_annotations)
    else:
        annotations = source_or_annotations
    counts: dict[ClauseKind, int] = {}
    for ann in annotations:
        counts[ann.kind] = counts.get(ann.kind, 0) + 1
    return CountRow(counts)


def _line_tail(pieces: list[str]) -> str:
    tail = []
    for p in reversed(pieces):
        nl = p.rfind("\n")
        if nl >= 0:
            tail.append(p[nl + 1 :])
            break
        tail.append(p)
    return "".join(reversed(tail))


def strip_annotations(source: str) -> str:
    """Remove every ACSL annotation, keeping code and plain comments intact.

    An annotation that sits alone on its line(s) takes that line with it;
    one sandwiched between two tokens is replaced by a single space.
    """
    tokens = lex(source)
    pieces: list[str] = []
    skip_newline = False
    for idx, tok in enumerate(tokens):
        if tok.is_acsl:
            nxt = tokens[idx + 1] if idx + 1 < len(tokens) else None
            alone_before = _line_tail(pieces).strip(" \t") == ""
            alone_after = nxt is None or (nxt.cls is TokenClass.WHITESPACE and "\n" in nxt.text)
            if alone_before and alone_after:
                while pieces and pieces[-1] and pieces[-1][-1] in " \t":
                    pieces[-1] = pieces[-1].rstrip(" \t")
                    if pieces[-1]:
                        break
                    pieces.pop()
                skip_newline = nxt is not None
            elif pieces and pieces[-1] and not pieces[-1][-1].isspace() and nxt is not None and not nxt.text[0].isspace() and not nxt.is_acsl:
                pieces.append(" ")
            continue
        text = tok.text
        if skip_newline:
            text = text[text.index("\n") + 1 :]
            skip_newline = False
        pieces.append(text)
    return "".join(pieces)

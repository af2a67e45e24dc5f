"""Aggregate run records into count tables and bug-mention triage tables."""

from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .acsl import CORE_KINDS, ClauseKind, CountRow
from .config import DEFAULT_BUG_PATTERNS
from .corpus import Suite, VariantKind
from .pipeline import GenerationRecord, JobSet

REVIEW_LABEL = "CANDIDATES FOR HUMAN REVIEW"

GROUP_FIELDS = {
    "set": lambda r: r.set,
    "suite": lambda r: r.suite,
    "variant": lambda r: r.variant_kind,
    "program": lambda r: r.program_id,
    "intent": lambda r: r.intent_mode,
}

_RANKS = {
    "set": [s.value for s in JobSet],
    "suite": [s.value for s in Suite],
    "variant": [v.value for v in VariantKind],
}


class RecordFilter(str, enum.Enum):
    ALL = "all"
    VALID_ONLY = "valid_only"

    @classmethod
    def parse(cls, value: "RecordFilter | str") -> "RecordFilter":
        return cls(value.replace("-", "_")) if isinstance(value, str) else value


class Format(str, enum.Enum):
    CSV = "csv"
    MARKDOWN = "md"

    @classmethod
    def parse(cls, value: "Format | str") -> "Format":
        if isinstance(value, Format):
            return value
        return cls.MARKDOWN if value in ("md", "markdown") else cls(value)


@dataclass(frozen=True)
class CountTableRow:
    key: tuple[str, ...]
    records: int
    sums: CountRow

    def mean(self, kind: ClauseKind | str) -> float:
        return self.sums[kind] / self.records if self.records else 0.0

    @property
    def mean_total(self) -> float:
        return self.sums.total / self.records if self.records else 0.0


@dataclass(frozen=True)
class CountTable:
    group_by: tuple[str, ...]
    kinds: tuple[ClauseKind, ...]
    filter: RecordFilter
    rows: tuple[CountTableRow, ...] = ()

    def row(self, *key: str) -> CountTableRow:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)

    @property
    def grand_sums(self) -> CountRow:
        total = CountRow()
        for r in self.rows:
            total = total + r.sums
        return total


def _rank(field_name: str, value: str) -> tuple[int, str]:
    order = _RANKS.get(field_name, [])
    return (order.index(value) if value in order else len(order), value)


def aggregate_counts(
    records: Iterable[GenerationRecord],
    group_by: Sequence[str] = ("set",),
    filter: RecordFilter | str = RecordFilter.ALL,
    all_kinds: bool = False,
) -> CountTable:
    """Sum clause counts per group; means are sums over the group's records."""
    group_by = tuple(group_by)
    for g in group_by:
        if g not in GROUP_FIELDS:
            raise ValueError(f"cannot group by {g!r}; choose from {sorted(GROUP_FIELDS)}")
    filter = RecordFilter.parse(filter)
    groups: dict[tuple[str, ...], tuple[int, CountRow]] = {}
    for rec in records:
        if filter is RecordFilter.VALID_ONLY and not rec.validation.ok:
            continue
        key = tuple(GROUP_FIELDS[g](rec) for g in group_by)
        n, sums = groups.get(key, (0, CountRow()))
        groups[key] = (n + 1, sums + rec.counts)
    ordered = sorted(groups, key=lambda k: tuple(_rank(g, v) for g, v in zip(group_by, k)))
    kinds = tuple(ClauseKind) if all_kinds else tuple(CORE_KINDS)
    rows = tuple(CountTableRow(k, groups[k][0], groups[k][1]) for k in ordered)
    return CountTable(group_by, kinds, filter, rows)


# -- bug mentions -------------------------------------------------------------

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+|\n\s*")


@dataclass(frozen=True)
class Snippet:
    pattern: str
    sentence: str
    span: tuple[int, int]


@dataclass(frozen=True)
class BugFlag:
    record: GenerationRecord
    snippets: tuple[Snippet, ...] = field(default_factory=tuple)


def _sentences(text: str) -> Iterable[tuple[int, int]]:
    start = 0
    for m in _SENTENCE_END.finditer(text):
        yield start, m.start()
        start = m.end()
    yield start, len(text)


def flag_bug_mentions(reasoning: str, patterns: Sequence[str] = DEFAULT_BUG_PATTERNS) -> list[Snippet]:
    """Sentences of ``reasoning`` that match any pattern, case-insensitively.

    Spans are character offsets and ``reasoning[start:end] == sentence``.
    """
    if not patterns:
        raise ValueError("at least one pattern is required")
    compiled = [(p, re.compile(rf"(?<!\w){re.escape(p)}(?!\w)", re.IGNORECASE)) for p in patterns]
    found: list[Snippet] = []
    for start, end in _sentences(reasoning):
        sentence = reasoning[start:end]
        stripped = sentence.strip()
        if not stripped:
            continue
        lead = len(sentence) - len(sentence.lstrip())
        span = (start + lead, start + lead + len(stripped))
        for pattern, rx in compiled:
            if rx.search(stripped):
                found.append(Snippet(pattern, stripped, span))
    return found


def flag_records(records: Iterable[GenerationRecord], patterns: Sequence[str] = DEFAULT_BUG_PATTERNS) -> list[BugFlag]:
    return [BugFlag(r, tuple(flag_bug_mentions(r.reasoning, patterns))) for r in records]


@dataclass(frozen=True)
class FlagRow:
    label: str
    flagged: int
    traces: int


_SUITE_LABELS = {s.value: s.value.capitalize() for s in Suite}
_TABLE_SUITES = [Suite.BASIC, Suite.FAMOUS, Suite.MIRROR, Suite.UNIQUE]


def bug_flag_table(flags: Iterable[BugFlag]) -> list[FlagRow]:
    """Per-suite counts of buggy-variant traces with at least one candidate mention.

    Rows follow the four main suites, then their anonymized variants; other
    suites are appended only when they have traces.
    """
    tally: dict[tuple[bool, str], list[int]] = {}
    for flag in flags:
        kind = VariantKind(flag.record.variant_kind)
        if not kind.is_buggy:
            continue
        slot = tally.setdefault((kind.is_anonymized, flag.record.suite), [0, 0])
        slot[0] += bool(flag.snippets)
        slot[1] += 1
    extra = sorted({s for _, s in tally} - {s.value for s in _TABLE_SUITES}, key=lambda s: _rank("suite", s))
    rows = []
    for anonymized in (False, True):
        for suite in [s.value for s in _TABLE_SUITES] + extra:
            flagged, traces = tally.get((anonymized, suite), [0, 0])
            if suite in extra and traces == 0:
                continue
            label = _SUITE_LABELS.get(suite, suite)
            rows.append(FlagRow(f"Anonymized {label}" if anonymized else label, flagged, traces))
    return rows


# -- emit -----------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _count_rows(table: CountTable) -> tuple[list[str], list[list[str]]]:
    header = list(table.group_by) + ["records"]
    for k in table.kinds:
        header += [k.value, f"{k.value}_mean"]
    header += ["total", "total_mean"]
    body = []
    for r in table.rows:
        line = list(r.key) + [str(r.records)]
        for k in table.kinds:
            line += [str(r.sums[k]), _fmt(r.mean(k))]
        line += [str(r.sums.total), _fmt(r.mean_total)]
        body.append(line)
    return header, body


def _csv(header: list[str], body: list[list[str]]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(body)
    return buf.getvalue().encode("utf-8")


def _markdown(header: list[str], body: list[list[str]], title: str | None = None) -> bytes:
    def line(cells: list[str]) -> str:
        return "| " + " | ".join(c.replace("|", "\\|") for c in cells) + " |"

    out = [f"**{title}**", ""] if title else []
    out.append(line(header))
    out.append("|" + "|".join("---" for _ in header) + "|")
    out.extend(line(b) for b in body)
    return ("\n".join(out) + "\n").encode("utf-8")


def emit(table: CountTable | list[FlagRow], format: Format | str = Format.CSV) -> bytes:
    """Render a count table or a flag table as CSV or a Markdown pipe table."""
    format = Format.parse(format)
    title = None
    if isinstance(table, CountTable):
        header, body = _count_rows(table)
    else:
        header = ["suite", "flagged", "traces"]
        body = [[r.label, str(r.flagged), str(r.traces)] for r in table]
        title = REVIEW_LABEL
        if format is Format.MARKDOWN:
            header = ["Test Suite", "Candidate bug mentions"]
            body = [[r.label, f"{r.flagged}/{r.traces}"] for r in table]
    if format is Format.CSV:
        return _csv(header, body)
    return _markdown(header, body, title)


def emit_snippets(flags: Iterable[BugFlag], format: Format | str = Format.CSV) -> bytes:
    """One line per matched sentence, for reviewers."""
    format = Format.parse(format)
    header = ["program", "variant", "set", "intent", "sample", "pattern", "start", "end", "sentence"]
    body = []
    for flag in flags:
        r = flag.record
        for s in flag.snippets:
            body.append([
                r.program_id, r.variant_kind, r.set, r.intent_mode, str(r.sample_index),
                s.pattern, str(s.span[0]), str(s.span[1]), s.sentence,
            ])
    if format is Format.CSV:
        return _csv(header, body)
    return _markdown(header, body, REVIEW_LABEL)

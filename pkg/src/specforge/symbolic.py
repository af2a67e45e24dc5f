"""EVA report and PathCrawler table ingestion, plus optional tool invocation.

Prompts always embed the raw tool output; the parsed forms below exist for
validation and reporting.
"""

from __future__ import annotations

import csv
import enum
import io
import re
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import SpecforgeError


class SymbolicError(SpecforgeError):
    pass


class MalformedReport(SymbolicError):
    pass


class HeaderMissing(SymbolicError):
    pass


class RaggedRow(SymbolicError):
    def __init__(self, row_number: int, cells: int, expected: int):
        super().__init__(f"row {row_number} has {cells} cells, header has {expected}")
        self.row_number = row_number
        self.cells = cells
        self.expected = expected


class BadCell(SymbolicError):
    pass


class ToolMissing(SymbolicError):
    pass


class ToolFailed(SymbolicError):
    def __init__(self, tool: str, exit_code: int, stderr_tail: str):
        super().__init__(f"{tool} exited with {exit_code}: {stderr_tail}")
        self.exit_code = exit_code
        self.stderr_tail = stderr_tail


class ToolTimeout(SymbolicError):
    pass


# -- EVA ----------------------------------------------------------------------


class AlarmCategory(str, enum.Enum):
    INTEGER_OVERFLOW = "integer_overflow"
    INVALID_MEMORY_ACCESS = "invalid_memory_access"
    DIVISION_BY_ZERO = "division_by_zero"
    OTHER = "other"


def alarm_category(message: str) -> AlarmCategory:
    m = message.lower()
    if "overflow" in m:
        return AlarmCategory.INTEGER_OVERFLOW
    if "out of bounds" in m or "invalid memory" in m or "memory access" in m or "\\valid" in m:
        return AlarmCategory.INVALID_MEMORY_ACCESS
    if "division by zero" in m or "divisions by zero" in m:
        return AlarmCategory.DIVISION_BY_ZERO
    return AlarmCategory.OTHER


@dataclass(frozen=True)
class EvaAlarm:
    file: str
    line: int
    category: AlarmCategory
    message: str
    assertion_text: str


@dataclass(frozen=True)
class FinalState:
    function: str
    variable: str
    values: str


@dataclass
class EvaSummary:
    alarm_count: int
    per_category: dict[AlarmCategory, int]
    functions_analyzed: tuple[int, int] | None = None
    statements_reached: tuple[int, int] | None = None


@dataclass
class EvaReport:
    alarms: list[EvaAlarm]
    final_states: list[FinalState]
    non_terminating: bool
    summary: EvaSummary | None
    raw_text: str

    def category_counts(self) -> dict[AlarmCategory, int]:
        counts = {c: 0 for c in AlarmCategory}
        for a in self.alarms:
            counts[a.category] += 1
        return counts


_ALARM_HEAD = re.compile(r"^\[eva:alarm\]\s+(?P<file>.+?):(?P<line>\d+):\s*Warning:\s*(?P<rest>.*)$")
_FINAL_HEAD = re.compile(r"^\[eva:final-states\]\s+Values at end of function\s+(?P<fn>[\w$]+):?\s*$")
_STATE = re.compile(r"^\s+(?P<var>\S+)\s+(?:in|∈)\s+(?P<values>.+?)\s*$")
_ALARM_TOTAL = re.compile(r"^\s*(?P<n>\d+) alarms? generated by the analysis")
_NO_ALARMS = re.compile(r"^\s*No alarms? (?:raised|generated)")
_CATEGORY_LINE = re.compile(r"^\s*(?P<n>\d+)\s+(?P<name>[A-Za-z][A-Za-z \-]+?)\s*$")
_FUNCTIONS = re.compile(r"^\s*(?P<a>\d+) functions? analyzed \(out of (?P<b>\d+)\)")
_STATEMENTS = re.compile(r"statements reached \(out of (?P<b>\d+)\)")
_STATEMENTS_A = re.compile(r"(?P<a>\d+) statements reached")


def _summary_category(name: str) -> AlarmCategory:
    n = name.lower()
    if "overflow" in n:
        return AlarmCategory.INTEGER_OVERFLOW
    if "memory access" in n:
        return AlarmCategory.INVALID_MEMORY_ACCESS
    if "by zero" in n:
        return AlarmCategory.DIVISION_BY_ZERO
    return AlarmCategory.OTHER


def parse_eva_report(text: str) -> EvaReport:
    """Parse the textual report printed by Frama-C's EVA plug-in."""
    lines = text.splitlines()
    if "VALUES COMPUTED" not in text and not any(l.startswith("[eva") for l in lines):
        raise MalformedReport("no EVA output found")

    alarms: list[EvaAlarm] = []
    states: list[FinalState] = []
    non_terminating = False
    summary: EvaSummary | None = None
    in_summary = False
    in_alarm_breakdown = False
    function = None
    i = 0
    while i < len(lines):
        line = lines[i]
        if m := _ALARM_HEAD.match(line):
            parts = [m.group("rest").strip()] if m.group("rest").strip() else []
            j = i + 1
            while j < len(lines) and lines[j][:1] in (" ", "\t") and lines[j].strip():
                parts.append(lines[j].strip())
                j += 1
            message = " ".join(parts)
            k = message.find("assert")
            assertion = message[k:] if k >= 0 else ""
            alarms.append(EvaAlarm(m.group("file"), int(m.group("line")), alarm_category(message), message, assertion))
            i = j
            continue
        if line.startswith("["):
            in_summary = line.startswith("[eva:summary]")
            in_alarm_breakdown = False
            function = None
            if m := _FINAL_HEAD.match(line):
                function = m.group("fn")
        elif function is not None:
            if "NON TERMINATING FUNCTION" in line:
                non_terminating = True
            elif m := _STATE.match(line):
                states.append(FinalState(function, m.group("var"), m.group("values")))
        elif in_summary:
            if m := _ALARM_TOTAL.match(line):
                summary = summary or EvaSummary(0, {})
                summary.alarm_count = int(m.group("n"))
                in_alarm_breakdown = True
            elif _NO_ALARMS.match(line):
                summary = summary or EvaSummary(0, {})
                summary.alarm_count = 0
            elif in_alarm_breakdown and (m := _CATEGORY_LINE.match(line)):
                cat = _summary_category(m.group("name"))
                summary.per_category[cat] = summary.per_category.get(cat, 0) + int(m.group("n"))
            else:
                in_alarm_breakdown = False
                if m := _FUNCTIONS.match(line):
                    summary = summary or EvaSummary(0, {})
                    summary.functions_analyzed = (int(m.group("a")), int(m.group("b")))
                elif (mb := _STATEMENTS.search(line)) and (ma := _STATEMENTS_A.search(line)):
                    summary = summary or EvaSummary(0, {})
                    summary.statements_reached = (int(ma.group("a")), int(mb.group("b")))
        i += 1
    if summary is not None:
        summary.per_category = {c: summary.per_category.get(c, 0) for c in AlarmCategory}
    return EvaReport(alarms, states, non_terminating, summary, text)


# -- PathCrawler -----------------------------------------------------------------


class Verdict(str, enum.Enum):
    SUCCESS = "success"
    UNKNOWN = "unknown"
    NO_EXTRA_COVERAGE = "no_extra_coverage"
    FAILURE = "failure"
    OTHER = "other"


@dataclass(frozen=True)
class PcRow:
    inputs: tuple[tuple[str, int | None], ...]
    output: int | None
    verdict: str
    extra: tuple[str, ...] = ()

    @property
    def verdict_kind(self) -> Verdict:
        try:
            v = Verdict(self.verdict)
        except ValueError:
            return Verdict.OTHER
        return Verdict.OTHER if v is Verdict.OTHER else v


@dataclass
class PcTable:
    header: list[str]
    rows: list[PcRow] = field(default_factory=list)
    raw_text: str = ""

    @property
    def input_columns(self) -> list[str]:
        return [h for h in self.header if h not in ("output", "verdict")]

    def verdict_histogram(self) -> dict[str, int]:
        hist: dict[str, int] = {}
        for row in self.rows:
            hist[row.verdict] = hist.get(row.verdict, 0) + 1
        return hist


_INDEXED = re.compile(r"^(?P<name>.*)\[(?P<i>\d+)\]$")


def _expand_header(cells: Sequence[str]) -> list[str]:
    """Expand ``a[0],...,a[14]`` elisions into the full run of columns."""
    out: list[str] = []
    for k, cell in enumerate(cells):
        if cell.strip() in ("...", "…") and 0 < k < len(cells) - 1:
            before = _INDEXED.match(cells[k - 1].strip())
            after = _INDEXED.match(cells[k + 1].strip())
            if before and after and before.group("name") == after.group("name"):
                name = before.group("name")
                out.extend(f"{name}[{i}]" for i in range(int(before.group("i")) + 1, int(after.group("i"))))
                continue
        out.append(cell.strip())
    return out


def _int_cell(cell: str, row_number: int, column: str) -> int | None:
    cell = cell.strip()
    if cell == "":
        return None
    try:
        return int(cell)
    except ValueError as exc:
        raise BadCell(f"row {row_number}, column {column}: {cell!r} is not an integer") from exc


def parse_pathcrawler_csv(text: str, ragged: str = "reject") -> PcTable:
    """Parse a PathCrawler test-case table.

    ``ragged`` is ``"reject"`` (raise :class:`RaggedRow`) or ``"pad"``: short
    rows get absent cells before the verdict, surplus cells after the output
    are kept in :attr:`PcRow.extra`.
    """
    if ragged not in ("reject", "pad"):
        raise ValueError(f"unknown ragged-row policy {ragged!r}")
    body = text.rstrip().rstrip("%").rstrip()
    records = [r for r in csv.reader(io.StringIO(body)) if any(c.strip() for c in r)]
    if not records or "verdict" not in [c.strip() for c in records[0]]:
        raise HeaderMissing("first line must be a header containing 'verdict'")
    header = _expand_header(records[0])
    if header[-1] != "verdict":
        raise HeaderMissing("'verdict' must be the last column")
    has_output = "output" in header
    n_inputs = header.index("output") if has_output else len(header) - 1
    inputs_names = header[:n_inputs]

    rows: list[PcRow] = []
    for number, cells in enumerate(records[1:], start=1):
        extra: tuple[str, ...] = ()
        if len(cells) != len(header):
            if ragged == "reject":
                raise RaggedRow(number, len(cells), len(header))
            verdict_cell = cells[-1]
            body_cells = cells[:-1]
            width = len(header) - 1
            if len(body_cells) < width:
                body_cells = body_cells + [""] * (width - len(body_cells))
            else:
                extra = tuple(body_cells[width:])
                body_cells = body_cells[:width]
            cells = body_cells + [verdict_cell]
        inputs = tuple((name, _int_cell(cells[k], number, name)) for k, name in enumerate(inputs_names))
        output = _int_cell(cells[n_inputs], number, "output") if has_output else None
        rows.append(PcRow(inputs, output, cells[-1].strip(), extra))
    return PcTable(header, rows, text)


# -- context + external tools -----------------------------------------------------


class ContextKind(str, enum.Enum):
    NONE = "none"
    EVA = "eva"
    PATHCRAWLER = "pathcrawler"


@dataclass(frozen=True)
class SymbolicContext:
    kind: ContextKind
    rendered_text: str = ""
    parsed: EvaReport | PcTable | None = None

    def __post_init__(self) -> None:
        if self.kind is ContextKind.NONE and self.rendered_text:
            raise ValueError("an empty context cannot carry text")

    @classmethod
    def none(cls) -> "SymbolicContext":
        return cls(ContextKind.NONE)

    @classmethod
    def from_eva(cls, text: str) -> "SymbolicContext":
        return cls(ContextKind.EVA, text, parse_eva_report(text))

    @classmethod
    def from_pathcrawler(cls, text: str, ragged: str = "pad") -> "SymbolicContext":
        return cls(ContextKind.PATHCRAWLER, text, parse_pathcrawler_csv(text, ragged=ragged))


def load_context(path: str | Path, ragged: str = "pad") -> SymbolicContext:
    """Load a saved tool output; the kind is inferred from its contents."""
    text = Path(path).read_text(encoding="utf-8")
    first = text.split("\n", 1)[0]
    if "verdict" in first and "," in first:
        return SymbolicContext.from_pathcrawler(text, ragged)
    return SymbolicContext.from_eva(text)


TOOL_SUFFIX = {"eva": ".eva.txt", "pathcrawler": ".pathcrawler.csv"}
DEFAULT_COMMANDS = {"eva": ["frama-c", "-eva"], "pathcrawler": ["pathcrawler"]}


@dataclass
class ToolConfig:
    binary: str | None = None
    flags: list[str] = field(default_factory=list)
    timeout_s: float = 300.0
    replay_dir: str | None = None


def run_external_tool(tool: str, program_path: str | Path, config: ToolConfig | None = None) -> str:
    """Run EVA or PathCrawler on a program and persist the output beside it.

    When ``config.replay_dir`` holds ``<stem><suffix>`` for the program, its
    bytes are returned unchanged and no process is spawned.
    """
    if tool not in TOOL_SUFFIX:
        raise ValueError(f"unknown tool {tool!r}")
    config = config or ToolConfig()
    program_path = Path(program_path)
    suffix = TOOL_SUFFIX[tool]
    if config.replay_dir:
        stored = Path(config.replay_dir) / f"{program_path.stem}{suffix}"
        if stored.exists():
            return stored.read_bytes().decode("utf-8")

    command = [config.binary] if config.binary else list(DEFAULT_COMMANDS[tool][:1])
    if shutil.which(command[0]) is None:
        raise ToolMissing(f"{tool}: {command[0]!r} not found on PATH")
    if not config.binary:
        command += DEFAULT_COMMANDS[tool][1:]
    command += list(config.flags) + [str(program_path)]
    try:
        proc = subprocess.run(command, capture_output=True, text=True, timeout=config.timeout_s)
    except subprocess.TimeoutExpired as exc:
        raise ToolTimeout(f"{tool} exceeded {config.timeout_s}s") from exc
    if proc.returncode != 0:
        raise ToolFailed(tool, proc.returncode, proc.stderr[-2000:])
    output = proc.stdout + proc.stderr
    program_path.with_name(program_path.stem + suffix).write_text(output, encoding="utf-8")
    return output

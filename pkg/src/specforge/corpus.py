"""Program corpus, controlled variants and the transformations behind them."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .ctokens import Token, TokenClass, code_tokens, find_functions, lex
from .errors import LexError, SpecforgeError


class CorpusError(SpecforgeError):
    pass


class ManifestSyntax(CorpusError):
    pass


class MissingSource(CorpusError):
    pass


class DuplicateId(CorpusError):
    pass


class PatchConflict(CorpusError):
    pass


class AmbiguousLocator(CorpusError):
    pass


class LexFailure(CorpusError):
    pass


class Suite(str, enum.Enum):
    BASIC = "basic"
    FAMOUS = "famous"
    MIRROR = "mirror"
    UNIQUE = "unique"
    PATHCRAWLER = "pathcrawler"


class VariantKind(str, enum.Enum):
    BASELINE = "baseline"
    BUGGY = "buggy"
    ANONYMIZED = "anonymized"
    BUGGY_ANONYMIZED = "buggy_anonymized"

    @property
    def is_buggy(self) -> bool:
        return self in (VariantKind.BUGGY, VariantKind.BUGGY_ANONYMIZED)

    @property
    def is_anonymized(self) -> bool:
        return self in (VariantKind.ANONYMIZED, VariantKind.BUGGY_ANONYMIZED)


class MutationKind(str, enum.Enum):
    OPERATOR_SWAP = "operator_swap"
    OFF_BY_ONE = "off_by_one"
    INDEX_SWAP = "index_swap"
    TOKEN_REPLACE = "token_replace"


@dataclass(frozen=True)
class Program:
    id: str
    source: str
    suite: Suite
    notes: str = ""
    path: Path | None = None


@dataclass(frozen=True)
class MutationOp:
    """A declarative, single-site edit.

    The site is located by ``pattern`` (a C fragment matched on code tokens),
    by ``line``/``column`` of its first token, or by both. ``replacement`` is
    the new token text; for ``off_by_one`` it is the signed delta applied to
    the lone integer literal in the site (default ``+1``), and for
    ``operator_swap`` the new operator.
    """

    op: MutationKind
    pattern: str | None = None
    line: int | None = None
    column: int | None = None
    replacement: str | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MutationOp":
        try:
            op = MutationKind(data["op"])
        except (KeyError, ValueError) as exc:
            raise ManifestSyntax(f"bad mutation op in {data!r}") from exc
        unknown = set(data) - {"op", "pattern", "line", "column", "replacement"}
        if unknown:
            raise ManifestSyntax(f"unknown mutation fields {sorted(unknown)}")
        if data.get("pattern") is None and data.get("line") is None:
            raise ManifestSyntax("mutation needs a pattern or a line/column locator")
        if op in (MutationKind.TOKEN_REPLACE, MutationKind.OPERATOR_SWAP) and data.get("replacement") is None:
            raise ManifestSyntax(f"{op.value} needs a replacement")
        return cls(op, data.get("pattern"), data.get("line"), data.get("column"), data.get("replacement"))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"op": self.op.value}
        for key in ("pattern", "line", "column", "replacement"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


@dataclass(frozen=True)
class VariantSpec:
    program_id: str
    kind: VariantKind
    patch: str | None = None
    mutations: tuple[MutationOp, ...] = ()
    strip_comments: bool = False

    def __post_init__(self) -> None:
        if self.kind is VariantKind.BASELINE and (self.patch or self.mutations):
            raise ManifestSyntax(f"{self.program_id}: baseline variant cannot carry a patch or mutations")
        if self.kind.is_buggy and bool(self.patch) == bool(self.mutations):
            raise ManifestSyntax(f"{self.program_id}: {self.kind.value} needs exactly one of patch or mutations")
        if not self.kind.is_buggy and (self.patch or self.mutations):
            raise ManifestSyntax(f"{self.program_id}: {self.kind.value} variant cannot carry a patch or mutations")


@dataclass(frozen=True)
class ProgramVariant:
    program_id: str
    kind: VariantKind
    source: str
    rename_map: tuple[tuple[str, str], ...] = ()


@dataclass
class Corpus:
    programs: list[Program] = field(default_factory=list)
    variants: list[VariantSpec] = field(default_factory=list)

    def program(self, program_id: str) -> Program:
        for p in self.programs:
            if p.id == program_id:
                return p
        raise KeyError(program_id)

    def variants_of(self, program_id: str) -> list[VariantSpec]:
        return [v for v in self.variants if v.program_id == program_id]


def _lex_or_fail(source: str, what: str) -> list[Token]:
    try:
        return lex(source)
    except LexError as exc:
        raise LexFailure(f"{what}: {exc}") from exc


# -- manifest ---------------------------------------------------------------


def load_manifest(path: str | Path) -> Corpus:
    """Load a JSON corpus manifest; relative paths resolve from its directory."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise MissingSource(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestSyntax(f"{path}: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("programs"), list):
        raise ManifestSyntax(f"{path}: expected an object with a 'programs' list")
    root = path.parent

    programs: list[Program] = []
    seen: set[str] = set()
    for entry in data["programs"]:
        if not isinstance(entry, dict) or not {"id", "path", "suite"} <= set(entry):
            raise ManifestSyntax(f"program entry needs id, path and suite: {entry!r}")
        pid = entry["id"]
        if not isinstance(pid, str) or not re.fullmatch(r"[A-Za-z0-9][A-Za-z0-9_.-]*", pid):
            raise ManifestSyntax(f"program id must be a slug: {pid!r}")
        if pid in seen:
            raise DuplicateId(pid)
        seen.add(pid)
        try:
            suite = Suite(entry["suite"])
        except ValueError as exc:
            raise ManifestSyntax(f"{pid}: unknown suite {entry['suite']!r}") from exc
        src_path = root / entry["path"]
        try:
            source = src_path.read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise MissingSource(f"{pid}: {src_path}") from exc
        if not source.strip():
            raise ManifestSyntax(f"{pid}: empty source")
        tokens = _lex_or_fail(source, pid)
        if not any(f.is_definition for f in find_functions(code_tokens(tokens))):
            raise ManifestSyntax(f"{pid}: source has no function definition")
        programs.append(Program(pid, source, suite, entry.get("notes", ""), src_path))

    variants: list[VariantSpec] = []
    for entry in data.get("variants", []):
        if not isinstance(entry, dict) or "program_id" not in entry or "kind" not in entry:
            raise ManifestSyntax(f"variant entry needs program_id and kind: {entry!r}")
        if entry["program_id"] not in seen:
            raise ManifestSyntax(f"variant references unknown program {entry['program_id']!r}")
        try:
            kind = VariantKind(entry["kind"])
        except ValueError as exc:
            raise ManifestSyntax(f"unknown variant kind {entry['kind']!r}") from exc
        patch = None
        if entry.get("patch_path"):
            patch_file = root / entry["patch_path"]
            try:
                patch = patch_file.read_text(encoding="utf-8")
            except FileNotFoundError as exc:
                raise MissingSource(f"{entry['program_id']}: patch {patch_file}") from exc
        mutations = tuple(MutationOp.from_dict(m) for m in entry.get("mutations", []))
        opts = entry.get("anonymize_opts") or {}
        variants.append(VariantSpec(entry["program_id"], kind, patch, mutations, bool(opts.get("strip_comments", False))))

    keys = [(v.program_id, v.kind) for v in variants]
    if len(keys) != len(set(keys)):
        raise DuplicateId("variant declared twice for the same program and kind")
    return Corpus(programs, variants)


# -- unified diff -------------------------------------------------------------

_HUNK = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def apply_patch(source: str, patch: str) -> str:
    """Apply a single-file unified diff strictly at the stated line numbers."""
    lines = source.splitlines(keepends=True)
    hunks: list[tuple[int, list[str]]] = []
    current: list[str] | None = None
    for raw in patch.splitlines():
        if raw.startswith(("--- ", "+++ ", "diff ", "index ")) and current is None:
            continue
        m = _HUNK.match(raw)
        if m:
            current = []
            hunks.append((int(m.group(1)), current))
            continue
        if current is None:
            continue
        if raw.startswith("\\"):
            continue  # "\ No newline at end of file"
        if raw[:1] in (" ", "-", "+"):
            current.append(raw)
        elif raw == "":
            current.append(" ")
        else:
            raise PatchConflict(f"unexpected patch line {raw!r}")
    if not hunks:
        raise PatchConflict("patch contains no hunks")

    out: list[str] = []
    cursor = 0
    for start, body in hunks:
        at = max(start - 1, 0) if any(b[0] != "+" for b in body) else start
        if at < cursor:
            raise PatchConflict(f"hunk at line {start} overlaps a previous hunk")
        out.extend(lines[cursor:at])
        pos = at
        for b in body:
            tag, text = b[0], b[1:]
            if tag in (" ", "-"):
                have = lines[pos].rstrip("\r\n") if pos < len(lines) else None
                if have != text:
                    raise PatchConflict(f"context mismatch at line {pos + 1}: expected {text!r}, found {have!r}")
                if tag == " ":
                    out.append(lines[pos])
                pos += 1
            else:
                out.append(text + "\n")
        cursor = pos
    out.extend(lines[cursor:])
    return "".join(out)


# -- mutations ----------------------------------------------------------------

_INT_LITERAL = re.compile(r"(0|[1-9][0-9]*)([uUlL]*)")
_RELATIONAL_TOGGLE = {"<": "<=", "<=": "<", ">": ">=", ">=": ">"}
_OPERATORS = frozenset(
    "+ - * / % << >> < <= > >= == != & | ^ && || = += -= *= /= %= &= |= ^= <<= >>= ++ -- ! ~".split()
)


def _locate(source: str, op: MutationOp) -> tuple[list[Token], int, int]:
    ctoks = code_tokens(_lex_or_fail(source, "mutation target"))
    if op.pattern is not None:
        pat = [t.text for t in code_tokens(_lex_or_fail(op.pattern, "mutation pattern"))]
        if not pat:
            raise AmbiguousLocator("empty mutation pattern")
        starts = [
            i for i in range(len(ctoks) - len(pat) + 1)
            if all(ctoks[i + k].text == pat[k] for k in range(len(pat)))
        ]
        width = len(pat)
    else:
        starts = list(range(len(ctoks)))
        width = 1
    if op.line is not None:
        starts = [i for i in starts if ctoks[i].line == op.line and (op.column is None or ctoks[i].col == op.column)]
    if len(starts) != 1:
        where = op.pattern if op.pattern is not None else f"{op.line}:{op.column}"
        raise AmbiguousLocator(f"{op.op.value} locator {where!r} matched {len(starts)} sites")
    return ctoks, starts[0], width


def _splice(source: str, first: Token, last: Token, text: str) -> str:
    return source[: first.start] + text + source[last.end :]


def apply_mutation(source: str, op: MutationOp) -> str:
    ctoks, i, width = _locate(source, op)
    site = ctoks[i : i + width]

    if op.op is MutationKind.TOKEN_REPLACE:
        result = _splice(source, site[0], site[-1], op.replacement or "")

    elif op.op is MutationKind.OPERATOR_SWAP:
        ops = [t for t in site if t.text in _OPERATORS]
        if len(ops) != 1:
            raise AmbiguousLocator(f"operator_swap site holds {len(ops)} operators")
        new = code_tokens(_lex_or_fail(op.replacement or "", "replacement"))
        if len(new) != 1 or new[0].text not in _OPERATORS:
            raise PatchConflict(f"operator_swap replacement {op.replacement!r} is not an operator")
        result = _splice(source, ops[0], ops[0], op.replacement or "")

    elif op.op is MutationKind.OFF_BY_ONE:
        literals = [t for t in site if _INT_LITERAL.fullmatch(t.text)]
        relations = [t for t in site if t.text in _RELATIONAL_TOGGLE]
        if len(literals) == 1:
            tok = literals[0]
            m = _INT_LITERAL.fullmatch(tok.text)
            delta = int(op.replacement or "+1")
            value = int(m.group(1)) + delta
            if value < 0:
                raise PatchConflict("off_by_one would make the literal negative")
            result = _splice(source, tok, tok, f"{value}{m.group(2)}")
        elif not literals and len(relations) == 1:
            tok = relations[0]
            result = _splice(source, tok, tok, _RELATIONAL_TOGGLE[tok.text])
        else:
            raise AmbiguousLocator("off_by_one site needs exactly one integer literal or one relational operator")

    else:  # INDEX_SWAP: name [ a ] [ b ]  ->  name [ b ] [ a ]
        texts = [t.text for t in site]
        if len(site) < 7 or texts[1] != "[" or texts[-1] != "]":
            raise AmbiguousLocator("index_swap site must look like name[a][b]")
        depth, split = 0, None
        for k in range(1, len(site)):
            if texts[k] == "[":
                depth += 1
            elif texts[k] == "]":
                depth -= 1
                if depth == 0:
                    split = k
                    break
        if split is None or texts[split + 1] != "[" or split + 1 == len(site) - 1:
            raise AmbiguousLocator("index_swap site must look like name[a][b]")
        first = source[site[2].start : site[split - 1].end]
        second = source[site[split + 2].start : site[-2].end]
        result = (
            source[: site[2].start] + second + source[site[split - 1].end : site[split + 2].start]
            + first + source[site[-2].end :]
        )

    _lex_or_fail(result, "mutated source")
    if [t.text for t in code_tokens(lex(result))] == [t.text for t in ctoks]:
        raise PatchConflict(f"{op.op.value} at {op.pattern or op.line!r} leaves the code unchanged")
    return result


# -- anonymisation --------------------------------------------------------------


def anonymize(source: str, strip_comments: bool = False) -> tuple[str, tuple[tuple[str, str], ...]]:
    """Rename every function defined in ``source`` to ``f1``, ``f2``, ...

    Names are assigned in order of each function's first file-scope
    declaration. ``main`` and functions that are only called (declared
    elsewhere) keep their names. Placeholders already used by other
    identifiers in the file are skipped so the renaming stays injective.
    """
    tokens = _lex_or_fail(source, "anonymize")
    ctoks = code_tokens(tokens)
    decls = find_functions(ctoks)
    defined = {f.name for f in decls if f.is_definition and f.name != "main"}
    order: list[str] = []
    for f in decls:
        if f.name in defined and f.name not in order:
            order.append(f.name)
    taken = {t.text for t in ctoks if t.text not in defined}
    for t in ctoks:
        if t.is_directive:
            taken.update(w for w in re.findall(r"[A-Za-z_]\w*", t.text) if w not in defined)
    mapping: dict[str, str] = {}
    n = 0
    for name in order:
        n += 1
        while f"f{n}" in taken:
            n += 1
        mapping[name] = f"f{n}"

    pieces: list[str] = []
    for idx, tok in enumerate(tokens):
        if tok.cls is TokenClass.CODE and tok.text in mapping:
            pieces.append(mapping[tok.text])
        elif strip_comments and tok.cls is TokenClass.COMMENT:
            prev = pieces[-1] if pieces else ""
            nxt = tokens[idx + 1].text if idx + 1 < len(tokens) else ""
            if prev and nxt and not prev[-1].isspace() and not nxt[0].isspace():
                pieces.append(" ")
        else:
            pieces.append(tok.text)
    return "".join(pieces), tuple(mapping.items())


def materialize_variant(program: Program, spec: VariantSpec) -> ProgramVariant:
    source = program.source
    if spec.kind is VariantKind.BASELINE:
        return ProgramVariant(program.id, spec.kind, source)
    if spec.kind.is_buggy:
        if spec.patch:
            source = apply_patch(source, spec.patch)
            _lex_or_fail(source, f"{program.id} after patch")
        else:
            for op in spec.mutations:
                source = apply_mutation(source, op)
    rename_map: tuple[tuple[str, str], ...] = ()
    if spec.kind.is_anonymized:
        source, rename_map = anonymize(source, spec.strip_comments)
    return ProgramVariant(program.id, spec.kind, source, rename_map)


def write_variants(corpus: Corpus, out_dir: str | Path) -> list[Path]:
    """Materialise every declared variant as ``<out>/<kind>/<id>.c``."""
    out_dir = Path(out_dir)
    written = []
    for spec in corpus.variants:
        variant = materialize_variant(corpus.program(spec.program_id), spec)
        target = out_dir / spec.kind.value / f"{spec.program_id}.c"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(variant.source, encoding="utf-8")
        written.append(target)
    return written

"""Job planning, generation, validation and the JSONL record store."""

from __future__ import annotations

import enum
import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

from .acsl import CountRow, MalformedClause, count
from .corpus import Corpus, Program, VariantKind, VariantSpec, materialize_variant
from .ctokens import code_token_equivalent, lex
from .errors import LexError, SpecforgeError
from .llm import ChatClient, ChatRequest, LlmError
from .prompt import IntentDirective, IntentMode, TemplateId, digest, render
from .symbolic import SymbolicContext, TOOL_SUFFIX


class PipelineError(SpecforgeError):
    pass


class MissingSymbolicArtifact(PipelineError):
    def __init__(self, missing: Sequence[tuple[str, str, str]]):
        listing = ", ".join(f"{p}/{v}/{s}" for p, v, s in missing)
        super().__init__(f"missing symbolic artifacts for: {listing}")
        self.missing = list(missing)


class NoCodeBlock(PipelineError):
    pass


class JobSet(str, enum.Enum):
    BASELINE = "baseline_set"
    PATHCRAWLER = "pathcrawler_set"
    EVA = "eva_set"

    def template(self, legacy: bool = False) -> TemplateId:
        name = {"baseline_set": "baseline", "pathcrawler_set": "pathcrawler", "eva_set": "eva"}[self.value]
        return TemplateId(f"legacy_{name}" if legacy else name)

    @property
    def tool(self) -> str | None:
        return {"pathcrawler_set": "pathcrawler", "eva_set": "eva"}.get(self.value)


VARIANT_ORDER = list(VariantKind)
SET_ORDER = list(JobSet)
MODE_ORDER = list(IntentMode)


@dataclass(frozen=True)
class Job:
    program_id: str
    suite: str
    variant_kind: VariantKind
    set: JobSet
    intent_mode: IntentMode
    sample_index: int
    prompt_digest: str
    prompt: str = field(repr=False, compare=False, default="")
    reference_source: str = field(repr=False, compare=False, default="")
    intent_text: str = field(repr=False, compare=False, default="")

    @property
    def identity(self) -> tuple[str, str, str, str, int]:
        return (self.program_id, self.variant_kind.value, self.set.value, self.intent_mode.value, self.sample_index)


class FailureKind(str, enum.Enum):
    NO_CODE_BLOCK = "no_code_block"
    CODE_EDITED = "code_edited"
    ZERO_ANNOTATIONS = "zero_annotations"
    LEX_FAILURE = "lex_failure"
    PROVIDER_ERROR = "provider_error"


@dataclass(frozen=True)
class Failure:
    kind: FailureKind
    detail: str = ""


@dataclass(frozen=True)
class ValidationResult:
    failures: tuple[Failure, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def kinds(self) -> set[FailureKind]:
        return {f.kind for f in self.failures}

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "failures": [{"kind": f.kind.value, "detail": f.detail} for f in self.failures]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ValidationResult":
        return cls(tuple(Failure(FailureKind(f["kind"]), f.get("detail", "")) for f in data.get("failures", [])))


# -- artefacts --------------------------------------------------------------------


def symbolic_artifact_path(program: Program, kind: VariantKind, tool: str, symbolic_dir: Path | None) -> Path | None:
    """Find the stored tool output for a program variant, if any.

    Baseline variants use ``<id><suffix>`` (or the program file's stem);
    other variants need ``<id>.<kind><suffix>``.
    """
    suffix = TOOL_SUFFIX[tool]
    base = symbolic_dir or (program.path.parent if program.path else Path.cwd())
    if kind is VariantKind.BASELINE:
        names = [f"{program.id}{suffix}"]
        if program.path is not None:
            names.append(f"{program.path.stem}{suffix}")
    else:
        names = [f"{program.id}.{kind.value}{suffix}"]
    for name in names:
        if (base / name).exists():
            return base / name
    return None


def _variant_specs(corpus: Corpus, program: Program, kinds: Iterable[VariantKind] | None) -> list[VariantSpec]:
    specs = {VariantKind.BASELINE: VariantSpec(program.id, VariantKind.BASELINE)}
    for v in corpus.variants_of(program.id):
        specs[v.kind] = v
    wanted = set(kinds) if kinds is not None else set(specs)
    return [specs[k] for k in VARIANT_ORDER if k in specs and k in wanted]


def plan_jobs(
    corpus: Corpus,
    sets: Sequence[JobSet | str],
    intent_modes: Sequence[IntentMode | str] = (IntentMode.OFF,),
    samples: int = 3,
    *,
    variants: Sequence[VariantKind | str] | None = None,
    model: str = "deepseek-reasoner",
    temperature: float = 0.7,
    symbolic_dir: Path | None = None,
    intent_text: str | None = None,
    template_dir: Path | None = None,
    legacy_prompts: bool = False,
    ragged_policy: str = "pad",
) -> list[Job]:
    """Expand program x variant x set x intent mode x sample into jobs."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    set_list = [s for s in SET_ORDER if s in {JobSet(x) for x in sets}]
    mode_list = [m for m in MODE_ORDER if m in {IntentMode(x) for x in intent_modes}]
    kinds = [VariantKind(v) for v in variants] if variants is not None else None

    jobs: list[Job] = []
    missing: list[tuple[str, str, str]] = []
    for program in corpus.programs:
        for spec in _variant_specs(corpus, program, kinds):
            variant = materialize_variant(program, spec)
            for job_set in set_list:
                context = SymbolicContext.none()
                if job_set.tool is not None:
                    path = symbolic_artifact_path(program, spec.kind, job_set.tool, symbolic_dir)
                    if path is None:
                        missing.append((program.id, spec.kind.value, job_set.value))
                        continue
                    text = path.read_bytes().decode("utf-8")
                    if job_set.tool == "eva":
                        context = SymbolicContext.from_eva(text)
                    else:
                        context = SymbolicContext.from_pathcrawler(text, ragged_policy)
                for mode in mode_list:
                    directive = IntentDirective.for_mode(mode, intent_text)
                    prompt = render(job_set.template(legacy_prompts), variant.source, context, directive, template_dir)
                    key = digest(prompt, model, temperature)
                    for sample in range(samples):
                        jobs.append(Job(
                            program.id, program.suite.value, spec.kind, job_set, mode, sample, key,
                            prompt, variant.source, directive.text,
                        ))
    if missing:
        raise MissingSymbolicArtifact(missing)
    return jobs


# -- answers ----------------------------------------------------------------------

_FENCE_OPEN = re.compile(r"^[ \t]*(?P<ticks>`{3,}|~{3,})[ \t]*(?P<tag>[^\s`]*)[^\n`]*$")


def _fences(answer: str) -> Iterator[tuple[str, str]]:
    lines = answer.split("\n")
    i = 0
    while i < len(lines):
        m = _FENCE_OPEN.match(lines[i])
        if not m:
            i += 1
            continue
        ticks, tag = m.group("ticks"), m.group("tag")
        close = re.compile(rf"^[ \t]*{re.escape(ticks[0])}{{{len(ticks)},}}[ \t]*$")
        for j in range(i + 1, len(lines)):
            if close.match(lines[j]):
                yield tag, "\n".join(lines[i + 1 : j])
                i = j + 1
                break
        else:
            return


def extract_code_block(answer: str) -> str:
    """Return the body of the last ```c fence, else of the last untagged one."""
    tagged, untagged = None, None
    for tag, body in _fences(answer):
        if tag.lower() == "c":
            tagged = body
        elif tag == "":
            untagged = body
    body = tagged if tagged is not None else untagged
    if body is None:
        raise NoCodeBlock("answer holds no fenced C code block")
    return body.rstrip("\n") + "\n"


def validate(original: str, extracted: str) -> ValidationResult:
    """Check that ``extracted`` only adds annotations to ``original``."""
    lex(original)
    try:
        lex(extracted)
    except LexError as exc:
        return ValidationResult((Failure(FailureKind.LEX_FAILURE, str(exc)),))
    failures: list[Failure] = []
    eq = code_token_equivalent(original, extracted)
    if not eq.equal:
        failures.append(Failure(FailureKind.CODE_EDITED, eq.divergence.describe()))
    try:
        total = count(extracted).total
    except MalformedClause as exc:
        failures.append(Failure(FailureKind.LEX_FAILURE, str(exc)))
    else:
        if total < 1:
            failures.append(Failure(FailureKind.ZERO_ANNOTATIONS, "no ACSL clause found"))
    return ValidationResult(tuple(failures))


# -- records ----------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationRecord:
    program_id: str
    suite: str
    variant_kind: str
    set: str
    intent_mode: str
    sample_index: int
    prompt_digest: str
    model: str
    temperature: float
    intent_directive: str
    reasoning: str
    answer: str
    extracted_code: str | None
    validation: ValidationResult
    counts: CountRow
    usage: dict[str, int]
    latency_ms: int
    recorded_at: str

    @property
    def identity(self) -> tuple[str, str, str, str, int]:
        return (self.program_id, self.variant_kind, self.set, self.intent_mode, self.sample_index)

    def to_dict(self) -> dict[str, Any]:
        return {
            "program_id": self.program_id,
            "suite": self.suite,
            "variant_kind": self.variant_kind,
            "set": self.set,
            "intent_mode": self.intent_mode,
            "sample_index": self.sample_index,
            "prompt_digest": self.prompt_digest,
            "model": self.model,
            "temperature": self.temperature,
            "intent_directive": self.intent_directive,
            "reasoning": self.reasoning,
            "answer": self.answer,
            "extracted_code": self.extracted_code,
            "validation": self.validation.to_dict(),
            "counts": self.counts.to_dict(),
            "usage": self.usage,
            "latency_ms": self.latency_ms,
            "timestamps": {"recorded_at": self.recorded_at},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GenerationRecord":
        return cls(
            d["program_id"], d.get("suite", ""), d["variant_kind"], d["set"], d["intent_mode"],
            int(d["sample_index"]), d["prompt_digest"], d.get("model", ""), float(d.get("temperature", 0.0)),
            d.get("intent_directive", ""), d.get("reasoning", ""), d.get("answer", ""), d.get("extracted_code"),
            ValidationResult.from_dict(d["validation"]), CountRow.from_dict(d["counts"]),
            dict(d.get("usage", {})), int(d.get("latency_ms", 0)), d.get("timestamps", {}).get("recorded_at", ""),
        )


class RecordStore:
    """Append-only JSONL file of :class:`GenerationRecord` with one writer."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def reset(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_bytes(b"")

    def append(self, record: GenerationRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(line)

    def load(self) -> list[GenerationRecord]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as fh:
            return [GenerationRecord.from_dict(json.loads(line)) for line in fh if line.strip()]

    def identities(self) -> set[tuple[str, str, str, str, int]]:
        return {r.identity for r in self.load()}


def run_job(job: Job, client: ChatClient, store: RecordStore | None = None) -> GenerationRecord:
    """Prompt, validate and count one job; provider errors become failure records."""
    req = ChatRequest(job.prompt, client.config.model, client.config.temperature, job.sample_index)
    reasoning = answer = recorded_at = ""
    usage: dict[str, int] = {}
    latency = 0
    extracted: str | None = None
    counts = CountRow()
    try:
        resp = client.complete(req)
    except LlmError as exc:
        validation = ValidationResult((Failure(FailureKind.PROVIDER_ERROR, f"{type(exc).__name__}: {exc}"),))
    else:
        reasoning, answer, usage, latency, recorded_at = (
            resp.reasoning, resp.answer, resp.usage, resp.latency_ms, resp.recorded_at,
        )
        try:
            extracted = extract_code_block(answer)
        except NoCodeBlock as exc:
            validation = ValidationResult((Failure(FailureKind.NO_CODE_BLOCK, str(exc)),))
        else:
            validation = validate(job.reference_source, extracted)
            if FailureKind.LEX_FAILURE not in validation.kinds:
                counts = count(extracted)
    record = GenerationRecord(
        job.program_id, job.suite, job.variant_kind.value, job.set.value, job.intent_mode.value,
        job.sample_index, job.prompt_digest, req.model, req.temperature, job.intent_text,
        reasoning, answer, extracted, validation, counts, usage, latency, recorded_at,
    )
    if store is not None:
        store.append(record)
    return record


def run_batch(jobs: Sequence[Job], client: ChatClient, store: RecordStore, resume: bool = False) -> list[GenerationRecord]:
    """Run jobs concurrently; records are appended in plan order.

    Without ``resume`` the store is truncated first. With it, jobs whose
    identity already has a record are skipped.
    """
    if resume:
        done = store.identities()
        jobs = [j for j in jobs if j.identity not in done]
    else:
        store.reset()
    records: list[GenerationRecord] = []
    with ThreadPoolExecutor(max_workers=max(1, client.config.max_in_flight)) as pool:
        futures = [pool.submit(run_job, job, client) for job in jobs]
        for fut in futures:
            record = fut.result()
            store.append(record)
            records.append(record)
    return records

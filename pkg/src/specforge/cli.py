"""Command-line entry point: ``specforge <command> ...``.

Exit codes: 0 ok, 1 usage or configuration error, 2 validation failures,
3 missing artifacts, 4 provider or network error. Data goes to stdout,
diagnostics to stderr; ``--json`` prints one JSON document on stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .acsl import COUNT_CSV_HEADER, count, count_csv_row
from .config import Config, load_config
from .corpus import CorpusError, MissingSource, load_manifest, write_variants
from .errors import SpecforgeError
from .llm import ChatClient, ClientMode, LlmError
from .pipeline import (
    FailureKind, MissingSymbolicArtifact, RecordStore, plan_jobs, run_batch, validate,
)
from .prompt import IntentDirective, TemplateId, render
from .report import (
    aggregate_counts, bug_flag_table, emit, emit_snippets, flag_records,
)
from .symbolic import SymbolicContext, SymbolicError, ToolConfig, ToolMissing, load_context, run_external_tool

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_MISSING = 3
EXIT_PROVIDER = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


class _Outcome:
    def __init__(self, code: int = EXIT_OK, summary: dict[str, Any] | None = None, data: bytes | str | None = None):
        self.code = code
        self.summary = summary or {}
        self.data = data


def _need(cfg: Config, attr: str, flag: str) -> Path:
    value = getattr(cfg, attr)
    if value is None:
        raise UsageError(f"no {attr} configured; set it in the config file or pass {flag}")
    return value


def _apply_overrides(cfg: Config, args: argparse.Namespace) -> Config:
    for attr in ("corpus", "store", "cache_dir", "symbolic_dir"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, attr, Path(value))
    return cfg


# -- commands ---------------------------------------------------------------------


def cmd_corpus(args, cfg: Config) -> _Outcome:
    corpus = load_manifest(_need(cfg, "corpus", "--corpus"))
    if args.action == "list":
        items = []
        lines = []
        for p in corpus.programs:
            kinds = ["baseline"] + [v.kind.value for v in corpus.variants_of(p.id) if v.kind.value != "baseline"]
            items.append({"id": p.id, "suite": p.suite.value, "variants": kinds})
            lines.append(f"{p.id}\t{p.suite.value}\t{','.join(kinds)}\n")
        return _Outcome(summary={"programs": items}, data="".join(lines))
    written = write_variants(corpus, args.out)
    return _Outcome(summary={"written": [str(p) for p in written]}, data="".join(f"{p}\n" for p in written))


def cmd_prompt(args, cfg: Config) -> _Outcome:
    program = Path(args.program).read_text(encoding="utf-8")
    context = load_context(args.context, cfg.ragged_policy) if args.context else SymbolicContext.none()
    directive = IntentDirective.for_mode(args.intent, args.intent_text or cfg.intent_text)
    text = render(args.template, program, context, directive, cfg.template_dir)
    return _Outcome(summary={"prompt": text}, data=text)


def _plan(cfg: Config):
    corpus = load_manifest(_need(cfg, "corpus", "--corpus"))
    return plan_jobs(
        corpus, cfg.sets, cfg.intent_modes, cfg.samples,
        variants=cfg.variants, model=cfg.client.model, temperature=cfg.client.temperature,
        symbolic_dir=cfg.symbolic_dir, intent_text=cfg.intent_text, template_dir=cfg.template_dir,
        legacy_prompts=cfg.legacy_prompts, ragged_policy=cfg.ragged_policy,
    )


def cmd_plan(args, cfg: Config) -> _Outcome:
    jobs = _plan(cfg)
    rows = [
        {"program_id": j.program_id, "variant_kind": j.variant_kind.value, "set": j.set.value,
         "intent_mode": j.intent_mode.value, "sample_index": j.sample_index, "prompt_digest": j.prompt_digest}
        for j in jobs
    ]
    lines = "".join("\t".join(str(v) for v in r.values()) + "\n" for r in rows)
    return _Outcome(summary={"jobs": len(jobs), "plan": rows}, data=lines)


def cmd_generate(args, cfg: Config) -> _Outcome:
    jobs = _plan(cfg)
    mode = ClientMode.parse(args.mode or "live")
    client = ChatClient(cfg.client, mode, cfg.cache_dir)
    store = RecordStore(_need(cfg, "store", "--store"))
    try:
        records = run_batch(jobs, client, store, resume=args.resume)
    finally:
        client.close()
    provider = sum(FailureKind.PROVIDER_ERROR in r.validation.kinds for r in records)
    invalid = sum(not r.validation.ok for r in records)
    summary = {
        "planned": len(jobs), "written": len(records), "valid": len(records) - invalid,
        "invalid": invalid, "provider_errors": provider, "store": str(store.path),
    }
    print(
        f"{len(records)} records written ({len(records) - invalid} valid, {invalid} invalid, "
        f"{provider} provider errors) to {store.path}",
        file=sys.stderr,
    )
    code = EXIT_PROVIDER if provider else EXIT_INVALID if invalid else EXIT_OK
    return _Outcome(code, summary)


def cmd_validate(args, cfg: Config) -> _Outcome:
    original = Path(args.original).read_text(encoding="utf-8")
    annotated = Path(args.annotated).read_text(encoding="utf-8")
    result = validate(original, annotated)
    text = "ok\n" if result.ok else "".join(f"{f.kind.value}: {f.detail}\n" for f in result.failures)
    return _Outcome(EXIT_OK if result.ok else EXIT_INVALID, result.to_dict(), text)


def cmd_count(args, cfg: Config) -> _Outcome:
    rows: list[list[str]] = []
    if args.file:
        for f in args.file:
            path = Path(f)
            rows.append(count_csv_row(count(path.read_text(encoding="utf-8")), program=path.stem))
    else:
        for r in RecordStore(_need(cfg, "store", "--store")).load():
            rows.append(count_csv_row(r.counts, r.program_id, r.variant_kind, r.set, r.sample_index))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COUNT_CSV_HEADER)
    writer.writerows(rows)
    summary = {"rows": [dict(zip(COUNT_CSV_HEADER, r)) for r in rows]}
    return _Outcome(summary=summary, data=buf.getvalue())


def cmd_report(args, cfg: Config) -> _Outcome:
    records = RecordStore(_need(cfg, "store", "--store")).load()
    if args.flags or args.snippets:
        flags = flag_records(records, cfg.bug_patterns)
        out = emit_snippets(flags, args.format) if args.snippets else emit(bug_flag_table(flags), args.format)
    else:
        group_by = [g.strip() for g in args.group_by.split(",") if g.strip()]
        try:
            table = aggregate_counts(records, group_by, args.filter, args.all_kinds)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        out = emit(table, args.format)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_bytes(out)
        return _Outcome(summary={"out": args.out, "records": len(records)})
    return _Outcome(summary={"records": len(records), "report": out.decode("utf-8")}, data=out)


def cmd_symbolic(args, cfg: Config) -> _Outcome:
    tool_cfg = cfg.tools.get(args.tool, ToolConfig())
    text = run_external_tool(args.tool, args.program, tool_cfg)
    return _Outcome(summary={"tool": args.tool, "output": text}, data=text)


# -- parser -----------------------------------------------------------------------


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # Subcommands repeat the global flags; suppressed defaults keep them from
    # overwriting values given before the subcommand name.
    extra = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", help="JSON config file; relative paths in it resolve from its directory", **extra)
    parser.add_argument("--mode", choices=["live", "record", "replay-strict", "replay-fallback"],
                        help="LLM client mode (default: live)", **extra)
    parser.add_argument("--json", action="store_true", help="print one JSON document on stdout", **extra)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr", **extra)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _global_options(common, suppress=True)

    parser = _Parser(prog="specforge", description="ACSL synthesis harness for C programs.")
    _global_options(parser, suppress=False)
    parser.add_argument("--version", action="version", version=f"specforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("corpus", parents=[common], help="list or materialize corpus variants")
    p.add_argument("action", choices=["list", "materialize"])
    p.add_argument("--corpus", help="manifest path (overrides config)")
    p.add_argument("--out", default="variants", help="output directory for materialize")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("prompt", parents=[common], help="render a prompt template")
    p.add_argument("action", choices=["render"])
    p.add_argument("--template", required=True, choices=[t.value for t in TemplateId])
    p.add_argument("--program", required=True, help="C source file")
    p.add_argument("--context", help="EVA report (.txt) or PathCrawler table (.csv)")
    p.add_argument("--intent", default="off", choices=["off", "implementation", "intent"])
    p.add_argument("--intent-text", help="override the intent directive wording")
    p.set_defaults(func=cmd_prompt)

    for name, func, help_ in (("plan", cmd_plan, "list the jobs a run would execute"),
                              ("generate", cmd_generate, "run generation jobs and append records")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--corpus", help="manifest path (overrides config)")
        p.add_argument("--symbolic-dir", help="directory holding tool outputs (overrides config)")
        if name == "generate":
            p.add_argument("--store", help="JSONL record store (overrides config)")
            p.add_argument("--cache-dir", help="response cache root (overrides config)")
            p.add_argument("--resume", action="store_true", help="skip jobs that already have a record")
        p.set_defaults(func=func)

    p = sub.add_parser("validate", parents=[common], help="check that annotated code only adds annotations")
    p.add_argument("--original", required=True)
    p.add_argument("--annotated", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("count", parents=[common], help="count ACSL clauses per kind")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--file", nargs="+", help="annotated C files")
    src.add_argument("--store", nargs="?", const="", help="count records in the store (path optional)")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("report", parents=[common], help="aggregate records into tables")
    p.add_argument("--store", help="JSONL record store (overrides config)")
    p.add_argument("--group-by", default="set", help="comma list of set, suite, variant, program, intent")
    p.add_argument("--filter", default="all", choices=["all", "valid-only", "valid_only"])
    p.add_argument("--format", default="csv", choices=["csv", "md", "markdown"])
    p.add_argument("--all-kinds", action="store_true", help="include every clause kind, not only the core three")
    p.add_argument("--flags", action="store_true", help="bug-mention triage table per suite")
    p.add_argument("--snippets", action="store_true", help="list every matched reasoning sentence")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("symbolic", parents=[common], help="run or replay EVA / PathCrawler on a program")
    p.add_argument("--tool", required=True, choices=["eva", "pathcrawler"])
    p.add_argument("--program", required=True)
    p.set_defaults(func=cmd_symbolic)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (UsageError, FileNotFoundError, IsADirectoryError)):
        return EXIT_MISSING if isinstance(exc, FileNotFoundError) else EXIT_USAGE
    if isinstance(exc, (MissingSymbolicArtifact, MissingSource, ToolMissing)):
        return EXIT_MISSING
    if isinstance(exc, LlmError):
        return EXIT_PROVIDER
    return EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json" in argv
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if getattr(args, "command", None) == "count" and args.store == "":
            args.store = None
        cfg = _apply_overrides(load_config(args.config), args)
        outcome = args.func(args, cfg)
    except (UsageError, SpecforgeError, CorpusError, SymbolicError, OSError, UnicodeDecodeError) as exc:
        code = _exit_code(exc)
        print(f"specforge: error: {exc}", file=sys.stderr)
        if as_json:
            print(json.dumps({"ok": False, "exit_code": code, "error": str(exc), "error_type": type(exc).__name__}))
        return code
    if as_json:
        print(json.dumps({"ok": outcome.code == EXIT_OK, "exit_code": outcome.code, **outcome.summary}, ensure_ascii=False))
    elif outcome.data is not None:
        data = outcome.data if isinstance(outcome.data, bytes) else outcome.data.encode("utf-8")
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return outcome.code


if __name__ == "__main__":
    sys.exit(main())

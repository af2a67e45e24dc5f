"""Prompt templates for ACSL synthesis and their cache digests."""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import SpecforgeError
from .symbolic import ContextKind, SymbolicContext


class PromptError(SpecforgeError):
    pass


class ContextMismatch(PromptError):
    pass


class UnresolvedPlaceholder(PromptError):
    pass


class TemplateId(str, enum.Enum):
    BASELINE = "baseline"
    PATHCRAWLER = "pathcrawler"
    EVA = "eva"
    LEGACY_BASELINE = "legacy_baseline"
    LEGACY_PATHCRAWLER = "legacy_pathcrawler"
    LEGACY_EVA = "legacy_eva"

    @property
    def context_kind(self) -> ContextKind:
        if self in (TemplateId.PATHCRAWLER, TemplateId.LEGACY_PATHCRAWLER):
            return ContextKind.PATHCRAWLER
        if self in (TemplateId.EVA, TemplateId.LEGACY_EVA):
            return ContextKind.EVA
        return ContextKind.NONE

    @property
    def placeholders(self) -> frozenset[str]:
        extra = {
            ContextKind.NONE: set(),
            ContextKind.PATHCRAWLER: {"pathcrawler_str"},
            ContextKind.EVA: {"eva_str"},
        }[self.context_kind]
        return frozenset({"program_str"} | extra)


_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")
_GOAL_LINE = re.compile(r"^(\d+)\. ")


class IntentMode(str, enum.Enum):
    OFF = "off"
    IMPLEMENTATION = "implementation"
    INTENT = "intent"


DEFAULT_DIRECTIVES = {
    IntentMode.INTENT: (
        "The provided code may contain bugs. If the implementation conflicts with the evident intent, "
        "generate annotations for the intended behavior, not the implemented behavior."
    ),
    IntentMode.IMPLEMENTATION: (
        "The provided code may contain bugs. Generate annotations that describe the behavior of the code "
        "as it is implemented, even where it appears to differ from its intent."
    ),
}


@dataclass(frozen=True)
class IntentDirective:
    mode: IntentMode = IntentMode.OFF
    text: str = ""

    def __post_init__(self) -> None:
        if self.mode is IntentMode.OFF and self.text:
            raise ValueError("an 'off' directive carries no text")

    @classmethod
    def for_mode(cls, mode: IntentMode | str, text: str | None = None) -> "IntentDirective":
        mode = IntentMode(mode)
        if mode is IntentMode.OFF:
            return cls()
        return cls(mode, text if text is not None else DEFAULT_DIRECTIVES[mode])


def load_template(template_id: TemplateId | str, template_dir: str | Path | None = None) -> str:
    template_id = TemplateId(template_id)
    if template_dir is not None:
        path = Path(template_dir) / f"{template_id.value}.txt"
        body = path.read_bytes().decode("utf-8")
    else:
        body = resources.files("specforge").joinpath("templates").joinpath(f"{template_id.value}.txt").read_bytes().decode("utf-8")
    found = set(_PLACEHOLDER.findall(body))
    if found != template_id.placeholders:
        raise UnresolvedPlaceholder(
            f"template {template_id.value} has placeholders {sorted(found)}, expected {sorted(template_id.placeholders)}"
        )
    return body


def _add_goal(body: str, directive: str) -> str:
    lines = body.split("\n")
    try:
        start = lines.index("GOALS:")
    except ValueError as exc:
        raise PromptError("template has no GOALS section") from exc
    last, number = None, 0
    for k in range(start + 1, len(lines)):
        m = _GOAL_LINE.match(lines[k])
        if not m:
            break
        last, number = k, int(m.group(1))
    if last is None:
        raise PromptError("template GOALS section is empty")
    lines.insert(last + 1, f"{number + 1}. {directive}")
    return "\n".join(lines)


def render(
    template_id: TemplateId | str,
    program: str,
    context: SymbolicContext | None = None,
    directive: IntentDirective | None = None,
    template_dir: str | Path | None = None,
) -> str:
    """Substitute a program (and tool output) into a stored template."""
    template_id = TemplateId(template_id)
    context = context or SymbolicContext.none()
    directive = directive or IntentDirective()
    if context.kind is not template_id.context_kind:
        raise ContextMismatch(
            f"template {template_id.value} needs a {template_id.context_kind.value} context, got {context.kind.value}"
        )
    body = load_template(template_id, template_dir)
    if directive.mode is not IntentMode.OFF:
        body = _add_goal(body, directive.text)
    bindings = {"program_str": program}
    if context.kind is ContextKind.PATHCRAWLER:
        bindings["pathcrawler_str"] = context.rendered_text
    elif context.kind is ContextKind.EVA:
        bindings["eva_str"] = context.rendered_text

    def substitute(m: re.Match) -> str:
        try:
            return bindings[m.group(1)]
        except KeyError:
            raise UnresolvedPlaceholder(f"no value for {{{m.group(1)}}}") from None

    return _PLACEHOLDER.sub(substitute, body)


def format_temperature(temperature: float) -> str:
    """Shortest decimal that round-trips, without a trailing '.0'."""
    text = repr(float(temperature))
    return text[:-2] if text.endswith(".0") else text


def digest(prompt: str, model: str, temperature: float) -> str:
    """SHA-256 of ``model NUL temperature NUL prompt`` as lowercase hex."""
    h = hashlib.sha256()
    h.update(model.encode("utf-8"))
    h.update(b"\x00")
    h.update(format_temperature(temperature).encode("ascii"))
    h.update(b"\x00")
    h.update(prompt.encode("utf-8"))
    return h.hexdigest()

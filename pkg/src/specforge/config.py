"""JSON run configuration. Relative paths resolve against the config file."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import SpecforgeError
from .llm import ClientConfig, RetryPolicy
from .symbolic import ToolConfig

CACHE_DIR_ENV = "SPECFORGE_CACHE_DIR"

DEFAULT_BUG_PATTERNS = ["bug", "incorrect", "wrong", "off-by-one", "should be", "the code as written"]


class ConfigError(SpecforgeError):
    pass


@dataclass
class Config:
    root: Path = field(default_factory=Path.cwd)
    corpus: Path | None = None
    cache_dir: Path | None = None
    store: Path | None = None
    symbolic_dir: Path | None = None
    template_dir: Path | None = None
    sets: list[str] = field(default_factory=lambda: ["baseline_set"])
    variants: list[str] | None = None
    samples: int = 3
    intent_modes: list[str] = field(default_factory=lambda: ["off"])
    intent_text: str | None = None
    legacy_prompts: bool = False
    ragged_policy: str = "pad"
    client: ClientConfig = field(default_factory=ClientConfig)
    tools: dict[str, ToolConfig] = field(default_factory=dict)
    bug_patterns: list[str] = field(default_factory=lambda: list(DEFAULT_BUG_PATTERNS))

    def resolve(self, value: str | Path | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.root / p


_TOP_KEYS = {
    "corpus", "cache_dir", "store", "symbolic_dir", "template_dir", "sets", "variants", "samples",
    "intent_modes", "intent_mode", "intent_text", "legacy_prompts", "ragged_policy", "client", "tools",
    "bug_patterns",
}


def config_from_dict(data: dict[str, Any], root: Path) -> Config:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = Config(root=root)
    for key in ("corpus", "cache_dir", "store", "symbolic_dir", "template_dir"):
        if data.get(key) is not None:
            setattr(cfg, key, cfg.resolve(data[key]))
    client = dict(data.get("client") or {})
    retry = client.pop("retry", {}) or {}
    try:
        cfg.client = ClientConfig(**client, retry=RetryPolicy(**retry))
    except TypeError as exc:
        raise ConfigError(f"bad client settings: {exc}") from exc
    cfg.samples = int(data.get("samples", cfg.client.samples))
    if "sets" in data:
        cfg.sets = list(data["sets"])
    if data.get("variants") is not None:
        cfg.variants = list(data["variants"])
    if "intent_modes" in data:
        cfg.intent_modes = list(data["intent_modes"])
    elif "intent_mode" in data:
        cfg.intent_modes = [data["intent_mode"]]
    cfg.intent_text = data.get("intent_text")
    cfg.legacy_prompts = bool(data.get("legacy_prompts", False))
    cfg.ragged_policy = data.get("ragged_policy", "pad")
    for name, tool in (data.get("tools") or {}).items():
        tool = dict(tool)
        if tool.get("replay_dir"):
            tool["replay_dir"] = str(cfg.resolve(tool["replay_dir"]))
        try:
            cfg.tools[name] = ToolConfig(**tool)
        except TypeError as exc:
            raise ConfigError(f"bad settings for tool {name}: {exc}") from exc
    if data.get("bug_patterns"):
        cfg.bug_patterns = list(data["bug_patterns"])
    return cfg


def load_config(path: str | Path | None) -> Config:
    if path is None:
        cfg = Config()
    else:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        cfg = config_from_dict(data, path.resolve().parent)
    if os.environ.get(CACHE_DIR_ENV):
        cfg.cache_dir = Path(os.environ[CACHE_DIR_ENV])
    return cfg

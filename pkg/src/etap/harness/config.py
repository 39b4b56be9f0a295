"""Rule and scenario files.

Both are TOML documents whose first line is a magic header naming the format
and version.  Rule grammar (``# etap-rule v1``)::

    name        = "R1"                  # required
    description = "..."                 # optional
    trigger_api = "twitter/new-tweet"   # required; rules naming the same API share its key
    action_api  = "slack/post-message"  # required
    tau         = 60                    # optional freshness window, seconds
    batch       = 4                     # optional bundles generated at setup

    [[fields]]                          # trigger schema, in wire order
    name = "Text"
    kind = "string"                     # bool | int32 | string
    length = 140                        # strings only
    optional = false
    samples = ["@", "http://"]          # optional fuzzing hints

    [[constants]]
    name = "c"
    kind = "string"                     # bool | int32 | string | map
    value = "boss@example.com"          # maps: an inline table of string pairs
    length = 22                         # optional padded width

    [rule]
    predicate = '! x[Text].startwith("@")'
    [rule.outputs]                      # order is output order
    text = "x[Text]"

Scenario grammar (``# etap-scenario v1``)::

    rule = "R1"            # shipped rule name or a path relative to the file
    seed = 7
    tau = 60               # optional override
    cover_traffic = false  # default: true when any fake_trigger event is present

    [[events]]
    type = "trigger"          # data = {field = value}; payload = "text"
    type = "fake_trigger"
    type = "tamper"           # target = Y|s_tilde|h_tilde|ct|j; bit = N; index = message index
    type = "replay"           # index = message index
    type = "advance_clock"    # seconds = N
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..funclib import ConstSpec, FieldSchema, SchemaError, TriggerSchema, compose_rule
from ..funclib.compile import CompiledRule
from ..protocol import DEFAULT_TAU

RULE_MAGIC = "# etap-rule v1"
SCENARIO_MAGIC = "# etap-scenario v1"
EVENT_TYPES = ("trigger", "fake_trigger", "tamper", "replay", "advance_clock")
TAMPER_TARGETS = ("Y", "s_tilde", "h_tilde", "ct", "j")


class ConfigError(ValueError):
    """A rule or scenario file does not parse or validate."""


class UnknownRule(KeyError):
    pass


@dataclass
class RuleConfig:
    name: str
    trigger_api: str
    action_api: str
    fields: list[FieldSchema]
    constants: list[ConstSpec]
    predicate: str
    outputs: list[tuple[str, str]]
    description: str = ""
    tau: float = DEFAULT_TAU
    batch: int = 1
    samples: dict[str, list[Any]] = field(default_factory=dict)
    source: str = ""

    @property
    def schema(self) -> TriggerSchema:
        return TriggerSchema(tuple(self.fields))

    def compile(self) -> CompiledRule:
        try:
            return compose_rule(self.predicate, self.outputs, self.schema, self.constants)
        except SchemaError as exc:
            raise ConfigError(f"rule {self.name!r}: {exc}") from exc


def _parse(text: str, magic: str, what: str) -> dict:
    first = text.lstrip("﻿").split("\n", 1)[0].strip()
    if first != magic:
        raise ConfigError(f"{what} must start with the line {magic!r}")
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _req(doc: dict, key: str, kind: type, what: str):
    if key not in doc:
        raise ConfigError(f"{what}: missing {key!r}")
    v = doc[key]
    if not isinstance(v, kind) or (kind is int and isinstance(v, bool)):
        raise ConfigError(f"{what}: {key!r} has the wrong type")
    return v


def parse_rule(text: str) -> RuleConfig:
    doc = _parse(text, RULE_MAGIC, "rule file")
    name = _req(doc, "name", str, "rule file")
    what = f"rule {name!r}"
    try:
        fields, samples = [], {}
        for f in doc.get("fields", []):
            fs = FieldSchema(_req(f, "name", str, what), _req(f, "kind", str, what),
                             int(f.get("length", 0)), bool(f.get("optional", False)))
            fields.append(fs)
            if "samples" in f:
                samples[fs.name] = list(f["samples"])
        consts = []
        for c in doc.get("constants", []):
            consts.append(ConstSpec(_req(c, "name", str, what), _req(c, "kind", str, what), c.get("value"),
                                    int(c.get("length", 0)), int(c.get("key_length", 0)),
                                    int(c.get("value_length", 0))))
    except SchemaError as exc:
        raise ConfigError(f"{what}: {exc}") from exc
    rule = _req(doc, "rule", dict, what)
    outputs = rule.get("outputs", {})
    if not isinstance(outputs, dict) or not all(isinstance(v, str) for v in outputs.values()):
        raise ConfigError(f"{what}: [rule.outputs] must map names to expressions")
    tau = doc.get("tau", DEFAULT_TAU)
    batch = doc.get("batch", 1)
    if not isinstance(tau, (int, float)) or tau <= 0:
        raise ConfigError(f"{what}: tau must be a positive number")
    if not isinstance(batch, int) or batch < 0:
        raise ConfigError(f"{what}: batch must be a non-negative integer")
    cfg = RuleConfig(name, _req(doc, "trigger_api", str, what), _req(doc, "action_api", str, what),
                     fields, consts, _req(rule, "predicate", str, what), list(outputs.items()),
                     doc.get("description", ""), float(tau), batch, samples, text)
    cfg.compile()  # surface expression errors at load time
    return cfg


def load_rule(path: str | Path) -> RuleConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_rule(text)


def shipped_rule_names() -> list[str]:
    files = resources.files("etap").joinpath("rules").iterdir()
    return sorted((p.name[:-5] for p in files if p.name.endswith(".toml")),
                  key=lambda n: (len(n), n))


def shipped_rule(name: str) -> RuleConfig:
    res = resources.files("etap").joinpath("rules", f"{name}.toml")
    if not res.is_file():
        raise UnknownRule(name)
    return parse_rule(res.read_text(encoding="utf-8"))


def resolve_rule(ref: str) -> RuleConfig:
    """A shipped rule name or a path to a rule file."""
    p = Path(ref)
    if p.suffix == ".toml" or p.exists():
        if not p.exists():
            raise UnknownRule(ref)
        return load_rule(p)
    return shipped_rule(ref)


@dataclass
class ScenarioScript:
    rule: RuleConfig
    seed: int
    events: list[dict]
    tau: float | None = None
    cover_traffic: bool = False


def parse_scenario(text: str, base: Path | None = None, rule: RuleConfig | None = None) -> ScenarioScript:
    """Parse a scenario; ``rule`` overrides the file's rule reference."""
    doc = _parse(text, SCENARIO_MAGIC, "scenario file")
    ref = _req(doc, "rule", str, "scenario")
    if rule is None:
        if base is not None and (base / ref).exists():
            ref = str(base / ref)
        rule = resolve_rule(ref)
    events = doc.get("events", [])
    produced = 0
    for i, ev in enumerate(events):
        what = f"scenario event {i}"
        kind = _req(ev, "type", str, what)
        if kind not in EVENT_TYPES:
            raise ConfigError(f"{what}: unknown type {kind!r}")
        if kind == "trigger":
            if not isinstance(ev.get("data", {}), dict):
                raise ConfigError(f"{what}: data must be a table")
            produced += 1
        elif kind == "fake_trigger":
            produced += 1
        elif kind == "tamper":
            if ev.get("target") not in TAMPER_TARGETS:
                raise ConfigError(f"{what}: target must be one of {', '.join(TAMPER_TARGETS)}")
            _req(ev, "bit", int, what)
        elif kind == "advance_clock":
            s = ev.get("seconds")
            if not isinstance(s, (int, float)) or s < 0:
                raise ConfigError(f"{what}: seconds must be a non-negative number")
        if kind in ("replay", "tamper") and "index" in ev:
            idx = ev["index"]
            if not isinstance(idx, int) or not 0 <= idx < produced:
                raise ConfigError(f"{what}: index {idx!r} does not refer to an earlier message")
        if kind == "replay" and "index" not in ev:
            raise ConfigError(f"{what}: missing 'index'")
    fakes = any(ev["type"] == "fake_trigger" for ev in events)
    tau = doc.get("tau")
    return ScenarioScript(rule, int(doc.get("seed", 0)), events,
                          float(tau) if tau is not None else None,
                          bool(doc.get("cover_traffic", fakes)))


def load_scenario(path: str | Path) -> ScenarioScript:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(text, p.parent)

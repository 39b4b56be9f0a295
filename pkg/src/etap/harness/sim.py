"""In-process four-party simulation with a logical clock and a transcript."""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Optional

from ..crypto import SYSTEM_RANDOM
from ..funclib.compile import CompiledRule
from ..protocol import (ActionMsg, ActionService, AsResult, Fired, GarbledBundle, NotFired, Reject, RuleKeys,
                        TriggerActionPlatform, TriggerMsg, TriggerService, TrustedClient,
                        decode_message, encode_message, setup_rule, ts_exec_fake)
from .config import RuleConfig
from .transport import InprocLink, Link

EPOCH = 1_700_000_000.0


class LogicalClock:
    def __init__(self, start: float = EPOCH):
        self.t = start

    def __call__(self) -> float:
        return self.t

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("the clock only moves forward")
        self.t += seconds


def result_name(r: AsResult) -> str:
    return type(r).__name__


@dataclass
class RuleState:
    config: RuleConfig
    compiled: CompiledRule
    issued: set[int] = field(default_factory=set)
    real_used: set[int] = field(default_factory=set)


@dataclass
class Execution:
    """One trigger event carried through TS, TAP and AS."""

    trigger: TriggerMsg
    action: Optional[ActionMsg]
    result: Optional[AsResult]
    outputs: Optional[dict[str, Any]] = None
    trigger_bytes: int = 0
    action_bytes: int = 0


def flip_bit(data: bytes, bit: int) -> bytes:
    if not data:
        return data
    bit %= 8 * len(data)
    out = bytearray(data)
    out[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(out)


def tamper(msg: ActionMsg, target: str, bit: int) -> ActionMsg:
    """Flip one bit of one field of an action message."""
    if target == "Y":
        flat = flip_bit(b"".join(msg.Y), bit)
        return replace(msg, Y=tuple(flat[i:i + 16] for i in range(0, len(flat), 16)))
    if target == "j":
        return replace(msg, j=msg.j ^ (1 << (bit % 32)))
    if target in ("s_tilde", "h_tilde", "ct"):
        return replace(msg, **{target: flip_bit(getattr(msg, target), bit)})
    raise ValueError(f"unknown tamper target {target!r}")


class Simulation:
    """TC, TS, TAP and AS wired together.  Every hop goes through ``link`` as
    wire bytes; with a seed the whole run is reproducible."""

    def __init__(self, seed: int | None = None, tau: float | None = None, link: Link | None = None,
                 cover_traffic: bool = False, capacity: int = 100_000):
        self.rng = random.Random(seed) if seed is not None else SYSTEM_RANDOM
        self.clock = LogicalClock()
        self.tau = tau
        self.link = link or InprocLink()
        self.cover_traffic = cover_traffic
        self.tc = TrustedClient(self.rng)
        self.ts = TriggerService(self.clock, self.rng)
        self.tap = TriggerActionPlatform(capacity, retain=cover_traffic)
        self.action = ActionService(self.clock)
        self.rules: dict[str, RuleState] = {}
        self.transcript: list[dict[str, Any]] = []
        self._as_tau: dict[str, float] = {}
        self.on_bundle: Optional[Callable[[str, GarbledBundle], None]] = None

    def add_rule(self, config: RuleConfig, compiled: CompiledRule | None = None,
                 batch: int | None = None) -> RuleState:
        compiled = compiled or config.compile()
        state = RuleState(config, compiled)
        self.rules[config.name] = state
        setup_rule(config.name, compiled, config.trigger_api, config.action_api,
                   tc=self.tc, ts=self.ts, tap=self.tap, action=self.action, batch=0)
        self._as_tau[config.name] = self.tau if self.tau is not None else config.tau
        self.generate(config.name, config.batch if batch is None else batch)
        return state

    def restore_rule(self, config: RuleConfig, compiled: CompiledRule, keys: RuleKeys, ts_j: int,
                     issued: Iterable[int] = (), real_used: Iterable[int] = ()) -> RuleState:
        """Re-create a rule from saved keys and counters (no new bundles)."""
        state = RuleState(config, compiled, set(issued), set(real_used))
        self.rules[config.name] = state
        self.tc.adopt_rule(config.name, compiled, config.trigger_api, config.action_api, keys)
        self.ts.register(config.name, keys.k_T, ts_j)
        self.action.register(config.name, keys.k_A)
        self.tap.register_rule(config.name, compiled.circuit)
        self._as_tau[config.name] = self.tau if self.tau is not None else config.tau
        return state

    def generate(self, name: str, count: int) -> list[GarbledBundle]:
        state = self.rules[name]
        out = []
        for bundle in self.tc.generate(name, count):
            data = self.link.deliver(encode_message(bundle))
            self.tap.upload(name, data)
            state.issued.add(bundle.j)
            out.append(bundle)
            if self.on_bundle is not None:
                self.on_bundle(name, bundle)
        return out

    def _ensure_bundle(self, name: str) -> None:
        # keep at least one circuit ahead of the trigger service
        if self.cover_traffic:
            state = self.rules[name]
            if not state.issued - state.real_used:
                self.generate(name, 1)
        elif self.tc.rules[name].keys.j <= self.ts.keys[name].j:
            self.generate(name, 1)

    def send_trigger(self, name: str, record: Mapping[str, Any], payload: bytes) -> TriggerMsg:
        state = self.rules[name]
        bits = state.compiled.trigger_bits(record)
        self._ensure_bundle(name)
        if self.cover_traffic:
            keys = self.ts.keys[name]
            return ts_exec_fake(keys, state.issued, state.real_used, name, self.clock(),
                                len(bits), self.rng, x_bits=bits, v=payload)
        return self.ts.send(name, bits, payload)

    def send_fake(self, name: str) -> TriggerMsg:
        state = self.rules[name]
        if not state.issued:
            self.generate(name, 1)
        return ts_exec_fake(self.ts.keys[name], state.issued, state.real_used, name, self.clock(),
                            state.compiled.circuit.n_trigger_bits, self.rng)

    def platform(self, name: str, msg: TriggerMsg) -> tuple[Optional[ActionMsg], int, int]:
        wire = self.link.deliver(encode_message(msg))
        received = decode_message(wire)
        action = self.tap.execute(name, received)
        if action is None:
            return None, len(wire), 0
        out = self.link.deliver(encode_message(action))
        return decode_message(out), len(wire), len(out)

    def deliver_action(self, name: str, msg: ActionMsg) -> AsResult:
        self.action.tau = self._as_tau[name]
        return self.action.execute(name, msg)

    def outputs_of(self, name: str, result: AsResult) -> Optional[dict[str, Any]]:
        if isinstance(result, Fired):
            return self.rules[name].compiled.decode_outputs(list(result.y))
        return None

    def execute(self, name: str, record: Mapping[str, Any], payload: bytes = b"") -> Execution:
        msg = self.send_trigger(name, record, payload)
        return self._run(name, msg)

    def execute_fake(self, name: str) -> Execution:
        return self._run(name, self.send_fake(name))

    def _run(self, name: str, msg: TriggerMsg) -> Execution:
        action, tb, ab = self.platform(name, msg)
        result = self.deliver_action(name, action) if action is not None else None
        outputs = self.outputs_of(name, result) if result is not None else None
        return Execution(msg, action, result, outputs, tb, ab)

    def record(self, entry: dict[str, Any]) -> None:
        entry["clock"] = self.clock()
        self.transcript.append(entry)


def describe(name: str, result: Optional[AsResult], outputs: Optional[dict[str, Any]],
             fired_payload: Optional[bytes]) -> dict[str, Any]:
    """Transcript view of an AS result: decoded data only when it fired."""
    if result is None:
        return {"result": "Dropped"}
    d: dict[str, Any] = {"result": result_name(result)}
    if isinstance(result, Reject):
        d["reason"] = result.reason
    if isinstance(result, Fired):
        d["outputs"] = {k: _jsonable(v) for k, v in (outputs or {}).items()}
        d["payload"] = _jsonable(fired_payload)
    return d


def _jsonable(v: Any) -> Any:
    if isinstance(v, bytes):
        try:
            return v.decode("utf-8")
        except UnicodeDecodeError:
            return {"hex": v.hex()}
    return v


__all__ = ["LogicalClock", "Simulation", "Execution", "RuleState", "tamper", "flip_bit", "describe",
           "result_name", "Fired", "NotFired", "Reject"]

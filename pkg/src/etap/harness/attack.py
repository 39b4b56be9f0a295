"""Mutation attacks on honest action messages.

Each honest run yields an action message whose correct outcome is known
from the plaintext baseline.  Mutations flip one or several bits across
Y, s~, h~, ct and j; every mutated message is checked against the result
it must produce:

* honest outcome Fired: any change other than to h~ alone must be rejected
  (h~ is only consulted when s~ does not open);
* honest outcome NotFired: changes that touch the predicate label, h~ or j
  must be rejected; anything else is still NotFired.

A Fired result with wrong output or payload, or a NotFired result whose
predicate label is not the garbler's false label, is a forgery.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from ..circuit import LABEL_BYTES
from ..crypto import xor_bytes
from ..protocol import ActionMsg, Fired, NotFired, Reject, as_exec, encoding_for
from .config import RuleConfig
from .fuzz import random_payload, random_record
from .plaintap import plaintap_baseline
from .sim import Simulation, result_name

TARGETS = ("Y", "s_tilde", "h_tilde", "ct", "j")


@dataclass
class AttackReport:
    rule: str
    runs: int = 0
    mutations: int = 0
    by_result: dict[str, int] = field(default_factory=lambda: {"Fired": 0, "NotFired": 0, "Reject": 0})
    forgeries: int = 0
    unexpected: int = 0
    examples: list[dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.forgeries == 0 and self.unexpected == 0

    def to_dict(self) -> dict[str, Any]:
        return {"rule": self.rule, "runs": self.runs, "mutations": self.mutations,
                "by_result": dict(self.by_result), "forgeries": self.forgeries,
                "unexpected": self.unexpected, "ok": self.ok, "examples": self.examples[:10]}


def _field_bits(msg: ActionMsg, target: str) -> int:
    if target == "Y":
        return 8 * LABEL_BYTES * len(msg.Y)
    if target == "j":
        return 32
    return 8 * len(getattr(msg, target))


def mutate(msg: ActionMsg, flips: list[tuple[str, int]]) -> ActionMsg:
    """Apply bit flips given as (target, bit index) pairs."""
    Y = bytearray(b"".join(msg.Y))
    fields = {"s_tilde": bytearray(msg.s_tilde), "h_tilde": bytearray(msg.h_tilde),
              "ct": bytearray(msg.ct)}
    j = msg.j
    for target, bit in flips:
        if target == "j":
            j ^= 1 << (31 - bit)
            continue
        buf = Y if target == "Y" else fields[target]
        buf[bit // 8] ^= 0x80 >> (bit % 8)
    labels = tuple(bytes(Y[i:i + LABEL_BYTES]) for i in range(0, len(Y), LABEL_BYTES))
    return replace(msg, j=j, Y=labels, s_tilde=bytes(fields["s_tilde"]),
                   h_tilde=bytes(fields["h_tilde"]), ct=bytes(fields["ct"]))


def expected_result(honest_fired: bool, flips: list[tuple[str, int]]) -> str:
    touched = {t for t, _ in flips}
    if honest_fired:
        return "Fired" if touched == {"h_tilde"} else "Reject"
    predicate_label = any(t == "Y" and b < 8 * LABEL_BYTES for t, b in flips)
    if predicate_label or touched & {"h_tilde", "j"}:
        return "Reject"
    return "NotFired"


def random_flips(rng: random.Random, msg: ActionMsg, count: int) -> list[tuple[str, int]]:
    """``count`` distinct bit positions; biased toward the predicate label."""
    chosen: set[tuple[str, int]] = set()
    while len(chosen) < count:
        target = rng.choice(TARGETS)
        n = _field_bits(msg, target)
        if target == "Y" and rng.random() < 0.3:
            n = 8 * LABEL_BYTES
        chosen.add((target, rng.randrange(n)))
    return sorted(chosen)


def attack_rule(config: RuleConfig, runs: int = 20, mutations_per_run: int = 100, seed: int = 0,
                multi_bit_share: float = 0.5, sim: Optional[Simulation] = None) -> AttackReport:
    rng = random.Random(seed)
    sim = sim or Simulation(seed)
    name = config.name
    if name not in sim.rules:
        sim.add_rule(config, batch=0)
    keys = sim.tc.rules[name].keys
    tau = sim.tau if sim.tau is not None else config.tau
    report = AttackReport(name)
    compiled = sim.rules[name].compiled
    for _ in range(runs):
        record = random_record(rng, config)
        payload = random_payload(rng)
        ex = sim.execute(name, record, payload)
        fired, outs = plaintap_baseline(compiled, record)
        honest = ex.action
        if honest is None or result_name(ex.result) != ("Fired" if fired else "NotFired"):
            report.unexpected += 1
            report.examples.append({"honest_run": result_name(ex.result), "expected": fired})
            continue
        report.runs += 1
        e, _ = encoding_for(keys.k_T, name, honest.j)
        w0_false = honest.Y[0] if not fired else xor_bytes(honest.Y[0], e.offset)
        true_y = ex.result.y if fired else None
        for _ in range(mutations_per_run):
            count = 1 if rng.random() >= multi_bit_share else rng.randint(2, 8)
            flips = random_flips(rng, honest, count)
            bad = mutate(honest, flips)
            res = as_exec(bad, sim.action.keys[name], tau, sim.clock())
            kind = result_name(res)
            report.mutations += 1
            report.by_result[kind] += 1
            forged = ((isinstance(res, Fired) and (res.y != true_y or res.v != payload))
                      or (isinstance(res, NotFired) and bad.Y[0] != w0_false))
            want = expected_result(fired, flips)
            if forged:
                report.forgeries += 1
            elif kind != want:
                report.unexpected += 1
            if forged or kind != want:
                report.examples.append({"j": honest.j, "flips": flips, "result": kind, "expected": want,
                                        "forgery": forged})
    return report


__all__ = ["AttackReport", "attack_rule", "mutate", "expected_result", "random_flips",
           "Fired", "NotFired", "Reject"]

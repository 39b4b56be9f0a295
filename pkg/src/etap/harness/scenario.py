"""Scripted runs: triggers, fake triggers, tampering, replays and clock moves."""
from __future__ import annotations

import hashlib
from typing import Any, Optional

from ..protocol import ActionMsg, encode_message
from .config import ScenarioScript
from .sim import Simulation, describe, tamper
from .transport import Link


def _digest(msg) -> str:
    return hashlib.sha256(encode_message(msg)).hexdigest()


def run_scenario(script: ScenarioScript, link: Link | None = None) -> list[dict[str, Any]]:
    """Execute every event and return the transcript.  Message bytes appear
    only as SHA-256 digests; decoded outputs only for Fired results."""
    sim = Simulation(script.seed, script.tau, link, cover_traffic=script.cover_traffic)
    cfg = script.rule
    name = cfg.name
    sim.add_rule(cfg)
    produced: list[Optional[ActionMsg]] = []
    for i, ev in enumerate(script.events):
        kind = ev["type"]
        entry: dict[str, Any] = {"event": i, "type": kind}
        if kind in ("trigger", "fake_trigger"):
            if kind == "trigger":
                data = dict(ev.get("data", {}))
                payload = ev.get("payload", "").encode("utf-8")
                ex = sim.execute(name, data, payload)
            else:
                ex = sim.execute_fake(name)
            produced.append(ex.action)
            entry.update(index=len(produced) - 1, j=ex.trigger.j, trigger=_digest(ex.trigger),
                         trigger_bytes=ex.trigger_bytes, action_bytes=ex.action_bytes)
            if ex.action is not None:
                entry["action"] = _digest(ex.action)
            fired_v = getattr(ex.result, "v", None)
            entry.update(describe(name, ex.result, ex.outputs, fired_v))
        elif kind in ("tamper", "replay"):
            idx = ev.get("index", len(produced) - 1)
            entry["index"] = idx
            msg = produced[idx] if 0 <= idx < len(produced) else None
            if msg is None:
                entry["result"] = "NoMessage"
            else:
                if kind == "tamper":
                    msg = tamper(msg, ev["target"], ev["bit"])
                    entry.update(target=ev["target"], bit=ev["bit"])
                entry["action"] = _digest(msg)
                res = sim.deliver_action(name, msg)
                entry.update(describe(name, res, sim.outputs_of(name, res), getattr(res, "v", None)))
        else:
            sim.clock.advance(float(ev["seconds"]))
            entry["seconds"] = ev["seconds"]
        sim.record(entry)
    return sim.transcript

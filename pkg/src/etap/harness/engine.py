"""Stateful facade over a simulation: what the service exposes.

With a state directory the engine survives restarts.  ``state.json`` holds
rule configs, keys, counters, the RNG and the logical clock; ``bundles.bin``
is an append-only log of every uploaded bundle, each record being
``len(4) || rule id || len(4) || bundle message``.
"""
from __future__ import annotations

import json
import random
import struct
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from ..funclib import SchemaError
from ..protocol import (GarbledBundle, RuleKeys, TriggerMsg, WireError, decode_message,
                        encode_message)
from .attack import attack_rule
from .bench import bench_micro, bench_run, day_batch, day_mix, plaintap_bench
from .config import (ConfigError, RuleConfig, UnknownRule, parse_rule, parse_scenario, resolve_rule,
                     shipped_rule, shipped_rule_names)
from .scenario import run_scenario
from .sim import Simulation, describe
from .transport import make_link

STATE_FILE = "state.json"
BUNDLE_LOG = "bundles.bin"


class MalformedData(ValueError):
    """Trigger data or a raw message could not be parsed."""


def _coerce_record(record: Any) -> dict[str, Any]:
    if not isinstance(record, Mapping):
        raise MalformedData("trigger data must be an object of field values")
    out = {}
    for k, v in record.items():
        if not isinstance(v, (str, int, bool, type(None))):
            raise MalformedData(f"field {k!r}: unsupported value type {type(v).__name__}")
        out[str(k)] = v
    return {k: v for k, v in out.items() if v is not None}


class Engine:
    def __init__(self, seed: int | None = None, tau: float | None = None, transport: str = "inproc",
                 state_dir: str | Path | None = None):
        self.seed = seed
        self.tau = tau
        self.transport = transport
        self.state_dir = Path(state_dir) if state_dir else None
        self.sim = Simulation(seed, tau, make_link(transport))
        self.sources: dict[str, str] = {}
        self.sim.on_bundle = lambda name, b: self._log_bundles(name, [b])
        if self.state_dir and (self.state_dir / STATE_FILE).exists():
            self._load()

    def close(self) -> None:
        self.sim.link.close()

    # rules

    def add_rule(self, config: RuleConfig, batch: int | None = None) -> dict[str, Any]:
        if config.name in self.sim.rules:
            raise ConfigError(f"rule {config.name!r} already exists")
        self.sim.add_rule(config, batch=0)
        self.sources[config.name] = config.source
        self.generate(config.name, config.batch if batch is None else batch, save=False)
        self.save()
        return self.rule_info(config.name)

    def add_rule_text(self, text: str, batch: int | None = None) -> dict[str, Any]:
        return self.add_rule(parse_rule(text), batch)

    def ensure_rule(self, ref: str) -> str:
        """Name of a set-up rule; shipped rules and rule files are set up on demand."""
        if ref in self.sim.rules:
            return ref
        try:
            cfg = resolve_rule(ref)
        except UnknownRule:
            raise UnknownRule(ref) from None
        if cfg.name not in self.sim.rules:
            self.add_rule(cfg)
        return cfg.name

    def config_of(self, ref: str) -> RuleConfig:
        if ref in self.sim.rules:
            return self.sim.rules[ref].config
        return resolve_rule(ref)

    def rule_info(self, name: str) -> dict[str, Any]:
        if name not in self.sim.rules:
            raise UnknownRule(name)
        st = self.sim.rules[name]
        c = st.compiled.circuit
        return {
            "name": name, "description": st.config.description,
            "trigger_api": st.config.trigger_api, "action_api": st.config.action_api,
            "fields": [{"name": f.name, "kind": f.kind, "length": f.length, "optional": f.optional}
                       for f in st.config.fields],
            "outputs": [o.name for o in st.compiled.outputs],
            "and_gates": c.and_count, "gc_bytes": c.stats().estimated_gc_bytes,
            "trigger_bits": c.n_trigger_bits, "constant_bits": c.n_const_bits,
            "next_circuit_id": self.sim.tc.rules[name].keys.j,
            "pending": self.sim.tap.store.pending(name),
        }

    def list_rules(self) -> dict[str, Any]:
        return {"rules": sorted(self.sim.rules), "shipped": shipped_rule_names()}

    # execution

    def generate(self, name: str, count: int, save: bool = True) -> dict[str, Any]:
        if name not in self.sim.rules:
            raise UnknownRule(name)
        if count < 0:
            raise MalformedData("count must be non-negative")
        bundles = self.sim.generate(name, count)
        if save:
            self.save()
        size = sum(len(encode_message(b)) for b in bundles)
        return {"rule": name, "count": len(bundles),
                "first_j": bundles[0].j if bundles else None,
                "last_j": bundles[-1].j if bundles else None, "bytes": size}

    def trigger(self, name: str, record: Any, payload: bytes = b"") -> dict[str, Any]:
        if name not in self.sim.rules:
            raise UnknownRule(name)
        record = _coerce_record(record)
        st = self.sim.rules[name]
        st.compiled.trigger_bits(record)  # schema errors before any state changes
        ex = self.sim.execute(name, record, payload)
        self.save()
        out = {"rule": name, "j": ex.trigger.j, "trigger_bytes": ex.trigger_bytes,
               "action_bytes": ex.action_bytes}
        out.update(describe(name, ex.result, ex.outputs, getattr(ex.result, "v", None)))
        return out

    def circuit_id(self, name: str) -> dict[str, Any]:
        if name not in self.sim.rules:
            raise UnknownRule(name)
        j = self.sim.tc.sync_circuit_id(name, self.sim.tap)
        return {"rule": name, "j": j}

    def tap_upload(self, name: str, data: bytes) -> dict[str, Any]:
        if name not in self.sim.rules:
            raise UnknownRule(name)
        try:
            bundle = decode_message(data, self.sim.rules[name].compiled.circuit)
        except WireError as exc:
            raise MalformedData(str(exc)) from exc
        if not isinstance(bundle, GarbledBundle):
            raise MalformedData("expected a bundle message")
        self.sim.tap.upload(name, bundle)
        self.sim.rules[name].issued.add(bundle.j)
        self._log_bundles(name, [bundle])
        self.save()
        return {"rule": name, "j": bundle.j}

    def tap_trigger(self, name: str, data: bytes) -> Optional[bytes]:
        if name not in self.sim.rules:
            raise UnknownRule(name)
        try:
            msg = decode_message(data)
        except WireError as exc:
            raise MalformedData(str(exc)) from exc
        if not isinstance(msg, TriggerMsg):
            raise MalformedData("expected a trigger message")
        action = self.sim.tap.execute(name, msg)
        self.save()
        return None if action is None else encode_message(action)

    # harness runs

    def run_scenario(self, text: str, rule_text: str | None = None,
                     base_dir: str | None = None) -> list[dict[str, Any]]:
        rule = parse_rule(rule_text) if rule_text else None
        script = parse_scenario(text, Path(base_dir) if base_dir else None, rule)
        if self.tau is not None and script.tau is None:
            script.tau = self.tau
        link = make_link(self.transport)
        try:
            return run_scenario(script, link)
        finally:
            link.close()

    def attack_suite(self, ref: str, runs: int = 20, mutations: int = 100) -> dict[str, Any]:
        cfg = self.config_of(ref)
        seed = self.seed if self.seed is not None else random.SystemRandom().randrange(2**32)
        report = attack_rule(cfg, runs, mutations, seed, sim=Simulation(seed, self.tau))
        return report.to_dict()

    def bench(self, refs: Sequence[str], iterations: int = 5, micro: bool = False,
              day: bool = False) -> dict[str, Any]:
        seed = self.seed or 0
        out: dict[str, Any] = {}
        if refs:
            out["rules"] = bench_run([self.config_of(r) for r in refs], iterations, seed=seed).to_dict()["rules"]
        if micro:
            out["micro"] = bench_micro(iterations, seed=seed).to_dict()["rules"]
        if day:
            shipped = {n: shipped_rule(n) for n in ("R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8")}
            out["day"] = day_batch(day_mix(shipped), seed=seed).to_dict()
        return out

    def plaintap_bench(self, refs: Sequence[str], iterations: int = 100) -> list[dict[str, Any]]:
        return plaintap_bench([self.config_of(r) for r in refs], iterations, self.seed or 0)

    # persistence

    def _log_bundles(self, name: str, bundles: Sequence[GarbledBundle]) -> None:
        if not self.state_dir or not bundles:
            return
        self.state_dir.mkdir(parents=True, exist_ok=True)
        rid = name.encode("utf-8")
        with open(self.state_dir / BUNDLE_LOG, "ab") as fh:
            for b in bundles:
                msg = encode_message(b)
                fh.write(struct.pack(">I", len(rid)) + rid + struct.pack(">I", len(msg)) + msg)

    def save(self) -> None:
        if not self.state_dir:
            return
        self.state_dir.mkdir(parents=True, exist_ok=True)
        sim = self.sim
        rules = {}
        for name, st in sim.rules.items():
            keys = sim.tc.rules[name].keys
            rules[name] = {
                "config": self.sources.get(name, ""),
                "k_T": keys.k_T.hex(), "k_A": keys.k_A.hex(), "tc_j": keys.j,
                "ts_j": sim.ts.keys[name].j,
                "issued": sorted(st.issued), "real_used": sorted(st.real_used),
                "consumed": sim.tap.store.consumed(name),
                "sync": [sim.tap.sync[name][0], sim.tap.sync[name][1].hex()] if name in sim.tap.sync else None,
                "verified": list(sim.tc.verified[name]) if name in sim.tc.verified else None,
            }
        rng = sim.rng.getstate() if isinstance(sim.rng, random.Random) else None
        state = {"version": 1, "seed": self.seed, "tau": self.tau, "clock": sim.clock.t,
                 "rng": [rng[0], list(rng[1]), rng[2]] if rng else None, "rules": rules}
        tmp = self.state_dir / (STATE_FILE + ".tmp")
        tmp.write_text(json.dumps(state, indent=1))
        tmp.replace(self.state_dir / STATE_FILE)

    def _load(self) -> None:
        try:
            state = json.loads((self.state_dir / STATE_FILE).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"unreadable state in {self.state_dir}: {exc}") from exc
        sim = self.sim
        if state.get("rng") and isinstance(sim.rng, random.Random):
            v, internal, gauss = state["rng"]
            sim.rng.setstate((v, tuple(internal), gauss))
        sim.clock.t = state.get("clock", sim.clock.t)
        for name, r in state.get("rules", {}).items():
            cfg = parse_rule(r["config"])
            compiled = cfg.compile()
            keys = RuleKeys(bytes.fromhex(r["k_T"]), bytes.fromhex(r["k_A"]), r["tc_j"])
            sim.restore_rule(cfg, compiled, keys, r["ts_j"], r["issued"], r["real_used"])
            self.sources[name] = r["config"]
            for j in r["consumed"]:
                sim.tap.store.mark_consumed(name, j)
            if r.get("sync"):
                sim.tap.sync[name] = (r["sync"][0], bytes.fromhex(r["sync"][1]))
            if r.get("verified"):
                sim.tc.verified[name] = tuple(r["verified"])
        log = self.state_dir / BUNDLE_LOG
        if log.exists():
            data = log.read_bytes()
            pos = 0
            while pos < len(data):
                (n,) = struct.unpack_from(">I", data, pos)
                name = data[pos + 4:pos + 4 + n].decode("utf-8")
                pos += 4 + n
                (m,) = struct.unpack_from(">I", data, pos)
                msg = data[pos + 4:pos + 4 + m]
                pos += 4 + m
                if name in sim.rules:
                    bundle = decode_message(msg, sim.rules[name].compiled.circuit)
                    if bundle.j not in sim.tap.store.consumed(name):
                        sim.tap.upload(name, bundle)


__all__ = ["Engine", "MalformedData", "ConfigError", "UnknownRule", "SchemaError"]

"""Desk-scale benchmarks: per-party timings, circuit sizes, and a day's batch."""
from __future__ import annotations

import random
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional, Sequence

from ..funclib import ConstSpec, FieldSchema, TriggerSchema, compose_rule
from ..funclib.compile import CompiledRule
from ..protocol import encode_message
from .config import RuleConfig
from .fuzz import random_payload, random_record
from .plaintap import plaintap_baseline
from .sim import Simulation

TOLERANCE = 0.5
STEP_TARGET_MS = 50.0
STEP_CEILING_MS = 500.0

# Published garbled-circuit sizes (KB) used as comparison targets.
REFERENCE_RULE_KB = {"R1": 0.2, "R2": 1.0, "R3": 1.0, "R4": 5.8, "R5": 9.0, "R6": 30.5,
                     "R7": 92.4, "R8": 173.4, "R9": 4668.9, "R10": 12.1}
REFERENCE_MICRO_KB = {"x & y": 0.03, "x > n": 0.96, "x * n": 31, "x == t": 25, "m.lookup(x)": 31,
                      "x.split(d,0)": 78, "x.contain(s)": 123, "x.replace(s,\"\")": 278,
                      "x.extract_phone()": 2191}
REFERENCE_DAY_MB = 61.7
DAY_BUNDLES = 2496


def within(measured: float, reference: float, tol: float = TOLERANCE) -> bool:
    return abs(measured - reference) <= tol * reference


@dataclass
class StepTimes:
    tc_ms: float
    ts_ms: float
    tap_ms: float
    as_ms: float
    plaintap_ms: float

    def slowest(self) -> float:
        return max(self.tc_ms, self.ts_ms, self.tap_ms, self.as_ms)


@dataclass
class RuleBench:
    name: str
    and_count: int
    gc_bytes: int
    bundle_bytes: int
    trigger_hop_bytes: int
    action_hop_bytes: int
    median: StepTimes
    reference_kb: Optional[float] = None
    size_ok: Optional[bool] = None
    under_target: bool = True
    under_ceiling: bool = True

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class BenchReport:
    rules: list[RuleBench] = field(default_factory=list)
    iterations: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"iterations": self.iterations, "rules": [r.to_dict() for r in self.rules]}


def _ms(f: Callable[[], Any]) -> tuple[Any, float]:
    t = time.perf_counter()
    out = f()
    return out, 1000 * (time.perf_counter() - t)


def _median(rows: list[StepTimes]) -> StepTimes:
    return StepTimes(*(statistics.median(getattr(r, k) for r in rows)
                       for k in ("tc_ms", "ts_ms", "tap_ms", "as_ms", "plaintap_ms")))


def bench_compiled(name: str, compiled: CompiledRule, make_input: Callable[[random.Random], dict],
                   iterations: int = 5, warmup: int = 1, seed: int = 0,
                   reference_kb: Optional[float] = None, config: Optional[RuleConfig] = None) -> RuleBench:
    """Median per-party time over ``iterations`` runs (after ``warmup``)."""
    cfg = config or RuleConfig(name, f"bench/{name}/trigger", f"bench/{name}/action",
                               list(compiled.schema.fields), list(compiled.constants.values()),
                               "true", [], batch=0)
    sim = Simulation(seed)
    sim.add_rule(cfg, compiled, batch=0)
    rng = random.Random(seed)
    rows: list[StepTimes] = []
    sizes = (0, 0, 0)
    for it in range(warmup + iterations):
        record = make_input(rng)
        payload = random_payload(rng, 32)
        bundle, tc = _ms(lambda: sim.tc.garble_next(name))
        sim.tap.upload(name, bundle)
        msg, ts = _ms(lambda: sim.ts.send(name, compiled.trigger_bits(record), payload))
        action, tap = _ms(lambda: sim.tap.execute(name, msg))
        _, as_ = _ms(lambda: sim.outputs_of(name, sim.deliver_action(name, action)))
        _, plain = _ms(lambda: plaintap_baseline(compiled, record))
        if it >= warmup:
            rows.append(StepTimes(tc, ts, tap, as_, plain))
        sizes = (len(encode_message(bundle)), len(encode_message(msg)), len(encode_message(action)))
    med = _median(rows)
    gc_bytes = len(bundle.F)
    return RuleBench(name, compiled.circuit.and_count, gc_bytes, *sizes, med,
                     reference_kb, None if reference_kb is None else within(gc_bytes / 1000, reference_kb),
                     med.slowest() < STEP_TARGET_MS, med.slowest() < STEP_CEILING_MS)


def bench_run(configs: Sequence[RuleConfig], iterations: int = 5, warmup: int = 1,
              seed: int = 0) -> BenchReport:
    report = BenchReport(iterations=iterations)
    for cfg in configs:
        compiled = cfg.compile()
        report.rules.append(bench_compiled(cfg.name, compiled, lambda rng, c=cfg: random_record(rng, c),
                                           iterations, warmup, seed, REFERENCE_RULE_KB.get(cfg.name), cfg))
    return report


def _text(rng: random.Random, n: int, alphabet: bytes = b"abcdefghij klmnop0123456789-.") -> bytes:
    return bytes(rng.choice(alphabet) for _ in range(n))


def micro_rules() -> list[tuple[str, CompiledRule, Callable[[random.Random], dict]]]:
    """The basic operations at their standard sizes: 32-bit integers,
    100-character strings, a 10-entry map of 10-character keys and values,
    4-character search strings."""
    S = lambda *f: TriggerSchema(tuple(f))  # noqa: E731
    s100 = FieldSchema("X", "string", 100)
    s10 = FieldSchema("X", "string", 10)
    i32 = FieldSchema("X", "int32")
    rnd_int = lambda r: {"X": r.randint(-2**31, 2**31 - 1)}  # noqa: E731
    rnd_100 = lambda r: {"X": _text(r, r.randint(0, 100))}  # noqa: E731
    keys = [f"key{i:07d}".encode() for i in range(10)]
    table = ConstSpec("m", "map", {k: f"value{i:05d}".encode() for i, k in enumerate(keys)})
    out = [
        ("x & y", compose_rule("x[X] & x[Y]", {}, S(FieldSchema("X", "bool"), FieldSchema("Y", "bool"))),
         lambda r: {"X": r.random() < 0.5, "Y": r.random() < 0.5}),
        ("x > n", compose_rule("x[X] > n", {}, S(i32), [ConstSpec("n", "int32", 5000)]), rnd_int),
        ("x * n", compose_rule("true", {"y": "x[X] * n"}, S(i32), [ConstSpec("n", "int32", 77)]), rnd_int),
        ("x == t", compose_rule("x[X] == t", {}, S(s100), [ConstSpec("t", "string", b"a" * 100)]), rnd_100),
        ("m.lookup(x)", compose_rule("true", {"y": "m.lookup(x[X])"}, S(s10), [table]),
         lambda r: {"X": r.choice(keys + [b"missing"])}),
        ("x.split(d,0)", compose_rule("true", {"y": 'x[X].split(" ", 0)'}, S(s100)), rnd_100),
        ("x.contain(s)", compose_rule('x[X].contain("http")', {}, S(s100)), rnd_100),
        ('x.replace(s,"")', compose_rule("true", {"y": 'x[X].replace("http")'}, S(s100)), rnd_100),
        ("x.extract_phone()", compose_rule("true", {"y": "x[X].extract_phone()"}, S(s100)), rnd_100),
    ]
    return out


def bench_micro(iterations: int = 3, warmup: int = 1, seed: int = 0) -> BenchReport:
    report = BenchReport(iterations=iterations)
    for label, compiled, gen in micro_rules():
        report.rules.append(bench_compiled(label, compiled, gen, iterations, warmup, seed,
                                           REFERENCE_MICRO_KB[label]))
    return report


def plaintap_bench(configs: Sequence[RuleConfig], iterations: int = 100, seed: int = 0) -> list[dict[str, Any]]:
    rows = []
    for cfg in configs:
        compiled = cfg.compile()
        rng = random.Random(seed)
        times = []
        for _ in range(iterations):
            record = random_record(rng, cfg)
            _, t = _ms(lambda: plaintap_baseline(compiled, record))
            times.append(t)
        rows.append({"rule": cfg.name, "median_ms": statistics.median(times), "iterations": iterations})
    return rows


def passthrough_rule(name: str = "passthrough") -> RuleConfig:
    """A rule with no computation: the trigger payload is the whole action."""
    return RuleConfig(name, f"{name}/trigger", f"{name}/action", [], [], "true", [], batch=0)


@dataclass
class DayBatch:
    bundles: int
    seconds: float
    total_bytes: int
    gc_bytes: int
    rules_per_day: int
    runs_per_day: int

    @property
    def total_mb(self) -> float:
        return self.total_bytes / 1e6

    @property
    def size_ok(self) -> bool:
        return within(self.total_mb, REFERENCE_DAY_MB)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d.update(total_mb=self.total_mb, gc_mb=self.gc_bytes / 1e6, reference_mb=REFERENCE_DAY_MB,
                 size_ok=self.size_ok)
        return d


def day_mix(shipped: dict[str, RuleConfig]) -> list[RuleConfig]:
    """An average user's rules: R1-R8 twice each plus ten rules with no
    computation, 26 in all."""
    mix = []
    for k in range(2):
        for n in ("R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8"):
            cfg = shipped[n]
            mix.append(RuleConfig(f"{n}#{k}", cfg.trigger_api + f"#{k}", cfg.action_api, cfg.fields,
                                  cfg.constants, cfg.predicate, cfg.outputs, batch=0))
    mix += [passthrough_rule(f"passthrough#{i}") for i in range(10)]
    return mix


def day_batch(rules: Sequence[RuleConfig], runs_per_day: int = 96, seed: int = 0,
              total: int = DAY_BUNDLES) -> DayBatch:
    """Generate and serialize ``total`` bundles spread across ``rules``."""
    sim = Simulation(seed)
    for cfg in rules:
        sim.add_rule(cfg, batch=0)
    names = [cfg.name for cfg in rules]
    start = time.perf_counter()
    size = gc = made = 0
    while made < total:
        for name in names:
            if made == total:
                break
            bundle = sim.tc.garble_next(name)
            size += len(encode_message(bundle))
            gc += len(bundle.F)
            made += 1
    return DayBatch(made, time.perf_counter() - start, size, gc, len(rules), runs_per_day)

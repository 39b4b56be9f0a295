"""Acceptance criteria 1-10.

Each test is named test_criterion_<n>; tests/conftest.py prints one PASS/FAIL
line per criterion at the end of the run.  Run just this file with

    pytest tests/test_acceptance.py -v
"""
import random
import time

import pytest

from etap.circuit import CircuitBuilder, GateKind
from etap.crypto import DecryptionError, aead_decrypt, derive_encoding, xor_bytes
from etap.funclib import FieldSchema, TriggerSchema, compose_rule
from etap.funclib.ops import contain_dfa, endwith_dfa, split_dfa
from etap.garble import EncodingInfo, encode, evaluate, garble
from etap.harness.attack import attack_rule
from etap.harness.bench import (REFERENCE_MICRO_KB, STEP_CEILING_MS, STEP_TARGET_MS, bench_compiled,
                                bench_micro, day_batch, day_mix, micro_rules, within)
from etap.harness.config import load_scenario, parse_scenario, shipped_rule
from etap.harness.fuzz import random_payload, random_record
from etap.harness.plaintap import plaintap_baseline
from etap.harness.scenario import run_scenario
from etap.harness.sim import Simulation
from etap.protocol import Fired, NotFired, Reject
from etap.regex import compile_pattern, compile_regex, dfa_to_match_circuit

RULES = ("R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8")
SCENARIOS = __import__("etap").__path__[0] + "/scenarios"


# 1 ---------------------------------------------------------------------------

def test_criterion_1(note):
    start = time.perf_counter()
    sim = Simulation(seed=101)
    rng = random.Random(202)
    mismatches = []
    fired = {}
    for name in RULES:
        cfg = shipped_rule(name)
        compiled = sim.add_rule(cfg, batch=0).compiled
        fired[name] = 0
        for _ in range(1000):
            record = random_record(rng, cfg)
            payload = random_payload(rng)
            ex = sim.execute(name, record, payload)
            want_fired, want_out = plaintap_baseline(compiled, record)
            if want_fired:
                ok = isinstance(ex.result, Fired) and ex.outputs == want_out and ex.result.v == payload
                fired[name] += 1
            else:
                ok = isinstance(ex.result, NotFired)
            if not ok:
                mismatches.append((name, record, ex.result, ex.outputs, want_out))
    elapsed = time.perf_counter() - start
    note(1, f"8000 runs, {len(mismatches)} mismatches, {elapsed:.0f} s; fired per rule {fired}")
    assert not mismatches, mismatches[:3]
    # rules with a real predicate must see both outcomes
    gated = [n for n in RULES if shipped_rule(n).predicate.strip() != "true"]
    assert all(0 < fired[n] < 1000 for n in gated), "fuzzing must exercise both outcomes"
    assert elapsed < 300


# 2 ---------------------------------------------------------------------------

@pytest.mark.parametrize("label", ["x > n", "x * n", "x == t", "m.lookup(x)"])
def test_criterion_2(label, note):
    compiled, gen = next((c, g) for lab, c, g in micro_rules() if lab == label)
    r = bench_compiled(label, compiled, gen, iterations=1, warmup=0)
    estimated = compiled.circuit.stats().estimated_gc_bytes
    kb = r.gc_bytes / 1000
    ref = REFERENCE_MICRO_KB[label]
    note(2, f"{label:<12} {kb:6.2f} KB (reference {ref} KB, {100 * (kb / ref - 1):+.0f}%)")
    assert estimated == r.gc_bytes
    assert within(kb, ref), f"{label}: {kb:.2f} KB vs {ref} KB"


# 3 ---------------------------------------------------------------------------

PATTERN_CORPUS = [
    "http", r"\$request", "mp4|avi|mov", "boss@example.com", "a+b", "(ab|cd)*e",
    r"\d{3}-\d{4}", "[A-Za-z]+", r"\w+@\w+\.com", "x?y?z",
]


def _corpus_dfas():
    from etap.funclib.ops import EMAIL_PATTERN, PHONE_PATTERN
    for p in PATTERN_CORPUS:
        yield f"{p} (exact)", compile_regex(p)
        yield f"{p} (contain)", contain_dfa(p)
        yield f"{p} (endwith)", endwith_dfa(p)
    for p in (PHONE_PATTERN, EMAIL_PATTERN, "http"):
        cp = compile_pattern(p)
        yield f"{p[:16]} (search)", cp.forward
        yield f"{p[:16]} (reverse search)", cp.backward
        yield f"{p[:16]} (delimited)", compile_pattern(p, boundary=True).forward
    for d in b" ,/":
        for i in range(3):
            yield f"split {chr(d)!r} {i}", split_dfa(d, i)


def test_criterion_3(note):
    checked = 0
    worst = 0.0
    for label, dfa in _corpus_dfas():
        for chars in (1, 4, 16, 40):
            n = 8 * chars
            ands = dfa_to_match_circuit(dfa, n).and_count
            assert ands <= n * dfa.q, f"{label}: {ands} AND gates > {n} * {dfa.q}"
            worst = max(worst, ands / (n * dfa.q))
            checked += 1
    note(3, f"{checked} match circuits, largest and_count / (n*q) = {worst:.3f}")


# 4 ---------------------------------------------------------------------------

def _random_circuit(rng: random.Random):
    b = CircuitBuilder()
    n_in = rng.randint(1, 24)
    wires = list(b.add_input(n_in, "trigger"))
    for _ in range(rng.randint(1, 400)):
        kind = rng.choice((GateKind.XOR, GateKind.AND, GateKind.NOT))
        a = rng.choice(wires)
        w = b.add_gate(kind, a) if kind == GateKind.NOT else b.add_gate(kind, a, rng.choice(wires))
        wires.append(w)
    return b.build(wires)  # every wire is an output, so evaluation exposes every label


def test_criterion_4(note):
    rng = random.Random(4)
    wires = 0
    for i in range(100):
        circuit = _random_circuit(rng)
        e = EncodingInfo.from_material(derive_encoding(rng.randbytes(16), i))
        res = garble(e, circuit, debug=True, check_free_xor=True)
        assert res.checked_wires == circuit.n_wires
        # independent check on the active labels of one random input
        x = [rng.randint(0, 1) for _ in range(circuit.n_trigger_bits)]
        active = evaluate(res.F, encode(e, x, 0))
        offset = e.offset_int
        for w, value, label in zip(circuit.outputs, circuit.eval(x), active):
            assert int.from_bytes(label, "big") == res.wire_labels[w] ^ (offset if value else 0)
        wires += circuit.n_wires
    note(4, f"100 circuits, {wires} wires, all satisfy L1 = L0 xor offset")


# 5 ---------------------------------------------------------------------------

def test_criterion_5(note):
    start = time.perf_counter()
    total = forgeries = unexpected = 0
    for i, name in enumerate(RULES):
        r = attack_rule(shipped_rule(name), runs=25, mutations_per_run=500, seed=500 + i)
        total += r.mutations
        forgeries += r.forgeries
        unexpected += r.unexpected
        assert r.forgeries == 0, r.examples[:3]
        assert r.unexpected == 0, r.examples[:3]
    elapsed = time.perf_counter() - start
    note(5, f"{total} mutations, {forgeries} forgeries, {unexpected} unexpected, {elapsed:.0f} s")
    assert total >= 100_000
    assert elapsed < 600


# 6 ---------------------------------------------------------------------------

def test_criterion_6(note):
    script = load_scenario(f"{SCENARIOS}/freshness.toml")
    assert len(script.events) == 20
    tau = script.tau if script.tau is not None else script.rule.tau
    transcript = run_scenario(script)
    origin: dict[int, tuple[float, str]] = {}
    seen = {"stale": 0, "fresh replay": 0, "false replay": 0, "tamper": 0}
    for entry in transcript:
        kind = entry["type"]
        if kind == "trigger":
            origin[entry["index"]] = (entry["clock"], entry["result"])
        elif kind == "replay":
            created, first = origin[entry["index"]]
            age = entry["clock"] - created
            if first == "NotFired":
                assert entry["result"] == "NotFired", entry
                seen["false replay"] += 1
            elif age > tau:
                assert entry["result"] == "Reject", entry
                seen["stale"] += 1
            else:
                assert entry["result"] == "Fired", entry
                seen["fresh replay"] += 1
        elif kind == "tamper":
            assert entry["result"] != "Fired", entry
            seen["tamper"] += 1
    assert all(seen.values()), seen

    # every delay around the window for both outcomes
    sim = Simulation(seed=6, tau=tau)
    cfg = shipped_rule("R2")
    sim.add_rule(cfg, batch=0)
    held = []
    for count in (6000, 100, 5001, 5000):
        ex = sim.execute("R2", {"FollowerCount": count}, b"v")
        held.append((sim.clock(), count > 5000, ex.action))
    for delay in (0, tau / 2, tau, tau + 0.001, tau + 1, 10 * tau):
        sim.clock.advance(max(0.0, held[0][0] + delay - sim.clock()))
        for created, true_outcome, msg in held:
            res = sim.deliver_action("R2", msg)
            age = sim.clock() - created
            if not true_outcome:
                assert isinstance(res, NotFired)
            elif age > tau:
                assert res == Reject("stale") and res.reason == "stale"
            else:
                assert isinstance(res, Fired)
    note(6, f"scenario: {seen}; delay sweep of 4 messages over 6 delays")


# 7 ---------------------------------------------------------------------------

def _gen(alphabet: bytes, hints: list[bytes], n: int):
    def make(rng: random.Random) -> bytes:
        s = bytes(rng.choice(alphabet) for _ in range(rng.randint(0, n)))
        if hints and rng.random() < 0.6:
            h = rng.choice(hints)
            at = rng.randint(0, len(s))
            s = s[:at] + h + s[at:]
        if rng.random() < 0.2:  # mutate one byte of a near-match
            s = bytearray(s)
            if s:
                s[rng.randrange(len(s))] = rng.choice(alphabet)
            s = bytes(s)
        return s[:n]
    return make


REGEX_CASES = [
    ("phone", None, "x[T].extract_phone()", 32,
     _gen(b"0123456789 .-()+ab", [b"555-123-4567", b"(555) 123-4567", b"+1 555.123.4567",
                                  b"5551234567", b"555 123-4567"], 32)),
    ("email", None, "x[T].extract_email()", 32,
     _gen(b"abz09._%+-@ .", [b"ann@ex.com", b"a.b@c-d.org", b"x+y@mail.co.uk", b"bad@x"], 32)),
    ("contain http", 'x[T].contain("http")', None, 32, _gen(b"htpsx :/", [b"http", b"https://"], 32)),
    ("replace http", None, 'x[T].replace("http")', 32, _gen(b"htpsx :/", [b"http", b"hhttp"], 32)),
    ("startwith $request", 'x[T].startwith("$request")', None, 16,
     _gen(b"$requst x", [b"$request", b"$reques"], 16)),
    ("replace $request", None, r'x[T].replace("\$request")', 16,
     _gen(b"$requst x", [b"$request", b"$request$request"], 16)),
    ("endwith video", 'x[T].endwith("mp4|avi|mov")', None, 16,
     _gen(b"amp4vio.", [b".mp4", b"mov", b".avi"], 16)),
    ("split space 0", None, 'x[T].split(" ", 0)', 24, _gen(b"ab  c", [], 24)),
    ("split space 1", None, 'x[T].split(" ", 1)', 24, _gen(b"ab  c", [], 24)),
    ("split comma 2", None, 'x[T].split(",", 2)', 24, _gen(b"ab,,c ", [], 24)),
]


@pytest.mark.parametrize("case", REGEX_CASES, ids=[c[0] for c in REGEX_CASES])
def test_criterion_7(case, note):
    label, pred, out, n, make = case
    schema = TriggerSchema((FieldSchema("T", "string", n),))
    rule = compose_rule(pred or "true", {"y": out} if out else {}, schema)
    rng = random.Random(label)
    strings = [make(rng) for _ in range(10_000)]
    rows = rule.circuit.eval_batch([rule.trigger_bits({"T": s}) for s in strings],
                                   [rule.const_bits()] * len(strings))
    bad = []
    hits = 0
    for s, bits in zip(strings, rows):
        got = (bool(bits[0]), rule.decode_outputs(bits[1:]))
        want = plaintap_baseline(rule, {"T": s})
        hits += bool(want[0]) if pred else bool(want[1]["y"]) and want[1]["y"] != s
        if got != want:
            bad.append((s, got, want))
    note(7, f"{label:<20} 10000 strings, {len(bad)} mismatches, {hits} non-trivial results")
    assert not bad, bad[:3]
    assert hits > 100


# 8 ---------------------------------------------------------------------------

def test_criterion_8(note):
    rng = random.Random(8)
    markers = [f"zq{rng.randrange(16**8):08x}" for _ in range(1000)]
    cfg = shipped_rule("R1")

    sim = Simulation(seed=8)
    sim.add_rule(cfg, batch=0)
    k_A = sim.action.keys["R1"]
    for m in markers:
        ex = sim.execute("R1", {"Text": f"@{m}"}, f"payload {m}".encode())
        assert isinstance(ex.result, NotFired)
        with pytest.raises(DecryptionError):
            aead_decrypt(xor_bytes(ex.action.Y[0], k_A), ex.action.s_tilde)

    lines = ["# etap-scenario v1", 'rule = "R1"', "seed = 9"]
    for m in markers:
        lines += ["[[events]]", 'type = "trigger"', f'data = {{ Text = "@{m}" }}', f'payload = "payload {m}"']
    transcript = run_scenario(parse_scenario("\n".join(lines)))
    text = repr(transcript)
    assert len(transcript) == 1000
    assert all(e["result"] == "NotFired" and "outputs" not in e and "payload" not in e for e in transcript)
    leaked = [m for m in markers if m in text]
    note(8, f"1000 false-predicate runs: s~ never decrypts, {len(leaked)} markers in the transcript")
    assert not leaked


# 9 ---------------------------------------------------------------------------

def test_criterion_9(note):
    report = bench_micro(iterations=3)
    for r in report.rules:
        m = r.median
        flag = "" if r.under_target else f"  (over the {STEP_TARGET_MS:.0f} ms target)"
        note(9, f"{r.name:<18} TC {m.tc_ms:6.1f}  TS {m.ts_ms:5.1f}  TAP {m.tap_ms:6.1f}  "
                f"AS {m.as_ms:5.1f} ms{flag}")
    over = [r.name for r in report.rules if not r.under_ceiling]
    assert not over, f"steps over {STEP_CEILING_MS} ms: {over}"


# 10 --------------------------------------------------------------------------

def test_criterion_10(note):
    shipped = {n: shipped_rule(n) for n in RULES}
    batch = day_batch(day_mix(shipped))
    note(10, f"{batch.bundles} bundles in {batch.seconds:.1f} s, {batch.total_mb:.1f} MB serialized "
             f"({batch.gc_bytes / 1e6:.1f} MB garbled tables), reference 61.7 MB")
    assert batch.bundles == 2496
    assert batch.seconds < 60
    assert batch.size_ok

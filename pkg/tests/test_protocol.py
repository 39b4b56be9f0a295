import random
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from etap.funclib import FieldSchema, TriggerSchema, compose_rule
from etap.protocol import (ActionMsg, ActionService, Fired, GarbledBundle, NotFired, OutOfCircuits, Reject,
                           StaleTapError, StoreFull, TriggerActionPlatform, TriggerMsg, TriggerService,
                           TriggerStore, TrustedClient, WireError, as_exec, decode_message, encode_message,
                           encoding_for, frame, setup_rule, tap_exec, ts_exec_fake)
from etap.protocol.parties import pack_decoding_blob, unpack_decoding_blob

LABELS = st.lists(st.binary(min_size=16, max_size=16), max_size=5).map(tuple)


class Clock:
    def __init__(self):
        self.t = 1_000_000.0

    def __call__(self):
        return self.t


class Rng:
    def __init__(self, seed):
        self.r = random.Random(seed)

    def randbytes(self, n):
        return self.r.randbytes(n)


@pytest.fixture(scope="module")
def rule():
    schema = TriggerSchema((FieldSchema("N", "int32"),))
    return compose_rule("x[N] > 5000", {"half": "x[N] / 2"}, schema)


class World:
    def __init__(self, rule, tau=60.0, retain=False, capacity=1000, seed=0):
        self.clock = Clock()
        rng = Rng(seed)
        self.rule = rule
        self.tc = TrustedClient(rng)
        self.ts = TriggerService(self.clock, rng)
        self.tap = TriggerActionPlatform(capacity, retain)
        self.action = ActionService(self.clock, tau)
        self.keys = setup_rule("r", rule, "t/api", "a/api", tc=self.tc, ts=self.ts, tap=self.tap,
                               action=self.action, batch=4)

    def run(self, n, v=b"payload"):
        msg = self.ts.send("r", self.rule.trigger_bits({"N": n}), v)
        act = self.tap.execute("r", msg)
        return msg, act, (self.action.execute("r", act) if act is not None else None)


# wire format

@given(st.integers(0, 2**32 - 1), LABELS, st.binary(max_size=80), st.binary(max_size=40))
def test_trigger_roundtrip(j, X, ct, sync):
    msg = TriggerMsg(j, X, ct, sync)
    raw = encode_message(msg)
    assert raw[0] == 0x01 and raw[1:5] == j.to_bytes(4, "big")
    assert decode_message(raw) == msg


@given(st.integers(0, 2**32 - 1), LABELS, st.binary(max_size=80), st.binary(max_size=80),
       st.binary(min_size=32, max_size=32))
def test_action_roundtrip(j, Y, ct, s, h):
    msg = ActionMsg(j, Y, ct, s, h)
    assert decode_message(encode_message(msg)) == msg


def test_bundle_roundtrip(rule):
    w = World(rule)
    b = w.tc.garble_next("r")
    raw = encode_message(b)
    back = decode_message(raw, rule.circuit)
    assert isinstance(back, GarbledBundle)
    assert back.F.tables == b.F.tables and back.C == b.C and back.s_tilde == b.s_tilde
    assert len(raw) == 5 + 16 + len(b.F) + len(b.C) * 16 + len(b.s_tilde) + 32
    assert frame(raw)[:4] == len(raw).to_bytes(4, "big")
    with pytest.raises(WireError):
        decode_message(raw)  # needs the circuit


@pytest.mark.parametrize("raw", [b"", b"\x01\x00", b"\x09\x00\x00\x00\x00", b"\x01\x00\x00\x00\x00\x00\x00",
                                 b"\x01\x00\x00\x00\x00" + b"\x00\x00\x00\x05ab",
                                 encode_message(TriggerMsg(0, (), b""))[:-4],
                                 encode_message(ActionMsg(0, (), b"", b"", b"x" * 31)),
                                 b"\x01\x00\x00\x00\x00\x00\x00\x00\x03abc\x00\x00\x00\x00\x00\x00\x00\x00"])
def test_malformed_messages(raw):
    with pytest.raises(WireError):
        decode_message(raw)


def test_decoding_blob_layout():
    blob = pack_decoding_blob(7, b"k" * 16, b"e" * 16, [1, 0, 1, 1, 0, 0, 0, 0, 1], b"h" * 16)
    assert len(blob) == 4 + 16 + 16 + 2 + 16
    assert blob[36:38] == bytes([0b10110000, 0b10000000])
    assert unpack_decoding_blob(blob, 9) == (7, b"k" * 16, b"e" * 16, [1, 0, 1, 1, 0, 0, 0, 0, 1], b"h" * 16)


# honest runs and the action service's checks

def test_honest_outcomes(rule):
    w = World(rule)
    _, _, r1 = w.run(9000, b"v1")
    _, _, r2 = w.run(12)
    assert r1 == Fired(r1.y, b"v1") and rule.decode_outputs(list(r1.y)) == {"half": 4500}
    assert r2 == NotFired()


def flip(data: bytes, bit: int = 3) -> bytes:
    b = bytearray(data)
    b[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(b)


def test_reject_reasons(rule):
    w = World(rule)
    k_A = w.action.keys["r"]
    now = w.clock()
    _, fired, _ = w.run(9000)
    _, not_fired, _ = w.run(1)

    def reason(msg):
        res = as_exec(msg, k_A, 60.0, now)
        assert isinstance(res, Reject)
        return res.reason

    assert reason(replace(not_fired, Y=(flip(not_fired.Y[0]),) + not_fired.Y[1:])) == "predicate-hmac"
    assert reason(replace(not_fired, h_tilde=flip(not_fired.h_tilde))) == "predicate-hmac"
    assert reason(replace(fired, Y=fired.Y[:1] + (flip(fired.Y[1]),) + fired.Y[2:])) == "output-hash"
    assert reason(replace(fired, ct=flip(fired.ct, 200))) == "payload"
    assert reason(replace(fired, j=fired.j ^ 1)) == "circuit-id"
    assert reason(replace(fired, Y=())) == "malformed"
    assert isinstance(as_exec(fired, k_A, 60.0, now + 61), Reject)
    assert as_exec(fired, k_A, 60.0, now + 60) == Fired(as_exec(fired, k_A, 60.0, now).y, b"payload")
    # a valid h~ is irrelevant when the predicate fired
    assert isinstance(as_exec(replace(fired, h_tilde=flip(fired.h_tilde)), k_A, 60.0, now), Fired)


def test_circuits_are_single_use(rule):
    w = World(rule)
    msg, act, _ = w.run(9000)
    assert act is not None
    assert w.tap.execute("r", msg) is None
    bundle = w.tc.garble_next("r")
    w.tap.upload("r", bundle)
    with pytest.raises(ValueError):
        w.tap.store.put("r", replace(bundle, j=msg.j))
    assert w.tap.execute("r", replace(msg, j=999)) is None


def test_store_capacity():
    store = TriggerStore(capacity=1)
    b = GarbledBundle(0, None, (), b"", b"")
    store.put("r", b)
    store.put("r", b)  # replacing the same id is fine
    with pytest.raises(StoreFull):
        store.put("r", replace(b, j=1))
    assert store.pending("r") == [0] and len(store) == 1
    assert store.consume("r", 0) is b and store.consumed("r") == [0]


def test_wrong_label_count_is_dropped(rule):
    w = World(rule)
    msg = w.ts.send("r", rule.trigger_bits({"N": 1}), b"")
    assert tap_exec(replace(msg, X=msg.X[:-1]), w.tap.store, "r") is None


# circuit-id synchronization

def test_sync_circuit_id_tracks_triggers(rule):
    w = World(rule)
    assert w.tc.sync_circuit_id("r", w.tap) == 0
    for n in (1, 9000, 2):
        w.run(n)
    assert w.tc.sync_circuit_id("r", w.tap) == 3


def test_sync_detects_tampered_and_rolled_back_state(rule):
    w = World(rule)
    w.run(1)
    old = w.tap.sync["r"]
    w.run(2)
    assert w.tc.sync_circuit_id("r", w.tap) == 2
    w.tap.sync["r"] = old  # platform replays an older (valid) blob
    with pytest.raises(StaleTapError):
        w.tc.sync_circuit_id("r", w.tap)
    w.tap.sync["r"] = (5, old[1])  # claims a different id
    with pytest.raises(StaleTapError):
        w.tc.sync_circuit_id("r", w.tap)
    w.tap.sync["r"] = (2, flip(old[1], 40))
    with pytest.raises(StaleTapError):
        w.tc.sync_circuit_id("r", w.tap)
    w.tap.sync.pop("r")
    with pytest.raises(StaleTapError):
        w.tc.sync_circuit_id("r", w.tap)


def test_sync_max_age(rule):
    w = World(rule)
    w.run(1)
    with pytest.raises(StaleTapError):
        w.tc.sync_circuit_id("r", w.tap, now=w.clock() + 3600, max_age=600)


# keys shared across rules

def test_rules_sharing_a_trigger_api(rule):
    w = World(rule)
    setup_rule("s", rule, "t/api", "other/api", tc=w.tc, ts=w.ts, tap=w.tap, action=w.action, batch=2)
    assert w.tc.rules["s"].keys.k_T == w.tc.rules["r"].keys.k_T
    assert w.tc.rules["s"].keys.k_A != w.tc.rules["r"].keys.k_A
    e_r, _ = encoding_for(w.keys.k_T, "r", 0)
    e_s, _ = encoding_for(w.keys.k_T, "s", 0)
    assert e_r.seed != e_s.seed and e_r.offset != e_s.offset
    # a trigger for one rule evaluated on the other rule's circuit never fires
    msg = w.ts.send("r", rule.trigger_bits({"N": 9000}), b"x")
    act = w.tap.execute("s", msg)
    assert not isinstance(w.action.execute("s", act), Fired)


# cover traffic

def test_cover_traffic(rule):
    w = World(rule, retain=True)
    keys = w.ts.keys["r"]
    issued, used = {0, 1, 2, 3}, set()
    rng = Rng(1)
    for _ in range(20):
        fake = ts_exec_fake(keys, issued, used, "r", w.clock(), rule.circuit.n_trigger_bits, rng)
        assert fake.j in issued and len(fake.X) == rule.circuit.n_trigger_bits
        res = w.action.execute("r", w.tap.execute("r", fake))
        assert isinstance(res, Reject)
    seen = set()
    for n in (9000, 1, 7000, 3):
        real = ts_exec_fake(keys, issued, used, "r", w.clock(), 0, rng, x_bits=rule.trigger_bits({"N": n}), v=b"v")
        seen.add(real.j)
        res = w.action.execute("r", w.tap.execute("r", real))
        assert isinstance(res, Fired) == (n > 5000) and not isinstance(res, Reject)
    assert seen == issued
    with pytest.raises(OutOfCircuits):
        ts_exec_fake(keys, issued, used, "r", w.clock(), 0, rng, x_bits=rule.trigger_bits({"N": 1}))
    with pytest.raises(OutOfCircuits):
        ts_exec_fake(keys, [], set(), "r", w.clock(), 4, rng)

"""The four roles of a rule execution.

``ckt_garbling``/``ts_exec``/``tap_exec``/``as_exec`` are pure functions of
their arguments (plus an RNG and a timestamp); the role classes below hold
the per-rule state each party keeps and call into them.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence, Union

from ..circuit import LABEL_BYTES, Circuit, CircuitError
from ..crypto import (KEY_BYTES, SYSTEM_RANDOM, DecryptionError, RandomSource, aead_decrypt,
                      aead_encrypt, derive_encoding, derive_rule_key, generate_key, hash, hmac,
                      hmac_verify, xor_bytes)
from ..funclib.compile import CompiledRule
from ..garble import EncodingInfo, decode, encode, evaluate, garble, output_decoding
from .messages import ActionMsg, GarbledBundle, TriggerMsg, decode_message

Clock = Callable[[], float]
DEFAULT_TAU = 60.0
DEFAULT_CAPACITY = 100_000
_FAKE_PAYLOAD_BYTES = 24


class OutOfCircuits(RuntimeError):
    """No unused circuit id is left for a real trigger send."""


class StoreFull(RuntimeError):
    """The platform's bundle store refused a new bundle."""


class StaleTapError(RuntimeError):
    """The platform reported a circuit id the trusted client cannot verify."""


@dataclass
class RuleKeys:
    k_T: bytes
    k_A: Optional[bytes]  # None at the trigger service
    j: int = 0

    def copy(self) -> "RuleKeys":
        return replace(self)


@dataclass(frozen=True)
class Fired:
    y: tuple[int, ...]
    v: bytes


@dataclass(frozen=True)
class NotFired:
    pass


@dataclass(frozen=True)
class Reject:
    # Diagnostic only: every rejection compares equal.
    reason: str = field(default="", compare=False)


AsResult = Union[Fired, NotFired, Reject]


def _j4(j: int) -> bytes:
    return (j & 0xFFFFFFFF).to_bytes(4, "big")


def _ms(now: float) -> int:
    return int(round(now * 1000))


def encoding_for(k_T: bytes, rule_id: str, j: int) -> tuple[EncodingInfo, bytes]:
    """(encoding info, payload key) for circuit ``j`` of ``rule_id``."""
    m = derive_encoding(derive_rule_key(k_T, rule_id), j)
    return EncodingInfo.from_material(m), m.payload_key


def _pack_bits(bits: Sequence[int]) -> bytes:
    out = bytearray((len(bits) + 7) // 8)
    for i, bit in enumerate(bits):
        if bit:
            out[i // 8] |= 0x80 >> (i % 8)
    return bytes(out)


def _unpack_bits(data: bytes, n: int) -> list[int]:
    return [(data[i // 8] >> (7 - i % 8)) & 1 for i in range(n)]


def pack_decoding_blob(j: int, k_v: bytes, e_r: bytes, d_prime: Sequence[int], h: bytes) -> bytes:
    return _j4(j) + k_v + e_r + _pack_bits(d_prime) + h


def unpack_decoding_blob(data: bytes, m: int) -> tuple[int, bytes, bytes, list[int], bytes]:
    nb = (m + 7) // 8
    if len(data) != 4 + 3 * KEY_BYTES + nb:
        raise ValueError("decoding blob length does not match the output count")
    j = int.from_bytes(data[:4], "big")
    k_v = data[4:20]
    e_r = data[20:36]
    d_prime = _unpack_bits(data[36:36 + nb], m)
    h = data[36 + nb:]
    return j, k_v, e_r, d_prime, h


def ckt_garbling(rule: CompiledRule, keys: RuleKeys, rule_id: str,
                 rng: RandomSource = SYSTEM_RANDOM) -> GarbledBundle:
    """Garble the next circuit of ``rule`` and advance ``keys.j``."""
    if keys.k_A is None:
        raise ValueError("garbling needs the action key")
    j = keys.j
    e, k_v = encoding_for(keys.k_T, rule_id, j)
    res = garble(e, rule.circuit)
    false_labels = res.false_labels
    w0_false = false_labels[0]
    h = hash(b"".join(false_labels[1:]))
    blob = pack_decoding_blob(j, k_v, e.offset, output_decoding(false_labels), h)
    w0_true = xor_bytes(w0_false, e.offset)
    s_tilde = aead_encrypt(xor_bytes(w0_true, keys.k_A), blob, rng).to_bytes()
    h_tilde = hmac(keys.k_A, _j4(j) + w0_false)
    C = tuple(encode(e, rule.const_bits(), rule.circuit.n_trigger_bits))
    keys.j += 1
    return GarbledBundle(j, res.F, C, s_tilde, h_tilde)


def _trigger(j: int, x_bits: Sequence[int], v: bytes, k_T: bytes, rule_id: str,
             now: float, rng: RandomSource, sync: bool) -> TriggerMsg:
    e, k_v = encoding_for(k_T, rule_id, j)
    X = tuple(encode(e, x_bits, 0))
    ct = aead_encrypt(k_v, _ms(now).to_bytes(8, "big") + v, rng).to_bytes()
    blob = make_sync_blob(k_T, rule_id, j, now, rng) if sync else b""
    return TriggerMsg(j, X, ct, blob)


def ts_exec(x_bits: Sequence[int], v: bytes, keys: RuleKeys, rule_id: str, now: float,
            rng: RandomSource = SYSTEM_RANDOM, sync: bool = True) -> TriggerMsg:
    """Encode trigger data and encrypt the payload for circuit ``keys.j``."""
    msg = _trigger(keys.j, x_bits, v, keys.k_T, rule_id, now, rng, sync)
    keys.j += 1
    return msg


def _pick(rng: RandomSource, items: Sequence[int]) -> int:
    return items[int.from_bytes(rng.randbytes(8), "big") % len(items)]


def ts_exec_fake(keys: RuleKeys, issued: Iterable[int], used: set[int], rule_id: str, now: float,
                 n_labels: int, rng: RandomSource = SYSTEM_RANDOM,
                 x_bits: Sequence[int] | None = None, v: bytes = b"") -> TriggerMsg:
    """Cover-traffic send.

    With ``x_bits`` this is a real send on a random unused id (recorded in
    ``used``); without, a fake send on any issued id with random labels.
    """
    J = sorted(set(issued))
    if not J:
        raise OutOfCircuits("no circuit ids issued")
    if x_bits is not None:
        free = [j for j in J if j not in used]
        if not free:
            raise OutOfCircuits("every issued circuit id already carried real data")
        j = _pick(rng, free)
        used.add(j)
        return _trigger(j, x_bits, v, keys.k_T, rule_id, now, rng, sync=False)
    j = _pick(rng, J)
    X = tuple(rng.randbytes(LABEL_BYTES) for _ in range(n_labels))
    ct = aead_encrypt(generate_key(rng), rng.randbytes(8 + _FAKE_PAYLOAD_BYTES), rng).to_bytes()
    return TriggerMsg(j, X, ct, b"")


def make_sync_blob(k_T: bytes, rule_id: str, j: int, now: float, rng: RandomSource) -> bytes:
    pt = _j4(j) + _ms(now).to_bytes(8, "big") + rule_id.encode("utf-8")
    return aead_encrypt(k_T, pt, rng).to_bytes()


def open_sync_blob(k_T: bytes, rule_id: str, blob: bytes) -> tuple[int, float]:
    pt = aead_decrypt(k_T, blob)
    if len(pt) < 12 or pt[12:] != rule_id.encode("utf-8"):
        raise DecryptionError("sync blob belongs to another rule")
    return int.from_bytes(pt[:4], "big"), int.from_bytes(pt[4:12], "big") / 1000


class TriggerStore:
    """Bundles keyed by (rule id, j).

    Single-use by default: a bundle is removed when executed and its id can
    never be stored again.  ``retain=True`` keeps executed bundles for cover
    traffic, where one id may be evaluated several times.  When ``capacity``
    bundles are pending, new ones are refused.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY, retain: bool = False):
        self.capacity = capacity
        self.retain = retain
        self._bundles: OrderedDict[tuple[str, int], GarbledBundle] = OrderedDict()
        self._consumed: set[tuple[str, int]] = set()
        self._lock = threading.Lock()

    def put(self, rule_id: str, bundle: GarbledBundle) -> None:
        key = (rule_id, bundle.j)
        with self._lock:
            if key in self._consumed:
                raise ValueError(f"circuit {bundle.j} of {rule_id!r} was already executed")
            if key not in self._bundles and len(self._bundles) >= self.capacity:
                raise StoreFull(f"store holds {self.capacity} bundles")
            self._bundles[key] = bundle

    def get(self, rule_id: str, j: int) -> GarbledBundle | None:
        return self._bundles.get((rule_id, j))

    def consume(self, rule_id: str, j: int) -> GarbledBundle | None:
        key = (rule_id, j)
        with self._lock:
            if self.retain:
                return self._bundles.get(key)
            bundle = self._bundles.pop(key, None)
            if bundle is not None:
                self._consumed.add(key)
            return bundle

    def consumed(self, rule_id: str) -> list[int]:
        return sorted(j for r, j in self._consumed if r == rule_id)

    def mark_consumed(self, rule_id: str, j: int) -> None:
        with self._lock:
            self._bundles.pop((rule_id, j), None)
            self._consumed.add((rule_id, j))

    def pending(self, rule_id: str) -> list[int]:
        return sorted(j for r, j in self._bundles if r == rule_id)

    def __len__(self) -> int:
        return len(self._bundles)


def tap_exec(msg: TriggerMsg, store: TriggerStore, rule_id: str) -> ActionMsg | None:
    """Evaluate the stored circuit on the trigger labels; None means drop."""
    bundle = store.consume(rule_id, msg.j)
    if bundle is None:
        return None
    try:
        Y = evaluate(bundle.F, list(msg.X) + list(bundle.C))
    except CircuitError:
        return None
    return ActionMsg(msg.j, tuple(Y), msg.ct, bundle.s_tilde, bundle.h_tilde)


def as_exec(msg: ActionMsg, k_A: bytes, tau: float, now: float) -> AsResult:
    """Verify and decode an action message."""
    if not msg.Y or any(len(lab) != LABEL_BYTES for lab in msg.Y):
        return Reject("malformed")
    w0 = msg.Y[0]
    try:
        blob = aead_decrypt(xor_bytes(w0, k_A), msg.s_tilde)
    except DecryptionError:
        if hmac_verify(k_A, _j4(msg.j) + w0, msg.h_tilde):
            return NotFired()
        return Reject("predicate-hmac")
    try:
        j, k_v, e_r, d_prime, h = unpack_decoding_blob(blob, len(msg.Y) - 1)
    except ValueError:
        return Reject("blob-layout")
    if j != msg.j:
        return Reject("circuit-id")
    labels = msg.Y[1:]
    y = decode(d_prime, labels)
    g = b"".join(lab if bit == 0 else xor_bytes(lab, e_r) for lab, bit in zip(labels, y))
    if hash(g) != h:
        return Reject("output-hash")
    try:
        pt = aead_decrypt(k_v, msg.ct)
    except DecryptionError:
        return Reject("payload")
    if len(pt) < 8:
        return Reject("payload")
    t = int.from_bytes(pt[:8], "big")
    if _ms(now) > t + _ms(tau):
        return Reject("stale")
    return Fired(tuple(y), pt[8:])


@dataclass
class _RuleEntry:
    rule: CompiledRule
    keys: RuleKeys
    trigger_api: str
    action_api: str


class TrustedClient:
    """Holds every secret; compiles, garbles and ships bundles."""

    def __init__(self, rng: RandomSource = SYSTEM_RANDOM):
        self.rng = rng
        self.trigger_keys: dict[str, bytes] = {}
        self.action_keys: dict[str, bytes] = {}
        self.rules: dict[str, _RuleEntry] = {}
        self.verified: dict[str, tuple[int, float]] = {}

    def setup_rule(self, rule_id: str, rule: CompiledRule, trigger_api: str, action_api: str) -> RuleKeys:
        """Keys for a new rule; an API seen before keeps its existing key."""
        if rule_id in self.rules:
            raise ValueError(f"rule {rule_id!r} already set up")
        k_T = self.trigger_keys.setdefault(trigger_api, generate_key(self.rng))
        k_A = self.action_keys.setdefault(action_api, generate_key(self.rng))
        keys = RuleKeys(k_T, k_A, 0)
        self.rules[rule_id] = _RuleEntry(rule, keys, trigger_api, action_api)
        return keys.copy()

    def adopt_rule(self, rule_id: str, rule: CompiledRule, trigger_api: str, action_api: str,
                   keys: RuleKeys) -> None:
        """Reinstate a rule with keys from saved state."""
        self.trigger_keys[trigger_api] = keys.k_T
        self.action_keys[action_api] = keys.k_A
        self.rules[rule_id] = _RuleEntry(rule, keys.copy(), trigger_api, action_api)

    def garble_next(self, rule_id: str) -> GarbledBundle:
        e = self.rules[rule_id]
        return ckt_garbling(e.rule, e.keys, rule_id, self.rng)

    def generate(self, rule_id: str, count: int) -> list[GarbledBundle]:
        return [self.garble_next(rule_id) for _ in range(count)]

    def sync_circuit_id(self, rule_id: str, tap: "TriggerActionPlatform", now: float | None = None,
                        max_age: float | None = None) -> int:
        """Ask the platform for the rule's current circuit id and verify it
        against the trigger service's encrypted (j, t) blob."""
        k_T = self.rules[rule_id].keys.k_T
        j, blob = tap.circuit_id(rule_id)
        last = self.verified.get(rule_id)
        if not blob:
            if j != 0 or last is not None:
                raise StaleTapError(f"no sync blob for {rule_id!r} at circuit id {j}")
            return 0
        try:
            last_j, t = open_sync_blob(k_T, rule_id, blob)
        except DecryptionError as exc:
            raise StaleTapError("sync blob does not verify") from exc
        if last_j + 1 != j:
            raise StaleTapError(f"platform reports {j} but the blob is for {last_j}")
        if last is not None and (last_j < last[0] or t < last[1]):
            raise StaleTapError(f"blob for {last_j} is older than the verified {last[0]}")
        if now is not None and max_age is not None and now - t > max_age:
            raise StaleTapError(f"newest blob is {now - t:.0f}s old")
        self.verified[rule_id] = (last_j, t)
        return j


class TriggerService:
    def __init__(self, clock: Clock, rng: RandomSource = SYSTEM_RANDOM):
        self.clock = clock
        self.rng = rng
        self.keys: dict[str, RuleKeys] = {}

    def register(self, rule_id: str, k_T: bytes, j: int = 0) -> None:
        self.keys[rule_id] = RuleKeys(k_T, None, j)

    def send(self, rule_id: str, x_bits: Sequence[int], v: bytes) -> TriggerMsg:
        return ts_exec(x_bits, v, self.keys[rule_id], rule_id, self.clock(), self.rng)


class TriggerActionPlatform:
    """Untrusted evaluator.  Its state is only public circuits, bundles and
    the messages it relays."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY, retain: bool = False):
        self.store = TriggerStore(capacity, retain)
        self.circuits: dict[str, Circuit] = {}
        self.sync: dict[str, tuple[int, bytes]] = {}

    def register_rule(self, rule_id: str, circuit: Circuit) -> None:
        self.circuits[rule_id] = circuit

    def upload(self, rule_id: str, bundle: GarbledBundle | bytes) -> None:
        if isinstance(bundle, (bytes, bytearray)):
            bundle = decode_message(bytes(bundle), self.circuits[rule_id])
            if not isinstance(bundle, GarbledBundle):
                raise ValueError("not a bundle message")
        self.store.put(rule_id, bundle)

    def execute(self, rule_id: str, msg: TriggerMsg) -> ActionMsg | None:
        out = tap_exec(msg, self.store, rule_id)
        if out is not None and msg.sync and msg.j + 1 > self.sync.get(rule_id, (0, b""))[0]:
            self.sync[rule_id] = (msg.j + 1, msg.sync)
        return out

    def circuit_id(self, rule_id: str) -> tuple[int, bytes]:
        return self.sync.get(rule_id, (0, b""))


class ActionService:
    def __init__(self, clock: Clock, tau: float = DEFAULT_TAU):
        self.clock = clock
        self.tau = tau
        self.keys: dict[str, bytes] = {}

    def register(self, rule_id: str, k_A: bytes) -> None:
        self.keys[rule_id] = k_A

    def execute(self, rule_id: str, msg: ActionMsg) -> AsResult:
        return as_exec(msg, self.keys[rule_id], self.tau, self.clock())


def setup_rule(rule_id: str, rule: CompiledRule, trigger_api: str, action_api: str, *,
               tc: TrustedClient, ts: TriggerService, tap: TriggerActionPlatform, action: ActionService,
               batch: int = 0) -> RuleKeys:
    """Create keys, hand them to the services and pre-load ``batch`` bundles."""
    keys = tc.setup_rule(rule_id, rule, trigger_api, action_api)
    ts.register(rule_id, keys.k_T, keys.j)
    action.register(rule_id, keys.k_A)
    tap.register_rule(rule_id, rule.circuit)
    for bundle in tc.generate(rule_id, batch):
        tap.upload(rule_id, bundle)
    return keys

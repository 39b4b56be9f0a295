"""Derandomized half-gates garbling with free-XOR and point-and-permute.

Input-wire false labels come from the encoding seed (``H(e_s || w)``); every
true label is the false label XOR the global offset ``e_r``.  NOT gates are a
label swap on the garbler side and a pass-through on the evaluator side.  AND
gates cost two ciphertexts, XOR and NOT cost none.

Labels are handled as 128-bit ints internally and as 16-byte big-endian
strings at the API boundary; ``lsb`` is the low bit of the last byte.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from .circuit import GC_HEADER_BYTES, LABEL_BYTES, Circuit, CircuitError
from .crypto import EncodingMaterial

_MASK = (1 << 128) - 1
_RECORD = 2 * LABEL_BYTES


class FreeXorViolation(AssertionError):
    pass


@dataclass(frozen=True)
class EncodingInfo:
    seed: bytes
    offset: bytes

    def __post_init__(self):
        if len(self.seed) != LABEL_BYTES or len(self.offset) != LABEL_BYTES:
            raise ValueError("encoding seed and offset must be 16 bytes")
        if not self.offset[-1] & 1:
            raise ValueError("offset lsb must be 1 for point-and-permute")

    @classmethod
    def from_material(cls, m: EncodingMaterial) -> "EncodingInfo":
        return cls(m.seed, m.offset)

    @property
    def offset_int(self) -> int:
        return int.from_bytes(self.offset, "big")


def _b(label: int) -> bytes:
    return label.to_bytes(LABEL_BYTES, "big")


def _i(label: bytes) -> int:
    if len(label) != LABEL_BYTES:
        raise ValueError("labels are 16 bytes")
    return int.from_bytes(label, "big")


def input_label(seed: bytes, wire: int) -> int:
    return int.from_bytes(hashlib.shake_128(seed + wire.to_bytes(4, "big")).digest(LABEL_BYTES), "big")


class GarbledCircuit:
    """The ciphertexts of every AND gate, in gate order.

    The circuit topology is public and travels separately; ``to_bytes`` holds
    only the fixed header and the 32-byte AND records, so its length is
    exactly ``16 + 32 * and_count``.
    """

    __slots__ = ("circuit", "tables", "salt")

    def __init__(self, circuit: Circuit, tables: bytes, salt: bytes = b""):
        if len(tables) != _RECORD * circuit.and_count:
            raise CircuitError("garbled table size does not match circuit")
        self.circuit = circuit
        self.tables = bytes(tables)
        self.salt = salt

    def to_bytes(self) -> bytes:
        c = self.circuit
        header = b"".join(v.to_bytes(4, "big") for v in (
            c.n_trigger_bits, c.n_const_bits, c.and_count, c.n_outputs))
        return header + self.tables

    @classmethod
    def from_bytes(cls, data: bytes, circuit: Circuit, salt: bytes = b"") -> "GarbledCircuit":
        if len(data) < GC_HEADER_BYTES:
            raise CircuitError("truncated garbled circuit")
        fields = [int.from_bytes(data[i:i + 4], "big") for i in range(0, 16, 4)]
        expected = [circuit.n_trigger_bits, circuit.n_const_bits, circuit.and_count, circuit.n_outputs]
        if fields != expected:
            raise CircuitError("garbled circuit header does not match circuit")
        return cls(circuit, data[GC_HEADER_BYTES:], salt)

    def __len__(self) -> int:
        return GC_HEADER_BYTES + len(self.tables)


@dataclass
class GarbleResult:
    F: GarbledCircuit
    false_labels: list[bytes]            # one per output wire, w_0 first
    wire_labels: list[int] | None = None  # debug only: L0 of every wire
    checked_wires: int = 0                # wires verified by check_free_xor


def garble(e: EncodingInfo, circuit: Circuit, *, salt: bytes = b"",
           debug: bool = False, check_free_xor: bool = False) -> GarbleResult:
    """Garble ``circuit`` deterministically from ``e``.

    ``check_free_xor`` re-derives every wire's true label by evaluating the
    freshly garbled gate on true inputs and asserts ``L1 == L0 ^ e_r``.
    """
    R = e.offset_int
    seed = e.seed
    shake = hashlib.shake_128
    frm = int.from_bytes
    n_in = circuit.n_inputs
    L = [input_label(seed, w) for w in range(n_in)]
    append = L.append
    out = bytearray()
    for g, (kind, a, b, _) in enumerate(circuit.gates):
        if kind == 0:
            append(L[a] ^ L[b])
        elif kind == 2:
            append(L[a] ^ R)
        else:
            A0 = L[a]
            B0 = L[b]
            A1 = A0 ^ R
            B1 = B0 ^ R
            tg = (2 * g).to_bytes(4, "big") + salt
            te = (2 * g + 1).to_bytes(4, "big") + salt
            hA0 = frm(shake(A0.to_bytes(16, "big") + tg).digest(16), "big")
            hA1 = frm(shake(A1.to_bytes(16, "big") + tg).digest(16), "big")
            hB0 = frm(shake(B0.to_bytes(16, "big") + te).digest(16), "big")
            hB1 = frm(shake(B1.to_bytes(16, "big") + te).digest(16), "big")
            TG = hA0 ^ hA1
            if B0 & 1:
                TG ^= R
            WG0 = hA0 ^ TG if A0 & 1 else hA0
            TE = hB0 ^ hB1 ^ A0
            WE0 = hB0 ^ TE ^ A0 if B0 & 1 else hB0
            append(WG0 ^ WE0)
            out += TG.to_bytes(16, "big")
            out += TE.to_bytes(16, "big")
    F = GarbledCircuit(circuit, bytes(out), salt)
    checked = _check_free_xor(F, L, R) if check_free_xor else 0
    false_labels = [_b(L[w]) for w in circuit.outputs]
    return GarbleResult(F, false_labels, L if debug else None, checked)


def _eval_and(A: int, B: int, TG: int, TE: int, g: int, salt: bytes) -> int:
    shake = hashlib.shake_128
    tg = (2 * g).to_bytes(4, "big") + salt
    te = (2 * g + 1).to_bytes(4, "big") + salt
    WG = int.from_bytes(shake(A.to_bytes(16, "big") + tg).digest(16), "big")
    if A & 1:
        WG ^= TG
    WE = int.from_bytes(shake(B.to_bytes(16, "big") + te).digest(16), "big")
    if B & 1:
        WE ^= TE ^ A
    return WG ^ WE


def _check_free_xor(F: GarbledCircuit, L0: list[int], R: int) -> int:
    circuit = F.circuit
    n_in = circuit.n_inputs
    L1 = [L0[w] ^ R for w in range(n_in)]
    tables = F.tables
    k = 0
    for g, (kind, a, b, out) in enumerate(circuit.gates):
        if kind == 0:
            one = L0[a] ^ L1[b]
            if L1[a] ^ L1[b] != L0[out] or L0[a] ^ L0[b] != L0[out]:
                raise FreeXorViolation(f"XOR gate {g} inconsistent")
        elif kind == 2:
            one = L0[a]
        else:
            TG = int.from_bytes(tables[k:k + 16], "big")
            TE = int.from_bytes(tables[k + 16:k + 32], "big")
            k += 32
            for A, B in ((L0[a], L0[b]), (L0[a], L1[b]), (L1[a], L0[b])):
                if _eval_and(A, B, TG, TE, g, F.salt) != L0[out]:
                    raise FreeXorViolation(f"AND gate {g} does not yield its false label")
            one = _eval_and(L1[a], L1[b], TG, TE, g, F.salt)
        if one != L0[out] ^ R:
            raise FreeXorViolation(f"wire {out}: L1 != L0 xor e_r")
        L1.append(one)
    return len(L1)


def encode(e: EncodingInfo, bits: Sequence[int], first_wire: int) -> list[bytes]:
    """Active labels for ``bits`` placed on wires ``first_wire, first_wire+1, ...``."""
    R = e.offset_int
    return [_b(input_label(e.seed, first_wire + i) ^ (R if bit else 0))
            for i, bit in enumerate(bits)]


def evaluate(F: GarbledCircuit, input_labels: Sequence[bytes]) -> list[bytes]:
    """Evaluate with one active label per input wire; returns output labels."""
    circuit = F.circuit
    if len(input_labels) != circuit.n_inputs:
        raise CircuitError(f"expected {circuit.n_inputs} input labels, got {len(input_labels)}")
    shake = hashlib.shake_128
    frm = int.from_bytes
    salt = F.salt
    tables = F.tables
    L = [_i(x) for x in input_labels]
    append = L.append
    k = 0
    for g, (kind, a, b, _) in enumerate(circuit.gates):
        if kind == 0:
            append(L[a] ^ L[b])
        elif kind == 2:
            append(L[a])
        else:
            A = L[a]
            B = L[b]
            WG = frm(shake(A.to_bytes(16, "big") + (2 * g).to_bytes(4, "big") + salt).digest(16), "big")
            if A & 1:
                WG ^= frm(tables[k:k + 16], "big")
            WE = frm(shake(B.to_bytes(16, "big") + (2 * g + 1).to_bytes(4, "big") + salt).digest(16), "big")
            if B & 1:
                WE ^= frm(tables[k + 16:k + 32], "big") ^ A
            k += 32
            append(WG ^ WE)
    return [_b(L[w]) for w in circuit.outputs]


def lsb(label: bytes) -> int:
    return label[-1] & 1


def output_decoding(false_labels: Sequence[bytes]) -> list[int]:
    """d': lsb of each false output label, dropping the predicate wire w_0."""
    return [lsb(lab) for lab in false_labels[1:]]


def decode(d_prime: Sequence[int], labels: Sequence[bytes]) -> list[int]:
    """Plain output bits for w_1..w_m from their labels."""
    if len(d_prime) != len(labels):
        raise ValueError("decoding info and label count differ")
    return [lsb(lab) ^ d for lab, d in zip(labels, d_prime)]

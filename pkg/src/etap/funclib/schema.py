"""Trigger-field and constant schemas, and their fixed-width bit encodings.

Layout on the wire, per field in schema order: the presence bit (optional
fields only), then the payload.  Integers are 32-bit two's complement,
most significant bit first.  Strings are ``length`` bytes, each byte most
significant bit first, right-padded with 0x00.  An absent optional field has
presence 0 and an all-zero payload.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

INT_BITS = 32
KINDS = ("bool", "int32", "string")
CONST_KINDS = KINDS + ("map",)


class SchemaError(ValueError):
    """Data or expression does not fit the declared schema."""


def to_bytes(value: Any) -> bytes:
    if isinstance(value, bytes):
        return value
    if isinstance(value, bytearray):
        return bytes(value)
    if isinstance(value, str):
        return value.encode("utf-8")
    raise SchemaError(f"expected a string, got {type(value).__name__}")


def wrap32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v & 0x80000000 else v


def int_bits(v: int) -> list[int]:
    u = v & 0xFFFFFFFF
    return [(u >> (31 - i)) & 1 for i in range(INT_BITS)]


def bits_int(bits: Sequence[int]) -> int:
    u = 0
    for b in bits:
        u = (u << 1) | (b & 1)
    return wrap32(u)


def str_bits(s: bytes, length: int) -> list[int]:
    if len(s) > length:
        raise SchemaError(f"string of {len(s)} bytes exceeds field length {length}")
    if 0 in s:
        raise SchemaError("strings may not contain 0x00 (reserved for padding)")
    s = s.ljust(length, b"\0")
    return [(c >> (7 - k)) & 1 for c in s for k in range(8)]


def bits_str(bits: Sequence[int]) -> bytes:
    out = bytearray()
    for i in range(0, len(bits) - 7, 8):
        c = 0
        for b in bits[i:i + 8]:
            c = (c << 1) | (b & 1)
        out.append(c)
    return bytes(out)


@dataclass(frozen=True)
class FieldSchema:
    name: str
    kind: str
    length: int = 0
    optional: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"field {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "string" and self.length < 1:
            raise SchemaError(f"field {self.name!r}: string fields need a positive length")

    @property
    def payload_bits(self) -> int:
        return {"bool": 1, "int32": INT_BITS, "string": 8 * self.length}[self.kind]

    @property
    def width(self) -> int:
        return self.payload_bits + int(self.optional)

    def encode(self, value: Any) -> list[int]:
        if value is None:
            if not self.optional:
                raise SchemaError(f"field {self.name!r} is required")
            return [0] * self.width
        if self.kind == "bool":
            if not isinstance(value, bool):
                raise SchemaError(f"field {self.name!r} expects a bool")
            bits = [int(value)]
        elif self.kind == "int32":
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(f"field {self.name!r} expects an integer")
            if not -(1 << 31) <= value < (1 << 32):
                raise SchemaError(f"field {self.name!r}: {value} does not fit 32 bits")
            bits = int_bits(value)
        else:
            try:
                bits = str_bits(to_bytes(value), self.length)
            except SchemaError as exc:
                raise SchemaError(f"field {self.name!r}: {exc}") from None
        return ([1] if self.optional else []) + bits


@dataclass(frozen=True)
class TriggerSchema:
    fields: tuple[FieldSchema, ...]
    _offsets: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offs, pos, seen = {}, 0, set()
        for f in self.fields:
            if f.name in seen:
                raise SchemaError(f"duplicate field {f.name!r}")
            seen.add(f.name)
            offs[f.name] = pos
            pos += f.width
        object.__setattr__(self, "_offsets", offs)

    @property
    def width(self) -> int:
        return sum(f.width for f in self.fields)

    def get(self, name: str) -> FieldSchema:
        for f in self.fields:
            if f.name == name:
                return f
        raise SchemaError(f"unknown field {name!r}")

    def offset(self, name: str) -> int:
        self.get(name)
        return self._offsets[name]

    def encode(self, record: Mapping[str, Any]) -> list[int]:
        unknown = set(record) - {f.name for f in self.fields}
        if unknown:
            raise SchemaError(f"unknown field(s) {sorted(unknown)}")
        bits: list[int] = []
        for f in self.fields:
            bits += f.encode(record.get(f.name))
        return bits


@dataclass(frozen=True)
class ConstSpec:
    """A named rule constant.  ``value`` is bool, int, bytes or, for maps,
    a tuple of (key, value) byte pairs."""

    name: str
    kind: str
    value: Any
    length: int = 0
    key_length: int = 0
    value_length: int = 0

    def __post_init__(self):
        if self.kind not in CONST_KINDS:
            raise SchemaError(f"constant {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "string":
            v = to_bytes(self.value)
            object.__setattr__(self, "value", v)
            if self.length == 0:
                object.__setattr__(self, "length", max(len(v), 1))
            str_bits(v, self.length)
        elif self.kind == "map":
            items = self.value.items() if isinstance(self.value, Mapping) else self.value
            pairs = tuple((to_bytes(k), to_bytes(v)) for k, v in items)
            object.__setattr__(self, "value", pairs)
            kl = self.key_length or max((len(k) for k, _ in pairs), default=1)
            vl = self.value_length or max((len(v) for _, v in pairs), default=1)
            object.__setattr__(self, "key_length", kl)
            object.__setattr__(self, "value_length", vl)
            if len({k for k, _ in pairs}) != len(pairs):
                raise SchemaError(f"constant {self.name!r}: duplicate map keys")
            for k, v in pairs:
                str_bits(k, kl)
                str_bits(v, vl)
        elif self.kind == "int32":
            if isinstance(self.value, bool) or not isinstance(self.value, int):
                raise SchemaError(f"constant {self.name!r} expects an integer")
        elif not isinstance(self.value, bool):
            raise SchemaError(f"constant {self.name!r} expects a bool")

    @property
    def width(self) -> int:
        if self.kind == "bool":
            return 1
        if self.kind == "int32":
            return INT_BITS
        if self.kind == "string":
            return 8 * self.length
        return 8 * (self.key_length + self.value_length) * len(self.value)

    def bits(self) -> list[int]:
        if self.kind == "bool":
            return [int(self.value)]
        if self.kind == "int32":
            return int_bits(self.value)
        if self.kind == "string":
            return str_bits(self.value, self.length)
        out: list[int] = []
        for k, v in self.value:
            out += str_bits(k, self.key_length) + str_bits(v, self.value_length)
        return out

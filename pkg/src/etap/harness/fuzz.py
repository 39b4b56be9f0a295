"""Random trigger records and payloads for a rule's schema."""
from __future__ import annotations

import random
from typing import Any

from ..funclib import FieldSchema
from .config import RuleConfig

_ALPHABET = b" abcdehlmpqrstuvwxyzABZ0123456789@$.:/-()+_%,"
_INT_EDGES = (0, 1, -1, 2**31 - 1, -2**31, 5000, 5001)


def _with_hint(rng: random.Random, hint: bytes, length: int) -> bytes:
    pre = _random_text(rng, rng.randint(0, 3)) if rng.random() < 0.3 else b""
    post = _random_text(rng, rng.randint(0, length))
    return (pre + hint + post)[:length]


def _random_text(rng: random.Random, n: int) -> bytes:
    if rng.random() < 0.05:
        return bytes(rng.randint(1, 255) for _ in range(n))
    return bytes(rng.choice(_ALPHABET) for _ in range(n))


def random_value(rng: random.Random, f: FieldSchema, hints: list[Any]) -> Any:
    if f.kind == "bool":
        return rng.random() < 0.5
    if f.kind == "int32":
        r = rng.random()
        if r < 0.25 and hints:
            v = rng.choice(hints)
            return v + rng.choice((-1, 0, 0, 1)) if -2**31 < v < 2**31 - 1 else v
        if r < 0.4:
            return rng.choice(_INT_EDGES)
        if r < 0.7:
            return rng.randint(-10_000, 10_000)
        return rng.randint(-2**31, 2**31 - 1)
    if hints and rng.random() < 0.5:
        hint = rng.choice(hints)
        hint = hint.encode("utf-8") if isinstance(hint, str) else bytes(hint)
        return hint[:f.length] if rng.random() < 0.5 else _with_hint(rng, hint, f.length)
    return _random_text(rng, rng.randint(0, f.length))


def random_record(rng: random.Random, config: RuleConfig) -> dict[str, Any]:
    rec: dict[str, Any] = {}
    for f in config.fields:
        if f.optional and rng.random() < 0.2:
            continue
        rec[f.name] = random_value(rng, f, config.samples.get(f.name, []))
    return rec


def random_payload(rng: random.Random, max_len: int = 64) -> bytes:
    return rng.randbytes(rng.randint(0, max_len))

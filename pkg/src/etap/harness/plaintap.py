"""PlainTAP: the same rule language evaluated directly on plaintext values.

This is the correctness oracle and the latency baseline.  It shares only the
expression parser with the circuit compiler; every operation is implemented
with Python's ``re`` and ``bytes`` methods.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Mapping

from ..funclib.compile import CompiledRule, method_name
from ..funclib.expr import BoolLit, Binary, Call, ConstRef, Field, IntLit, Node, Null, StrLit, Unary
from ..funclib.ops import EMAIL_PATTERN, PHONE_PATTERN
from ..funclib.schema import ConstSpec, SchemaError, TriggerSchema, to_bytes, wrap32

_ALNUM = frozenset(b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789")


@dataclass
class PV:
    value: Any
    present: bool = True


@lru_cache(maxsize=None)
def _rx(pattern: str) -> re.Pattern:
    return re.compile(pattern.encode("latin-1"))


def first_delimited_match(pattern: str, s: bytes) -> bytes:
    """Leftmost match preceded and followed by a non-alphanumeric byte (or
    the string edge), ending at the earliest such delimited match end."""
    rx = _rx(pattern)
    n = len(s)

    def ok(a: int, e: int) -> bool:
        if a > 0 and s[a - 1] in _ALNUM:
            return False
        if e < n and s[e] in _ALNUM:
            return False
        return rx.fullmatch(s, a, e) is not None

    start = next((a for a in range(n) if any(ok(a, e) for e in range(a + 1, n + 1))), None)
    if start is None:
        return b""
    for e in range(start + 1, n + 1):
        if any(ok(a, e) for a in range(start, e)):
            return s[start:e]
    return b""  # unreachable: the start itself has a delimited match


class PlainEvaluator:
    def __init__(self, schema: TriggerSchema, constants: Mapping[str, ConstSpec]):
        self.schema = schema
        self.constants = constants

    def field(self, node: Field, record: Mapping[str, Any]) -> PV:
        f = self.schema.get(node.name)
        raw = record.get(node.name)
        zero = {"bool": False, "int32": 0, "string": b""}[f.kind]
        if raw is None:
            return PV(zero, False)
        if f.kind == "int32":
            return PV(wrap32(raw))
        if f.kind == "string":
            return PV(to_bytes(raw))
        return PV(bool(raw))

    def const(self, spec: ConstSpec) -> PV:
        if spec.kind == "map":
            return PV(dict(spec.value))
        if spec.kind == "int32":
            return PV(wrap32(spec.value))
        return PV(spec.value)

    def eval(self, node: Node, record: Mapping[str, Any]) -> PV:
        ev = lambda n: self.eval(n, record)  # noqa: E731
        if isinstance(node, Field):
            return self.field(node, record)
        if isinstance(node, IntLit):
            return PV(wrap32(node.value))
        if isinstance(node, (StrLit, BoolLit)):
            return PV(node.value)
        if isinstance(node, ConstRef):
            return self.const(self.constants[node.name])
        if isinstance(node, Null):
            raise SchemaError("null outside a presence test")
        if isinstance(node, Unary):
            v = ev(node.arg).value
            return PV(not v) if node.op == "!" else PV(wrap32(-v))
        if isinstance(node, Binary):
            return self.binary(node, record)
        return self.call(node, record)

    def binary(self, node: Binary, record) -> PV:
        op = node.op
        if op in ("==", "!=") and (isinstance(node.left, Null) or isinstance(node.right, Null)):
            other = node.right if isinstance(node.left, Null) else node.left
            p = self.eval(other, record).present
            return PV(p if op == "!=" else not p)
        if op == "/":
            return PV(_div(self.eval(node.left, record).value, node.right.value))
        a = self.eval(node.left, record).value
        c = self.eval(node.right, record).value
        if op == "&":
            return PV(a and c)
        if op == "|":
            return PV(a or c)
        if op == "+":
            return PV(wrap32(a + c))
        if op == "-":
            return PV(wrap32(a - c))
        if op == "*":
            return PV(wrap32(a * c))
        return PV({"==": a == c, "!=": a != c, "<": a < c, ">": a > c,
                   "<=": a <= c, ">=": a >= c}[op])

    def call(self, node: Call, record) -> PV:
        m = method_name(node.method)
        recv = self.eval(node.recv, record)
        args = node.args
        if m == "lookup":
            key = self.eval(args[0], record).value
            return PV(recv.value.get(key, b""))
        if m == "default":
            return PV(recv.value) if recv.present else PV(self.eval(args[0], record).value)
        if m in ("add", "sub", "mul"):
            c = self.eval(args[0], record).value
            a = recv.value
            return PV(wrap32({"add": a + c, "sub": a - c, "mul": a * c}[m]))
        if m == "div":
            return PV(_div(recv.value, args[0].value))
        s: bytes = recv.value
        p = recv.present
        if m == "startwith":
            return PV(s.startswith(self.eval(args[0], record).value))
        if m == "contain":
            return PV(_rx(_pat(args[0])).search(s) is not None)
        if m == "endwith":
            return PV(re.search(b"(?:" + _pat(args[0]).encode("latin-1") + b")\\Z", s) is not None)
        if m == "replace":
            target = args[1].value if len(args) > 1 else b""
            return PV(_rx(_pat(args[0])).sub(lambda _m: target, s), p)
        if m == "split":
            parts = s.split(args[0].value)
            i = args[1].value
            return PV(parts[i] if i < len(parts) else b"", p)
        if m == "truncate":
            return PV(s[:args[0].value], p)
        if m == "tolower":
            return PV(s.lower(), p)
        if m == "extract_phone":
            return PV(first_delimited_match(PHONE_PATTERN, s), p)
        if m == "extract_email":
            return PV(first_delimited_match(EMAIL_PATTERN, s), p)
        raise SchemaError(f"unknown method {node.method!r}")


def _pat(node: Node) -> str:
    return node.value.decode("latin-1")


def _div(a: int, d: int) -> int:
    q = abs(a) // abs(d)
    return wrap32(q if (a < 0) == (d < 0) else -q)


def plaintap_baseline(rule: CompiledRule, record: Mapping[str, Any]) -> tuple[bool, dict[str, Any]]:
    """(predicate, named outputs) computed directly on plaintext; outputs of
    absent optional values are None."""
    ev = PlainEvaluator(rule.schema, rule.constants)
    fired = bool(ev.eval(rule.predicate, record).value)
    outs = {}
    for name, node in rule.transforms:
        v = ev.eval(node, record)
        outs[name] = v.value if v.present else None
    return fired, outs

"""Circuit fragments for the supported operations.

Values inside the builder:

* ``BoolV``: one bit;
* ``IntV``: 32 bits, least significant first;
* ``StrV``: ``8 * n`` bits, byte by byte, each byte most significant bit first;
* ``MapV``: lists of padded key and value strings.

Every value may carry a ``present`` bit (``ONE`` when the value always
exists).  String literals that parametrize regex-based operations are public
and shape the circuit; all other constants arrive on garbled constant wires.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from ..circuit import ONE, ZERO, Bit, CircuitBuilder
from ..regex import automata as fa
from ..regex.circuits import compile_node, compile_pattern, extract_bits, match, replace_bits, run_dfa
from ..regex.parser import ALL, Cat, Chars, Star, parse, reverse
from .schema import INT_BITS, SchemaError


@dataclass
class BoolV:
    bit: Bit
    present: Bit = ONE


@dataclass
class IntV:
    bits: list[Bit]
    present: Bit = ONE


@dataclass
class StrV:
    bits: list[Bit]
    present: Bit = ONE
    target: bytes = b""  # non-empty after a placeholder-mode replace

    @property
    def n(self) -> int:
        return len(self.bits) // 8

    def char(self, i: int) -> list[Bit]:
        return self.bits[8 * i:8 * i + 8]


@dataclass
class MapV:
    keys: list[StrV]
    values: list[StrV]
    present: Bit = field(default=ONE)


PHONE_PATTERN = r"(?:\+\d{1,2}[ .-]?)?\(?\d{3}\)?[ .-]?\d{3}[ .-]\d{4}"
EMAIL_PATTERN = r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}"


# -- Boolean ------------------------------------------------------------------

def build_bool(b: CircuitBuilder, op: str, *args: Bit) -> Bit:
    if op == "and":
        return b.and_many(args)
    if op == "or":
        return b.or_many(args)
    if op == "not":
        (a,) = args
        return b.not_(a)
    raise ValueError(f"unknown boolean op {op!r}")


# -- integers -----------------------------------------------------------------

def _add(b: CircuitBuilder, x: Sequence[Bit], y: Sequence[Bit], carry: Bit = ZERO) -> list[Bit]:
    """Ripple-carry sum truncated to len(x) bits; one AND per bit."""
    out = []
    for i, (p, q) in enumerate(zip(x, y)):
        out.append(b.xor(b.xor(p, q), carry))
        if i + 1 < len(x):
            carry = b.xor(b.and_(b.xor(p, carry), b.xor(q, carry)), carry)
    return out


def _carry_out(b: CircuitBuilder, x: Sequence[Bit], y: Sequence[Bit], carry: Bit) -> Bit:
    for p, q in zip(x, y):
        carry = b.xor(b.and_(b.xor(p, carry), b.xor(q, carry)), carry)
    return carry


def _neg_bits(b: CircuitBuilder, x: Sequence[Bit]) -> list[Bit]:
    return [b.not_(v) for v in x]


def add(b: CircuitBuilder, x: IntV, y: IntV) -> IntV:
    return IntV(_add(b, x.bits, y.bits))


def sub(b: CircuitBuilder, x: IntV, y: IntV) -> IntV:
    return IntV(_add(b, x.bits, _neg_bits(b, y.bits), ONE))


def neg(b: CircuitBuilder, x: IntV) -> IntV:
    return IntV(_add(b, [ZERO] * INT_BITS, _neg_bits(b, x.bits), ONE))


def mul(b: CircuitBuilder, x: IntV, y: IntV) -> IntV:
    """Schoolbook product mod 2^32 (only the partial products below bit 32)."""
    acc = [b.and_(xb, y.bits[0]) for xb in x.bits]
    for i in range(1, INT_BITS):
        row = [b.and_(xb, y.bits[i]) for xb in x.bits[:INT_BITS - i]]
        acc = acc[:i] + _add(b, acc[i:], row)
    return IntV(acc)


def _ult(b: CircuitBuilder, x: Sequence[Bit], y: Sequence[Bit]) -> Bit:
    # x < y  <=>  no carry out of x + ~y + 1
    return b.not_(_carry_out(b, x, _neg_bits(b, y), ONE))


def _signed(b: CircuitBuilder, x: Sequence[Bit]) -> list[Bit]:
    return list(x[:-1]) + [b.not_(x[-1])]


def build_cmp(b: CircuitBuilder, op: str, x: IntV, y: IntV) -> Bit:
    """Signed 32-bit comparison: lt, gt, le, ge, eq, ne."""
    if op in ("eq", "ne"):
        e = b.and_many(b.xnor(p, q) for p, q in zip(x.bits, y.bits))
        return e if op == "eq" else b.not_(e)
    sx, sy = _signed(b, x.bits), _signed(b, y.bits)
    if op == "lt":
        return _ult(b, sx, sy)
    if op == "gt":
        return _ult(b, sy, sx)
    if op == "le":
        return b.not_(_ult(b, sy, sx))
    if op == "ge":
        return b.not_(_ult(b, sx, sy))
    raise ValueError(f"unknown comparison {op!r}")


def const_int(v: int, width: int = INT_BITS) -> list[Bit]:
    return [ONE if (v >> i) & 1 else ZERO for i in range(width)]


def div_const(b: CircuitBuilder, x: IntV, d: int) -> IntV:
    """Signed division truncating toward zero by a public nonzero divisor."""
    if d == 0:
        raise SchemaError("division by a zero constant")
    sign = x.bits[-1]
    # |x| as a 32-bit unsigned value (conditional negate)
    flipped = [b.xor(v, sign) for v in x.bits]
    mag = _add(b, flipped, [ZERO] * INT_BITS, sign)
    D = abs(d)
    w = D.bit_length() + 1
    dbits = const_int(D, w)
    r: list[Bit] = [ZERO] * w
    q: list[Bit] = [ZERO] * INT_BITS
    for i in range(INT_BITS - 1, -1, -1):
        r = [mag[i]] + r[:-1]
        ge = b.not_(_ult(b, r, dbits))
        diff = _add(b, r, _neg_bits(b, dbits), ONE)
        r = [b.mux(ge, dv, rv) for dv, rv in zip(diff, r)]
        q[i] = ge
    # negate the quotient when the signs differ
    neg_sign = b.not_(sign) if d < 0 else sign
    flipped = [b.xor(v, neg_sign) for v in q]
    return IntV(_add(b, flipped, [ZERO] * INT_BITS, neg_sign))


def build_arith(b: CircuitBuilder, op: str, x: IntV, y: IntV | int) -> IntV:
    if op == "add":
        return add(b, x, y)
    if op == "sub":
        return sub(b, x, y)
    if op == "mul":
        return mul(b, x, y)
    if op == "div_const":
        return div_const(b, x, y)
    raise ValueError(f"unknown arithmetic op {op!r}")


# -- strings ------------------------------------------------------------------

def _is_pad(b: CircuitBuilder, char: Sequence[Bit]) -> Bit:
    return b.not_(b.or_many(char))


def build_str_eq(b: CircuitBuilder, x: StrV, y: StrV) -> Bit:
    """Compare up to the shorter width, then require the next character of the
    longer operand to be padding."""
    n = min(x.n, y.n)
    terms = [b.xnor(p, q) for p, q in zip(x.bits[:8 * n], y.bits[:8 * n])]
    if x.n > n:
        terms.append(_is_pad(b, x.char(n)))
    if y.n > n:
        terms.append(_is_pad(b, y.char(n)))
    return b.and_many(terms)


def build_startwith(b: CircuitBuilder, x: StrV, s: StrV) -> Bit:
    """``s`` is an exact-length constant; if it is longer than ``x`` the result
    depends on whether its extra characters are padding."""
    n = min(x.n, s.n)
    terms = [b.xnor(p, q) for p, q in zip(x.bits[:8 * n], s.bits[:8 * n])]
    if s.n > n:
        terms.append(_is_pad(b, s.char(n)))
    return b.and_many(terms)


_PAD = Chars(frozenset([0]))


@lru_cache(maxsize=None)
def contain_dfa(pattern: str) -> fa.Dfa:
    return compile_node(parse(pattern), contain=True)


@lru_cache(maxsize=None)
def endwith_dfa(pattern: str) -> fa.Dfa:
    # Read right to left: padding, the reversed pattern, then anything.  The
    # accepting tail is a free self-loop, which makes this cheaper than the
    # left-to-right form that must track "only padding from here on".
    return compile_node(Cat((Star(_PAD), reverse(parse(pattern)), Star(Chars(ALL)))))


@lru_cache(maxsize=None)
def split_dfa(delim: int, index: int) -> fa.Dfa:
    # prefixes whose last character lies in field ``index``
    other = Chars(ALL - {delim})
    d = Chars(frozenset([delim]))
    node = Cat(tuple([Cat((Star(other), d))] * index) + (Star(other), other))
    return compile_node(node)


@lru_cache(maxsize=None)
def _matches_empty(pattern: str) -> bool:
    return fa.to_dfa(parse(pattern)).accepts([])


def _reject_empty(pattern: str) -> None:
    if _matches_empty(pattern):
        raise SchemaError(f"pattern {pattern!r} matches the empty string")


def build_contain(b: CircuitBuilder, x: StrV, pattern: str) -> Bit:
    return match(b, contain_dfa(pattern), x.bits)


def build_endwith(b: CircuitBuilder, x: StrV, pattern: str) -> Bit:
    backwards: list[Bit] = []
    for i in range(x.n - 1, -1, -1):
        backwards += x.char(i)
    return match(b, endwith_dfa(pattern), backwards)


def build_split(b: CircuitBuilder, x: StrV, delim: bytes, index: int) -> StrV:
    """Field ``index`` of ``x`` split on the one-byte delimiter, left in place
    and zero elsewhere."""
    if len(delim) != 1 or delim == b"\0":
        raise SchemaError("split delimiter must be a single non-NUL character")
    if index < 0:
        raise SchemaError("split index must be non-negative")
    dfa = split_dfa(delim[0], index)
    marks = run_dfa(b, dfa, x.bits, markers=True).markers
    out: list[Bit] = []
    for i in range(x.n):
        keep = marks[8 * i + 7]
        out += [b.and_(keep, v) for v in x.char(i)]
    return StrV(out, x.present)


def build_replace(b: CircuitBuilder, x: StrV, pattern: str, target: bytes = b"") -> StrV:
    """Delete matches; with a non-empty target, mark each match with 0xff for
    the receiver to substitute."""
    _reject_empty(pattern)
    mode = "delete" if not target else "placeholder"
    return StrV(replace_bits(b, compile_pattern(pattern), x.bits, mode), x.present, target)


def build_truncate(b: CircuitBuilder, x: StrV, n: int) -> StrV:
    if n < 0:
        raise SchemaError("truncate length must be non-negative")
    n = min(n, x.n)
    return StrV(x.bits[:8 * n] if n else [ZERO] * 8, x.present)


def build_tolower(b: CircuitBuilder, x: StrV) -> StrV:
    out: list[Bit] = []
    for i in range(x.n):
        c = x.char(i)
        # 'A'..'Z' is 010xxxxx with the low five bits in 1..26
        low = c[3:]
        nonzero = b.or_many(low)
        le26 = b.not_(_ult(b, const_int(26, 5), list(reversed(low))))
        upper = b.and_many([b.not_(c[0]), c[1], b.not_(c[2]), nonzero, le26])
        out += c[:2] + [b.xor(c[2], upper)] + c[3:]
    return StrV(out, x.present)


def build_extract(b: CircuitBuilder, x: StrV, pattern: str) -> StrV:
    _reject_empty(pattern)
    cp = compile_pattern(pattern, boundary=True)
    return StrV(extract_bits(b, cp, x.bits, first_only=True), x.present)


def build_extract_phone(b: CircuitBuilder, x: StrV) -> StrV:
    return build_extract(b, x, PHONE_PATTERN)


def build_extract_email(b: CircuitBuilder, x: StrV) -> StrV:
    return build_extract(b, x, EMAIL_PATTERN)


def build_lookup(b: CircuitBuilder, m: MapV, x: StrV) -> StrV:
    """Mux chain over entries: y = b_i ? v_i : y, starting from all-zero."""
    width = max((v.n for v in m.values), default=1)
    y: list[Bit] = [ZERO] * (8 * width)
    for k, v in zip(m.keys, m.values):
        hit = build_str_eq(b, x, k)
        vb = v.bits + [ZERO] * (8 * width - len(v.bits))
        y = [b.mux(hit, vi, yi) for vi, yi in zip(vb, y)]
    return StrV(y)


# -- presence -----------------------------------------------------------------

def build_exists(b: CircuitBuilder, v) -> Bit:
    return v.present


def _pad(bits: list[Bit], width: int) -> list[Bit]:
    return bits + [ZERO] * (width - len(bits))


def build_default(b: CircuitBuilder, v, fallback):
    """``v`` when present, otherwise ``fallback``."""
    p = v.present
    if isinstance(v, BoolV):
        return BoolV(b.mux(p, v.bit, fallback.bit))
    if isinstance(v, IntV):
        return IntV([b.mux(p, s, t) for s, t in zip(v.bits, fallback.bits)])
    w = max(len(v.bits), len(fallback.bits))
    return StrV([b.mux(p, s, t) for s, t in zip(_pad(v.bits, w), _pad(fallback.bits, w))])

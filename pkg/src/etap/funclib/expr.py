"""Rule expression mini-language.

Grammar (lowest precedence first)::

    expr    := or
    or      := and ('|' and)*
    and     := cmp ('&' cmp)*
    cmp     := sum (('==' | '!=' | '<' | '>' | '<=' | '>=') sum)?
    sum     := prod (('+' | '-') prod)*
    prod    := unary (('*' | '/') unary)*
    unary   := ('!' | '-') unary | postfix
    postfix := primary ('.' NAME '(' [expr (',' expr)*] ')')*
    primary := 'x' '[' (NAME | STRING) ']' | INT | STRING | 'true' | 'false'
             | 'null' | NAME | '(' expr ')'

``NAME`` alone refers to a rule constant.  String literals use double quotes
with ``\\"``, ``\\\\``, ``\\n``, ``\\t`` and ``\\xHH`` escapes; any other
backslash sequence is kept verbatim so regex escapes such as ``\\$`` survive.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .schema import SchemaError


class ExprError(SchemaError):
    """Syntax error in a rule expression."""


@dataclass(frozen=True)
class Node:
    pos: int


@dataclass(frozen=True)
class Field(Node):
    name: str


@dataclass(frozen=True)
class IntLit(Node):
    value: int


@dataclass(frozen=True)
class StrLit(Node):
    value: bytes


@dataclass(frozen=True)
class BoolLit(Node):
    value: bool


@dataclass(frozen=True)
class Null(Node):
    pass


@dataclass(frozen=True)
class ConstRef(Node):
    name: str


@dataclass(frozen=True)
class Unary(Node):
    op: str
    arg: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    recv: Node
    method: str
    args: tuple


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<int>\d+)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|[|&!<>+\-*/().,\[\]])
""", re.VERBOSE | re.DOTALL)

_SIMPLE_ESCAPES = {'"': b'"', "\\": b"\\", "n": b"\n", "t": b"\t"}


def _unquote(body: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt in _SIMPLE_ESCAPES:
                out += _SIMPLE_ESCAPES[nxt]
                i += 2
                continue
            if nxt == "x" and re.fullmatch(r"[0-9a-fA-F]{2}", body[i + 2:i + 4]):
                out.append(int(body[i + 2:i + 4], 16))
                i += 4
                continue
        out += ch.encode("utf-8")
        i += 1
    return bytes(out)


def tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise ExprError(f"unexpected character {text[i]!r} at offset {i}")
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), i))
        i = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.k = 0

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.k]

    def next(self) -> tuple[str, str, int]:
        t = self.toks[self.k]
        self.k += 1
        return t

    def error(self, tok, expected: str) -> ExprError:
        shown = tok[1] or "end of input"
        return ExprError(f"unexpected token {shown!r} at offset {tok[2]}, expected {expected}")

    def expect(self, value: str):
        t = self.next()
        if t[1] != value or t[0] in ("str", "end"):
            raise self.error(t, repr(value))
        return t

    def parse(self) -> Node:
        node = self.or_()
        if self.peek()[0] != "end":
            raise self.error(self.peek(), "end of expression")
        return node

    def _binary(self, ops, sub) -> Node:
        left = sub()
        while self.peek()[0] == "op" and self.peek()[1] in ops:
            t = self.next()
            left = Binary(t[2], t[1], left, sub())
        return left

    def or_(self) -> Node:
        return self._binary(("|",), self.and_)

    def and_(self) -> Node:
        return self._binary(("&",), self.cmp)

    def cmp(self) -> Node:
        left = self.sum()
        t = self.peek()
        if t[0] == "op" and t[1] in ("==", "!=", "<", ">", "<=", ">="):
            self.next()
            left = Binary(t[2], t[1], left, self.sum())
            nt = self.peek()
            if nt[0] == "op" and nt[1] in ("==", "!=", "<", ">", "<=", ">="):
                raise self.error(nt, "no chained comparison")
        return left

    def sum(self) -> Node:
        return self._binary(("+", "-"), self.prod)

    def prod(self) -> Node:
        return self._binary(("*", "/"), self.unary)

    def unary(self) -> Node:
        t = self.peek()
        if t[0] == "op" and t[1] == "!":
            self.next()
            return Unary(t[2], "!", self.unary())
        if t[0] == "op" and t[1] == "-":
            self.next()
            if self.peek()[0] == "int":
                n = self.next()
                return self.postfix(IntLit(t[2], -int(n[1])))
            return Unary(t[2], "-", self.unary())
        return self.postfix(self.primary())

    def postfix(self, node: Node) -> Node:
        while self.peek()[1] == "." and self.peek()[0] == "op":
            self.next()
            name = self.next()
            if name[0] != "name":
                raise self.error(name, "method name")
            self.expect("(")
            args = []
            if self.peek()[1] != ")":
                args.append(self.or_())
                while self.peek()[1] == "," and self.peek()[0] == "op":
                    self.next()
                    args.append(self.or_())
            self.expect(")")
            node = Call(name[2], node, name[1], tuple(args))
        return node

    def primary(self) -> Node:
        t = self.next()
        kind, val, pos = t
        if kind == "int":
            return IntLit(pos, int(val))
        if kind == "str":
            return StrLit(pos, _unquote(val[1:-1]))
        if kind == "name":
            if val == "x" and self.peek()[1] == "[":
                self.next()
                f = self.next()
                if f[0] == "name":
                    name = f[1]
                elif f[0] == "str":
                    name = _unquote(f[1][1:-1]).decode("utf-8")
                else:
                    raise self.error(f, "field name")
                self.expect("]")
                return Field(pos, name)
            if val in ("true", "false"):
                return BoolLit(pos, val == "true")
            if val == "null":
                return Null(pos)
            return ConstRef(pos, val)
        if kind == "op" and val == "(":
            node = self.or_()
            self.expect(")")
            return node
        raise self.error(t, "a value")


def parse_expr(text: str) -> Node:
    return _Parser(text).parse()

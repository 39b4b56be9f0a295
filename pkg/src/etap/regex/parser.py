"""Parser for the supported regex subset.

Grammar (bytes are latin-1 code points 0..255)::

    alt    := cat ('|' cat)*
    cat    := repeat*
    repeat := atom ('*' | '+' | '?' | '{m}' | '{m,}' | '{m,n}')*
    atom   := '(' ['?:'] alt ')' | '[' ['^'] item+ ']' | '.' | escape | literal
    escape := '\\' (d D w W s S n t r f v 0 | xHH | punctuation)

Character classes, ``.``, ``\\w`` etc. follow Python's ``re`` in ASCII mode.
Anchors, lookaround, backreferences, lazy quantifiers and inline flags are
rejected.  Unless ``allow_nul`` is set, every set excludes byte 0x00, which is
reserved for string padding.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

ALL = frozenset(range(256))
DIGIT = frozenset(range(0x30, 0x3A))
WORD = frozenset(list(range(0x30, 0x3A)) + list(range(0x41, 0x5B)) + list(range(0x61, 0x7B)) + [0x5F])
SPACE = frozenset(b" \t\n\r\f\v")
DOT = ALL - {0x0A}
MAX_REPEAT = 256


class RegexError(ValueError):
    """Pattern uses syntax outside the supported subset."""


@dataclass(frozen=True)
class Chars:
    chars: frozenset


@dataclass(frozen=True)
class Cat:
    items: tuple


@dataclass(frozen=True)
class Alt:
    items: tuple


@dataclass(frozen=True)
class Star:
    item: "Node"


Node = Union[Chars, Cat, Alt, Star]
EMPTY = Cat(())


def plus(node: Node) -> Node:
    return Cat((node, Star(node)))


def optional(node: Node) -> Node:
    return Alt((node, EMPTY))


def literal(data: bytes) -> Node:
    return Cat(tuple(Chars(frozenset([c])) for c in data))


def reverse(node: Node) -> Node:
    """AST of the reversed language."""
    if isinstance(node, Chars):
        return node
    if isinstance(node, Cat):
        return Cat(tuple(reverse(n) for n in reversed(node.items)))
    if isinstance(node, Alt):
        return Alt(tuple(reverse(n) for n in node.items))
    return Star(reverse(node.item))


def char_sets(node: Node) -> set:
    out: set = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Chars):
            out.add(n.chars)
        elif isinstance(n, (Cat, Alt)):
            stack.extend(n.items)
        else:
            stack.append(n.item)
    return out


_ESCAPE_SETS = {
    "d": DIGIT, "D": ALL - DIGIT,
    "w": WORD, "W": ALL - WORD,
    "s": SPACE, "S": ALL - SPACE,
}
_ESCAPE_CHARS = {"n": 0x0A, "t": 0x09, "r": 0x0D, "f": 0x0C, "v": 0x0B, "0": 0x00}
_UNSUPPORTED_ESCAPES = {
    "b": "word-boundary anchor \\b", "B": "anchor \\B", "A": "anchor \\A",
    "Z": "anchor \\Z", "z": "anchor \\z", "G": "anchor \\G",
}


class _Parser:
    def __init__(self, pattern: str, allow_nul: bool):
        self.p = pattern
        self.i = 0
        self.universe = ALL if allow_nul else ALL - {0}

    def error(self, what: str) -> RegexError:
        return RegexError(f"unsupported construct {what} at offset {self.i} in {self.p!r}")

    def peek(self) -> str | None:
        return self.p[self.i] if self.i < len(self.p) else None

    def take(self) -> str:
        ch = self.p[self.i]
        self.i += 1
        return ch

    def parse(self) -> Node:
        node = self.alt()
        if self.i != len(self.p):
            if self.peek() == ")":
                raise RegexError(f"unbalanced ')' at offset {self.i} in {self.p!r}")
            raise self.error(repr(self.peek()))
        return node

    def alt(self) -> Node:
        branches = [self.cat()]
        while self.peek() == "|":
            self.take()
            branches.append(self.cat())
        return branches[0] if len(branches) == 1 else Alt(tuple(branches))

    def cat(self) -> Node:
        items = []
        while self.peek() not in (None, "|", ")"):
            items.append(self.repeat())
        return items[0] if len(items) == 1 else Cat(tuple(items))

    def repeat(self) -> Node:
        node = self.atom()
        ch = self.peek()
        if ch == "*":
            self.take()
            node = Star(node)
        elif ch == "+":
            self.take()
            node = plus(node)
        elif ch == "?":
            self.take()
            node = optional(node)
        elif ch == "{" and self._looks_counted():
            lo, hi = self._counted()
            node = _repeat(node, lo, hi)
        else:
            return node
        # at most one quantifier per atom, as in Python's re
        nxt = self.peek()
        if nxt in ("?", "+"):
            raise self.error("lazy quantifier" if nxt == "?" else "possessive quantifier")
        if nxt == "*" or (nxt == "{" and self._looks_counted()):
            raise self.error("multiple repeat")
        return node

    def _looks_counted(self) -> bool:
        j = self.p.find("}", self.i)
        if j < 0:
            return False
        body = self.p[self.i + 1:j]
        return bool(body) and all(c.isdigit() or c == "," for c in body) and body[0].isdigit()

    def _counted(self) -> tuple[int, int | None]:
        j = self.p.index("}", self.i)
        body = self.p[self.i + 1:j]
        self.i = j + 1
        if "," in body:
            lo_s, hi_s = body.split(",", 1)
            lo, hi = int(lo_s), (int(hi_s) if hi_s else None)
        else:
            lo = hi = int(body)
        if hi is not None and hi < lo:
            raise RegexError(f"bad repetition bounds {{{body}}} in {self.p!r}")
        if max(lo, hi or 0) > MAX_REPEAT:
            raise RegexError(f"repetition bound above {MAX_REPEAT} in {self.p!r}")
        return lo, hi

    def atom(self) -> Node:
        ch = self.take()
        if ch == "(":
            if self.p.startswith("?:", self.i):
                self.i += 2
            elif self.peek() == "?":
                rest = self.p[self.i:self.i + 3]
                if rest.startswith(("?=", "?!", "?<=", "?<!")):
                    raise self.error("lookaround")
                if rest.startswith("?P") or rest.startswith("?<"):
                    raise self.error("named group")
                raise self.error("inline flag or extension group")
            node = self.alt()
            if self.peek() != ")":
                raise RegexError(f"missing ')' in {self.p!r}")
            self.take()
            return node
        if ch == "[":
            return self._chars(self._class())
        if ch == ".":
            return self._chars(DOT)
        if ch == "\\":
            return self._chars(self._escape(in_class=False))
        if ch == "^":
            raise self.error("anchor '^'")
        if ch == "$":
            raise self.error("anchor '$'")
        if ch in "*+?":
            raise self.error(f"dangling quantifier {ch!r}")
        if ch == ")":
            raise RegexError(f"unbalanced ')' in {self.p!r}")
        return self._chars(frozenset([self._byte(ch)]))

    def _chars(self, s: frozenset) -> Chars:
        return Chars(frozenset(s) & self.universe)

    def _byte(self, ch: str) -> int:
        c = ord(ch)
        if c > 0xFF:
            raise self.error(f"non-byte character {ch!r}")
        return c

    def _escape(self, in_class: bool) -> frozenset:
        if self.peek() is None:
            raise RegexError(f"trailing backslash in {self.p!r}")
        ch = self.take()
        if ch in _ESCAPE_SETS:
            return _ESCAPE_SETS[ch]
        if ch in _ESCAPE_CHARS:
            return frozenset([_ESCAPE_CHARS[ch]])
        if ch == "x":
            hx = self.p[self.i:self.i + 2]
            if len(hx) != 2 or any(c not in "0123456789abcdefABCDEF" for c in hx):
                raise self.error("malformed \\x escape")
            self.i += 2
            return frozenset([int(hx, 16)])
        if ch.isdigit():
            raise self.error("backreference")
        if ch in _UNSUPPORTED_ESCAPES and not (in_class and ch == "b"):
            raise self.error(_UNSUPPORTED_ESCAPES[ch])
        if ch.isalnum():
            raise self.error(f"unknown escape \\{ch}")
        return frozenset([self._byte(ch)])

    def _class(self) -> frozenset:
        negate = False
        if self.peek() == "^":
            self.take()
            negate = True
        members: set = set()
        first = True
        while True:
            ch = self.peek()
            if ch is None:
                raise RegexError(f"unterminated character class in {self.p!r}")
            if ch == "]" and not first:
                self.take()
                break
            first = False
            lo_set = self._class_atom()
            if self.peek() == "-" and self.p[self.i + 1:self.i + 2] not in ("]", ""):
                self.take()
                hi_set = self._class_atom()
                if len(lo_set) != 1 or len(hi_set) != 1:
                    raise self.error("range with a class escape")
                lo, hi = min(lo_set), min(hi_set)
                if hi < lo:
                    raise RegexError(f"bad character range in {self.p!r}")
                members.update(range(lo, hi + 1))
            else:
                members.update(lo_set)
        s = frozenset(members)
        return ALL - s if negate else s

    def _class_atom(self) -> frozenset:
        ch = self.take()
        if ch == "\\":
            if self.peek() == "b":
                self.take()
                return frozenset([0x08])
            return self._escape(in_class=True)
        if ch == "[" and self.peek() == ":":
            raise self.error("POSIX class")
        return frozenset([self._byte(ch)])


def _repeat(node: Node, lo: int, hi: int | None) -> Node:
    items = [node] * lo
    if hi is None:
        items.append(Star(node))
    else:
        items.extend([optional(node)] * (hi - lo))
    return Cat(tuple(items))


def parse(pattern: str, *, allow_nul: bool = False) -> Node:
    return _Parser(pattern, allow_nul).parse()

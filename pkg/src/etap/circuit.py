"""Boolean circuit IR shared by the compiler, the garbler and the plaintext oracle.

Wires are dense integers.  Trigger-data input wires come first, then constant
input wires, then one wire per gate in gate order, so every gate's output index
is strictly greater than its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence, Union

# F header: n_trigger_bits, n_const_bits, record count, output count (u32 each)
GC_HEADER_BYTES = 16
LABEL_BYTES = 16


class CircuitError(ValueError):
    """Raised for malformed circuits or invalid builder usage."""


class GateKind(IntEnum):
    XOR = 0
    AND = 1
    NOT = 2


class Gate(NamedTuple):
    kind: GateKind
    a: int
    b: int  # equals ``a`` for NOT gates
    out: int


@dataclass(frozen=True)
class CircuitStats:
    and_count: int
    xor_count: int
    not_count: int
    estimated_gc_bytes: int


class Circuit:
    """Immutable, topologically ordered gate list.

    ``outputs[0]`` is the predicate wire; the remaining outputs carry the
    transformation result.
    """

    __slots__ = ("n_trigger_bits", "n_const_bits", "gates", "outputs", "_stats")

    def __init__(self, n_trigger_bits: int, n_const_bits: int,
                 gates: Iterable[Gate], outputs: Iterable[int]):
        self.n_trigger_bits = int(n_trigger_bits)
        self.n_const_bits = int(n_const_bits)
        self.gates = tuple(Gate(GateKind(g[0]), g[1], g[2], g[3]) for g in gates)
        self.outputs = tuple(int(w) for w in outputs)
        self._stats = None
        self._validate()

    def _validate(self) -> None:
        n_in = self.n_inputs
        for k, g in enumerate(self.gates):
            if g.out != n_in + k:
                raise CircuitError(f"gate {k} writes wire {g.out}, expected {n_in + k}")
            if not (0 <= g.a < g.out and 0 <= g.b < g.out):
                raise CircuitError(f"gate {k} reads a wire that is not yet defined")
        n_wires = self.n_wires
        for w in self.outputs:
            if not 0 <= w < n_wires:
                raise CircuitError(f"output wire {w} out of range")

    @property
    def n_inputs(self) -> int:
        return self.n_trigger_bits + self.n_const_bits

    @property
    def n_wires(self) -> int:
        return self.n_inputs + len(self.gates)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def stats(self) -> CircuitStats:
        if self._stats is None:
            counts = [0, 0, 0]
            for g in self.gates:
                counts[g.kind] += 1
            xor, and_, not_ = counts
            self._stats = CircuitStats(
                and_count=and_, xor_count=xor, not_count=not_,
                estimated_gc_bytes=GC_HEADER_BYTES + 2 * LABEL_BYTES * and_)
        return self._stats

    @property
    def and_count(self) -> int:
        return self.stats().and_count

    def eval(self, trigger_bits: Sequence[int], const_bits: Sequence[int] = ()) -> list[int]:
        """Plaintext evaluation; returns output bits, predicate first."""
        if len(trigger_bits) != self.n_trigger_bits or len(const_bits) != self.n_const_bits:
            raise CircuitError(
                f"expected {self.n_trigger_bits}+{self.n_const_bits} input bits, "
                f"got {len(trigger_bits)}+{len(const_bits)}")
        v = [b & 1 for b in trigger_bits]
        v.extend(b & 1 for b in const_bits)
        append = v.append
        for kind, a, b, _ in self.gates:
            if kind == 0:
                append(v[a] ^ v[b])
            elif kind == 1:
                append(v[a] & v[b])
            else:
                append(v[a] ^ 1)
        return [v[w] for w in self.outputs]

    def eval_batch(self, trigger_rows: Sequence[Sequence[int]],
                   const_rows: Sequence[Sequence[int]] | None = None) -> list[list[int]]:
        """Evaluate many inputs at once, bit-sliced across Python ints."""
        n = len(trigger_rows)
        if n == 0:
            return []
        if const_rows is None:
            const_rows = [()] * n
        if len(const_rows) != n:
            raise CircuitError("trigger_rows and const_rows differ in length")
        for t, c in zip(trigger_rows, const_rows):
            if len(t) != self.n_trigger_bits or len(c) != self.n_const_bits:
                raise CircuitError("input row has wrong width")
        mask = (1 << n) - 1
        v = [_slice(trigger_rows, i) for i in range(self.n_trigger_bits)]
        v.extend(_slice(const_rows, i) for i in range(self.n_const_bits))
        append = v.append
        for kind, a, b, _ in self.gates:
            if kind == 0:
                append(v[a] ^ v[b])
            elif kind == 1:
                append(v[a] & v[b])
            else:
                append(v[a] ^ mask)
        cols = [v[w] for w in self.outputs]
        return [[(c >> r) & 1 for c in cols] for r in range(n)]

    def dump(self) -> str:
        """One gate per line as ``kind out a b``; debugging aid only."""
        lines = [f"# inputs trigger={self.n_trigger_bits} const={self.n_const_bits}"]
        for g in self.gates:
            lines.append(f"{g.kind.name} {g.out} {g.a} {g.b}")
        lines.append("OUT " + " ".join(map(str, self.outputs)))
        return "\n".join(lines) + "\n"


def _slice(rows: Sequence[Sequence[int]], i: int) -> int:
    acc = 0
    for r, row in enumerate(rows):
        if row[i]:
            acc |= 1 << r
    return acc


class Const:
    """A bit whose value is known while building; folded away by the helpers."""

    __slots__ = ("value",)

    def __init__(self, value: int):
        self.value = value

    def __repr__(self) -> str:
        return f"Const({self.value})"


ZERO = Const(0)
ONE = Const(1)

Bit = Union[int, Const]


def const(v: int) -> Const:
    return ONE if v else ZERO


class CircuitBuilder:
    """Single-threaded circuit builder.

    ``add_gate`` appends a raw gate.  The lower-case helpers (``xor``, ``and_``,
    ``not_``, ``or_``, ...) fold constants, reuse identical sub-expressions and
    only emit gates when needed.
    """

    def __init__(self) -> None:
        self.n_trigger_bits = 0
        self.n_const_bits = 0
        self._gates: list[Gate] = []
        self._not_src: dict[int, int] = {}
        self._not_cache: dict[int, int] = {}
        self._xor_cache: dict[tuple[int, int], int] = {}
        self._and_cache: dict[tuple[int, int], int] = {}

    @property
    def n_inputs(self) -> int:
        return self.n_trigger_bits + self.n_const_bits

    @property
    def n_wires(self) -> int:
        return self.n_inputs + len(self._gates)

    @property
    def and_count(self) -> int:
        return sum(1 for g in self._gates if g.kind == GateKind.AND)

    def add_input(self, count: int, kind: str = "trigger") -> range:
        if self._gates:
            raise CircuitError("inputs must be declared before any gate")
        if count < 0:
            raise CircuitError("negative input width")
        start = self.n_inputs
        if kind == "trigger":
            if self.n_const_bits:
                raise CircuitError("trigger inputs must be declared before constants")
            self.n_trigger_bits += count
        elif kind == "constant":
            self.n_const_bits += count
        else:
            raise CircuitError(f"unknown input class {kind!r}")
        return range(start, start + count)

    def add_gate(self, kind: GateKind, a: int, b: int | None = None) -> int:
        kind = GateKind(kind)
        if kind == GateKind.NOT:
            b = a
        elif b is None:
            raise CircuitError(f"{kind.name} needs two inputs")
        out = self.n_wires
        if not (isinstance(a, int) and isinstance(b, int) and 0 <= a < out and 0 <= b < out):
            raise CircuitError(f"gate input refers to undefined wire ({a}, {b})")
        self._gates.append(Gate(kind, a, b, out))
        return out

    # -- folding helpers -------------------------------------------------

    def not_(self, a: Bit) -> Bit:
        if isinstance(a, Const):
            return const(a.value ^ 1)
        src = self._not_src.get(a)
        if src is not None:
            return src
        out = self._not_cache.get(a)
        if out is None:
            out = self.add_gate(GateKind.NOT, a)
            self._not_cache[a] = out
            self._not_src[out] = a
        return out

    def xor(self, a: Bit, b: Bit) -> Bit:
        if isinstance(a, Const):
            return self.not_(b) if a.value else b
        if isinstance(b, Const):
            return self.not_(a) if b.value else a
        if a == b:
            return ZERO
        if self._not_src.get(a) == b or self._not_src.get(b) == a:
            return ONE
        key = (a, b) if a < b else (b, a)
        out = self._xor_cache.get(key)
        if out is None:
            out = self.add_gate(GateKind.XOR, key[0], key[1])
            self._xor_cache[key] = out
        return out

    def and_(self, a: Bit, b: Bit) -> Bit:
        if isinstance(a, Const):
            return b if a.value else ZERO
        if isinstance(b, Const):
            return a if b.value else ZERO
        if a == b:
            return a
        if self._not_src.get(a) == b or self._not_src.get(b) == a:
            return ZERO
        key = (a, b) if a < b else (b, a)
        out = self._and_cache.get(key)
        if out is None:
            out = self.add_gate(GateKind.AND, key[0], key[1])
            self._and_cache[key] = out
        return out

    def or_(self, a: Bit, b: Bit) -> Bit:
        # a | b == !(!a & !b): one AND plus free NOTs
        return self.not_(self.and_(self.not_(a), self.not_(b)))

    def xnor(self, a: Bit, b: Bit) -> Bit:
        return self.not_(self.xor(a, b))

    def mux(self, sel: Bit, if_one: Bit, if_zero: Bit) -> Bit:
        """``sel ? if_one : if_zero`` with a single AND."""
        return self.xor(if_zero, self.and_(sel, self.xor(if_one, if_zero)))

    def xor_many(self, bits: Iterable[Bit]) -> Bit:
        acc: Bit = ZERO
        for b in bits:
            acc = self.xor(acc, b)
        return acc

    def and_many(self, bits: Iterable[Bit]) -> Bit:
        return self._tree(list(bits), self.and_, ONE)

    def or_many(self, bits: Iterable[Bit]) -> Bit:
        return self._tree(list(bits), self.or_, ZERO)

    def _tree(self, bits: list[Bit], op, empty: Const) -> Bit:
        if not bits:
            return empty
        while len(bits) > 1:
            nxt = [op(bits[i], bits[i + 1]) for i in range(0, len(bits) - 1, 2)]
            if len(bits) % 2:
                nxt.append(bits[-1])
            bits = nxt
        return bits[0]

    def build(self, outputs: Sequence[Bit]) -> Circuit:
        """Freeze into a :class:`Circuit`, materializing constant outputs."""
        wires: list[int] = []
        zero = None
        for o in outputs:
            if isinstance(o, Const):
                if zero is None:
                    if self.n_inputs == 0:
                        raise CircuitError("cannot materialize a constant without any input wire")
                    zero = self.add_gate(GateKind.XOR, 0, 0)
                wires.append(self.not_(zero) if o.value else zero)
            else:
                wires.append(o)
        return Circuit(self.n_trigger_bits, self.n_const_bits, self._gates, wires)

"""Compile a rule's predicate and transformation into one circuit.

Output wire 0 is the predicate; the remaining outputs are the named
transformation results in declaration order.  Trigger fields occupy the
trigger wires in schema order; constants referenced by the predicate come
first on the constant wires, then those only used by the transformation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..circuit import ONE, Bit, Circuit, CircuitBuilder, Const
from . import ops
from .expr import (BoolLit, Binary, Call, ConstRef, Field, IntLit, Node, Null, StrLit, Unary,
                   parse_expr)
from .ops import BoolV, IntV, MapV, StrV
from .schema import INT_BITS, ConstSpec, SchemaError, TriggerSchema, bits_int, bits_str

# arguments that shape the circuit instead of travelling as garbled constants
_PUBLIC_ARGS = {"contain", "endwith", "replace", "split", "truncate", "div"}
_ALIASES = {"startswith": "startwith", "contains": "contain", "endswith": "endwith",
            "tolowercase": "tolower", "to_lowercase": "tolower", "lower": "tolower"}
_ARITH = {"+": "add", "-": "sub", "*": "mul"}
_CMP = {"<": "lt", ">": "gt", "<=": "le", ">=": "ge", "==": "eq", "!=": "ne"}


@dataclass(frozen=True)
class ConstSlot:
    """One group of constant wires: a named constant or a lifted literal."""

    label: str
    spec: ConstSpec
    group: int  # 1 = predicate constants, 2 = transformation constants


@dataclass(frozen=True)
class OutputSpec:
    name: str
    kind: str            # bool | int32 | string
    width: int           # payload bits
    presence: bool       # a presence bit precedes the payload
    target: bytes = b""  # substitute for 0xff markers (non-empty replace)

    @property
    def bits(self) -> int:
        return self.width + int(self.presence)


@dataclass
class CompiledRule:
    circuit: Circuit
    schema: TriggerSchema
    slots: list[ConstSlot]
    outputs: list[OutputSpec]
    predicate: Node
    transforms: list[tuple[str, Node]]
    constants: dict[str, ConstSpec] = field(default_factory=dict)

    @property
    def n_c1_bits(self) -> int:
        return sum(s.spec.width for s in self.slots if s.group == 1)

    def const_bits(self) -> list[int]:
        bits: list[int] = []
        for s in self.slots:
            bits += s.spec.bits()
        return bits

    def trigger_bits(self, record: Mapping[str, Any]) -> list[int]:
        return self.schema.encode(record)

    def decode_outputs(self, y: Sequence[int]) -> dict[str, Any]:
        """Turn decoded bits w_1..w_m into named values (None when absent)."""
        expected = sum(o.bits for o in self.outputs)
        if len(y) != expected:
            raise SchemaError(f"expected {expected} output bits, got {len(y)}")
        out: dict[str, Any] = {}
        pos = 0
        for o in self.outputs:
            present = True
            if o.presence:
                present = bool(y[pos])
                pos += 1
            payload = y[pos:pos + o.width]
            pos += o.width
            if not present:
                out[o.name] = None
            elif o.kind == "bool":
                out[o.name] = bool(payload[0])
            elif o.kind == "int32":
                out[o.name] = bits_int(payload)
            else:
                s = bits_str(payload).replace(b"\0", b"")
                if o.target:
                    s = s.replace(b"\xff", o.target)
                out[o.name] = s
        return out

    def eval_plain(self, record: Mapping[str, Any]) -> tuple[bool, dict[str, Any]]:
        """Evaluate the circuit in the clear (testing oracle)."""
        bits = self.circuit.eval(self.trigger_bits(record), self.const_bits())
        return bool(bits[0]), self.decode_outputs(bits[1:])


def _walk(node: Node):
    yield node
    if isinstance(node, Unary):
        yield from _walk(node.arg)
    elif isinstance(node, Binary):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, Call):
        yield from _walk(node.recv)
        for a in node.args:
            yield from _walk(a)


def _public_nodes(root: Node) -> set[int]:
    public: set[int] = set()
    for n in _walk(root):
        if isinstance(n, Call) and _ALIASES.get(n.method, n.method) in _PUBLIC_ARGS:
            public.update(id(a) for a in n.args)
        elif isinstance(n, Binary) and n.op == "/":
            public.add(id(n.right))
    return public


def method_name(name: str) -> str:
    return _ALIASES.get(name, name)


class _Compiler:
    def __init__(self, schema: TriggerSchema, constants: Mapping[str, ConstSpec]):
        self.schema = schema
        self.constants = dict(constants)
        self.b = CircuitBuilder()
        self.slots: list[ConstSlot] = []
        self._slot_of: dict[Any, int] = {}
        self._wires: list[range] = []

    # -- phase 1: constants --------------------------------------------------

    def collect(self, root: Node, group: int) -> None:
        public = _public_nodes(root)
        for n in _walk(root):
            if isinstance(n, ConstRef):
                if n.name not in self.constants:
                    raise SchemaError(f"unknown constant {n.name!r} at offset {n.pos}")
                if n.name not in self._slot_of:
                    self._slot_of[n.name] = len(self.slots)
                    self.slots.append(ConstSlot(n.name, self.constants[n.name], group))
            elif isinstance(n, (IntLit, StrLit, BoolLit)) and id(n) not in public:
                label = f"lit{len(self.slots)}@{group}:{n.pos}"
                if isinstance(n, IntLit):
                    spec = ConstSpec(label, "int32", n.value)
                elif isinstance(n, StrLit):
                    spec = ConstSpec(label, "string", n.value, length=len(n.value))
                else:
                    spec = ConstSpec(label, "bool", n.value)
                self._slot_of[id(n)] = len(self.slots)
                self.slots.append(ConstSlot(label, spec, group))

    def declare_inputs(self) -> None:
        b = self.b
        self.trig = list(b.add_input(self.schema.width, "trigger"))
        for s in self.slots:
            self._wires.append(b.add_input(s.spec.width, "constant"))

    # -- phase 2: gates ------------------------------------------------------

    def _slot_value(self, key) -> Any:
        i = self._slot_of[key]
        spec = self.slots[i].spec
        w = list(self._wires[i])
        if spec.kind == "bool":
            return BoolV(w[0])
        if spec.kind == "int32":
            return IntV(w[::-1])
        if spec.kind == "string":
            return StrV(w)
        kb, vb = 8 * spec.key_length, 8 * spec.value_length
        keys, vals = [], []
        for e in range(len(spec.value)):
            base = e * (kb + vb)
            keys.append(StrV(w[base:base + kb]))
            vals.append(StrV(w[base + kb:base + kb + vb]))
        return MapV(keys, vals)

    def field(self, node: Field):
        try:
            f = self.schema.get(node.name)
        except SchemaError:
            raise SchemaError(f"unknown field {node.name!r} at offset {node.pos}") from None
        off = self.schema.offset(node.name)
        w = self.trig[off:off + f.width]
        present: Bit = ONE
        if f.optional:
            present, w = w[0], w[1:]
        if f.kind == "bool":
            return BoolV(w[0], present)
        if f.kind == "int32":
            return IntV(w[::-1], present)
        return StrV(w, present)

    def value(self, node: Node):
        if isinstance(node, Field):
            return self.field(node)
        if isinstance(node, (IntLit, StrLit, BoolLit)):
            return self._slot_value(id(node))
        if isinstance(node, ConstRef):
            return self._slot_value(node.name)
        if isinstance(node, Null):
            raise SchemaError(f"null at offset {node.pos} is only valid in == null / != null")
        if isinstance(node, Unary):
            v = self.value(node.arg)
            if node.op == "!":
                return BoolV(self.b.not_(self._bool(v, node)))
            return ops.neg(self.b, self._int(v, node))
        if isinstance(node, Binary):
            return self.binary(node)
        return self.call(node)

    def _bool(self, v, node: Node) -> Bit:
        if not isinstance(v, BoolV):
            raise SchemaError(f"expected a boolean at offset {node.pos}")
        return v.bit

    def _int(self, v, node: Node) -> IntV:
        if not isinstance(v, IntV):
            raise SchemaError(f"expected an integer at offset {node.pos}")
        return v

    def _str(self, v, node: Node) -> StrV:
        if not isinstance(v, StrV):
            raise SchemaError(f"expected a string at offset {node.pos}")
        if v.target:
            raise SchemaError(f"replace with a non-empty target must be the last operation (offset {node.pos})")
        return v

    def binary(self, node: Binary):
        b = self.b
        op = node.op
        if op in ("==", "!=") and (isinstance(node.left, Null) or isinstance(node.right, Null)):
            other = node.right if isinstance(node.left, Null) else node.left
            p = self.value(other).present
            return BoolV(p if op == "!=" else b.not_(p))
        if op in ("&", "|"):
            l, r = self.value(node.left), self.value(node.right)
            fn = b.and_ if op == "&" else b.or_
            return BoolV(fn(self._bool(l, node.left), self._bool(r, node.right)))
        if op == "/":
            if not isinstance(node.right, IntLit):
                raise SchemaError(f"divisor at offset {node.right.pos} must be an integer literal")
            return ops.div_const(b, self._int(self.value(node.left), node.left), node.right.value)
        l, r = self.value(node.left), self.value(node.right)
        if op in _ARITH:
            return ops.build_arith(b, _ARITH[op], self._int(l, node.left), self._int(r, node.right))
        cmp = _CMP[op]
        if isinstance(l, StrV) or isinstance(r, StrV):
            if cmp not in ("eq", "ne"):
                raise SchemaError(f"strings only support == and != (offset {node.pos})")
            e = ops.build_str_eq(b, self._str(l, node.left), self._str(r, node.right))
            return BoolV(e if cmp == "eq" else b.not_(e))
        if isinstance(l, BoolV) and isinstance(r, BoolV) and cmp in ("eq", "ne"):
            x = b.xor(l.bit, r.bit)
            return BoolV(b.not_(x) if cmp == "eq" else x)
        return BoolV(ops.build_cmp(b, cmp, self._int(l, node.left), self._int(r, node.right)))

    def _literal_arg(self, node: Call, k: int, kind: type):
        if len(node.args) <= k:
            raise SchemaError(f"{node.method}() at offset {node.pos} needs more arguments")
        a = node.args[k]
        if not isinstance(a, kind):
            raise SchemaError(f"argument {k + 1} of {node.method}() at offset {a.pos} must be a literal")
        return a.value

    def _arity(self, node: Call, lo: int, hi: int | None = None) -> None:
        hi = lo if hi is None else hi
        if not lo <= len(node.args) <= hi:
            raise SchemaError(f"{node.method}() at offset {node.pos} takes {lo}..{hi} arguments")

    def call(self, node: Call):
        b = self.b
        m = method_name(node.method)
        if m == "lookup":
            self._arity(node, 1)
            recv = self.value(node.recv)
            if not isinstance(recv, MapV):
                raise SchemaError(f"lookup() at offset {node.pos} needs a map constant")
            return ops.build_lookup(b, recv, self._str(self.value(node.args[0]), node.args[0]))
        recv = self.value(node.recv)
        if m == "default":
            self._arity(node, 1)
            fb = self.value(node.args[0])
            if type(fb) is not type(recv):
                raise SchemaError(f"default() at offset {node.pos}: fallback type differs")
            return ops.build_default(b, recv, fb)
        if m in ("add", "sub", "mul"):
            self._arity(node, 1)
            return ops.build_arith(b, m, self._int(recv, node.recv), self._int(self.value(node.args[0]), node))
        if m == "div":
            self._arity(node, 1)
            return ops.div_const(b, self._int(recv, node.recv), self._literal_arg(node, 0, IntLit))
        x = self._str(recv, node.recv)
        if m == "startwith":
            self._arity(node, 1)
            return BoolV(ops.build_startwith(b, x, self._str(self.value(node.args[0]), node.args[0])))
        if m == "contain":
            self._arity(node, 1)
            return BoolV(ops.build_contain(b, x, self._pattern(node, 0)))
        if m == "endwith":
            self._arity(node, 1)
            return BoolV(ops.build_endwith(b, x, self._pattern(node, 0)))
        if m == "replace":
            self._arity(node, 1, 2)
            target = self._literal_arg(node, 1, StrLit) if len(node.args) > 1 else b""
            return ops.build_replace(b, x, self._pattern(node, 0), target)
        if m == "split":
            self._arity(node, 2)
            return ops.build_split(b, x, self._literal_arg(node, 0, StrLit), self._literal_arg(node, 1, IntLit))
        if m == "truncate":
            self._arity(node, 1)
            return ops.build_truncate(b, x, self._literal_arg(node, 0, IntLit))
        if m == "tolower":
            self._arity(node, 0)
            return ops.build_tolower(b, x)
        if m == "extract_phone":
            self._arity(node, 0)
            return ops.build_extract_phone(b, x)
        if m == "extract_email":
            self._arity(node, 0)
            return ops.build_extract_email(b, x)
        raise SchemaError(f"unknown method {node.method!r} at offset {node.pos}")

    def _pattern(self, node: Call, k: int) -> str:
        raw = self._literal_arg(node, k, StrLit)
        return raw.decode("latin-1")


def _output_bits(b: CircuitBuilder, name: str, v) -> tuple[list[Bit], OutputSpec]:
    if isinstance(v, MapV):
        raise SchemaError(f"output {name!r}: maps cannot be outputs")
    presence = not (isinstance(v.present, Const) and v.present.value == 1)
    pre = [v.present] if presence else []
    if isinstance(v, BoolV):
        return pre + [v.bit], OutputSpec(name, "bool", 1, presence)
    if isinstance(v, IntV):
        return pre + v.bits[::-1], OutputSpec(name, "int32", INT_BITS, presence)
    return pre + v.bits, OutputSpec(name, "string", len(v.bits), presence, v.target)


def compose_rule(f1: str | Node, f2: Sequence[tuple[str, str | Node]] | Mapping[str, str | Node],
                 schema: TriggerSchema, constants: Mapping[str, ConstSpec] | Sequence[ConstSpec] = ()) -> CompiledRule:
    """Compile predicate ``f1`` and named transformations ``f2`` into one circuit."""
    if not isinstance(constants, Mapping):
        constants = {c.name: c for c in constants}
    pred = parse_expr(f1) if isinstance(f1, str) else f1
    items = list(f2.items()) if isinstance(f2, Mapping) else list(f2)
    transforms = [(n, parse_expr(e) if isinstance(e, str) else e) for n, e in items]
    if len({n for n, _ in transforms}) != len(transforms):
        raise SchemaError("duplicate output names")
    c = _Compiler(schema, constants)
    c.collect(pred, 1)
    for _, t in transforms:
        c.collect(t, 2)
    c.declare_inputs()
    if c.b.n_inputs == 0:
        raise SchemaError("rule has neither trigger fields nor constants")
    pv = c.value(pred)
    if not isinstance(pv, BoolV):
        raise SchemaError("the predicate must be a boolean expression")
    outs: list[Bit] = [pv.bit]
    specs: list[OutputSpec] = []
    for name, t in transforms:
        bits, spec = _output_bits(c.b, name, c.value(t))
        outs += bits
        specs.append(spec)
    circuit = c.b.build(outs)
    return CompiledRule(circuit, schema, c.slots, specs, pred, transforms, dict(constants))

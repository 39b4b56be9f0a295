"""One-hot DFA circuits: matching, begin/end markers, match masks,
substring extraction and replacement.

Each unrolled step computes, for every live state ``j``::

    a = XOR of S^i over i with delta(i, 0) == j
    b = XOR of S^i over i with delta(i, 1) == j
    T^j = ((a ^ b) & x) ^ a

so a step costs at most one AND per state.  State bits that are known to be
zero (the start vector is a constant, and byte-aligned DFAs only occupy a few
states at each bit offset) are folded away by the builder.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..circuit import ZERO, Bit, Circuit, CircuitBuilder, const
from .automata import Dfa, contains, search_prefix, to_dfa
from .parser import ALL, WORD, Cat, Chars, Node, parse, reverse

# non-overlap augmentation: a match must be preceded and followed by a byte
# that is not a letter or digit (padding 0x00 included)
BOUNDARY = Chars(ALL - (WORD - {0x5F}))


@dataclass
class DfaRun:
    final: list[Bit]
    markers: list[Bit]
    trace: list[list[Bit]] = field(default_factory=list)


class _Stepper:
    def __init__(self, dfa: Dfa, keep_dead: bool):
        dead = set() if keep_dead else set(dfa.dead_states())
        self.live = [s for s in range(dfa.q) if s not in dead]
        self.p0: dict[int, list[int]] = {s: [] for s in self.live}
        self.p1: dict[int, list[int]] = {s: [] for s in self.live}
        for i in self.live:
            t0, t1 = dfa.delta[i]
            if t0 in self.p0:
                self.p0[t0].append(i)
            if t1 in self.p1:
                self.p1[t1].append(i)
        self.accepting = sorted(dfa.accepting)
        self.q = dfa.q

    def step(self, b: CircuitBuilder, S: list[Bit], x: Bit) -> list[Bit]:
        T: list[Bit] = [ZERO] * self.q
        for j in self.live:
            a = b.xor_many(S[i] for i in self.p0[j] if S[i] is not ZERO)
            c = b.xor_many(S[i] for i in self.p1[j] if S[i] is not ZERO)
            T[j] = b.xor(b.and_(b.xor(a, c), x), a)
        return T

    def accept(self, b: CircuitBuilder, S: list[Bit]) -> Bit:
        return b.xor_many(S[j] for j in self.accepting)


def run_dfa(b: CircuitBuilder, dfa: Dfa, bits: Sequence[Bit], *, markers: bool = False,
            keep_dead: bool = False, trace: bool = False) -> DfaRun:
    """Unroll ``dfa`` over ``bits``.

    With ``markers`` the acceptance bit after every step is returned (end
    markers when the DFA is a search DFA).  Dead states are dropped unless
    ``keep_dead`` is set; they never feed an accepting state.
    """
    st = _Stepper(dfa, keep_dead)
    S: list[Bit] = [const(s == dfa.start) for s in range(dfa.q)]
    run = DfaRun(S, [])
    for x in bits:
        S = st.step(b, S, x)
        if markers:
            run.markers.append(st.accept(b, S))
        if trace:
            run.trace.append(S)
    run.final = S
    return run


def match(b: CircuitBuilder, dfa: Dfa, bits: Sequence[Bit]) -> Bit:
    r = run_dfa(b, dfa, bits)
    return b.xor_many(r.final[j] for j in sorted(dfa.accepting))


def end_markers(b: CircuitBuilder, dfa: Dfa, bits: Sequence[Bit]) -> list[Bit]:
    return run_dfa(b, dfa, bits, markers=True).markers


def begin_markers(b: CircuitBuilder, rev_dfa: Dfa, bits: Sequence[Bit]) -> list[Bit]:
    """Run the reversed-pattern DFA from the last bit to the first."""
    marks = run_dfa(b, rev_dfa, list(reversed(bits)), markers=True).markers
    return marks[::-1]


def match_mask(b: CircuitBuilder, ends: Sequence[Bit], begins: Sequence[Bit]) -> list[Bit]:
    """m_1 = b_1;  m_i = b_i | (!e_{i-1} & m_{i-1})."""
    if len(ends) != len(begins):
        raise ValueError("marker sequences differ in length")
    if not begins:
        return []
    m = [begins[0]]
    for i in range(1, len(begins)):
        m.append(b.or_(begins[i], b.and_(b.not_(ends[i - 1]), m[i - 1])))
    return m


@dataclass(frozen=True)
class CompiledPattern:
    """Forward search DFA (end markers) and reversed search DFA (begin markers)."""

    pattern: str
    forward: Dfa
    backward: Dfa
    boundary: bool = False


def compile_regex(pattern: str, *, search: bool = False, contain: bool = False,
                  reverse_pattern: bool = False, allow_nul: bool = False) -> Dfa:
    """Minimized bit-level DFA for ``pattern``.

    ``search`` prefixes ``(any byte)*`` so the DFA accepts at the end of every
    match; ``contain`` additionally appends ``(any byte)*``.  A reversed
    pattern is expanded least-significant bit first, matching the order in
    which a backward pass sees the bits of each byte.
    """
    node = parse(pattern, allow_nul=allow_nul)
    return compile_node(node, search=search, contain=contain, reverse_pattern=reverse_pattern)


def compile_node(node: Node, *, search: bool = False, contain: bool = False,
                 reverse_pattern: bool = False) -> Dfa:
    if reverse_pattern:
        node = reverse(node)
    if contain:
        node = contains(node)
    elif search:
        node = search_prefix(node)
    return to_dfa(node, msb_first=not reverse_pattern)


_PATTERN_CACHE: dict[tuple[str, bool], CompiledPattern] = {}


def compile_pattern(pattern: str, *, boundary: bool = False) -> CompiledPattern:
    key = (pattern, boundary)
    hit = _PATTERN_CACHE.get(key)
    if hit is not None:
        return hit
    node = parse(pattern)
    if boundary:
        # both passes see both boundaries, so every begin marker and every
        # end marker belongs to a fully delimited match
        node = Cat((BOUNDARY, node, BOUNDARY))
    cp = CompiledPattern(pattern,
                         compile_node(node, search=True),
                         compile_node(node, search=True, reverse_pattern=True),
                         boundary)
    _PATTERN_CACHE[key] = cp
    return cp


def pattern_markers(b: CircuitBuilder, cp: CompiledPattern,
                    bits: Sequence[Bit]) -> tuple[list[Bit], list[Bit]]:
    """(end markers, begin markers) of ``cp`` over ``bits``."""
    n = len(bits)
    if not cp.boundary:
        return end_markers(b, cp.forward, bits), begin_markers(b, cp.backward, bits)
    pad = [ZERO] * 8
    # a virtual 0x00 byte on each side lets matches touch the field edges;
    # the boundary bytes are then shifted out of the markers
    ext = pad + list(bits) + pad
    ends = end_markers(b, cp.forward, ext)[16:]
    begins = begin_markers(b, cp.backward, ext)[:n]
    return ends, begins


def extract_bits(b: CircuitBuilder, cp: CompiledPattern, bits: Sequence[Bit], *,
                 first_only: bool = False) -> list[Bit]:
    """Keep matching characters, zero everything else (y_i = m_i & x_i)."""
    ends, begins = pattern_markers(b, cp, bits)
    mask = match_mask(b, ends, begins)
    if first_only:
        mask = _first_run(b, mask, ends)
    return [b.and_(m, x) for m, x in zip(mask, bits)]


def _first_run(b: CircuitBuilder, mask: list[Bit], ends: list[Bit]) -> list[Bit]:
    done: Bit = ZERO
    out = []
    for m, e in zip(mask, ends):
        out.append(b.and_(m, b.not_(done)))
        done = b.or_(done, b.and_(e, m))
    return out


def replace_bits(b: CircuitBuilder, cp: CompiledPattern, bits: Sequence[Bit],
                 mode: str = "delete") -> list[Bit]:
    """Delete matches (y_i = !m_i & x_i) or, in ``placeholder`` mode, also set
    the first character of every match to 0xff."""
    ends, begins = pattern_markers(b, cp, bits)
    mask = match_mask(b, ends, begins)
    kept = [b.and_(b.not_(m), x) for m, x in zip(mask, bits)]
    if mode == "delete":
        return kept
    if mode != "placeholder":
        raise ValueError(f"unknown replace mode {mode!r}")
    # a begin marker inside a run that is still open does not start a new
    # match (patterns like a+b have overlapping begins)
    starts = [begins[0] if begins else ZERO]
    for i in range(1, len(begins)):
        starts.append(b.and_(begins[i], b.not_(b.and_(b.not_(ends[i - 1]), mask[i - 1]))))
    return [b.or_(starts[i - i % 8], y) for i, y in enumerate(kept)]


# -- standalone circuits over n trigger bits ----------------------------------

def _fresh(n: int) -> tuple[CircuitBuilder, list[int]]:
    b = CircuitBuilder()
    return b, list(b.add_input(n, "trigger"))


def dfa_to_match_circuit(dfa: Dfa, n: int) -> Circuit:
    if n < 1:
        raise ValueError("input length must be positive")
    b, x = _fresh(n)
    return b.build([match(b, dfa, x)])


def build_end_markers(dfa: Dfa, n: int) -> Circuit:
    b, x = _fresh(n)
    return b.build(end_markers(b, dfa, x))


def build_begin_markers(pattern: str, n: int) -> Circuit:
    b, x = _fresh(n)
    return b.build(begin_markers(b, compile_pattern(pattern).backward, x))


def build_match_mask(n: int) -> Circuit:
    """Mask circuit over 2n inputs: end markers e_1..e_n then begin markers b_1..b_n."""
    b, w = _fresh(2 * n)
    return b.build(match_mask(b, w[:n], w[n:]))


def build_extract_circuit(pattern: str, n: int, *, boundary: bool = False,
                          first_only: bool = False) -> Circuit:
    b, x = _fresh(n)
    return b.build(extract_bits(b, compile_pattern(pattern, boundary=boundary), x,
                                first_only=first_only))


def build_replace_circuit(pattern: str, n: int, mode: str = "delete") -> Circuit:
    b, x = _fresh(n)
    return b.build(replace_bits(b, compile_pattern(pattern), x, mode))

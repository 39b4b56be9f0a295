"""Regex AST -> byte DFA -> minimized DFA over the binary alphabet."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .parser import ALL, Alt, Cat, Chars, Node, Star, char_sets


@dataclass(frozen=True)
class Dfa:
    """Total DFA over ``{0, 1}``.

    States are ``0 .. q-1`` here; :meth:`dump` prints them 1-based.
    ``delta[s] = (next_on_0, next_on_1)``.
    """

    delta: tuple[tuple[int, int], ...]
    start: int
    accepting: frozenset

    @property
    def q(self) -> int:
        return len(self.delta)

    def run(self, bits: Iterable[int]) -> list[int]:
        """States after each input bit."""
        s = self.start
        out = []
        for b in bits:
            s = self.delta[s][b]
            out.append(s)
        return out

    def accepts(self, bits: Iterable[int]) -> bool:
        s = self.start
        for b in bits:
            s = self.delta[s][b]
        return s in self.accepting

    def dead_states(self) -> frozenset:
        """Non-accepting states that can never reach an accepting state."""
        preds: list[list[int]] = [[] for _ in range(self.q)]
        for s, (t0, t1) in enumerate(self.delta):
            preds[t0].append(s)
            preds[t1].append(s)
        live = set(self.accepting)
        todo = deque(self.accepting)
        while todo:
            t = todo.popleft()
            for s in preds[t]:
                if s not in live:
                    live.add(s)
                    todo.append(s)
        return frozenset(set(range(self.q)) - live)

    def dump(self) -> str:
        lines = [f"# q={self.q} start={self.start + 1}"]
        for s, (t0, t1) in enumerate(self.delta):
            mark = "*" if s in self.accepting else " "
            lines.append(f"{mark}{s + 1}: 0->{t0 + 1} 1->{t1 + 1}")
        return "\n".join(lines) + "\n"


# -- Thompson NFA -----------------------------------------------------------

class _Nfa:
    def __init__(self) -> None:
        self.eps: list[list[int]] = []
        self.edges: list[list[tuple[int, int]]] = []  # (charset id, target)

    def new(self) -> int:
        self.eps.append([])
        self.edges.append([])
        return len(self.eps) - 1


def _thompson(node: Node, nfa: _Nfa, set_ids: dict) -> tuple[int, int]:
    if isinstance(node, Chars):
        s, t = nfa.new(), nfa.new()
        nfa.edges[s].append((set_ids[node.chars], t))
        return s, t
    if isinstance(node, Cat):
        s = t = nfa.new()
        for item in node.items:
            a, b = _thompson(item, nfa, set_ids)
            nfa.eps[t].append(a)
            t = b
        return s, t
    if isinstance(node, Alt):
        s, t = nfa.new(), nfa.new()
        for item in node.items:
            a, b = _thompson(item, nfa, set_ids)
            nfa.eps[s].append(a)
            nfa.eps[b].append(t)
        return s, t
    s, t = nfa.new(), nfa.new()
    a, b = _thompson(node.item, nfa, set_ids)
    nfa.eps[s] += [a, t]
    nfa.eps[b] += [a, t]
    return s, t


def _closure(nfa: _Nfa, states: Iterable[int]) -> frozenset:
    seen = set(states)
    stack = list(seen)
    while stack:
        s = stack.pop()
        for t in nfa.eps[s]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return frozenset(seen)


def byte_dfa(node: Node) -> tuple[list[list[int]], int, set]:
    """Subset construction; returns (table[state][byte], start, accepting)."""
    sets = sorted(char_sets(node), key=sorted)
    set_ids = {s: i for i, s in enumerate(sets)}
    # byte classes: bytes that belong to exactly the same charsets
    sig: dict[tuple, list[int]] = {}
    for byte in range(256):
        sig.setdefault(tuple(byte in s for s in sets), []).append(byte)
    classes = list(sig.values())
    class_members = [frozenset(i for i, s in enumerate(sets) if c[0] in s) for c in classes]

    nfa = _Nfa()
    start, final = _thompson(node, nfa, set_ids)
    d0 = _closure(nfa, [start])
    index = {d0: 0}
    order = [d0]
    table: list[list[int]] = []
    i = 0
    while i < len(order):
        cur = order[i]
        row_by_class = []
        for members in class_members:
            move = [t for s in cur for sid, t in nfa.edges[s] if sid in members]
            nxt = _closure(nfa, move)
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
            row_by_class.append(index[nxt])
        row = [0] * 256
        for cls, target in zip(classes, row_by_class):
            for byte in cls:
                row[byte] = target
        table.append(row)
        i += 1
    accepting = {k for k, st in enumerate(order) if final in st}
    return table, 0, accepting


# -- Hopcroft minimization ---------------------------------------------------

def minimize(table: Sequence[Sequence[int]], start: int, accepting: set,
             alphabet: int) -> tuple[list[list[int]], int, set]:
    """Hopcroft partition refinement on the part reachable from ``start``."""
    reach = {start}
    todo = [start]
    while todo:
        s = todo.pop()
        for t in table[s]:
            if t not in reach:
                reach.add(t)
                todo.append(t)
    states = sorted(reach)
    inv: dict[tuple[int, int], list[int]] = {}
    for s in states:
        for a in range(alphabet):
            inv.setdefault((table[s][a], a), []).append(s)

    acc = frozenset(s for s in states if s in accepting)
    rej = frozenset(s for s in states if s not in accepting)
    partition = [p for p in (acc, rej) if p]
    block_of = {}
    for bi, blk in enumerate(partition):
        for s in blk:
            block_of[s] = bi
    work = deque()
    if len(partition) == 2:
        smaller = 0 if len(partition[0]) <= len(partition[1]) else 1
        for a in range(alphabet):
            work.append((smaller, a))
    in_work = set(work)
    while work:
        bi, a = work.popleft()
        in_work.discard((bi, a))
        splitter = partition[bi]
        x: set = set()
        for t in splitter:
            x.update(inv.get((t, a), ()))
        if not x:
            continue
        touched: dict[int, set] = {}
        for s in x:
            touched.setdefault(block_of[s], set()).add(s)
        for yi, inter in touched.items():
            y = partition[yi]
            if len(inter) == len(y):
                continue
            rest = y - inter
            partition[yi] = frozenset(inter)
            new_i = len(partition)
            partition.append(frozenset(rest))
            for s in rest:
                block_of[s] = new_i
            for c in range(alphabet):
                if (yi, c) in in_work:
                    work.append((new_i, c))
                    in_work.add((new_i, c))
                else:
                    pick = yi if len(inter) <= len(rest) else new_i
                    work.append((pick, c))
                    in_work.add((pick, c))
    # renumber blocks in BFS order from the start state for stable output
    order = [block_of[start]]
    seen = {order[0]}
    k = 0
    while k < len(order):
        rep = next(iter(partition[order[k]]))
        for a in range(alphabet):
            b = block_of[table[rep][a]]
            if b not in seen:
                seen.add(b)
                order.append(b)
        k += 1
    new_id = {b: i for i, b in enumerate(order)}
    new_table = []
    new_acc = set()
    for b in order:
        rep = next(iter(partition[b]))
        new_table.append([new_id[block_of[table[rep][a]]] for a in range(alphabet)])
        if rep in accepting:
            new_acc.add(new_id[b])
    return new_table, 0, new_acc


# -- byte DFA -> bit DFA ----------------------------------------------------

def expand_to_bits(table: Sequence[Sequence[int]], start: int, accepting: set,
                   msb_first: bool = True) -> Dfa:
    """Replace each byte transition by an 8-level binary trie, then minimize."""
    n = len(table)
    bit_table: list[list[int]] = [[0, 0] for _ in range(n)]
    for s in range(n):
        row = table[s]
        # nodes[d] maps a d-bit prefix to its bit-DFA state
        level = {0: s}
        for depth in range(8):
            nxt = {}
            for prefix, node in level.items():
                for bit in (0, 1):
                    p = (prefix << 1) | bit
                    if depth == 7:
                        byte = p if msb_first else _reverse8(p)
                        bit_table[node][bit] = row[byte]
                    else:
                        child = len(bit_table)
                        bit_table.append([0, 0])
                        bit_table[node][bit] = child
                        nxt[p] = child
            level = nxt
    t, st, acc = minimize(bit_table, start, set(accepting), 2)
    return Dfa(tuple((a, b) for a, b in t), st, frozenset(acc))


def _reverse8(v: int) -> int:
    return int(f"{v:08b}"[::-1], 2)


def to_dfa(node: Node, *, msb_first: bool = True) -> Dfa:
    table, start, acc = byte_dfa(node)
    table, start, acc = minimize(table, start, acc, 256)
    return expand_to_bits(table, start, acc, msb_first=msb_first)


ANY_BYTE = Chars(ALL)


def search_prefix(node: Node) -> Node:
    """``(any byte)* node``: accept at the end of every match."""
    return Cat((Star(ANY_BYTE), node))


def contains(node: Node) -> Node:
    return Cat((Star(ANY_BYTE), node, Star(ANY_BYTE)))


__all__ = ["Dfa", "to_dfa", "byte_dfa", "minimize", "expand_to_bits",
           "search_prefix", "contains", "ANY_BYTE", "Alt"]

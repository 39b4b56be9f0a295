import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etap.circuit import ONE, ZERO, Circuit, CircuitBuilder, CircuitError, Gate, GateKind


def random_circuit(seed: int, n_in: int = 8, n_gates: int = 60, n_const: int = 0) -> Circuit:
    rng = random.Random(seed)
    b = CircuitBuilder()
    wires = list(b.add_input(n_in)) + list(b.add_input(n_const, "constant"))
    for _ in range(n_gates):
        kind = rng.choice(list(GateKind))
        a = rng.choice(wires)
        wires.append(b.add_gate(kind, a, rng.choice(wires)))
    return b.build(rng.sample(wires, min(len(wires), 10)))


def test_helpers_fold_constants_and_reuse():
    b = CircuitBuilder()
    x, y = b.add_input(2)
    assert b.and_(x, ZERO) is ZERO
    assert b.and_(x, ONE) == x
    assert b.xor(x, x) is ZERO
    assert b.xor(x, b.not_(x)) is ONE
    assert b.not_(b.not_(x)) == x
    assert b.and_(x, y) == b.and_(y, x)
    assert b.and_count == 1


def test_or_and_mux_cost_one_and():
    b = CircuitBuilder()
    s, p, q = b.add_input(3)
    c = b.build([b.or_(p, q), b.mux(s, p, q)])
    assert c.and_count == 2
    for bits in range(8):
        sv, pv, qv = (bits >> 2) & 1, (bits >> 1) & 1, bits & 1
        assert c.eval([sv, pv, qv]) == [pv | qv, pv if sv else qv]


def test_and_many_is_a_tree():
    b = CircuitBuilder()
    xs = list(b.add_input(9))
    c = b.build([b.and_many(xs), b.or_many(xs)])
    assert c.and_count == 16
    assert c.eval([1] * 9) == [1, 1]
    assert c.eval([0] * 9) == [0, 0]


def test_constant_outputs_materialize():
    b = CircuitBuilder()
    b.add_input(1)
    c = b.build([ONE, ZERO])
    assert c.eval([0]) == [1, 0] and c.eval([1]) == [1, 0]


def test_gc_size_estimate():
    c = random_circuit(3)
    assert c.stats().estimated_gc_bytes == 16 + 32 * c.and_count


def test_validation_errors():
    with pytest.raises(CircuitError):
        Circuit(1, 0, [Gate(GateKind.AND, 0, 5, 1)], [1])
    with pytest.raises(CircuitError):
        Circuit(1, 0, [Gate(GateKind.AND, 0, 0, 7)], [1])
    with pytest.raises(CircuitError):
        Circuit(1, 0, [], [3])
    b = CircuitBuilder()
    b.add_input(1, "constant")
    with pytest.raises(CircuitError):
        b.add_input(1, "trigger")
    with pytest.raises(CircuitError):
        b.add_gate(GateKind.AND, 0)
    with pytest.raises(CircuitError):
        random_circuit(1).eval([0])


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.lists(st.lists(st.integers(0, 1), min_size=10, max_size=10),
                                       min_size=1, max_size=20))
def test_eval_batch_matches_eval(seed, rows):
    c = random_circuit(seed, n_in=6, n_const=4)
    trig = [r[:6] for r in rows]
    cons = [r[6:] for r in rows]
    assert c.eval_batch(trig, cons) == [c.eval(t, k) for t, k in zip(trig, cons)]


def test_dump_lists_every_gate():
    c = random_circuit(5)
    lines = c.dump().splitlines()
    assert len(lines) == len(c.gates) + 2
    assert lines[-1].startswith("OUT ")

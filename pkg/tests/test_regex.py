import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etap.circuit import CircuitBuilder
from etap.regex import (RegexError, build_end_markers, build_extract_circuit, build_replace_circuit,
                        compile_pattern, compile_regex, dfa_to_match_circuit, parse, run_dfa)
from etap.regex.automata import byte_dfa, contains, minimize


def bits_of(s: bytes, n: int | None = None) -> list[int]:
    s = s if n is None else s.ljust(n, b"\0")
    return [(c >> (7 - k)) & 1 for c in s for k in range(8)]


def bytes_of(bits) -> bytes:
    return bytes(int("".join(map(str, bits[i:i + 8])), 2) for i in range(0, len(bits), 8))


PATTERNS = ["abc", "a|bc", "(ab)*c", "a+b?", "[a-c]{2,3}", r"\d+\.\d", "x.y", "[^ab]c", r"\w\s"]


@settings(max_examples=30)
@given(st.sampled_from(PATTERNS), st.lists(st.binary(max_size=6).map(
    lambda b: bytes(x % 8 + 0x61 if x % 3 else x % 10 + 0x30 for x in b)), min_size=1, max_size=20))
def test_dfa_agrees_with_re_fullmatch(pattern, strings):
    dfa = compile_regex(pattern)
    rx = re.compile(pattern.encode())
    for s in strings + [b"abc", b"abbc", b"ac", b"1.2", b"a c"]:
        assert dfa.accepts(bits_of(s)) == (rx.fullmatch(s) is not None), (pattern, s)


def test_byte_dfa_minimal_state_counts():
    # a search automaton for a word with no self-overlap needs len+1 states;
    # an exact match adds a dead state
    table, start, acc = minimize(*byte_dfa(contains(parse("http"))), 256)
    assert len(table) == 5
    table, start, acc = minimize(*byte_dfa(parse("abc")), 256)
    assert len(table) == 5


@pytest.mark.parametrize("bad", ["^a", "a$", "(?=a)", r"(a)\1", "a**", "(ab", "ab)", "[a", r"\p", "(?i)a",
                                 "[[:alpha:]]", "a{3,1}"])
def test_unsupported_syntax_is_rejected(bad):
    with pytest.raises(RegexError):
        compile_regex(bad)


def test_padding_byte_excluded_from_classes():
    assert not compile_regex(".").accepts(bits_of(b"\0"))
    assert compile_regex(".", allow_nul=True).accepts(bits_of(b"\0"))


@pytest.mark.parametrize("pattern", ["http", r"\$request", "(ab|cd)*e", "[0-9]{3}"])
def test_one_hot_state_vector(pattern):
    dfa = compile_regex(pattern, search=True)
    n = 8 * 6
    b = CircuitBuilder()
    x = list(b.add_input(n))
    run = run_dfa(b, dfa, x, keep_dead=True, trace=True)
    flat = [w for S in run.trace for w in S]
    c = b.build(flat)
    rng = random.Random(pattern)
    for _ in range(50):
        s = bytes(rng.choice(b"htpab0123cde$requst") for _ in range(6))
        out = c.eval(bits_of(s))
        for step in range(n):
            assert sum(out[step * dfa.q:(step + 1) * dfa.q]) == 1


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(PATTERNS + ["http", "mp4|avi|mov"]), st.integers(1, 24), st.booleans())
def test_match_circuit_and_bound(pattern, chars, search):
    dfa = compile_regex(pattern, search=search)
    n = 8 * chars
    c = dfa_to_match_circuit(dfa, n)
    assert c.and_count <= n * dfa.q
    rng = random.Random(chars)
    s = bytes(rng.choice(b"abc12") for _ in range(chars))
    assert c.eval(bits_of(s)) == [int(dfa.accepts(bits_of(s)))]


def test_end_markers_follow_match_ends():
    cp = compile_pattern("ab+")
    n = 10
    c = build_end_markers(cp.forward, 8 * n)
    s = b"xabbyab\0\0\0"
    marks = c.eval(bits_of(s))
    ends = {m.end() for i in range(n) for m in [re.compile(b"ab+").match(s, i)] if m}
    ends |= {e for e in range(n + 1) if any(re.fullmatch(b"ab+", s[a:e]) for a in range(e))}
    got = {k // 8 + 1 for k, v in enumerate(marks) if v and k % 8 == 7}
    assert got == ends


@pytest.mark.parametrize("pattern,alphabet", [("ab", b"abx"), (r"\$request", b"$requst "), ("a+b", b"ab "),
                                              (" ", b"a b")])
def test_extract_and_replace_agree_with_re(pattern, alphabet):
    N = 10
    rx = re.compile(pattern.encode())
    ext = build_extract_circuit(pattern, 8 * N)
    dele = build_replace_circuit(pattern, 8 * N)
    ph = build_replace_circuit(pattern, 8 * N, "placeholder")
    rng = random.Random(pattern)
    rows = [bytes(rng.choice(alphabet) for _ in range(rng.randint(0, N))) for _ in range(400)]
    inputs = [bits_of(r, N) for r in rows]
    for s, e, d, p in zip(rows, ext.eval_batch(inputs), dele.eval_batch(inputs), ph.eval_batch(inputs)):
        want = bytearray(N)
        for m in rx.finditer(s):
            want[m.start():m.end()] = s[m.start():m.end()]
        assert bytes_of(e) == bytes(want)
        assert bytes_of(d).replace(b"\0", b"") == rx.sub(b"", s)
        assert bytes_of(p).replace(b"\0", b"") == rx.sub(lambda _m: b"\xff", s)

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from etap.funclib import ConstSpec, ExprError, FieldSchema, SchemaError, TriggerSchema, compose_rule, parse_expr
from etap.funclib.schema import bits_int, int_bits, wrap32
from etap.harness.bench import micro_rules
from etap.harness.plaintap import first_delimited_match, plaintap_baseline

I32 = st.integers(-2**31, 2**31 - 1)


def ints(*names):
    return TriggerSchema(tuple(FieldSchema(n, "int32") for n in names))


def strs(n=12, *names):
    return TriggerSchema(tuple(FieldSchema(x, "string", n) for x in (names or ("S",))))


# AND-gate counts of the basic operations, from the textbook circuit shapes
# (constants are private inputs, so nothing folds):
#   x & y        1
#   x > n        32        one AND per bit of a ripple comparator
#   x * n        528+465   shift-and-add partial products (sum 1..32) plus
#                          truncated ripple adders (sum 1..30)
#   x == t       799       800 XNORs into a 799-AND tree
#   m.lookup(x)  1590      10 x 79 key comparisons + 10 x 80 value selections
GOLDEN_AND = {"x & y": 1, "x > n": 32, "x * n": 993, "x == t": 799, "m.lookup(x)": 1590}


@pytest.mark.parametrize("label", sorted(GOLDEN_AND))
def test_basic_operation_and_counts(label):
    compiled = next(c for lab, c, _ in micro_rules() if lab == label)
    assert compiled.circuit.and_count == GOLDEN_AND[label]


def test_int_bit_roundtrip():
    for v in (0, 1, -1, 2**31 - 1, -2**31, 12345):
        assert bits_int(int_bits(v)) == v
    assert wrap32(2**31) == -2**31


ARITH = ["x[A] + x[B]", "x[A] - x[B]", "x[A] * x[B]", "-x[A]", "x[A] * 77", "x[A] / 7", "x[A] / -3",
         "x[A] + 5000 - x[B]"]
CMP = ["x[A] > x[B]", "x[A] < 5000", "x[A] >= x[B]", "x[A] <= -1", "x[A] == x[B]", "x[A] != 3"]


@pytest.fixture(scope="module")
def arith_rule():
    return compose_rule(CMP[0], {f"o{i}": e for i, e in enumerate(ARITH)}, ints("A", "B"))


@pytest.fixture(scope="module")
def cmp_rules():
    return [compose_rule(c, {}, ints("A", "B")) for c in CMP]


@settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(I32, I32)
def test_arithmetic_matches_plaintext(arith_rule, cmp_rules, a, b):
    rec = {"A": a, "B": b}
    assert arith_rule.eval_plain(rec) == plaintap_baseline(arith_rule, rec)
    for r in cmp_rules:
        assert r.eval_plain(rec) == plaintap_baseline(r, rec)


STRING_EXPRS = {
    "eq": 'x[S] == x[T]',
    "ne_lit": 'x[S] != "ab"',
    "starts": 'x[S].startwith("ab")',
    "ends": 'x[S].endwith("b|cd")',
    "contains": 'x[S].contain("a.c")',
}
STRING_OUTS = {
    "trunc": "x[S].truncate(4)",
    "lower": "x[S].tolower()",
    "split": 'x[S].split("a", 1)',
    "repl": 'x[S].replace("b+")',
    "repl_to": 'x[S].replace("ab", "Z")',
    "dflt": 'x[U].default("none")',
}


@pytest.fixture(scope="module")
def string_rules():
    schema = TriggerSchema((FieldSchema("S", "string", 12), FieldSchema("T", "string", 12),
                            FieldSchema("U", "string", 6, optional=True)))
    return [compose_rule(p, STRING_OUTS, schema) for p in STRING_EXPRS.values()]


@settings(max_examples=80, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.text("abcdAB ", max_size=12), st.text("abcd", max_size=12), st.none() | st.text("xy", max_size=6))
def test_string_ops_match_plaintext(string_rules, s, t, u):
    rec = {"S": s, "T": t}
    if u is not None:
        rec["U"] = u
    for r in string_rules:
        assert r.eval_plain(rec) == plaintap_baseline(r, rec)


def test_null_checks_and_presence():
    schema = TriggerSchema((FieldSchema("P", "string", 8, optional=True),))
    r = compose_rule("x[P] != null", {"p": "x[P].replace(\" \")"}, schema)
    assert r.eval_plain({}) == (False, {"p": None})
    assert r.eval_plain({"P": "a b"}) == (True, {"p": b"ab"})


def test_extract_semantics():
    assert first_delimited_match(r"\d{3}", b"x 123 4567") == b"123"
    assert first_delimited_match(r"\d{3}", b"1234 567") == b"567"
    assert first_delimited_match(r"\d{3}", b"abc") == b""
    r = compose_rule("true", {"p": "x[S].extract_phone()"}, strs(24))
    for s in ("call 555-123-4567 now", "tel:(555) 123-4567", "no phone", "12345-555-123-4567"):
        assert r.eval_plain({"S": s}) == plaintap_baseline(r, {"S": s})


def test_lookup_and_constants():
    m = ConstSpec("m", "map", {"k1": "v-one", "k22": "v2"})
    r = compose_rule("x[S] == c", {"v": "m.lookup(x[S])"}, strs(4), [m, ConstSpec("c", "string", "k1")])
    assert r.eval_plain({"S": "k1"}) == (True, {"v": b"v-one"})
    assert r.eval_plain({"S": "k22"}) == (False, {"v": b"v2"})
    assert r.eval_plain({"S": "zz"}) == (False, {"v": b""})


@pytest.mark.parametrize("expr", ["x[S] +", "x[S].foo(", "(1", '"unterminated', "x[S] == == 1", "x[]"])
def test_syntax_errors(expr):
    with pytest.raises(ExprError):
        parse_expr(expr)


@pytest.mark.parametrize("pred", ["x[S] > 1", "x[S] + 1", "x[Q]", "x[S].split(x[S], 0)", "x[S] / x[S]",
                                  "x[S].nosuch()", 'x[S].replace("a*") == ""'])
def test_type_errors(pred):
    with pytest.raises(SchemaError):
        compose_rule(pred, {}, strs())


def test_schema_encoding_errors():
    schema = strs(3)
    with pytest.raises(SchemaError):
        schema.encode({"S": "toolong"})
    with pytest.raises(SchemaError):
        schema.encode({})
    with pytest.raises(SchemaError):
        schema.encode({"S": "a", "extra": 1})
    with pytest.raises(SchemaError):
        schema.encode({"S": "a\0"})
    with pytest.raises(SchemaError):
        ints("A").encode({"A": "1"})
    with pytest.raises(SchemaError):
        FieldSchema("S", "string", 0)

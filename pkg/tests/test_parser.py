from importlib import resources

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timebinsim.elements import Symbol
from timebinsim.errors import NetlistSyntaxError
from timebinsim.netlist import parse, pretty_print
from timebinsim.netlist.generate import random_document
from timebinsim.netlist.parser import DetectStmt, ElementStmt, RailDecl, format_value, tokenize


def golden_netlist():
    return resources.files("timebinsim.data").joinpath("link.net").read_text(encoding="utf-8")


def test_minimal_document():
    doc = parse("circuit c { rail a; }")
    assert doc.name == "c"
    assert doc.statements == (RailDecl(("a",)),)


def test_golden_netlist_detects_sixteen_decoder_rails():
    doc = parse(golden_netlist())
    detects = [s for s in doc.statements if isinstance(s, DetectStmt)]
    rails = [r for d in detects for r in d.rails]
    assert len(rails) == 16
    # two arms x two channels x two decoder outputs, each split into a delayed and a prompt copy
    assert {r.rsplit(".", 1)[0] for r in rails} == {f"{a}{c}.{o}" for a in "AB" for c in "12" for o in ("a'", "b'")}


def test_duplicate_rail():
    with pytest.raises(NetlistSyntaxError, match="duplicate rail 'a'") as exc:
        parse("circuit c { rail a; rail a; }")
    assert exc.value.line == 1


def test_element_statement_fields():
    doc = parse("circuit c { rail a; L1: noise a -> b theta=?t gamma=1 eta=0.5-0.25j; bs b, vac -> x, y; }")
    noise, bs = doc.statements[1:]
    assert noise == ElementStmt("noise", ("a",), ("b",), (("theta", Symbol("t")), ("gamma", 1), ("eta", 0.5 - 0.25j)), "L1")
    assert bs.inputs == ("b", None) and bs.label is None


@pytest.mark.parametrize(
    "text, value",
    [("3", 3), ("-3", -3), ("2.5", 2.5), ("-1e-3", -1e-3), ("1j", 1j), ("-2j", -2j), ("1+2j", 1 + 2j), ("-1-.5j", -1 - 0.5j)],
)
def test_numeric_literals(text, value):
    doc = parse(f"circuit c {{ rail a; phase a -> b phi={text}; }}")
    got = doc.statements[1].params[0][1]
    assert got == value and type(got) is type(value)


def test_comments_and_primes_in_names():
    doc = parse("// head\ncircuit c { /* block\n comment */ rail a'; hwp a' -> a'.x; }")
    assert doc.statements[1].outputs == ("a'.x",)


@pytest.mark.parametrize(
    "text, line, column, expected",
    [
        ("circuit c { rail a }", 1, 20, "';'"),
        ("circuit c {\n  rail a;\n  bs a -> ;\n}", 3, 11, "output rail"),
        ("circuit c { rail a; frob a -> b; }", 1, 26, "':'"),
        ("circuit c { rail a; phase a -> b phi=x; }", 1, 38, "number"),
        ("circuit c { rail a; }  extra", 1, 24, "end of input"),
        ("rail a;", 1, 1, "'circuit'"),
        ("circuit c { rail a;", 1, 20, "'}'"),
    ],
)
def test_syntax_errors_carry_location_and_expected_set(text, line, column, expected):
    with pytest.raises(NetlistSyntaxError) as exc:
        parse(text)
    err = exc.value
    assert (err.line, err.column) == (line, column)
    assert expected in err.expected
    assert f"line {line}" in str(err)


@pytest.mark.parametrize(
    "text, line, column",
    [("circuit c { rail a; $ }", 1, 21), ("circuit c {\n rail 1x; }", 2, 7), ("circuit c { /* open", 1, 13)],
)
def test_lexical_errors(text, line, column):
    with pytest.raises(NetlistSyntaxError) as exc:
        tokenize(text)
    assert (exc.value.line, exc.value.column) == (line, column)
    assert exc.value.expected == ()


def test_error_points_inside_offending_statement():
    text = "circuit c {\n  rail a;\n  bs a,\n     vac -> x y;\n}"
    with pytest.raises(NetlistSyntaxError) as exc:
        parse(text)
    assert exc.value.line == 4


@pytest.mark.parametrize("v", [0, -7, 0.1, -2.5e-17, 1e300, 1j, -0.0 - 3j, 0.3 + 0.1j, Symbol("x.y")])
def test_format_value_reparses(v):
    doc = parse(f"circuit c {{ rail a; phase a -> b phi={format_value(v)}; }}")
    assert doc.statements[1].params[0][1] == v


def test_pretty_print_is_a_fixed_point_on_golden():
    doc = parse(golden_netlist())
    text = pretty_print(doc)
    assert parse(text) == doc
    assert pretty_print(parse(text)) == text


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_round_trip_on_generated_documents(seed, shuffle):
    doc = random_document(np.random.default_rng(seed), shuffle=shuffle)
    assert parse(pretty_print(doc)) == doc

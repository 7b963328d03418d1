import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tanglemachine.algebra import HALF, TWO, Fox3, Fox3Op
from tanglemachine.diagram import (
    Builder,
    DiagramError,
    Interaction,
    ParseError,
    TangleMachine,
    canonicalize,
    close,
    concat,
    parse,
    rename,
    serialize,
    structurally_equal,
    to_dot,
    validate,
)
from tanglemachine.rewrite import random_machine


def chain(name="chain") -> TangleMachine:
    b = Builder(name, "linear")
    x = b.input("x")
    k = b.const(Fraction(3), "k")
    y = b.act1(k, HALF, x, "y")
    b.output(b.act1(k, TWO, y, "z"))
    return b.build()


def test_builder_records_structure():
    m = chain()
    assert m.inputs == (0,)
    assert m.outputs == (3,)
    assert m.constants == {1: Fraction(3)}
    assert m.register_named("y") == 2
    assert m.ops() == {HALF, TWO}


def test_validate_flags_multiply_produced():
    m = TangleMachine(
        registers=(0, 1, 2, 3),
        interactions=(Interaction(1, HALF, ((0, 3),)), Interaction(1, HALF, ((2, 3),))),
        inputs=(0, 2),
    )
    assert "multiply-produced register 3" in validate(m).violations


def test_validate_flags_multiply_consumed():
    m = TangleMachine(
        registers=(0, 1, 2, 3),
        interactions=(Interaction(1, HALF, ((0, 2), (0, 3))),),
        inputs=(0, 1),
    )
    assert "multiply-consumed register 0" in validate(m).violations


def test_validate_flags_produced_input_and_unknown():
    m = TangleMachine(registers=(0, 1), interactions=(Interaction(7, HALF, ((1, 0),)),), inputs=(0,))
    v = validate(m).violations
    assert "input register 0 is produced inside the machine" in v
    assert any("unknown register 7" in s for s in v)


def test_builder_refuses_invalid():
    b = Builder()
    x = b.input()
    b.interactions.append(Interaction(x, HALF, ((x, x),)))
    with pytest.raises(DiagramError):
        b.build()


def test_text_round_trip():
    m = chain()
    text = serialize(m)
    assert serialize(parse(text)) == text
    assert structurally_equal(parse(text), m)


def test_output_order_survives_round_trip():
    b = Builder("swap", "fox3")
    x, y = b.input(), b.input()
    u = b.act1(y, Fox3Op(), x)
    v = b.act1(x, Fox3Op(), y)
    b.output(v, u)
    m = b.build()
    assert "order out" in serialize(m)
    assert parse(serialize(m)).outputs == canonicalize(m).outputs


@pytest.mark.parametrize(
    "text, line",
    [
        ("machine m\nreg 0 in\nreg 0\n", 3),
        ("reg 0 in\nreg 1 sideways\n", 2),
        ("reg 0 in\nreg 1 out\ninter 0 lin:x 0->1\n", 3),
        ("reg 0 in\nfrobnicate\n", 2),
        ("reg 0 in\nreg 1 in\nreg 2 out\nwye mid 0 1 -> 2\n", 4),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.line == line


def test_parse_rejects_invalid_machine():
    with pytest.raises(ParseError, match="multiply-produced"):
        parse("reg 0 in\nreg 1 in\nreg 2 out\ninter 1 lin:2 0->2\ninter 0 lin:2 1->2\n")


def test_rename_and_canonicalize_are_stable():
    m = chain()
    shuffled = rename(m, {0: 10, 1: 11, 2: 12, 3: 13})
    assert serialize(shuffled) == serialize(m)
    c = canonicalize(m)
    assert canonicalize(c) == c


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_random_machines_round_trip(seed):
    m = random_machine(random.Random(seed), "linear", wye_prob=0.2)
    assert validate(m).ok
    assert serialize(parse(serialize(m))) == serialize(m)


def test_concat_binds_outputs_to_inputs():
    a, b = chain("a"), chain("b")
    m = concat(a, b, [(a.outputs[0], b.inputs[0])])
    assert len(m.inputs) == 1 and len(m.outputs) == 1
    assert len(m.interactions) == 4


def test_concat_rejects_bad_binding():
    a, b = chain("a"), chain("b")
    with pytest.raises(DiagramError):
        concat(a, b, [(a.inputs[0], b.inputs[0])])


def test_close_feeds_back():
    m = chain()
    c = close(m, [(m.outputs[0], m.inputs[0])])
    assert c.inputs == () and c.outputs == ()
    with pytest.raises(DiagramError):
        close(m, [(m.inputs[0], m.outputs[0])])


def test_dot_export_mentions_every_interaction():
    b = Builder("dot", "fox3")
    x, y, z = b.input("x"), b.input("y"), b.input("z")
    b.output(b.wye("min", z, b.act1(y, Fox3Op(), x)))
    m = b.build()
    dot = to_dot(m)
    assert dot.startswith('digraph "dot"')
    assert dot.rstrip().endswith("}")
    assert "fox3" in dot and "min" in dot


def test_belief_constants_parse():
    m = parse("machine b\nquagma belief\nreg 0 in\nreg 1\nreg 2 out\nconst 1 1/2|1/2\ninter 1 belief 0->2\n")
    assert str(m.constants[1]) == "1/2|1/2"


def test_fox3_constant_literal():
    m = parse("reg 0 in\nreg 1\nreg 2 out\nconst 1 f2\ninter 1 fox3 0->2\n")
    assert m.constants[1] == Fox3(2)

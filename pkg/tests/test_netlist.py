import pytest

from phaselatch.errors import ParseError
from phaselatch.logic import D_LATCH_NETLIST, FULL_ADDER_NETLIST
from phaselatch.netlist import parse_netlist


def test_parse_full_adder():
    net = parse_netlist(FULL_ADDER_NETLIST)
    assert net.inputs == ("a", "b", "cin")
    assert net.outputs == ("sum", "cout")
    assert not net.is_sequential


def test_parse_latch():
    net = parse_netlist(D_LATCH_NETLIST)
    assert net.is_sequential
    assert net.latches[0].q == "q" and net.latches[0].d == "qn"


def test_feedback_through_latch_is_allowed():
    parse_netlist("input d\nlatch q(n, d)\nn = NOT(q)\n")


@pytest.mark.parametrize("text, kind, line, col", [
    ("input a\ny = XOR(a, a)\n", "SyntaxError", 2, 5),
    ("input a\ny = MAJ(a, a)\n", "SyntaxError", 2, 5),
    ("input a\ny = NOT(a)\ny = NOT(a)\n", "MultipleDrivers", 3, 1),
    ("input a\ny = MAJ(a, b, a)\n", "Undriven", 2, 12),
    ("input a\noutput z\ny = NOT(a)\n", "Undriven", 2, 8),
    ("input a\n", "EmptyNetwork", 1, 1),
    ("x = NOT(y)\ny = NOT(x)\n", "CombinationalCycle", 1, 1),
    ("one = CONST 2\n", "SyntaxError", 1, 13),
    ("  what is this\n", "SyntaxError", 1, 3),
])
def test_parse_errors(text, kind, line, col):
    with pytest.raises(ParseError) as exc:
        parse_netlist(text)
    assert exc.value.kind == kind
    assert (exc.value.line, exc.value.column) == (line, col)


def test_comments_and_blank_lines():
    net = parse_netlist("# header\n\ninput a  # the input\ny = NOT(a)\n")
    assert len(net.gates) == 1

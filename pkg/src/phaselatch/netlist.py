"""Parser for the gate netlist text format.

::

    input a, b, cin
    output sum, cout
    latch q(d, en)
    cout = MAJ(a, b, cin)
    n = NOT(cout)
    k = CONST 1

``#`` starts a comment.  Names are identifiers.
"""
from __future__ import annotations

import re

from .errors import CyclicNetwork, ParseError
from .logic import Gate, GateNetwork, LatchDecl

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_DECL = re.compile(rf"^(input|output)\s+({_IDENT}(?:\s*,\s*{_IDENT})*)\s*$")
_LATCH = re.compile(rf"^latch\s+({_IDENT})\s*\(\s*({_IDENT})\s*,\s*({_IDENT})\s*\)\s*$")
_ASSIGN = re.compile(rf"^({_IDENT})\s*=\s*(.+?)\s*$")
_CALL = re.compile(r"^(MAJ|NOT)\s*\(\s*(.*?)\s*\)$")
_CONST = re.compile(r"^CONST\s+(\S+)$")


def _col(raw: str, token: str) -> int:
    idx = raw.find(token)
    return idx + 1 if idx >= 0 else 1


def parse_netlist(text: str) -> GateNetwork:
    inputs, outputs, latches, gates = [], [], [], []
    where: dict[str, tuple[int, int]] = {}
    driven: dict[str, int] = {}

    def drive(name, lineno, raw):
        if name in driven:
            raise ParseError("MultipleDrivers", f"node {name!r} already driven on line {driven[name]}",
                             lineno, _col(raw, name), name)
        driven[name] = lineno

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _DECL.match(line)
        if m:
            names = [n.strip() for n in m.group(2).split(",")]
            if m.group(1) == "input":
                for n in names:
                    drive(n, lineno, raw)
                inputs += names
            else:
                outputs += [(n, lineno, _col(raw, n)) for n in names]
            continue
        m = _LATCH.match(line)
        if m:
            q, d, en = m.groups()
            drive(q, lineno, raw)
            latches.append(LatchDecl(q, d, en, lineno))
            for n in (d, en):
                where.setdefault(n, (lineno, _col(raw, n)))
            continue
        m = _ASSIGN.match(line)
        if not m:
            raise ParseError("SyntaxError", "expected a declaration or 'name = GATE(...)'",
                             lineno, len(raw) - len(raw.lstrip()) + 1, line)
        out, rhs = m.groups()
        if out in ("input", "output", "latch"):
            raise ParseError("SyntaxError", "reserved word used as node name", lineno, 1, out)
        call = _CALL.match(rhs)
        const = _CONST.match(rhs)
        if call:
            kind = call.group(1)
            args = [a.strip() for a in call.group(2).split(",")] if call.group(2) else []
            want = 3 if kind == "MAJ" else 1
            if len(args) != want or not all(re.fullmatch(_IDENT, a) for a in args):
                raise ParseError("SyntaxError", f"{kind} takes {want} node name(s)",
                                 lineno, _col(raw, kind), rhs)
            for a in args:
                where.setdefault(a, (lineno, _col(raw, a)))
            drive(out, lineno, raw)
            gates.append(Gate(kind, tuple(args), out, lineno))
        elif const:
            if const.group(1) not in ("0", "1"):
                raise ParseError("SyntaxError", "CONST takes 0 or 1", lineno,
                                 _col(raw, const.group(1)), const.group(1))
            drive(out, lineno, raw)
            gates.append(Gate("CONST" + const.group(1), (), out, lineno))
        else:
            raise ParseError("SyntaxError", "unknown gate; expected MAJ(...), NOT(...) or CONST 0|1",
                             lineno, _col(raw, rhs), rhs)

    if not gates and not latches:
        raise ParseError("EmptyNetwork", "netlist defines no gates or latches", 1, 1)
    for name, (lineno, col) in where.items():
        if name not in driven:
            raise ParseError("Undriven", f"node {name!r} is used but never driven", lineno, col, name)
    for name, lineno, col in outputs:
        if name not in driven:
            raise ParseError("Undriven", f"output {name!r} is never driven", lineno, col, name)
    try:
        return GateNetwork(tuple(gates), tuple(inputs), tuple(n for n, _, _ in outputs),
                           tuple(latches))
    except CyclicNetwork as exc:
        loop = exc.args[1]
        first = next(g for g in gates if g.output == loop[0])
        raise ParseError("CombinationalCycle", f"combinational cycle {' -> '.join(loop)}",
                         first.line, 1, loop[0]) from None

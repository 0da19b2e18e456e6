"""Gate-level phase-logic simulation over {NOT, MAJ}.

Gates compute on phasors; node values are classified back to logic levels
when read out.  Latch outputs act as sources during a combinational pass, so
feedback through a latch is legal while a purely combinational loop is not.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CyclicNetwork, LatchContractViolation, UnassignedInput
from .phasor import ONE, ZERO, LogicLevel, Phasor, classify, encode, phasor_maj3, phasor_not

GATE_ARITY = {"NOT": 1, "MAJ": 3, "CONST0": 0, "CONST1": 0}


@dataclass(frozen=True)
class Gate:
    kind: str
    inputs: tuple
    output: str
    line: int | None = None


@dataclass(frozen=True)
class LatchDecl:
    q: str
    d: str
    en: str
    line: int | None = None


@dataclass(frozen=True)
class GateNetwork:
    gates: tuple
    inputs: tuple = ()
    outputs: tuple = ()
    latches: tuple = ()
    topo_order: tuple = field(default=None)

    def __post_init__(self):
        for g in self.gates:
            if g.kind not in GATE_ARITY or len(g.inputs) != GATE_ARITY[g.kind]:
                raise ValueError(f"bad gate {g}")
        if self.topo_order is None:
            object.__setattr__(self, "topo_order", tuple(topological_order(self)))

    @property
    def nodes(self) -> tuple:
        seen = dict.fromkeys(self.inputs)
        for l in self.latches:
            seen.setdefault(l.q)
        for g in self.gates:
            for n in g.inputs:
                seen.setdefault(n)
            seen.setdefault(g.output)
        return tuple(seen)

    @property
    def is_sequential(self) -> bool:
        return bool(self.latches)


def topological_order(net: GateNetwork) -> list[int]:
    """Gate indices in evaluation order; raises CyclicNetwork with the loop."""
    driver = {g.output: k for k, g in enumerate(net.gates)}
    state = {}
    order = []

    def visit(k, path):
        st = state.get(k)
        if st == 2:
            return
        if st == 1:
            names = [net.gates[j].output for j in path]
            loop = names[names.index(net.gates[k].output):] + [net.gates[k].output]
            raise CyclicNetwork(" -> ".join(loop), loop)
        state[k] = 1
        for n in net.gates[k].inputs:
            if n in driver:
                visit(driver[n], path + [k])
        state[k] = 2
        order.append(k)

    for k in range(len(net.gates)):
        visit(k, [])
    return order


def _gate_value(kind, args):
    if kind == "NOT":
        return phasor_not(args[0])
    if kind == "MAJ":
        return phasor_maj3(*args)
    return encode(ONE if kind == "CONST1" else ZERO)


def eval_phasors(net: GateNetwork, inputs: dict, latch_state: dict | None = None) -> dict:
    """Phasor value of every node after one zero-delay pass."""
    vals: dict[str, Phasor] = {}
    for name in net.inputs:
        if name not in inputs:
            raise UnassignedInput(f"primary input {name!r} has no value")
        v = inputs[name]
        vals[name] = v if isinstance(v, Phasor) else encode(LogicLevel.of(v))
    latch_state = latch_state or {}
    for l in net.latches:
        vals[l.q] = encode(LogicLevel.of(latch_state.get(l.q, ZERO)))
    for k in net.topo_order:
        g = net.gates[k]
        vals[g.output] = _gate_value(g.kind, [vals[n] for n in g.inputs])
    return vals


def eval_network(net: GateNetwork, inputs: dict, latch_state: dict | None = None,
                 ref_phase: float = 0.0) -> dict:
    """Logic level of every node."""
    return {k: classify(p, ref_phase) for k, p in eval_phasors(net, inputs, latch_state).items()}


def step_network(net: GateNetwork, inputs: dict, latch_state: dict | None = None):
    """One clock phase: evaluate, then update enabled latches.  Returns (values, new_state)."""
    state = {l.q: LogicLevel.of((latch_state or {}).get(l.q, ZERO)) for l in net.latches}
    vals = eval_network(net, inputs, state)
    new = dict(state)
    for l in net.latches:
        if vals[l.en] is ONE:
            new[l.q] = vals[l.d]
    return vals, new


# ---------------------------------------------------------------------------
# gated D latch and the full-adder state machine

@dataclass
class GatedDLatch:
    """Q follows D while EN is ONE and holds while EN is ZERO.

    The gate wiring is MAJ(MAJ(D, EN, 0), MAJ(D, NOT EN, 1), Q): with EN = 1
    the first two inputs both equal D; with EN = 0 they are 0 and 1 and cancel,
    leaving the feedback.
    """

    state: LogicLevel = ZERO

    def wiring(self, d: Phasor, en: Phasor) -> Phasor:
        i1 = phasor_maj3(d, en, encode(ZERO))
        i2 = phasor_maj3(d, phasor_not(en), encode(ONE))
        return phasor_maj3(i1, i2, encode(self.state))


def latch_step(latch: GatedDLatch, D, EN) -> LogicLevel:
    D, EN = LogicLevel.of(D), LogicLevel.of(EN)
    q = classify(latch.wiring(encode(D), encode(EN)))
    expected = D if EN is ONE else latch.state
    if q is not expected:
        raise LatchContractViolation(f"wiring gave {q.name}, contract {expected.name}")
    latch.state = q
    return q


FULL_ADDER_NETLIST = """\
# full adder from {NOT, MAJ}
input a, b, cin
output sum, cout
cout = MAJ(a, b, cin)
ncout = NOT(cout)
ncin = NOT(cin)
m = MAJ(a, b, ncin)
sum = MAJ(ncout, cin, m)
"""

XOR_NETLIST = """\
# XOR via AND(x, y) = MAJ(0, x, y) and OR(x, y) = MAJ(1, x, y)
input a, b
output y
zero = CONST 0
one = CONST 1
na = NOT(a)
nb = NOT(b)
t1 = MAJ(zero, a, nb)
t2 = MAJ(zero, na, b)
y = MAJ(one, t1, t2)
"""

D_LATCH_NETLIST = """\
input d, en
output q
latch q(qn, one)
zero = CONST 0
one = CONST 1
nen = NOT(en)
i1 = MAJ(d, en, zero)
i2 = MAJ(d, nen, one)
qn = MAJ(i1, i2, q)
"""


def _full_adder():
    from .netlist import parse_netlist

    return parse_netlist(FULL_ADDER_NETLIST)


@dataclass
class FullAdderFSM:
    """Serial adder: the carry is held in a master-slave latch pair."""

    master: GatedDLatch = field(default_factory=GatedDLatch)
    slave: GatedDLatch = field(default_factory=GatedDLatch)
    network: GateNetwork = field(default_factory=_full_adder, repr=False)

    @property
    def state_bit(self) -> LogicLevel:
        return self.slave.state

    def combinational(self, a, b) -> tuple[LogicLevel, LogicLevel]:
        vals = eval_network(self.network, {"a": a, "b": b, "cin": self.slave.state})
        return vals["sum"], vals["cout"]

    def clock_phase(self, clk, a, b) -> LogicLevel:
        """Apply one CLK phase with the inputs currently present; returns sum.

        CLK = ONE opens the master, CLK = ZERO opens the slave.  The two are
        never transparent together, so the state cannot race through.
        """
        clk = LogicLevel.of(clk)
        s, cout = self.combinational(a, b)
        latch_step(self.master, cout, clk)
        latch_step(self.slave, self.master.state, ~clk)
        return s


def fsm_step(fsm: FullAdderFSM, a, b) -> tuple[LogicLevel, LogicLevel]:
    """One full clock period.  Returns (sum, new_state)."""
    a, b = LogicLevel.of(a), LogicLevel.of(b)
    s = fsm.clock_phase(ONE, a, b)
    fsm.clock_phase(ZERO, a, b)
    return s, fsm.state_bit


def serial_add(x: int, y: int, width: int) -> int:
    """Add two integers bit-serially, LSB first, through a fresh FSM."""
    fsm = FullAdderFSM()
    total = 0
    for k in range(width + 1):
        s, _ = fsm_step(fsm, (x >> k) & 1, (y >> k) & 1)
        total |= int(s is ONE) << k
    return total

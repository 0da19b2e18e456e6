"""State-space models of the oscillator latches.

Two circuits are provided:

* ``build_two_tank``: the high-Q LC latch.  Tank 1 (L1, C1, R1) and tank 2
  (L2, C2, R2) are parallel RLC cells stacked in series.  The nonlinear
  element sits across the stack.  SYNC is a voltage source in series with L2
  and S1 either connects L1 to tank 1 or shorts it.
* ``build_ring``: a behavioral three-stage tanh-inverter ring with SYNC and
  logic current injections at stage 1.

Every model carries a numba-compiled right-hand side ``kernel(t, y, p)``.
The parameter vector ``p`` is piecewise constant between event times (switch
edges, injection edges); ``CircuitModel.params_at`` returns the vector valid on
the segment containing ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numba
import numpy as np

from .devices import (
    NonlinearResistorParams,
    SwitchParams,
    SyncSourceParams,
    dfdv_raw,
    f_raw,
)
from .errors import ConfigInvalid, UnknownComponent
from .phasor import LogicLevel

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Component:
    """A two-terminal element.  ``kind`` is one of R, C, L, N, V, I, S."""

    name: str
    kind: str
    storage: bool = False


@dataclass(frozen=True)
class Injection:
    """A scheduled logic injection at the reference frequency."""

    level: LogicLevel
    start: float
    duration: float
    amplitude: float

    def __post_init__(self):
        object.__setattr__(self, "level", LogicLevel.of(self.level))
        if self.duration <= 0 or self.amplitude < 0:
            raise ConfigInvalid("injection needs duration > 0 and amplitude >= 0")

    @property
    def phase_rad(self) -> float:
        return 0.0 if self.level is LogicLevel.ONE else math.pi


@dataclass(frozen=True, eq=False)
class CircuitModel:
    name: str
    state_names: tuple
    components: tuple
    initial_state: np.ndarray
    f_ref: float
    kernel: Callable
    base_params: np.ndarray
    segment_params: Callable[[float], np.ndarray]
    event_times: tuple = ()
    event_labels: tuple = ()
    jac_kernel: Callable | None = None
    readout_batch: Callable | None = None
    energy_fn: Callable | None = None
    main_tank: str | None = None
    supply: str | None = None
    config: object = None

    @property
    def dimension(self) -> int:
        return len(self.state_names)

    def params_at(self, t: float) -> np.ndarray:
        return self.segment_params(t)

    def derivative(self, t: float, y) -> np.ndarray:
        return self.kernel(float(t), np.asarray(y, dtype=float), self.params_at(t))

    def jacobian(self, t: float, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.jac_kernel is not None:
            return self.jac_kernel(float(t), y, self.params_at(t))
        return _fd_jacobian(self.derivative, t, y)

    @property
    def jacobian_for_kernel(self):
        """Jacobian with the kernel's (t, y, p) signature."""
        if self.jac_kernel is not None:
            return self.jac_kernel
        kernel = self.kernel

        def jac(t, y, p):
            return _fd_jacobian(lambda tt, yy: kernel(tt, yy, p), t, y)

        return jac

    def events_between(self, t0: float, t1: float):
        """Event (time, label) pairs with t0 < time < t1."""
        return [(t, lab) for t, lab in zip(self.event_times, self.event_labels) if t0 < t < t1]

    def component(self, name: str) -> Component:
        for c in self.components:
            if c.name == name:
                return c
        raise UnknownComponent(f"{self.name} has no component {name!r}")

    def readouts(self, times, states) -> dict:
        """Vectorized per-component (v, i) over sample arrays."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if self.readout_batch is None:
            return {}
        return self.readout_batch(self, times, states)

    def element_energies(self, states) -> dict:
        """Stored energy per storage element, J."""
        if self.energy_fn is None:
            return {}
        return self.energy_fn(np.atleast_2d(np.asarray(states, dtype=float)))

    def stored_energy(self, states) -> np.ndarray | None:
        parts = self.element_energies(states)
        if not parts:
            return None
        return sum(parts.values())

    def params_matrix(self, times) -> np.ndarray:
        """Per-sample parameter vectors, honoring the closed-open event convention."""
        times = np.asarray(times, dtype=float)
        edges = np.asarray(self.event_times, dtype=float)
        P = np.empty((len(times), len(self.base_params)))
        seg = np.searchsorted(edges, times, side="right")
        for s in np.unique(seg):
            lo = -math.inf if s == 0 else edges[s - 1]
            hi = math.inf if s == len(edges) else edges[s]
            probe = _segment_probe(lo, hi)
            P[seg == s] = self.segment_params(probe)
        return P


def _segment_probe(lo, hi):
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - 1.0
    if math.isinf(hi):
        return lo + 1.0
    return 0.5 * (lo + hi)


def _fd_jacobian(fun, t, y):
    n = len(y)
    J = np.empty((n, n))
    f0 = fun(t, y)
    for j in range(n):
        h = 1e-7 * max(1.0, abs(y[j]))
        yp = y.copy()
        yp[j] += h
        J[:, j] = (fun(t, yp) - f0) / h
    return J


def component_power(model: CircuitModel, component: str, t: float, state) -> float:
    """Instantaneous v*i of one component, passive sign (positive = absorbs)."""
    model.component(component)
    ro = model.readouts([t], [state])
    v, i = ro[component]
    return float(v[0] * i[0])


# ---------------------------------------------------------------------------
# two-tank latch

@dataclass(frozen=True)
class TwoTankLatchConfig:
    L1: float = 1e-9
    C1: float = 1e-6
    R1: float = 100.0
    L2: float = 0.5e-9
    C2: float = 0.5e-6
    R2: float = 90.0
    nonlinear: NonlinearResistorParams = field(default_factory=NonlinearResistorParams)
    sync: SyncSourceParams = field(default_factory=SyncSourceParams)
    switch: SwitchParams = field(default_factory=SwitchParams)
    f_ref: float = 5.0328e6
    injections: tuple = ()
    initial_state: tuple = (0.9, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("L1", "C1", "R1", "L2", "C2", "R2"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ConfigInvalid(f"{name} must be positive, got {val!r}")
        if not self.f_ref > 0:
            raise ConfigInvalid("f_ref must be positive")
        if not math.isclose(self.sync.f_sync, 2.0 * self.f_ref, rel_tol=1e-12):
            raise ConfigInvalid("sync.f_sync must equal 2 * f_ref")
        if len(self.initial_state) != 4:
            raise ConfigInvalid("two-tank initial_state needs 4 entries")
        object.__setattr__(self, "injections", tuple(self.injections))

    @classmethod
    def reference(cls, **overrides) -> "TwoTankLatchConfig":
        return replace(cls(), **overrides)


# parameter vector layout for the two-tank kernel
_TT = dict(L1=0, C1=1, R1=2, L2=3, C2=4, R2=5, k1=6, k2=7, k3=8, A=9, sign=10,
           vs=11, ws=12, phs=13, rt=14, rs=15, ia=16, wi=17, phi=18)
_TT_N = 19


@numba.njit(cache=True)
def _tt_aux(t, y, p):
    """Switch-node voltage, tank-path current, injected device current, v_sync."""
    v1 = y[0]
    i1 = y[2]
    rt = p[14]
    rs = p[15]
    if rt == 0.0:
        vx = v1
        ipath = i1 + v1 / rs
    elif rs == 0.0:
        vx = 0.0
        ipath = v1 / rt
    else:
        gt = 1.0 / rt
        gs = 1.0 / rs
        vx = (v1 * gt - i1) / (gt + gs)
        ipath = (v1 - vx) * gt
    # current delivered into the top of the stack
    F = -p[10] * f_raw(y[0] + y[1], p[6], p[7], p[8], p[9])
    vs = p[11] * math.cos(p[12] * t + p[13])
    return vx, ipath, F, vs


@numba.njit(cache=True)
def two_tank_rhs(t, y, p):
    vx, ipath, F, vs = _tt_aux(t, y, p)
    inj = p[16] * math.cos(p[17] * t + p[18])
    out = np.empty(4)
    out[0] = (F + inj - y[0] / p[2] - ipath) / p[1]
    out[1] = (F - y[1] / p[5] - y[3]) / p[4]
    out[2] = vx / p[0]
    out[3] = (y[1] - vs) / p[3]
    return out


@numba.njit(cache=True)
def two_tank_jac(t, y, p):
    J = np.zeros((4, 4))
    dF = -p[10] * dfdv_raw(y[0] + y[1], p[6], p[7], p[8], p[9])
    rt = p[14]
    rs = p[15]
    # d(ipath)/dv1, d(ipath)/di1, d(vx)/dv1, d(vx)/di1
    if rt == 0.0:
        a, b, c, d = 1.0 / rs, 1.0, 1.0, 0.0
    elif rs == 0.0:
        a, b, c, d = 1.0 / rt, 0.0, 0.0, 0.0
    else:
        gt = 1.0 / rt
        gs = 1.0 / rs
        c = gt / (gt + gs)
        d = -1.0 / (gt + gs)
        a = (1.0 - c) * gt
        b = -d * gt
    J[0, 0] = (dF - 1.0 / p[2] - a) / p[1]
    J[0, 1] = dF / p[1]
    J[0, 2] = -b / p[1]
    J[1, 0] = dF / p[4]
    J[1, 1] = (dF - 1.0 / p[5]) / p[4]
    J[1, 3] = -1.0 / p[4]
    J[2, 0] = c / p[0]
    J[2, 2] = d / p[0]
    J[3, 1] = 1.0 / p[3]
    return J


@numba.njit(cache=True)
def _tt_batch(T, Y, P):
    n = T.shape[0]
    out = np.empty((n, 8))
    for k in range(n):
        vx, ipath, F, vs = _tt_aux(T[k], Y[k], P[k])
        d = two_tank_rhs(T[k], Y[k], P[k])
        out[k, 0] = vx
        out[k, 1] = ipath
        out[k, 2] = F
        out[k, 3] = vs
        out[k, 4] = d[0]
        out[k, 5] = d[1]
        out[k, 6] = d[2]
        out[k, 7] = d[3]
    return out


def _two_tank_readouts(model: CircuitModel, T, Y):
    P = model.params_matrix(T)
    aux = _tt_batch(T, np.ascontiguousarray(Y), P)
    vx, ipath, F, vs = aux[:, 0], aux[:, 1], aux[:, 2], aux[:, 3]
    v1, v2, i1, i2 = Y[:, 0], Y[:, 1], Y[:, 2], Y[:, 3]
    inj = P[:, _TT["ia"]] * np.cos(P[:, _TT["wi"]] * T + P[:, _TT["phi"]])
    out = {
        "R1": (v1, v1 / P[:, 2]),
        "R2": (v2, v2 / P[:, 5]),
        "C1": (v1, P[:, 1] * aux[:, 4]),
        "C2": (v2, P[:, 4] * aux[:, 5]),
        "L1": (vx, i1),
        "L2": (v2 - vs, i2),
        "N": (v1 + v2, -F),
        "SYNC": (vs, i2),
        "S1_tank": (v1 - vx, ipath),
        "S1_short": (vx, ipath - i1),
    }
    if model.config.injections:
        out["INJ"] = (v1, -inj)
    return out


def _two_tank_energy(config: TwoTankLatchConfig):
    c = config

    def energy(Y):
        return {
            "C1": 0.5 * c.C1 * Y[:, 0] ** 2,
            "C2": 0.5 * c.C2 * Y[:, 1] ** 2,
            "L1": 0.5 * c.L1 * Y[:, 2] ** 2,
            "L2": 0.5 * c.L2 * Y[:, 3] ** 2,
        }

    return energy


def build_two_tank(config: TwoTankLatchConfig | None = None) -> CircuitModel:
    """Assemble the four-state two-tank latch model."""
    c = config or TwoTankLatchConfig()
    nl, sy, sw = c.nonlinear, c.sync, c.switch
    base = np.zeros(_TT_N)
    base[:10] = [c.L1, c.C1, c.R1, c.L2, c.C2, c.R2, nl.k1, nl.k2, nl.k3, nl.A]
    base[_TT["sign"]] = nl.sign
    base[_TT["vs"]] = sy.amplitude
    base[_TT["ws"]] = TWO_PI * sy.f_sync
    base[_TT["phs"]] = math.radians(sy.phase_offset)
    base[_TT["wi"]] = TWO_PI * c.f_ref

    events = []
    for start, dur in sw.schedule:
        events += [(start, "S1 flip"), (start + dur, "S1 release")]
    for inj in c.injections:
        events += [(inj.start, f"inject {inj.level.value}"), (inj.start + inj.duration, "inject end")]
    events.sort()
    schedule = sw.schedule
    injections = c.injections

    def segment_params(t):
        p = base.copy()
        flipped = any(s <= t < s + d for s, d in schedule)
        p[_TT["rt"]], p[_TT["rs"]] = (sw.r_off, sw.r_on) if flipped else (sw.r_on, sw.r_off)
        for inj in injections:
            if inj.start <= t < inj.start + inj.duration:
                p[_TT["ia"]] += inj.amplitude * (1.0 if inj.level is LogicLevel.ONE else -1.0)
        return p

    comps = (
        Component("R1", "R"), Component("R2", "R"),
        Component("C1", "C", True), Component("C2", "C", True),
        Component("L1", "L", True), Component("L2", "L", True),
        Component("N", "N"), Component("SYNC", "V"),
        Component("S1_tank", "S"), Component("S1_short", "S"),
    )
    if c.injections:
        comps += (Component("INJ", "I"),)
    return CircuitModel(
        name="two-tank",
        state_names=("v1", "v2", "i_L1", "i_L2"),
        components=comps,
        initial_state=np.array(c.initial_state, dtype=float),
        f_ref=c.f_ref,
        kernel=two_tank_rhs,
        jac_kernel=two_tank_jac,
        base_params=base,
        segment_params=segment_params,
        event_times=tuple(t for t, _ in events),
        event_labels=tuple(lab for _, lab in events),
        readout_batch=_two_tank_readouts,
        energy_fn=_two_tank_energy(c),
        main_tank="C1",
        supply="N",
        config=c,
    )


def natural_frequency(L: float, C: float) -> float:
    return 1.0 / (TWO_PI * math.sqrt(L * C))


# ---------------------------------------------------------------------------
# behavioral ring latch

RING_F0_NORMALIZED = 0.28919  # free-running frequency * tau at gain 5, offset 1.2


@dataclass(frozen=True)
class RingLatchConfig:
    """Behavioral ring latch, all amplitudes normalized to the stage swing.

    ``stage_offset`` biases every stage, breaking the odd symmetry of the
    tanh inverter so that a second-harmonic SYNC couples at first order.
    """

    n_stages: int = 3
    stage_gain: float = 5.0
    stage_offset: float = 1.2
    f_ref: float = 100e9
    stage_tau: float = RING_F0_NORMALIZED / 100e9
    sync_amplitude: float = 1.0
    f_sync: float = 200e9
    sync_start: float = 0.0
    logic_injections: tuple = ()
    initial_state: tuple = (1e-3, 0.0, 0.0)

    def __post_init__(self):
        if self.n_stages != 3:
            raise ConfigInvalid("the ring latch has exactly 3 stages")
        if not self.stage_gain > 1:
            raise ConfigInvalid("stage_gain must exceed 1 for sustained oscillation")
        if not self.stage_tau > 0:
            raise ConfigInvalid("stage_tau must be positive")
        if not (self.f_ref > 0 and self.f_sync > 0 and self.sync_amplitude >= 0):
            raise ConfigInvalid("ring frequencies must be positive")
        if len(self.initial_state) != 3:
            raise ConfigInvalid("ring initial_state needs 3 entries")
        object.__setattr__(self, "logic_injections", tuple(self.logic_injections))


_RG_N = 9  # gain, tau, offset, sync amp, w_sync, inj amp, w_ref, inj phase, spare


@numba.njit(cache=True)
def ring_rhs(t, y, p):
    g = p[0]
    tau = p[1]
    off = p[2]
    out = np.empty(3)
    for i in range(3):
        out[i] = (math.tanh(-g * y[(i + 2) % 3] + off) - y[i]) / tau
    inj = p[3] * math.cos(p[4] * t) + p[5] * math.cos(p[6] * t + p[7])
    out[0] += inj / tau
    return out


@numba.njit(cache=True)
def ring_jac(t, y, p):
    g = p[0]
    tau = p[1]
    off = p[2]
    J = np.zeros((3, 3))
    for i in range(3):
        j = (i + 2) % 3
        c = math.cosh(-g * y[j] + off)
        J[i, j] = -g / (c * c) / tau
        J[i, i] = -1.0 / tau
    return J


def _ring_readouts(model: CircuitModel, T, Y):
    P = model.params_matrix(T)
    sync = P[:, 3] * np.cos(P[:, 4] * T)
    logic = P[:, 5] * np.cos(P[:, 6] * T + P[:, 7])
    v = Y[:, 0]
    # injected currents enter stage 1; passive convention flips the sign
    return {"SYNC": (v, -sync), "A": (v, -logic)}


def build_ring(config: RingLatchConfig | None = None) -> CircuitModel:
    c = config or RingLatchConfig()
    base = np.zeros(_RG_N)
    base[:3] = [c.stage_gain, c.stage_tau, c.stage_offset]
    base[4] = TWO_PI * c.f_sync
    base[6] = TWO_PI * c.f_ref
    events = []
    if c.sync_start > 0:
        events.append((c.sync_start, "SYNC on"))
    for inj in c.logic_injections:
        events += [(inj.start, f"A={inj.level.value}"), (inj.start + inj.duration, "A off")]
    events.sort()
    injections = c.logic_injections

    def segment_params(t):
        p = base.copy()
        if t >= c.sync_start:
            p[3] = c.sync_amplitude
        for inj in injections:
            if inj.start <= t < inj.start + inj.duration:
                p[5] = inj.amplitude
                p[7] = inj.phase_rad
        return p

    return CircuitModel(
        name="ring",
        state_names=("v_s1", "v_s2", "v_s3"),
        components=(Component("SYNC", "I"), Component("A", "I")),
        initial_state=np.array(c.initial_state, dtype=float),
        f_ref=c.f_ref,
        kernel=ring_rhs,
        jac_kernel=ring_jac,
        base_params=base,
        segment_params=segment_params,
        event_times=tuple(t for t, _ in events),
        event_labels=tuple(lab for _, lab in events),
        readout_batch=_ring_readouts,
        config=c,
    )


# ---------------------------------------------------------------------------
# reference cells with closed-form solutions, used to validate the engine

@numba.njit(cache=True)
def _rlc_rhs(t, y, p):
    # p = [L, C, G]; states v (across C), i (through L)
    out = np.empty(2)
    out[0] = (-p[2] * y[0] - y[1]) / p[1]
    out[1] = y[0] / p[0]
    return out


@numba.njit(cache=True)
def _rlc_jac(t, y, p):
    J = np.zeros((2, 2))
    J[0, 0] = -p[2] / p[1]
    J[0, 1] = -1.0 / p[1]
    J[1, 0] = 1.0 / p[0]
    return J


def _rlc_readouts(model, T, Y):
    L, C, G = model.base_params
    v, i = Y[:, 0], Y[:, 1]
    return {"R": (v, G * v), "C": (v, -G * v - i), "L": (v, i)}


def build_lc(L: float = 1e-9, C: float = 1e-6, R: float | None = None, v0: float = 1.0,
             name: str = "lc") -> CircuitModel:
    """Parallel LC (optionally with a loss resistor R) ringing from ``v0``."""
    if not (L > 0 and C > 0) or (R is not None and not R > 0):
        raise ConfigInvalid("L, C and R must be positive")
    G = 0.0 if R is None else 1.0 / R
    base = np.array([L, C, G])
    return CircuitModel(
        name=name,
        state_names=("v", "i_L"),
        components=(Component("R", "R"), Component("C", "C", True), Component("L", "L", True)),
        initial_state=np.array([v0, 0.0]),
        f_ref=natural_frequency(L, C),
        kernel=_rlc_rhs,
        jac_kernel=_rlc_jac,
        base_params=base,
        segment_params=lambda t: base,
        readout_batch=_rlc_readouts,
        energy_fn=lambda Y: {"C": 0.5 * C * Y[:, 0] ** 2, "L": 0.5 * L * Y[:, 1] ** 2},
        main_tank="C",
        supply="R",
    )


@numba.njit(cache=True)
def _rc_rhs(t, y, p):
    out = np.empty(1)
    out[0] = -y[0] / (p[0] * p[1])
    return out


def build_rc(R: float = 1e3, C: float = 1e-9, v0: float = 1.0) -> CircuitModel:
    """A capacitor discharging through a resistor."""
    if not (R > 0 and C > 0):
        raise ConfigInvalid("R and C must be positive")
    base = np.array([R, C])
    return CircuitModel(
        name="rc",
        state_names=("v",),
        components=(Component("R", "R"), Component("C", "C", True)),
        initial_state=np.array([v0]),
        f_ref=1.0 / (R * C),
        kernel=_rc_rhs,
        base_params=base,
        segment_params=lambda t: base,
        readout_batch=lambda m, T, Y: {"R": (Y[:, 0], Y[:, 0] / R), "C": (Y[:, 0], -Y[:, 0] / R)},
        energy_fn=lambda Y: {"C": 0.5 * C * Y[:, 0] ** 2},
    )

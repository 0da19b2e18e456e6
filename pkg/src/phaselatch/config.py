"""Experiment configuration: a sectioned key/value format with unit suffixes.

::

    [experiment]
    kind = LOCKSTATES
    preset = paper-two-tank

    [two_tank]
    L1 = 1 nH
    f_ref = 5.0328 MHz

Physical quantities must carry a unit, optionally SI-prefixed (``nH``,
``uF``, ``kOhm``, ``MHz``, ``ps``).  Values are converted to SI on load.
``render`` writes the canonical form; ``parse_config(render(c)) == c``.
JSON with the same section/key layout is accepted too.
"""
from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field, fields, replace
from decimal import Decimal, InvalidOperation

from .circuits import Injection, RingLatchConfig, TwoTankLatchConfig, RING_F0_NORMALIZED
from .devices import NonlinearResistorParams, Polarity, SwitchParams, SyncSourceParams
from .errors import ConfigInvalid, ParseError
from .phasor import LogicLevel

KINDS = ("TRANSIENT", "LOCKSTATES", "FLIP", "ENERGY", "BER", "LOGIC")

PREFIXES = {"f": -15, "p": -12, "n": -9, "u": -6, "µ": -6, "m": -3, "k": 3, "M": 6, "G": 9, "T": 12}
BASE_UNITS = ("H", "F", "Ohm", "Hz", "s", "V", "A", "deg", "1/V", "A^0.5/V")


def _meta(kind, unit=None, choices=None, optional=False):
    return {"kind": kind, "unit": unit, "choices": choices, "optional": optional}


def _f(default, unit=None, optional=False):
    return field(default=default, metadata=_meta("float", unit, optional=optional))


def _i(default):
    return field(default=default, metadata=_meta("int"))


def _e(default, choices):
    return field(default=default, metadata=_meta("enum", choices=choices))


def _s(default, optional=False):
    return field(default=default, metadata=_meta("str", optional=optional))


def _fl(default, unit=None):
    return field(default=default, metadata=_meta("floatlist", unit))


def _il(default):
    return field(default=default, metadata=_meta("intlist"))


def _el(default, choices):
    return field(default=default, metadata=_meta("enumlist", choices=choices))


@dataclass(frozen=True)
class ExperimentSection:
    kind: str = _e("TRANSIENT", KINDS)
    preset: str | None = _s(None, optional=True)
    circuit: str = _e("two-tank", ("two-tank", "ring", "none"))
    seed: int = _i(0)


@dataclass(frozen=True)
class TwoTankSection:
    L1: float = _f(1e-9, "H")
    C1: float = _f(1e-6, "F")
    R1: float = _f(100.0, "Ohm")
    L2: float = _f(0.5e-9, "H")
    C2: float = _f(0.5e-6, "F")
    R2: float = _f(90.0, "Ohm")
    k1: float = _f(1.0 / 30.0, "A")
    k2: float = _f(0.0102 * 30.0, "1/V")
    k3: float = _f(40.0 * 0.0102, "A^0.5/V")
    A: float = _f(0.9, "V")
    polarity: str = _e("SUPPLYING", ("SUPPLYING", "AS_WRITTEN"))
    f_ref: float = _f(5.0328e6, "Hz")
    sync_amplitude: float = _f(1e-3 / 30.0, "V")
    sync_phase: float = _f(0.0, "deg")
    r_on: float = _f(0.0, "Ohm")
    r_off: float = _f(10e3, "Ohm")
    v1_initial: float = _f(0.9, "V")
    v2_initial: float = _f(0.0, "V")
    iL1_initial: float = _f(0.0, "A")
    iL2_initial: float = _f(0.0, "A")


@dataclass(frozen=True)
class RingSection:
    gain: float = _f(5.0)
    offset: float = _f(1.2)
    f_ref: float = _f(100e9, "Hz")
    tau: float = _f(RING_F0_NORMALIZED / 100e9, "s")
    sync_amplitude: float = _f(1.0)
    sync_start: float = _f(0.0, "s")
    inject_levels: tuple = _il(())
    inject_starts: tuple = _fl((), "s")
    inject_duration: float = _f(10e-12, "s")
    inject_amplitude: float = _f(2.0)


@dataclass(frozen=True)
class IntegratorSection:
    method: str = _e("RK4_FIXED", ("RK4_FIXED", "TRAP_IMPLICIT"))
    steps_per_cycle: int = _i(200)
    step: float | None = _f(None, "s", optional=True)
    rel_tol: float = _f(1e-6)
    abs_tol: float = _f(1e-9)
    cycles: float = _f(600.0)
    capture_stride: int = _i(1)


@dataclass(frozen=True)
class AnalysisSection:
    settle_cycles: int = _i(3000)
    tail_cycles: int = _i(40)
    lock_threshold: float = _f(1.0, "deg")
    drift_threshold: float = _f(1e-3)
    energy_threshold: float = _f(0.05)
    signal: str | None = _s(None, optional=True)


@dataclass(frozen=True)
class FlipSection:
    times: tuple = _fl((), "s")
    duration_cycles: float = _f(0.5)
    alignment: str = _e("ZERO_CROSSING", ("ZERO_CROSSING", "LITERAL"))
    lead_cycles: int = _i(20)
    tail_cycles: int = _i(40)


@dataclass(frozen=True)
class BerSection:
    encodings: tuple = _el(("LEVEL", "PHASE"), ("LEVEL", "PHASE"))
    ratios: tuple = _fl((0.5, 1.0, 1.5, 2.0, 10.0))
    trials: int = _i(1_000_000)
    workers: int = _i(1)


@dataclass(frozen=True)
class LogicSection:
    netlist: str = _s("full-adder")
    operands: tuple = _il(())
    width: int = _i(6)


@dataclass(frozen=True)
class OutputSection:
    dir: str = _s("out")
    format: str = _e("csv", ("csv", "json"))


SECTIONS = {
    "experiment": ExperimentSection,
    "two_tank": TwoTankSection,
    "ring": RingSection,
    "integrator": IntegratorSection,
    "analysis": AnalysisSection,
    "flip": FlipSection,
    "ber": BerSection,
    "logic": LogicSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    two_tank: TwoTankSection = field(default_factory=TwoTankSection)
    ring: RingSection = field(default_factory=RingSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    flip: FlipSection = field(default_factory=FlipSection)
    ber: BerSection = field(default_factory=BerSection)
    logic: LogicSection = field(default_factory=LogicSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def kind(self) -> str:
        return self.experiment.kind

    @property
    def circuit(self):
        """Domain circuit config, or None for BER and LOGIC runs."""
        if self.experiment.circuit == "two-tank":
            return two_tank_config(self.two_tank)
        if self.experiment.circuit == "ring":
            return ring_config(self.ring)
        return None

    def with_kind(self, kind: str) -> "ExperimentConfig":
        return replace(self, experiment=replace(self.experiment, kind=kind))


def two_tank_config(s: TwoTankSection, schedule=()) -> TwoTankLatchConfig:
    return TwoTankLatchConfig(
        L1=s.L1, C1=s.C1, R1=s.R1, L2=s.L2, C2=s.C2, R2=s.R2,
        nonlinear=NonlinearResistorParams(s.k1, s.k2, s.k3, s.A, Polarity(s.polarity)),
        sync=SyncSourceParams(s.sync_amplitude, 2.0 * s.f_ref, s.sync_phase),
        switch=SwitchParams(s.r_on, s.r_off, tuple(schedule)),
        f_ref=s.f_ref,
        initial_state=(s.v1_initial, s.v2_initial, s.iL1_initial, s.iL2_initial),
    )


def ring_config(s: RingSection) -> RingLatchConfig:
    if len(s.inject_levels) != len(s.inject_starts):
        raise ConfigInvalid("inject_levels and inject_starts must have equal length")
    inj = tuple(Injection(LogicLevel.of(lv), t, s.inject_duration, s.inject_amplitude)
                for lv, t in zip(s.inject_levels, s.inject_starts))
    return RingLatchConfig(stage_gain=s.gain, stage_offset=s.offset, f_ref=s.f_ref,
                           stage_tau=s.tau, sync_amplitude=s.sync_amplitude,
                           f_sync=2.0 * s.f_ref, sync_start=s.sync_start,
                           logic_injections=inj)


# ---------------------------------------------------------------------------
# presets

def _preset_table():
    base = ExperimentConfig()
    paper = replace(base, experiment=ExperimentSection(kind="LOCKSTATES", preset="paper-two-tank"))
    flip = replace(
        base,
        experiment=ExperimentSection(kind="FLIP", preset="paper-flip-demo"),
        flip=FlipSection(times=(0.27e-6, 0.67e-6, 1.06e-6)),
    )
    ring = replace(
        base,
        experiment=ExperimentSection(kind="TRANSIENT", preset="ring-demo", circuit="ring"),
        ring=RingSection(sync_start=20e-12, inject_levels=(0, 1), inject_starts=(300e-12, 900e-12)),
        integrator=IntegratorSection(cycles=150.0),
    )
    fsm = replace(
        base,
        experiment=ExperimentSection(kind="LOGIC", preset="fsm-demo", circuit="none"),
        logic=LogicSection(netlist="fsm", operands=(23, 42, 63, 63, 5, 58), width=6),
    )
    return {"paper-two-tank": paper, "paper-flip-demo": flip, "ring-demo": ring, "fsm-demo": fsm}


PRESETS = _preset_table()


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigInvalid(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None


# ---------------------------------------------------------------------------
# values and units

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def _unit_scale(unit: str, expected: str) -> int | None:
    """Power-of-ten exponent that converts ``unit`` to ``expected``; None if incompatible."""
    if unit == expected:
        return 0
    if len(unit) > 1 and unit[0] in PREFIXES and unit[1:] == expected:
        return PREFIXES[unit[0]]
    return None


def parse_quantity(text: str, unit: str | None, where=(None, None), key=None) -> float:
    line, col = where
    m = _NUM.match(text)
    if not m:
        raise ParseError("SyntaxError", f"{key}: expected a number", line, col, text.strip())
    num, suffix = m.groups()
    if unit is None:
        if suffix:
            raise ParseError("UnitMismatch", f"{key} is dimensionless", line, col, suffix)
        exp = 0
    else:
        if not suffix:
            raise ParseError("UnitMismatch", f"{key} needs a unit ({unit})", line, col, text.strip())
        exp = _unit_scale(suffix, unit)
        if exp is None:
            raise ParseError("UnitMismatch", f"{key} expects {unit}", line, col, suffix)
    try:
        value = float(Decimal(num).scaleb(exp))
    except InvalidOperation:
        raise ParseError("SyntaxError", f"{key}: bad number", line, col, num) from None
    if not math.isfinite(value):
        raise ParseError("SyntaxError", f"{key}: value must be finite", line, col, num)
    return value


def _split_list(text):
    return [p.strip() for p in text.split(",")] if text.strip() else []


def _convert(f: dataclasses.Field, text: str, where, key):
    meta = f.metadata
    kind, unit = meta["kind"], meta["unit"]
    line, col = where
    raw = text.strip()
    if meta["optional"] and raw == "auto":
        return None
    if kind == "float":
        return parse_quantity(raw, unit, where, key)
    if kind == "int":
        return _to_int(raw, where, key)
    if kind == "enum":
        if raw not in meta["choices"]:
            raise ParseError("SyntaxError", f"{key} must be one of {', '.join(meta['choices'])}",
                             line, col, raw)
        return raw
    if kind == "str":
        if not raw:
            raise ParseError("SyntaxError", f"{key} is empty", line, col, raw)
        return raw
    items = _split_list(raw)
    if kind == "floatlist":
        return tuple(parse_quantity(p, unit, where, key) for p in items)
    if kind == "intlist":
        return tuple(_to_int(p, where, key) for p in items)
    if kind == "enumlist":
        for p in items:
            if p not in meta["choices"]:
                raise ParseError("SyntaxError", f"{key} items must be in {meta['choices']}",
                                 line, col, p)
        return tuple(items)
    raise AssertionError(kind)


def _to_int(raw, where, key):
    try:
        d = Decimal(raw)
        if not d.is_finite() or d != d.to_integral_value():
            raise InvalidOperation
        return int(d)
    except InvalidOperation:
        raise ParseError("SyntaxError", f"{key} expects an integer", *where, raw) from None


def _format_float(x: float, unit: str | None) -> str:
    s = repr(float(x))
    return f"{s} {unit}" if unit else s


def _render_value(f, value) -> str:
    meta = f.metadata
    kind, unit = meta["kind"], meta["unit"]
    if value is None:
        return "auto"
    if kind == "float":
        return _format_float(value, unit)
    if kind == "floatlist":
        return ", ".join(_format_float(v, unit) for v in value)
    if kind in ("intlist", "enumlist"):
        return ", ".join(str(v) for v in value)
    return str(value)


def render(config: ExperimentConfig) -> str:
    """Canonical text form listing every key."""
    out = []
    for sec_name, cls in SECTIONS.items():
        sec = getattr(config, sec_name)
        out.append(f"[{sec_name}]")
        for f in fields(cls):
            out.append(f"{f.name} = {_render_value(f, getattr(sec, f.name))}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# parsing

_SECTION = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]$")
_KV = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _entries_from_text(text):
    """(section, key, value, line, key_col, value_col) for each assignment."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        stripped = body.strip()
        if not stripped:
            continue
        indent = len(body) - len(body.lstrip())
        m = _SECTION.match(stripped)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                raise ParseError("UnknownKey", f"unknown section [{section}]", lineno,
                                 indent + 1, section)
            continue
        m = _KV.match(stripped)
        if not m:
            raise ParseError("SyntaxError", "expected 'key = value' or '[section]'", lineno,
                             indent + 1, stripped)
        if section is None:
            raise ParseError("SyntaxError", "assignment before any [section]", lineno,
                             indent + 1, m.group(1))
        vcol = indent + m.start(2) + 1
        yield section, m.group(1), m.group(2), lineno, indent + 1, vcol


def _entries_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("SyntaxError", exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("SyntaxError", "top level must be an object", 1, 1)
    lines = text.splitlines()

    def locate(key):
        pat = f'"{key}"'
        for n, ln in enumerate(lines, start=1):
            c = ln.find(pat)
            if c >= 0:
                return n, c + 1
        return None, None

    for section, body in doc.items():
        if section not in SECTIONS:
            line, col = locate(section)
            raise ParseError("UnknownKey", f"unknown section {section!r}", line, col, section)
        if not isinstance(body, dict):
            line, col = locate(section)
            raise ParseError("SyntaxError", f"section {section!r} must be an object", line, col)
        for key, value in body.items():
            line, col = locate(key)
            if isinstance(value, list):
                value = ", ".join(str(v) for v in value)
            elif value is None:
                value = "auto"
            elif isinstance(value, bool):
                value = str(value).lower()
            else:
                value = str(value)
            yield section, key, value, line, col, col


def parse_config(text: str, default_kind: str | None = None) -> ExperimentConfig:
    """Parse and validate an experiment config (line format or JSON)."""
    is_json = text.lstrip().startswith("{")
    entries = list(_entries_from_json(text) if is_json else _entries_from_text(text))
    seen = {}
    values: dict[str, dict] = {s: {} for s in SECTIONS}
    for section, key, value, line, kcol, vcol in entries:
        cls = SECTIONS[section]
        flds = {f.name: f for f in fields(cls)}
        if key not in flds:
            raise ParseError("UnknownKey", f"unknown key {key!r} in [{section}]", line, kcol, key)
        if (section, key) in seen:
            raise ParseError("SyntaxError", f"{key} repeated (first on line {seen[section, key]})",
                             line, kcol, key)
        seen[section, key] = line
        values[section][key] = (_convert(flds[key], value, (line, vcol), key), line, kcol)

    exp = values["experiment"]
    base = ExperimentConfig()
    if "preset" in exp and exp["preset"][0] is not None:
        name, line, col = exp["preset"]
        if name not in PRESETS:
            raise ParseError("UnknownKey", f"unknown preset; known: {', '.join(PRESETS)}",
                             line, col, name)
        base = PRESETS[name]
    elif "kind" not in exp and default_kind is None:
        raise ParseError("MissingRequired", "[experiment] needs 'kind' or 'preset'", 1, 1)
    if "circuit" not in exp and "preset" not in exp:
        if values["ring"] and not values["two_tank"]:
            base = replace(base, experiment=replace(base.experiment, circuit="ring"))
    kw = {}
    for sec_name in SECTIONS:
        upd = {k: v for k, (v, _, _) in values[sec_name].items()}
        kw[sec_name] = replace(getattr(base, sec_name), **upd)
    cfg = ExperimentConfig(**kw)
    if "kind" not in exp and "preset" not in exp:
        cfg = cfg.with_kind(default_kind)
    elif "kind" not in exp and default_kind is not None and "preset" in exp:
        cfg = cfg.with_kind(default_kind)
    if cfg.kind in ("BER", "LOGIC") and "circuit" not in exp:
        cfg = replace(cfg, experiment=replace(cfg.experiment, circuit="none"))
    _validate(cfg, values)
    return cfg


def _validate(cfg: ExperimentConfig, values):
    def fail(section, key, msg):
        line, col = (values[section][key][1:] if key in values[section] else (None, None))
        raise ParseError("ValidationError", f"[{section}] {key}: {msg}", line, col, key)

    tt = cfg.two_tank
    for key in ("L1", "C1", "R1", "L2", "C2", "R2", "f_ref"):
        if not getattr(tt, key) > 0:
            fail("two_tank", key, "must be positive")
    if not tt.A > 0:
        fail("two_tank", "A", "must be positive")
    if tt.sync_amplitude < 0:
        fail("two_tank", "sync_amplitude", "must be nonnegative")
    if not (0 <= tt.r_on < tt.r_off):
        fail("two_tank", "r_on", "need 0 <= r_on < r_off")
    rg = cfg.ring
    if not rg.gain > 1:
        fail("ring", "gain", "must exceed 1")
    for key in ("tau", "f_ref"):
        if not getattr(rg, key) > 0:
            fail("ring", key, "must be positive")
    if len(rg.inject_levels) != len(rg.inject_starts):
        fail("ring", "inject_starts", "needs one start per level")
    if any(v not in (0, 1) for v in rg.inject_levels):
        fail("ring", "inject_levels", "levels are 0 or 1")
    it = cfg.integrator
    if it.steps_per_cycle < 32:
        fail("integrator", "steps_per_cycle", "phase extraction needs at least 32")
    if it.step is not None and not it.step > 0:
        fail("integrator", "step", "must be positive")
    if not (it.rel_tol > 0 and it.abs_tol > 0 and it.cycles > 0 and it.capture_stride >= 1):
        fail("integrator", "cycles", "tolerances, cycles and stride must be positive")
    an = cfg.analysis
    if an.tail_cycles < 20 or an.settle_cycles < 0:
        fail("analysis", "tail_cycles", "tail needs >= 20 cycles, settle >= 0")
    if not cfg.ber.ratios or any(r < 0 for r in cfg.ber.ratios):
        fail("ber", "ratios", "need a nonempty grid of values >= 0")
    if cfg.ber.trials < 1:
        fail("ber", "trials", "must be >= 1")
    if any(b <= a for a, b in zip(cfg.flip.times, cfg.flip.times[1:])):
        fail("flip", "times", "must be strictly increasing")

import json
from dataclasses import fields, replace

import pytest
from hypothesis import given, settings, strategies as st

from phaselatch.config import (
    PRESETS,
    ExperimentConfig,
    ExperimentSection,
    IntegratorSection,
    TwoTankSection,
    parse_config,
    parse_quantity,
    preset,
    render,
)
from phaselatch.errors import ConfigInvalid, ParseError

pos = st.floats(1e-15, 1e6, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("text, unit, value", [
    ("1 nH", "H", 1e-9),
    ("0.5nH", "H", 0.5e-9),
    ("5.0328 MHz", "Hz", 5.0328e6),
    ("10 kOhm", "Ohm", 1e4),
    ("2.5 uF", "F", 2.5e-6),
    ("270 ns", "s", 270e-9),
    ("3e-3 V", "V", 3e-3),
    ("0.306", None, 0.306),
])
def test_parse_quantity(text, unit, value):
    assert parse_quantity(text, unit) == value


def test_prefix_conversion_is_exact():
    assert parse_quantity("1.06 us", "s") == 1.06e-6
    assert parse_quantity("0.27 us", "s") == 0.27e-6


@pytest.mark.parametrize("text, unit", [("1 nF", "H"), ("1", "H"), ("1 V", None), ("1 xH", "H")])
def test_unit_mismatch(text, unit):
    with pytest.raises(ParseError) as exc:
        parse_quantity(text, unit)
    assert exc.value.kind == "UnitMismatch"


def test_minimal_config_defaults():
    cfg = parse_config("[experiment]\nkind = ENERGY\n")
    assert cfg.kind == "ENERGY"
    assert cfg.two_tank == TwoTankSection()
    assert cfg.circuit.L1 == 1e-9


def test_example_config():
    text = """
    [experiment]
    kind = LOCKSTATES   # find both states
    [two_tank]
    L1 = 1 nH
    C1 = 1 uF
    f_ref = 5.0328 MHz
    [integrator]
    method = TRAP_IMPLICIT
    step = auto
    """
    cfg = parse_config(text)
    assert cfg.integrator.method == "TRAP_IMPLICIT" and cfg.integrator.step is None
    assert cfg.two_tank.f_ref == 5.0328e6


def test_negative_inductance_is_rejected_with_location():
    with pytest.raises(ParseError) as exc:
        parse_config("[experiment]\nkind = ENERGY\n[two_tank]\nL1 = -1 nH\n")
    assert exc.value.kind == "ValidationError"
    assert (exc.value.line, exc.value.column) == (4, 1)
    assert "L1" in str(exc.value)


def test_unknown_key_reports_location():
    with pytest.raises(ParseError) as exc:
        parse_config("[experiment]\nkind = ENERGY\n[two_tank]\n  f_snc = 10 MHz\n")
    assert exc.value.kind == "UnknownKey"
    assert (exc.value.line, exc.value.column, exc.value.token) == (4, 3, "f_snc")


@pytest.mark.parametrize("text, kind", [
    ("[two_tank]\nL1 = 1 nH\n", "MissingRequired"),
    ("[experiment]\nkind = ENERGY\n[two_tank]\nL1 = 1 nF\n", "UnitMismatch"),
    ("[experiment]\nkind = NOPE\n", "SyntaxError"),
    ("kind = ENERGY\n", "SyntaxError"),
    ("[nowhere]\n", "UnknownKey"),
    ("[experiment]\nkind = ENERGY\nkind = BER\n", "SyntaxError"),
    ("[experiment]\npreset = imaginary\n", "UnknownKey"),
    ("[experiment]\nkind = BER\n[ber]\ntrials = 2.5\n", "SyntaxError"),
    ("[experiment]\nkind = BER\n[ber]\nratios = \n", "ValidationError"),
    ("[experiment]\nkind = FLIP\n[flip]\ntimes = 2 us, 1 us\n", "ValidationError"),
    ('{"experiment": {"kind": "ENERGY"}, "two_tank": {"Lx": "1 nH"}}', "UnknownKey"),
    ('{"experiment": ', "SyntaxError"),
])
def test_error_kinds(text, kind):
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert exc.value.kind == kind


def test_json_input():
    doc = {"experiment": {"kind": "BER"}, "ber": {"ratios": [0.5, 2.0], "trials": 1000},
           "two_tank": {"R1": "50 Ohm"}}
    cfg = parse_config(json.dumps(doc, indent=1))
    assert cfg.ber.ratios == (0.5, 2.0) and cfg.ber.trials == 1000
    assert cfg.two_tank.R1 == 50.0


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name):
    cfg = preset(name)
    assert parse_config(render(cfg)) == cfg
    assert cfg.experiment.preset == name


def test_preset_via_config_with_override():
    cfg = parse_config("[experiment]\npreset = paper-flip-demo\n[flip]\nlead_cycles = 30\n")
    assert cfg.kind == "FLIP" and cfg.flip.lead_cycles == 30
    assert cfg.flip.times == (0.27e-6, 0.67e-6, 1.06e-6)
    with pytest.raises(ConfigInvalid):
        preset("nope")


@given(st.fixed_dictionaries({"L1": pos, "C1": pos, "R1": pos, "f_ref": pos, "sync_phase":
                              st.floats(-360, 360)}),
       st.integers(32, 10_000), st.floats(1e-3, 1e5), st.sampled_from(["ENERGY", "FLIP", "BER"]))
@settings(max_examples=60)
def test_render_parse_round_trip(tt, spc, cycles, kind):
    cfg = ExperimentConfig(
        experiment=ExperimentSection(kind=kind, circuit="two-tank"),
        two_tank=replace(TwoTankSection(), **tt),
        integrator=IntegratorSection(steps_per_cycle=spc, cycles=cycles),
    )
    assert parse_config(render(cfg)) == cfg


def test_render_lists_every_key():
    text = render(ExperimentConfig())
    for f in fields(TwoTankSection):
        assert f"\n{f.name} = " in text

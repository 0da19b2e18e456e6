import math

import numpy as np
import pytest

from phaselatch.circuits import Injection, TwoTankLatchConfig, build_lc, build_two_tank
from phaselatch.energy import (
    FlipVerdict,
    cumulative_trapezoid,
    energy_report,
    flip_energy_audit,
)
from phaselatch.errors import FlipNotInTrace, MissingColumns, TooShort
from phaselatch.lock import extract_phase
from phaselatch.phasor import ONE, ZERO
from phaselatch.transient import run_cycles


def test_cumulative_trapezoid_exact_for_linear():
    x = np.linspace(0, 2, 11)
    assert np.allclose(cumulative_trapezoid(3 * x, x), 1.5 * x**2)


def test_lossless_lc_conserves_energy():
    model = build_lc(1e-9, 1e-6)
    tr = run_cycles(model, 10, steps_per_cycle=400)
    E = tr["E_stored"]
    assert np.max(np.abs(E - 0.5e-6)) / 0.5e-6 < 1e-9


def test_rlc_balance_and_dissipation():
    model = build_lc(1e-9, 1e-6, R=50.0)
    tr = run_cycles(model, 10, steps_per_cycle=400)
    rep = energy_report(tr, model, model.f_ref)
    assert rep.balance_residual < 1e-6
    # energy lost from the tank equals the resistor's cumulative energy
    w_r = rep.per_component_cumulative["R"]
    assert w_r[-1] == pytest.approx(tr["E_stored"][0] - tr["E_stored"][-1], rel=1e-6)


@pytest.fixture(scope="module")
def two_tank_run():
    model = build_two_tank()
    return model, run_cycles(model, 60, steps_per_cycle=200)


def test_two_tank_report(two_tank_run):
    model, tr = two_tank_run
    rep = energy_report(tr, model, model.f_ref, tail_cycles=20)
    assert rep.balance_residual < 1e-5
    assert rep.cycles_used == 20
    assert rep.q_standard == pytest.approx(2 * math.pi * rep.q_effective)
    # supply and dissipation agree per cycle up to the slow amplitude drift
    diss = sum(v for k, v in rep.per_cycle_by_component.items() if k in ("R1", "R2"))
    assert diss == pytest.approx(rep.per_cycle_dissipation, rel=0.1)
    assert set(rep.to_dict()) >= {"q_effective", "per_cycle_dissipation"}


def test_q_invariant_under_time_rescaling():
    qs = []
    for s in (1.0, 10.0):
        base = TwoTankLatchConfig()
        cfg = TwoTankLatchConfig(
            L1=base.L1 / s, C1=base.C1 / s, L2=base.L2 / s, C2=base.C2 / s, f_ref=base.f_ref * s,
            sync=type(base.sync)(base.sync.amplitude, base.sync.f_sync * s))
        model = build_two_tank(cfg)
        tr = run_cycles(model, 20, steps_per_cycle=200)
        qs.append(energy_report(tr, model, model.f_ref).q_effective)
    assert qs[1] == pytest.approx(qs[0], rel=1e-6)


def test_missing_columns_and_short(two_tank_run):
    model, tr = two_tank_run
    bare = run_cycles(model, 10, components=False)
    with pytest.raises(MissingColumns):
        energy_report(bare, model, model.f_ref)
    with pytest.raises(TooShort):
        energy_report(tr.between(0, 3 / model.f_ref), model, model.f_ref)


def test_flip_audit_empty_and_out_of_trace(two_tank_run):
    model, tr = two_tank_run
    assert flip_energy_audit(tr, model, model.f_ref, []) == []
    with pytest.raises(FlipNotInTrace):
        flip_energy_audit(tr, model, model.f_ref, [0.2 / model.f_ref], per_cycle_dissipation=1e-9)


def test_injection_flip_is_dissipative():
    # negative control: a forced in-phase current injection pumps energy in
    probe_model = build_two_tank()
    f = probe_model.f_ref
    t_inj = 30 / f
    pre = run_cycles(probe_model, 31, steps_per_cycle=200, components=False)
    ph = extract_phase(pre, "v1", f, 29 / f).phase_vs_ref
    level = ONE if math.cos(math.radians(ph)) > 0 else ZERO
    inj = Injection(level, t_inj, 1 / f, 0.05)
    model = build_two_tank(TwoTankLatchConfig(injections=(inj,)))
    tr = run_cycles(model, 40, steps_per_cycle=200)
    audits = flip_energy_audit(tr, model, f, [t_inj], durations=[1 / f],
                               per_cycle_dissipation=0.7e-9)
    assert len(audits) == 1
    assert audits[0].verdict is FlipVerdict.DISSIPATIVE
    assert audits[0].excess_energy > 20 * audits[0].threshold

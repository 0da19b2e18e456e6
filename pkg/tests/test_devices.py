import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phaselatch.devices import (
    NonlinearResistorParams,
    Polarity,
    SwitchParams,
    SyncSourceParams,
    check_startup_condition,
    eval_dfdv,
    eval_f,
    switch_resistances,
    sync_voltage,
)
from phaselatch.errors import ConfigInvalid

K1 = 1 / 30
K2 = 0.0102 / K1
K3 = 40 * K1 * K2
AS_WRITTEN = NonlinearResistorParams(polarity=Polarity.AS_WRITTEN)
SUPPLYING = NonlinearResistorParams()

volts = st.floats(-5, 5, allow_nan=False)


def test_default_parameters():
    p = NonlinearResistorParams()
    assert p.k1 == pytest.approx(K1, rel=1e-15)
    assert p.k2 == pytest.approx(K2, rel=1e-15)
    assert p.k3 == pytest.approx(K3, rel=1e-15)
    assert p.k1 * p.k2 == pytest.approx(0.0102, rel=1e-14)
    assert p.A == 0.9 and p.polarity is Polarity.SUPPLYING


def test_eval_f_examples():
    assert eval_f(AS_WRITTEN, 0.0) == 0.0
    assert eval_f(AS_WRITTEN, 0.9) == pytest.approx(K1 * math.tanh(K2 * 0.9), rel=1e-15)
    expected = K1 * math.tanh(0.306) + (40 * K1 * K2) ** 2 * 0.1**2
    assert eval_f(AS_WRITTEN, 1.0) == pytest.approx(expected, rel=1e-13)


@given(volts)
def test_supplying_is_negated(v):
    assert eval_f(SUPPLYING, v) == -eval_f(AS_WRITTEN, v)


def test_dfdv_examples():
    assert eval_dfdv(AS_WRITTEN, 0.0) == pytest.approx(K1 * K2)
    assert eval_dfdv(SUPPLYING, 0.0) == pytest.approx(-K1 * K2)
    knee = K1 * K2 / math.cosh(K2 * 0.9) ** 2
    assert eval_dfdv(AS_WRITTEN, 0.9) == pytest.approx(knee, rel=1e-14)
    assert eval_dfdv(AS_WRITTEN, -0.9) == pytest.approx(knee, rel=1e-14)


@given(volts)
def test_dfdv_matches_central_difference(v):
    h = 1e-6 * max(1.0, abs(v))
    fd = (eval_f(AS_WRITTEN, v + h) - eval_f(AS_WRITTEN, v - h)) / (2 * h)
    assert eval_dfdv(AS_WRITTEN, v) == pytest.approx(fd, rel=1e-5, abs=1e-12)


@given(st.floats(-0.9, 0.9))
def test_shil_term_vanishes_inside_knees(v):
    assert eval_f(AS_WRITTEN, v) == pytest.approx(K1 * math.tanh(K2 * v), abs=0, rel=1e-15)


@given(volts)
def test_parity_split(v):
    # tanh part is odd, the knee quadratic is even
    f_p, f_m = eval_f(AS_WRITTEN, v), eval_f(AS_WRITTEN, -v)
    g = K3**2 * max(abs(v) - 0.9, 0.0) ** 2
    assert 0.5 * (f_p + f_m) == pytest.approx(g, abs=1e-15)
    assert 0.5 * (f_p - f_m) == pytest.approx(K1 * math.tanh(K2 * v), abs=1e-15)


def test_f_is_not_odd_outside_knee():
    assert eval_f(AS_WRITTEN, 1.5) + eval_f(AS_WRITTEN, -1.5) > 0


def test_continuity_at_knee():
    for knee in (-0.9, 0.9):
        for fn in (eval_f, eval_dfdv):
            lo, hi = fn(AS_WRITTEN, knee - 1e-12), fn(AS_WRITTEN, knee + 1e-12)
            assert abs(hi - lo) < 1e-11


def test_array_evaluation():
    v = np.linspace(-2, 2, 41)
    got = eval_f(AS_WRITTEN, v)
    assert got.shape == v.shape
    assert got[20] == 0.0


def test_sync_voltage():
    s = SyncSourceParams()
    assert sync_voltage(s, 0.0) == pytest.approx(1e-3 / 30)
    assert sync_voltage(s, 1 / (4 * s.f_sync)) == pytest.approx(0.0, abs=1e-18)
    assert sync_voltage(s, 1 / (2 * s.f_sync)) == pytest.approx(-s.amplitude)
    shifted = SyncSourceParams(1.0, 1e6, 90.0)
    assert sync_voltage(shifted, 0.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ConfigInvalid):
        SyncSourceParams(-1.0)


def test_startup_condition():
    v = check_startup_condition(NonlinearResistorParams(), 100, 90)
    assert v.satisfied
    assert v.g_r2 > v.g_device > v.g_r1
    assert not check_startup_condition(NonlinearResistorParams(k1=0.005, k2=1.0), 100, 90)
    assert not check_startup_condition(NonlinearResistorParams(k1=0.02, k2=1.0), 100, 90)


def test_switch_resistances():
    sw = SwitchParams(1e-3, 1e4, ((1e-6, 1e-7),))
    assert switch_resistances(sw, 0.0) == (1e-3, 1e4)
    assert switch_resistances(sw, 1.05e-6) == (1e4, 1e-3)
    assert switch_resistances(sw, 1e-6) == (1e4, 1e-3)
    assert switch_resistances(sw, 1.1e-6) == (1e-3, 1e4)


@pytest.mark.parametrize("kw", [
    dict(r_on=10.0, r_off=1.0),
    dict(schedule=((1.0, 0.5), (1.2, 0.1))),
    dict(schedule=((1.0, 0.0),)),
])
def test_switch_validation(kw):
    with pytest.raises(ConfigInvalid):
        SwitchParams(**kw)


def test_resistor_validation():
    with pytest.raises(ConfigInvalid):
        NonlinearResistorParams(A=0.0)
    with pytest.raises(ConfigInvalid):
        NonlinearResistorParams(k1=math.inf)

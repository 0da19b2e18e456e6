import itertools
import math

import pytest
from hypothesis import given, strategies as st

from phaselatch.errors import AmplitudeTooSmall, DegenerateSum, MetastablePhase
from phaselatch.phasor import (
    ONE,
    ZERO,
    LogicLevel,
    Phasor,
    angular_distance,
    classify,
    encode,
    phasor_maj3,
    phasor_not,
)

amps = st.floats(0, 1e3, allow_nan=False)
phases = st.floats(-1e4, 1e4, allow_nan=False)
phasors = st.builds(Phasor, amps, phases)
levels = st.sampled_from([ZERO, ONE])


def close(p, q, tol=1e-12):
    return abs(p.to_complex() - q.to_complex()) <= tol * max(1.0, p.amplitude)


def test_encode_levels():
    assert encode(ONE) == Phasor(1.0, 0.0)
    assert encode(ZERO) == Phasor(1.0, 180.0)
    for x in (ZERO, ONE):
        assert angular_distance(encode(x).phase, encode(~x).phase) == 180.0


@pytest.mark.parametrize("p, expect", [
    (Phasor(1, 0), Phasor(1, 180)),
    (Phasor(1, 180), Phasor(1, 0)),
    (Phasor(0.5, 30), Phasor(0.5, 210)),
])
def test_not_examples(p, expect):
    assert phasor_not(p) == expect


def test_phase_is_normalized():
    assert Phasor(1, -90).phase == 270.0
    assert Phasor(1, 720.0).phase == 0.0
    assert 0 <= Phasor(1, -1e-18).phase < 360
    with pytest.raises(ValueError):
        Phasor(-1, 0)


@given(phasors)
def test_not_involution(p):
    assert close(phasor_not(phasor_not(p)), p)


@given(phasors)
def test_rectangular_round_trip(p):
    q = Phasor.from_complex(p.to_complex())
    assert close(p, q)


def test_maj_examples():
    assert phasor_maj3(encode(ZERO), encode(ZERO), encode(ONE)) == encode(ZERO)
    assert close(phasor_maj3(encode(ONE), encode(ONE), encode(ONE)), encode(ONE))


@pytest.mark.parametrize("bits", list(itertools.product([0, 1], repeat=3)))
def test_maj_truth_table(bits):
    out = classify(phasor_maj3(*(encode(LogicLevel(b)) for b in bits)))
    assert out.value == int(sum(bits) >= 2)


@pytest.mark.parametrize("a, b", list(itertools.product([0, 1], repeat=2)))
def test_pinned_maj_is_and_or(a, b):
    A, B = encode(LogicLevel(a)), encode(LogicLevel(b))
    assert classify(phasor_maj3(encode(ZERO), A, B)).value == (a & b)
    assert classify(phasor_maj3(encode(ONE), A, B)).value == (a | b)


@given(phasors, phasors, phasors)
def test_maj_symmetric(a, b, c):
    try:
        ref = phasor_maj3(a, b, c)
    except DegenerateSum:
        for perm in itertools.permutations((a, b, c)):
            with pytest.raises(DegenerateSum):
                phasor_maj3(*perm)
        return
    for perm in itertools.permutations((a, b, c)):
        assert close(phasor_maj3(*perm), ref, 1e-9)


@given(phasors, phasors, phasors)
def test_maj_limits_amplitude(a, b, c):
    try:
        out = phasor_maj3(a, b, c)
    except DegenerateSum:
        return
    z = a.to_complex() + b.to_complex() + c.to_complex()
    assert out.amplitude <= 1.0 + 1e-12
    assert out.amplitude == pytest.approx(min(abs(z), 1.0), rel=1e-9)


def test_maj_degenerate():
    with pytest.raises(DegenerateSum):
        phasor_maj3(Phasor(1, 0), Phasor(1, 180), Phasor(0, 0))
    with pytest.raises(DegenerateSum):
        phasor_maj3(Phasor(1, 0), Phasor(1, 120), Phasor(1, 240))


def test_classify_examples():
    assert classify(Phasor(1, 5), 0) is ONE
    assert classify(Phasor(0.7, 170), 0) is ZERO
    with pytest.raises(MetastablePhase):
        classify(Phasor(1, 90), 0)
    with pytest.raises(MetastablePhase):
        classify(Phasor(1, 269.2), 0)
    with pytest.raises(AmplitudeTooSmall):
        classify(Phasor(0, 0))
    assert classify(Phasor(1, 268.9), 0) is ZERO


@given(levels)
def test_classify_encode_identity(x):
    assert classify(encode(x), 0.0) is x


@given(st.floats(0, 360, exclude_max=True), st.floats(0, 360, exclude_max=True))
def test_classify_relative_to_ref(ph, ref):
    d = angular_distance(ph, ref)
    if abs(d - 90) <= 1.0:
        return
    assert classify(Phasor(1, ph), ref) is (ONE if d < 90 else ZERO)


def test_level_coercion():
    assert LogicLevel.of("1") is ONE and LogicLevel.of(0) is ZERO
    assert LogicLevel.of("zero") is ZERO and LogicLevel.of(True) is ONE
    assert math.isclose(encode(1).to_complex().real, 1.0)

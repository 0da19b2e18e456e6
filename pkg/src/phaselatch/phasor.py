"""Phasor encoding of phase logic and the {NOT, MAJ} primitives.

A logic value is carried by the phase of a periodic signal relative to a
reference: ONE sits at 0 degrees, ZERO at 180 degrees.  NOT is negation and
MAJ is complex addition followed by amplitude limiting.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

from .errors import AmplitudeTooSmall, DegenerateSum, MetastablePhase

EPSILON = 1e-9
GUARD_BAND_DEG = 1.0


class LogicLevel(enum.Enum):
    ZERO = 0
    ONE = 1

    def __invert__(self) -> "LogicLevel":
        return LogicLevel.ONE if self is LogicLevel.ZERO else LogicLevel.ZERO

    def __bool__(self) -> bool:
        return self is LogicLevel.ONE

    @classmethod
    def of(cls, value) -> "LogicLevel":
        """Coerce 0/1/bool/LogicLevel/'0'/'1' to a LogicLevel."""
        if isinstance(value, LogicLevel):
            return value
        if isinstance(value, str):
            value = value.strip()
            if value in ("0", "1"):
                return cls(int(value))
            return cls[value.upper()]
        return cls.ONE if value else cls.ZERO


ZERO = LogicLevel.ZERO
ONE = LogicLevel.ONE


def wrap_deg(phase: float) -> float:
    """Map an angle in degrees onto [0, 360)."""
    w = math.fmod(phase, 360.0)
    if w < 0.0:
        w += 360.0
    # fmod of tiny negatives can round up to exactly 360
    return 0.0 if w >= 360.0 else w


def angular_distance(a: float, b: float) -> float:
    """Smallest absolute difference between two angles, in [0, 180]."""
    d = abs(wrap_deg(a) - wrap_deg(b))
    return min(d, 360.0 - d)


@dataclass(frozen=True)
class Phasor:
    """Amplitude (normalized to REF) and phase in degrees."""

    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.amplitude) or not math.isfinite(self.phase):
            raise ValueError("phasor fields must be finite")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        object.__setattr__(self, "phase", wrap_deg(self.phase))

    @classmethod
    def from_complex(cls, z: complex) -> "Phasor":
        return cls(abs(z), math.degrees(cmath.phase(z)))

    def to_complex(self) -> complex:
        return cmath.rect(self.amplitude, math.radians(self.phase))

    def __complex__(self) -> complex:
        return self.to_complex()


def encode(level: LogicLevel) -> Phasor:
    return Phasor(1.0, 0.0 if LogicLevel.of(level) is ONE else 180.0)


def phasor_not(p: Phasor) -> Phasor:
    return Phasor(p.amplitude, p.phase + 180.0)


def phasor_maj3(a: Phasor, b: Phasor, c: Phasor, eps: float = EPSILON) -> Phasor:
    """Sum three phasors and limit the result to unit amplitude."""
    z = a.to_complex() + b.to_complex() + c.to_complex()
    amp = abs(z)
    if amp < eps:
        raise DegenerateSum(f"MAJ sum amplitude {amp:.3g} below {eps:g}")
    if amp > 1.0:
        z = z / amp
    return Phasor.from_complex(z)


def classify(p: Phasor, ref_phase: float = 0.0, guard_deg: float = GUARD_BAND_DEG,
             eps: float = EPSILON) -> LogicLevel:
    """Decode a phasor to the nearer of the two lock phases."""
    if p.amplitude <= eps:
        raise AmplitudeTooSmall(f"amplitude {p.amplitude:.3g} <= {eps:g}")
    d = angular_distance(p.phase, ref_phase)
    if abs(d - 90.0) <= guard_deg:
        raise MetastablePhase(
            f"phase {p.phase:.4f} deg is within {guard_deg} deg of the decision threshold"
        )
    return ONE if d < 90.0 else ZERO

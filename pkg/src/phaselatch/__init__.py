"""Simulation of phase-encoded logic on self-sustaining nonlinear oscillators."""

__version__ = "0.1.0"

from .phasor import ONE, ZERO, LogicLevel, Phasor, classify, encode, phasor_maj3, phasor_not

__all__ = [
    "ONE", "ZERO", "LogicLevel", "Phasor", "classify", "encode", "phasor_maj3", "phasor_not",
]

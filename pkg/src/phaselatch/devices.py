"""Scalar device laws for the two-tank latch.

The nonlinear resistor is ``f(v) = k1 tanh(k2 v) + g_shil(v)`` where
``g_shil`` is a dead-zone quadratic that vanishes on ``[-A, A]``.  The
quadratic term is even in ``v``; it is the even part that lets a
second-harmonic SYNC couple to the fundamental.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigInvalid


class Polarity(enum.Enum):
    SUPPLYING = "SUPPLYING"
    AS_WRITTEN = "AS_WRITTEN"


@dataclass(frozen=True)
class NonlinearResistorParams:
    k1: float = 1.0 / 30.0
    k2: float = 0.0102 * 30.0
    k3: float = 40.0 * 0.0102
    A: float = 0.9
    polarity: Polarity = Polarity.SUPPLYING

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "A"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigInvalid(f"{name} must be finite")
        if self.A <= 0:
            raise ConfigInvalid("A must be positive")

    @property
    def sign(self) -> float:
        return -1.0 if self.polarity is Polarity.SUPPLYING else 1.0


@dataclass(frozen=True)
class SyncSourceParams:
    amplitude: float = 1e-3 / 30.0
    f_sync: float = 2 * 5.0328e6
    phase_offset: float = 0.0  # degrees

    def __post_init__(self):
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise ConfigInvalid("sync amplitude must be >= 0")
        if not self.f_sync > 0:
            raise ConfigInvalid("f_sync must be > 0")


@dataclass(frozen=True)
class SwitchParams:
    """SPDT switch S1.  ``schedule`` holds (flip_time, duration) windows."""

    r_on: float = 0.0
    r_off: float = 10e3
    schedule: tuple = field(default_factory=tuple)

    def __post_init__(self):
        sched = tuple((float(a), float(b)) for a, b in self.schedule)
        object.__setattr__(self, "schedule", sched)
        # r_on = 0 is the ideal short and is special-cased by the circuit model
        if not (0 <= self.r_on < self.r_off) or not math.isfinite(self.r_off):
            raise ConfigInvalid("switch needs 0 <= r_on < r_off < inf")
        end = -math.inf
        for start, dur in sched:
            if dur <= 0:
                raise ConfigInvalid("switch window duration must be positive")
            if start < end:
                raise ConfigInvalid("switch windows must be sorted and non-overlapping")
            end = start + dur


@numba.njit(cache=True)
def g_shil(v, k3, A):
    if v < -A:
        return k3 * k3 * (v + A) ** 2
    if v > A:
        return k3 * k3 * (v - A) ** 2
    return 0.0


@numba.njit(cache=True)
def dg_shil(v, k3, A):
    if v < -A:
        return 2.0 * k3 * k3 * (v + A)
    if v > A:
        return 2.0 * k3 * k3 * (v - A)
    return 0.0


@numba.njit(cache=True)
def f_raw(v, k1, k2, k3, A):
    return k1 * math.tanh(k2 * v) + g_shil(v, k3, A)


@numba.njit(cache=True)
def dfdv_raw(v, k1, k2, k3, A):
    c = math.cosh(k2 * v)
    return k1 * k2 / (c * c) + dg_shil(v, k3, A)


def eval_f(params: NonlinearResistorParams, v):
    """Element current for branch voltage ``v`` (scalar or array)."""
    v = np.asarray(v, dtype=float)
    over = np.maximum(np.abs(v) - params.A, 0.0)
    out = params.k1 * np.tanh(params.k2 * v) + params.k3**2 * over**2
    if params.polarity is Polarity.SUPPLYING:
        out = -out
    return out[()] if out.ndim == 0 else out


def eval_dfdv(params: NonlinearResistorParams, v):
    v = np.asarray(v, dtype=float)
    over = np.sign(v) * np.maximum(np.abs(v) - params.A, 0.0)
    out = params.k1 * params.k2 / np.cosh(params.k2 * v) ** 2 + 2 * params.k3**2 * over
    if params.polarity is Polarity.SUPPLYING:
        out = -out
    return out[()] if out.ndim == 0 else out


def sync_voltage(params: SyncSourceParams, t):
    t = np.asarray(t, dtype=float)
    out = params.amplitude * np.cos(2 * np.pi * params.f_sync * t + np.radians(params.phase_offset))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class StartupVerdict:
    satisfied: bool
    g_r2: float
    g_device: float
    g_r1: float

    def __bool__(self):
        return self.satisfied


def check_startup_condition(params: NonlinearResistorParams, r1: float, r2: float) -> StartupVerdict:
    """Small-signal start-up test, comparing conductance magnitudes.

    The device must overcome the tank-1 loss but not the tank-2 loss, so that
    only the main tank oscillates.
    """
    if r1 <= 0 or r2 <= 0:
        raise ConfigInvalid("r1 and r2 must be positive")
    g_dev = abs(params.k1 * params.k2)
    ok = (1.0 / r2) > g_dev > (1.0 / r1)
    return StartupVerdict(ok, 1.0 / r2, g_dev, 1.0 / r1)


def switch_resistances(params: SwitchParams, t: float) -> tuple[float, float]:
    """(r_path_tank, r_path_short) at time ``t``; windows are [start, start+dur)."""
    if in_window(params.schedule, t):
        return params.r_off, params.r_on
    return params.r_on, params.r_off


def in_window(schedule, t: float) -> bool:
    for start, dur in schedule:
        if start <= t < start + dur:
            return True
    return False

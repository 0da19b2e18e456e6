"""Phase extraction against REF, lock detection and the two SHIL lock states."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .circuits import CircuitModel
from .errors import (
    AmplitudeTooSmall,
    DegenerateStates,
    LockNotFound,
    MetastablePhase,
    TooShort,
    WindowOutOfRange,
)
from .phasor import Phasor, angular_distance, classify, wrap_deg
from .transient import Method, WaveformTrace, run_cycles

UNRESOLVED = "UNRESOLVED"
MIN_SAMPLES = 32


@dataclass(frozen=True)
class PhaseSample:
    t_center: float
    phase_vs_ref: float
    fundamental_amplitude: float
    window: float


def _window(times, x, t0, t1):
    """Samples on [t0, t1] with linearly interpolated endpoints."""
    i0 = np.searchsorted(times, t0, side="right")
    i1 = np.searchsorted(times, t1, side="left")
    tt = np.concatenate(([t0], times[i0:i1], [t1]))
    xx = np.concatenate(([np.interp(t0, times, x)], x[i0:i1], [np.interp(t1, times, x)]))
    return tt, xx, i1 - i0


def fundamental(trace: WaveformTrace, signal: str, f_ref: float, t0: float) -> complex:
    """Complex fundamental coefficient (2/T) * integral of x exp(-j w t) over one period."""
    T = 1.0 / f_ref
    times = trace.times
    eps = 1e-9 * T
    if t0 < times[0] - eps or t0 + T > times[-1] + eps:
        raise WindowOutOfRange(
            f"window [{t0:.9g}, {t0 + T:.9g}] s outside trace [{times[0]:.9g}, {times[-1]:.9g}] s")
    t0 = max(t0, times[0])
    t1 = min(t0 + T, times[-1])
    tt, xx, n_inside = _window(times, np.asarray(trace[signal], dtype=float), t0, t1)
    if n_inside + 2 < MIN_SAMPLES:
        raise WindowOutOfRange(f"only {n_inside + 2} samples in window; need {MIN_SAMPLES}")
    # reduce the angle before multiplying to keep the phase reference exact
    w = 2.0 * math.pi * f_ref
    k0 = math.floor(t0 * f_ref)
    kern = np.exp(-1j * w * (tt - k0 * T))
    return (2.0 / T) * np.trapezoid(xx * kern, tt)


def extract_phase(trace: WaveformTrace, signal: str, f_ref: float, t0: float,
                  eps: float = 1e-12) -> PhaseSample:
    c = fundamental(trace, signal, f_ref, t0)
    amp = abs(c)
    if amp < eps:
        raise AmplitudeTooSmall(f"fundamental amplitude {amp:.3g} at t0 = {t0:.9g} s")
    T = 1.0 / f_ref
    return PhaseSample(t0 + 0.5 * T, wrap_deg(math.degrees(math.atan2(c.imag, c.real))), amp, T)


def phase_series(trace, signal, f_ref, t_first=None, n_windows=None):
    """Back-to-back one-period windows starting at ``t_first``."""
    T = 1.0 / f_ref
    t_first = trace.t_start if t_first is None else t_first
    if n_windows is None:
        n_windows = int(math.floor((trace.t_stop - t_first) / T * (1 + 1e-9)))
    return [extract_phase(trace, signal, f_ref, t_first + k * T) for k in range(n_windows)]


@dataclass
class LockReport:
    locked: bool
    lock_phase: float
    phase_drift_rate: float  # degrees per REF cycle
    classified_bit: object
    settle_time: float | None
    max_excursion: float = 0.0
    amplitude: float = 0.0
    tail_cycles: int = 0
    samples: list = field(default_factory=list, repr=False)

    def to_dict(self, with_samples: bool = False) -> dict:
        d = asdict(self)
        bit = self.classified_bit
        d["classified_bit"] = bit if isinstance(bit, str) else bit.name
        if with_samples:
            d["samples"] = [asdict(s) for s in self.samples]
        else:
            d.pop("samples")
        return d


def detect_lock(trace: WaveformTrace, signal: str, f_ref: float, tail_fraction: float = 0.5,
                threshold_deg: float = 1.0, drift_threshold: float = 1e-3,
                ref_phase: float = 0.0, min_tail: int = 10) -> LockReport:
    """Lock verdict from the phase history of ``signal``.

    Locked means both: the unwrapped phase stays within ``threshold_deg`` over
    the tail, and its least-squares slope is below ``drift_threshold`` degrees
    per cycle.  The slope test matters for high-Q tanks, where a free-running
    oscillator a few ppm off f_ref drifts far less than a degree per tail.
    """
    samples = phase_series(trace, signal, f_ref)
    n = len(samples)
    if n < 2 * min_tail:
        raise TooShort(f"trace spans {n} REF cycles; lock detection needs {2 * min_tail}")
    ph = np.degrees(np.unwrap(np.radians([s.phase_vs_ref for s in samples])))
    n_tail = max(min_tail, int(math.ceil(tail_fraction * n)))
    tail = ph[-n_tail:]
    excursion = float(tail.max() - tail.min())
    slope = float(np.polyfit(np.arange(n_tail), tail, 1)[0])
    locked = excursion < threshold_deg and abs(slope) < drift_threshold
    lock_phase = wrap_deg(float(tail[-1]))
    amp = float(np.mean([s.fundamental_amplitude for s in samples[-n_tail:]]))
    bit = UNRESOLVED
    settle = None
    if locked:
        try:
            bit = classify(Phasor(amp, lock_phase), ref_phase)
        except (MetastablePhase, AmplitudeTooSmall):
            bit = UNRESOLVED
        # running max/min from the end back to find where the band starts holding
        hi = np.maximum.accumulate(ph[::-1])[::-1]
        lo = np.minimum.accumulate(ph[::-1])[::-1]
        ok = np.nonzero(hi - lo < threshold_deg)[0]
        settle = samples[int(ok[0])].t_center - 0.5 / f_ref
    return LockReport(locked, lock_phase, slope, bit, settle, excursion, amp, n_tail, samples)


@dataclass
class LockState:
    report: LockReport
    trace: WaveformTrace
    settled_state: np.ndarray
    t_settled: float


def _settle_and_probe(model, initial, t_start, settle_cycles, tail_cycles, signal,
                      steps_per_cycle, method, **lock_kw):
    T = 1.0 / model.f_ref
    y = np.asarray(initial, dtype=float)
    t = t_start
    if settle_cycles > 0:
        pre = run_cycles(model, settle_cycles, y, t_start=t, steps_per_cycle=steps_per_cycle,
                         stride=steps_per_cycle, components=False, method=method)
        y = pre.final_state()
        t = pre.t_stop
    tail = run_cycles(model, tail_cycles, y, t_start=t, steps_per_cycle=steps_per_cycle,
                      method=method)
    report = detect_lock(tail, signal, model.f_ref, tail_fraction=1.0, **lock_kw)
    return LockState(report, tail, y, t), t + tail_cycles * T


def find_lock_states(model: CircuitModel, f_ref: float | None = None, settle_cycles: int = 3000,
                     tail_cycles: int = 40, signal: str | None = None,
                     steps_per_cycle: int = 200, method: Method = Method.RK4_FIXED,
                     **lock_kw) -> tuple[LockState, LockState]:
    """Find both SHIL lock states by settle-then-time-shift.

    State A is the settled transient from ``model.initial_state``.  State B
    restarts from A's settled state with the clock advanced by half a REF
    period; SYNC, at twice the REF frequency, sees the same phase, so the
    oscillator is prepared 180 degrees away relative to REF.
    """
    if f_ref is not None and not math.isclose(f_ref, model.f_ref, rel_tol=1e-12):
        raise ValueError("f_ref disagrees with the model's reference frequency")
    signal = signal or model.state_names[0]
    T = 1.0 / model.f_ref
    a, _ = _settle_and_probe(model, model.initial_state, 0.0, settle_cycles, tail_cycles,
                             signal, steps_per_cycle, method, **lock_kw)
    if not a.report.locked:
        raise LockNotFound(
            f"state A not locked: drift {a.report.phase_drift_rate:.3g} deg/cycle, "
            f"excursion {a.report.max_excursion:.3g} deg over {a.report.tail_cycles} cycles",
        )
    y_end = a.trace.final_state()
    b, _ = _settle_and_probe(model, y_end, a.trace.t_stop + 0.5 * T, 0, tail_cycles, signal,
                             steps_per_cycle, method, **lock_kw)
    if not b.report.locked:
        raise LockNotFound(
            f"state B not locked: drift {b.report.phase_drift_rate:.3g} deg/cycle")
    if angular_distance(a.report.lock_phase, b.report.lock_phase) < 90.0:
        raise DegenerateStates(
            f"lock phases {a.report.lock_phase:.2f} and {b.report.lock_phase:.2f} deg share a basin")
    return a, b

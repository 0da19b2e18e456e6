"""Time integration of ``CircuitModel`` systems.

The run is split into segments at every scheduled event, so no step ever
straddles a switch edge or injection edge, and every event time appears in
the captured trace.  Inside a segment the compiled kernel sees a constant
parameter vector.

Two methods are available:

``RK4_FIXED``
    classical fourth-order Runge-Kutta with a fixed step (shrunk per segment
    so that the last step lands exactly on the segment end).
``TRAP_IMPLICIT``
    trapezoidal rule with Newton iteration on the analytic Jacobian.  With a
    fixed ``step`` it runs at that step; otherwise the step is controlled by
    step doubling against ``rel_tol``/``abs_tol``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .circuits import CircuitModel
from .errors import ConfigInvalid, NonFiniteState, StepUnderflow

OK, NONFINITE, UNDERFLOW, NEWTON_FAIL = 0, 1, 2, 3


class Method(enum.Enum):
    RK4_FIXED = "RK4_FIXED"
    TRAP_IMPLICIT = "TRAP_IMPLICIT"


@dataclass(frozen=True)
class IntegratorConfig:
    method: Method = Method.RK4_FIXED
    step: float | None = None
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    t_start: float = 0.0
    t_stop: float = 1e-6
    capture_stride: int = 1
    max_newton: int = 30
    min_step: float = 1e-21

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.t_stop > self.t_start:
            raise ConfigInvalid("t_stop must exceed t_start")
        if self.step is not None and not self.step > 0:
            raise ConfigInvalid("step must be positive")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigInvalid("tolerances must be positive")
        if self.capture_stride < 1:
            raise ConfigInvalid("capture_stride must be >= 1")

    @classmethod
    def per_cycle(cls, f_ref: float, cycles: float, steps_per_cycle: int = 200,
                  t_start: float = 0.0, **kw) -> "IntegratorConfig":
        """Fixed-step config covering ``cycles`` reference periods."""
        T = 1.0 / f_ref
        return cls(step=T / steps_per_cycle, t_start=t_start,
                   t_stop=t_start + cycles * T, **kw)


@dataclass(eq=False)
class WaveformTrace:
    times: np.ndarray
    signals: dict
    event_marks: list = field(default_factory=list)
    state_names: tuple = ()

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n = len(self.times)
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trace times must be strictly increasing")
        for k, col in self.signals.items():
            if len(col) != n:
                raise ValueError(f"column {k!r} has {len(col)} samples, expected {n}")

    def __getitem__(self, name):
        return self.signals[name]

    def __contains__(self, name):
        return name in self.signals

    def __len__(self):
        return len(self.times)

    @property
    def t_start(self):
        return float(self.times[0])

    @property
    def t_stop(self):
        return float(self.times[-1])

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.signals[s] for s in self.state_names])

    def final_state(self) -> np.ndarray:
        return np.array([self.signals[s][-1] for s in self.state_names])

    def state_at_index(self, k: int) -> np.ndarray:
        return np.array([self.signals[s][k] for s in self.state_names])

    def between(self, t0: float, t1: float) -> "WaveformTrace":
        m = (self.times >= t0) & (self.times <= t1)
        return WaveformTrace(self.times[m], {k: v[m] for k, v in self.signals.items()},
                             [e for e in self.event_marks if t0 <= e[0] <= t1], self.state_names)

    def shifted(self, dt: float) -> "WaveformTrace":
        """The same samples relabeled at ``times + dt``."""
        return WaveformTrace(self.times + dt, dict(self.signals),
                             [(t + dt, lab) for t, lab in self.event_marks], self.state_names)

    def to_csv(self, path) -> None:
        names = list(self.signals)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + names)
            cols = [self.times] + [np.asarray(self.signals[k]) for k in names]
            for row in zip(*cols):
                w.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def from_csv(cls, path, state_names=()) -> "WaveformTrace":
        data = np.genfromtxt(path, delimiter=",", names=True)
        names = data.dtype.names
        return cls(data[names[0]], {k: np.asarray(data[k]) for k in names[1:]},
                   state_names=tuple(state_names))


# ---------------------------------------------------------------------------
# segment kernels; the same source runs compiled or as plain Python

@numba.njit(cache=True)
def _finite(y):
    for v in y:
        if not math.isfinite(v):
            return False
    return True


@numba.njit(cache=True)
def _rk4_segment(f, y0, t_a, t_b, n, p, stride, out_t, out_y):
    """Take ``n`` equal steps from t_a to t_b; capture every ``stride``-th step
    and the endpoint.  Returns (status, n_captured, failure time)."""
    y = y0.copy()
    h = (t_b - t_a) / n
    k = 0
    for s in range(n):
        t = t_a + s * h
        a = f(t, y, p)
        b = f(t + 0.5 * h, y + 0.5 * h * a, p)
        c = f(t + 0.5 * h, y + 0.5 * h * b, p)
        d = f(t + h, y + h * c, p)
        y = y + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
        if not _finite(y):
            return NONFINITE, k, t + h
        if (s + 1) % stride == 0 or s == n - 1:
            out_t[k] = t_b if s == n - 1 else t_a + (s + 1) * h
            out_y[k] = y
            k += 1
    return OK, k, t_b


@numba.njit(cache=True)
def _trap_step(f, jac, t, y, fy, h, p, max_newton, rtol, atol):
    """One trapezoidal step.  Returns (converged, y_new, f(y_new))."""
    n = y.shape[0]
    t1 = t + h
    z = y + h * fy  # explicit Euler predictor
    eye = np.eye(n)
    for _ in range(max_newton):
        fz = f(t1, z, p)
        g = z - y - 0.5 * h * (fy + fz)
        J = eye - 0.5 * h * jac(t1, z, p)
        dz = np.linalg.solve(J, g)
        z = z - dz
        err = 0.0
        for i in range(n):
            w = atol + rtol * abs(z[i])
            e = abs(dz[i]) / w
            if e > err:
                err = e
        if err < 1e-3:
            return True, z, f(t1, z, p)
    return False, z, f(t1, z, p)


@numba.njit(cache=True)
def _trap_fixed_segment(step, f, jac, y0, t_a, t_b, n, p, stride, out_t, out_y,
                        max_newton, rtol, atol):
    y = y0.copy()
    h = (t_b - t_a) / n
    fy = f(t_a, y, p)
    k = 0
    for s in range(n):
        t = t_a + s * h
        ok, y, fy = step(f, jac, t, y, fy, h, p, max_newton, rtol, atol)
        if not _finite(y):
            return NONFINITE, k, t + h, h
        if not ok:
            return NEWTON_FAIL, k, t, h
        if (s + 1) % stride == 0 or s == n - 1:
            out_t[k] = t_b if s == n - 1 else t_a + (s + 1) * h
            out_y[k] = y
            k += 1
    return OK, k, t_b, h


@numba.njit(cache=True)
def _trap_adaptive_segment(step, f, jac, y0, t_a, t_b, h0, p, stride, out_t, out_y,
                           max_newton, rtol, atol, h_min, h_max):
    """Step-doubling error control.  Capture buffers are sized by the caller;
    returns early with status OK and the reached time when they fill up."""
    y = y0.copy()
    t = t_a
    h = min(h0, h_max)
    fy = f(t, y, p)
    k = 0
    s = 0
    cap = out_t.shape[0]
    while t < t_b:
        last = False
        if t + h >= t_b or t_b - (t + h) < 1e-9 * h:
            h = t_b - t
            last = True
        ok1, y1, f1 = step(f, jac, t, y, fy, h, p, max_newton, rtol, atol)
        okh, yh, fh = step(f, jac, t, y, fy, 0.5 * h, p, max_newton, rtol, atol)
        ok2 = False
        y2 = y1
        f2 = f1
        if okh:
            ok2, y2, f2 = step(f, jac, t + 0.5 * h, yh, fh, 0.5 * h, p,
                                     max_newton, rtol, atol)
        if not (ok1 and okh and ok2):
            h *= 0.25
            if h < h_min:
                return UNDERFLOW, k, t, h
            continue
        err = 0.0
        for i in range(y.shape[0]):
            w = atol + rtol * max(abs(y[i]), abs(y2[i]))
            e = abs(y2[i] - y1[i]) / 3.0 / w
            if e > err:
                err = e
        if not math.isfinite(err):
            return NONFINITE, k, t, h
        if err <= 1.0:
            t = t_b if last else t + h
            y = y2
            fy = f2
            s += 1
            if s % stride == 0 or t == t_b:
                out_t[k] = t
                out_y[k] = y
                k += 1
                if k == cap and t < t_b:
                    return OK, k, t, h
        fac = 2.0 if err == 0.0 else min(2.0, max(0.2, 0.9 * err ** (-1.0 / 3.0)))
        h = min(h * fac, h_max)
        if h < h_min:
            return UNDERFLOW, k, t, h
    return OK, k, t, h


def _pick(fn, compiled: bool):
    return fn if compiled else fn.py_func


def _is_compiled(model: CircuitModel, implicit: bool = False) -> bool:
    jit = numba.core.registry.CPUDispatcher
    if implicit:
        return isinstance(model.kernel, jit) and isinstance(model.jac_kernel, jit)
    return isinstance(model.kernel, jit)


def _segments(model: CircuitModel, t0: float, t1: float):
    inner = model.events_between(t0, t1)
    cuts = [t0] + [t for t, _ in inner] + [t1]
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a], inner


def _default_step(model, config):
    return config.step if config.step is not None else 1.0 / (model.f_ref * 200)


def _run_segment(model, config, y, a, b, carry):
    """Integrate one event-free segment.  Returns (times, states, final y)."""
    compiled = _is_compiled(model, config.method is Method.TRAP_IMPLICIT)
    p = model.params_at(0.5 * (a + b))
    stride = config.capture_stride
    method = config.method
    if method is Method.TRAP_IMPLICIT and config.step is None:
        h_max = 1.0 / (model.f_ref * 16)
        h_min = max(config.min_step, 1e-15 * max(abs(a), abs(b)))
        ts, ys = [], []
        t = a
        h = carry.get("h", 1.0 / (model.f_ref * 200))
        jac = model.jac_kernel if compiled else model.jacobian_for_kernel
        seg = _pick(_trap_adaptive_segment, compiled)
        while True:
            out_t = np.empty(4096)
            out_y = np.empty((4096, len(y)))
            status, k, t_reached, h = seg(_pick(_trap_step, compiled), model.kernel, jac, y, t,
                                          b, h, p, stride, out_t, out_y, config.max_newton,
                                          config.rel_tol, config.abs_tol, h_min, h_max)
            _check(status, t_reached, h)
            ts.append(out_t[:k])
            ys.append(out_y[:k])
            if k:
                y = out_y[k - 1].copy()
            t = t_reached
            if t >= b:
                break
        carry["h"] = h
        return np.concatenate(ts), np.concatenate(ys), y
    h = _default_step(model, config)
    n = max(1, int(math.ceil((b - a) / h * (1 - 1e-12))))
    m = n // stride + 1
    out_t = np.empty(m)
    out_y = np.empty((m, len(y)))
    if method is Method.RK4_FIXED:
        status, k, t_fail = _pick(_rk4_segment, compiled)(model.kernel, y, a, b, n, p, stride,
                                                          out_t, out_y)
        _check(status, t_fail, h)
    else:
        jac = model.jac_kernel if compiled else model.jacobian_for_kernel
        status, k, t_fail, _ = _pick(_trap_fixed_segment, compiled)(
            _pick(_trap_step, compiled), model.kernel, jac, y, a, b, n, p, stride, out_t, out_y,
            config.max_newton, config.rel_tol, config.abs_tol)
        _check(status, t_fail, h)
    return out_t[:k], out_y[:k], out_y[k - 1].copy()


def _check(status, t, h):
    if status == NONFINITE:
        raise NonFiniteState(t)
    if status == UNDERFLOW:
        raise StepUnderflow(f"step {h:.3g} s below floor at t = {t:.9g} s")
    if status == NEWTON_FAIL:
        raise StepUnderflow(f"Newton iteration failed at fixed step {h:.3g} s, t = {t:.9g} s")


def integrate(model: CircuitModel, config: IntegratorConfig, initial=None,
              components: bool = True) -> WaveformTrace:
    """Integrate ``model`` over [t_start, t_stop].

    The trace holds the state columns, and with ``components`` also
    ``v_<name>``, ``i_<name>``, ``p_<name>`` per component and ``E_stored``
    when the model defines stored energy.
    """
    y = np.array(model.initial_state if initial is None else initial, dtype=float)
    if y.shape != (model.dimension,):
        raise ConfigInvalid(f"initial state must have {model.dimension} entries")
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(config.t_start, "initial state is not finite")
    segs, inner = _segments(model, config.t_start, config.t_stop)
    times = [np.array([config.t_start])]
    states = [y[None, :].copy()]
    carry = {}
    for a, b in segs:
        ts, ys, y = _run_segment(model, config, y, a, b, carry)
        times.append(ts)
        states.append(ys)
    T = np.concatenate(times)
    Y = np.concatenate(states)
    return _assemble(model, T, Y, list(inner), components)


def _assemble(model, T, Y, marks, components):
    signals = {name: Y[:, j].copy() for j, name in enumerate(model.state_names)}
    if components:
        for name, (v, i) in model.readouts(T, Y).items():
            signals[f"v_{name}"] = v
            signals[f"i_{name}"] = i
            signals[f"p_{name}"] = v * i
        parts = model.element_energies(Y)
        for name, e in parts.items():
            signals[f"E_{name}"] = e
        if parts:
            signals["E_stored"] = sum(parts.values())
    return WaveformTrace(T, signals, marks, tuple(model.state_names))


def step_to_event(model: CircuitModel, config: IntegratorConfig, state, t: float,
                  t_event: float) -> np.ndarray:
    """Advance ``state`` from ``t`` to exactly ``t_event``."""
    state = np.array(state, dtype=float)
    if t_event == t:
        return state
    if t_event < t:
        raise ConfigInvalid("t_event must not precede t")
    cfg = IntegratorConfig(method=config.method, step=config.step, rel_tol=config.rel_tol,
                           abs_tol=config.abs_tol, t_start=t, t_stop=t_event,
                           capture_stride=10**9, max_newton=config.max_newton)
    y = state
    carry = {}
    for a, b in _segments(model, t, t_event)[0]:
        _, _, y = _run_segment(model, cfg, y, a, b, carry)
    return y


def run_cycles(model: CircuitModel, cycles: float, initial=None, t_start: float = 0.0,
               steps_per_cycle: int = 200, stride: int = 1, components: bool = True,
               method: Method = Method.RK4_FIXED) -> WaveformTrace:
    """Convenience wrapper: integrate a whole number of REF cycles."""
    cfg = IntegratorConfig.per_cycle(model.f_ref, cycles, steps_per_cycle, t_start=t_start,
                                     capture_stride=stride, method=method)
    return integrate(model, cfg, initial, components=components)

"""Power and energy bookkeeping over transient traces.

Sign convention is passive throughout: ``p = v * i > 0`` means a component
absorbs power.  "Supplied" energy is therefore the negative of a component's
cumulative energy.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .circuits import CircuitModel
from .errors import FlipNotInTrace, MissingColumns, TooShort
from .transient import WaveformTrace


def cumulative_trapezoid(y, x) -> np.ndarray:
    out = np.zeros(len(x))
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def _zero_crossings(t, y) -> list[float]:
    s = np.sign(y)
    nz = np.nonzero(s)[0]
    out = []
    for a, b in zip(nz[:-1], nz[1:]):
        if s[a] != s[b]:
            out.append(float(t[a] - y[a] * (t[b] - t[a]) / (y[b] - y[a])))
    return out


def _window_mean(t, y, t0, t1) -> float:
    """Time average of a sampled signal over [t0, t1]."""
    m = (t > t0) & (t < t1)
    tt = np.concatenate(([t0], t[m], [t1]))
    yy = np.concatenate(([np.interp(t0, t, y)], y[m], [np.interp(t1, t, y)]))
    return float(np.trapezoid(yy, tt) / (t1 - t0))


@dataclass
class EnergyReport:
    times: np.ndarray = field(repr=False)
    per_component_cumulative: dict = field(repr=False)
    stored_energy: np.ndarray = field(repr=False)
    net_energy: np.ndarray = field(repr=False)
    peak_main_tank_energy: float
    per_cycle_dissipation: float
    q_effective: float
    q_standard: float
    net_energy_zero_crossings: list
    per_cycle_by_component: dict
    balance_residual: float
    cycles_used: int

    def to_dict(self) -> dict:
        return {
            "peak_main_tank_energy": self.peak_main_tank_energy,
            "per_cycle_dissipation": self.per_cycle_dissipation,
            "q_effective": self.q_effective,
            "q_standard": self.q_standard,
            "per_cycle_by_component": dict(self.per_cycle_by_component),
            "balance_residual": self.balance_residual,
            "cycles_used": self.cycles_used,
            "net_energy_zero_crossings": list(self.net_energy_zero_crossings),
        }

    def to_csv(self, path) -> None:
        names = list(self.per_component_cumulative)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + [f"W_{n}" for n in names] + ["E_stored", "E_net"])
            cols = ([self.times] + [self.per_component_cumulative[n] for n in names]
                    + [self.stored_energy, self.net_energy])
            for row in zip(*cols):
                w.writerow([f"{x:.17g}" for x in row])


def _check_columns(trace, model):
    need = [f"p_{c.name}" for c in model.components] + ["E_stored"]
    if model.main_tank:
        need.append(f"E_{model.main_tank}")
    missing = [k for k in need if k not in trace]
    if missing:
        raise MissingColumns(f"trace lacks {', '.join(missing)}")


def cycle_energies(t, cum, t0, f_ref, n_cycles):
    """Energy accumulated in each REF cycle, from a cumulative column."""
    edges = t0 + np.arange(n_cycles + 1) / f_ref
    return np.diff(np.interp(edges, t, cum))


def energy_report(trace: WaveformTrace, model: CircuitModel, f_ref: float,
                  tail_cycles: int | None = None) -> EnergyReport:
    """Cumulative energies, per-cycle dissipation and effective Q.

    ``q_effective`` follows the stored/dissipated-per-cycle convention (no
    2 pi); ``q_standard`` is 2 pi times that.
    """
    _check_columns(trace, model)
    t = trace.times
    n_cycles = int(math.floor((t[-1] - t[0]) * f_ref * (1 + 1e-9)))
    if n_cycles < 5:
        raise TooShort(f"trace spans {n_cycles} REF cycles; need at least 5")
    n_tail = n_cycles if tail_cycles is None else min(tail_cycles, n_cycles)
    n_tail = max(n_tail, 5)
    t_tail = t[0] + (n_cycles - n_tail) / f_ref

    cum = {c.name: cumulative_trapezoid(np.asarray(trace[f"p_{c.name}"]), t)
           for c in model.components}
    E = np.asarray(trace["E_stored"])
    storage = {c.name for c in model.components if c.storage}
    net = -sum(v for k, v in cum.items() if k not in storage)
    scale = max(float(np.max(np.abs(E))), 1e-300)
    residual = float(np.max(np.abs((E - E[0]) - net)) / scale)

    per_cycle = {k: float(np.mean(cycle_energies(t, v, t_tail, f_ref, n_tail)))
                 for k, v in cum.items() if k not in storage}
    supplied = -per_cycle[model.supply]

    main = np.asarray(trace[f"E_{model.main_tank}"])
    peaks = []
    for k in range(n_tail):
        a, b = t_tail + k / f_ref, t_tail + (k + 1) / f_ref
        m = (t > a) & (t < b)
        edge = np.interp([a, b], t, main)
        peaks.append(max(main[m].max(initial=-np.inf), edge.max()))
    peak = float(np.mean(peaks))
    q = peak / supplied if supplied > 0 else math.nan
    return EnergyReport(
        times=t, per_component_cumulative=cum, stored_energy=E, net_energy=net,
        peak_main_tank_energy=peak, per_cycle_dissipation=supplied, q_effective=q,
        q_standard=2 * math.pi * q, net_energy_zero_crossings=_zero_crossings(t, net),
        per_cycle_by_component=per_cycle, balance_residual=residual, cycles_used=n_tail,
    )


class FlipVerdict(enum.Enum):
    ENERGY_NEUTRAL = "ENERGY_NEUTRAL"
    DISSIPATIVE = "DISSIPATIVE"


@dataclass
class FlipAudit:
    flip_time: float
    release_time: float
    pre_average: float
    post_average: float
    excess_energy: float
    threshold: float
    crosses_zero: bool
    verdict: FlipVerdict

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["verdict"] = self.verdict.value
        return d


def flip_energy_audit(trace: WaveformTrace, model: CircuitModel, f_ref: float, flip_times,
                      durations=None, per_cycle_dissipation: float | None = None,
                      threshold_fraction: float = 0.05, window_cycles: float = 1.0):
    """Audit each flip for energy neutrality.

    The net energy (supplied minus dissipated, from trace start) is averaged
    over ``window_cycles`` REF periods just before the flip and just after the
    flip window closes.  Their difference is the excess energy the flip left
    in (or took from) the tanks.
    """
    flip_times = [float(x) for x in flip_times]
    if not flip_times:
        return []
    _check_columns(trace, model)
    T = 1.0 / f_ref
    durations = [0.5 * T] * len(flip_times) if durations is None else list(durations)
    t = trace.times
    if per_cycle_dissipation is None:
        pre = trace.between(t[0], flip_times[0])
        per_cycle_dissipation = energy_report(pre, model, f_ref).per_cycle_dissipation
    threshold = threshold_fraction * per_cycle_dissipation
    storage = {c.name for c in model.components if c.storage}
    net = -sum(cumulative_trapezoid(np.asarray(trace[f"p_{c.name}"]), t)
               for c in model.components if c.name not in storage)
    out = []
    bounds = flip_times[1:] + [t[-1]]
    for tf, dur, t_next in zip(flip_times, durations, bounds):
        w = window_cycles * T
        tr = tf + dur
        if tf - w < t[0] or tr + w > min(t_next, t[-1]) + 1e-12 * T:
            raise FlipNotInTrace(f"flip at {tf:.9g} s lacks a {window_cycles}-cycle window on both sides")
        before = _window_mean(t, net, tf - w, tf)
        after = _window_mean(t, net, tr, tr + w)
        m = (t >= tr) & (t <= t_next)
        crosses = len(_zero_crossings(t[m], net[m])) > 0
        excess = after - before
        verdict = FlipVerdict.ENERGY_NEUTRAL if abs(excess) < threshold else FlipVerdict.DISSIPATIVE
        out.append(FlipAudit(tf, tr, before, after, excess, threshold, crosses, verdict))
    return out

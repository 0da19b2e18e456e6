"""End-to-end experiment pipelines shared by the CLI and the acceptance suite."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ber as ber_mod
from .circuits import CircuitModel, build_ring, build_two_tank
from .config import ExperimentConfig, two_tank_config
from .energy import energy_report, flip_energy_audit
from .errors import ConfigInvalid, PhaseLatchError
from .lock import detect_lock, extract_phase, find_lock_states, phase_series
from .logic import (
    D_LATCH_NETLIST,
    FULL_ADDER_NETLIST,
    XOR_NETLIST,
    FullAdderFSM,
    eval_network,
    fsm_step,
    serial_add,
    step_network,
)
from .netlist import parse_netlist
from .phasor import ONE, ZERO, LogicLevel, Phasor, angular_distance, classify, wrap_deg
from .transient import IntegratorConfig, Method, WaveformTrace, integrate, run_cycles


@dataclass
class Outcome:
    """What a pipeline produced: a JSON-able report plus named traces/tables."""

    report: dict
    traces: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)


def _method(cfg: ExperimentConfig) -> Method:
    return Method(cfg.integrator.method)


def _spc(cfg):
    return cfg.integrator.steps_per_cycle


def _lock_kw(cfg):
    return dict(threshold_deg=cfg.analysis.lock_threshold,
                drift_threshold=cfg.analysis.drift_threshold)


def build_model(cfg: ExperimentConfig, schedule=()) -> CircuitModel:
    if cfg.experiment.circuit == "two-tank":
        return build_two_tank(two_tank_config(cfg.two_tank, schedule))
    if cfg.experiment.circuit == "ring":
        return build_ring(cfg.circuit)
    raise ConfigInvalid(f"{cfg.kind} needs a circuit")


def settle(model: CircuitModel, cycles: int, spc: int = 200, initial=None, t_start=0.0,
           method=Method.RK4_FIXED):
    """Run ``cycles`` REF periods with sparse capture; returns (state, time)."""
    y = model.initial_state if initial is None else np.asarray(initial, dtype=float)
    if cycles <= 0:
        return np.array(y, dtype=float), t_start
    tr = run_cycles(model, cycles, y, t_start=t_start, steps_per_cycle=spc, stride=spc,
                    components=False, method=method)
    return tr.final_state(), tr.t_stop


def _integrator(cfg, model, t_start, cycles, stride=None):
    it = cfg.integrator
    T = 1.0 / model.f_ref
    return IntegratorConfig(method=it.method, step=it.step if it.step else T / it.steps_per_cycle,
                            rel_tol=it.rel_tol, abs_tol=it.abs_tol, t_start=t_start,
                            t_stop=t_start + cycles * T,
                            capture_stride=stride or it.capture_stride)


# ---------------------------------------------------------------------------

def transient(cfg: ExperimentConfig) -> Outcome:
    model = build_model(cfg)
    trace = integrate(model, _integrator(cfg, model, 0.0, cfg.integrator.cycles))
    report = {"circuit": model.name, "samples": len(trace), "t_stop": trace.t_stop,
              "final_state": dict(zip(model.state_names, trace.final_state().tolist()))}
    verdicts = {}
    if model.name == "ring" and model.config.logic_injections:
        demo = ring_demo_analysis(trace, model, cfg.analysis.lock_threshold)
        report["ring_demo"] = demo
        verdicts = {"ring_demo_pass": demo["pass"]}
    return Outcome(report, {"trace": trace}, verdicts=verdicts)


def settle_index(phases, threshold):
    """First index from which the unwrapped phases stay inside a band."""
    ph = np.degrees(np.unwrap(np.radians(phases)))
    hi = np.maximum.accumulate(ph[::-1])[::-1]
    lo = np.minimum.accumulate(ph[::-1])[::-1]
    ok = np.nonzero(hi - lo < threshold)[0]
    return int(ok[0]) if len(ok) else None


def ring_demo_analysis(trace: WaveformTrace, model: CircuitModel, threshold: float = 1.0,
                       max_settle: int = 5, min_hold: int = 50, signal: str = "v_s1") -> dict:
    """Lock after SYNC onset, then one segment per logic injection.

    Cycle counts for injections are measured from the start of the injection;
    holding is counted from the settle point to the end of the segment.
    """
    c = model.config
    f = model.f_ref
    samples = phase_series(trace, signal, f, t_first=0.0)
    phases = np.array([s.phase_vs_ref for s in samples])
    amps = np.array([s.fundamental_amplitude for s in samples])
    n = len(samples)
    onset = int(round(c.sync_start * f))
    marks = [(int(round(i.start * f)), int(round((i.start + i.duration) * f)), i.level)
             for i in c.logic_injections]
    segments = [("sync", onset, onset, marks[0][0] if marks else n, None)]
    for k, (a, b, lvl) in enumerate(marks):
        end = marks[k + 1][0] if k + 1 < len(marks) else n
        segments.append((f"inject {lvl.value}", a, b, end, lvl))
    out = []
    ok_all = True
    for label, t_ref, t_free, end, want in segments:
        seg = phases[t_free:end]
        k = settle_index(seg, threshold)
        entry = {"segment": label, "start_cycle": t_ref, "end_cycle": end}
        if k is None or end - t_free < 20:
            entry.update(settled=False, passed=False)
            ok_all = False
            out.append(entry)
            continue
        settle_cycles = t_free + k - t_ref
        # drift over the back half, clear of the settling transient
        tail = seg[max(k, len(seg) // 2):]
        tail_u = np.degrees(np.unwrap(np.radians(tail)))
        drift = float(np.polyfit(np.arange(len(tail)), tail_u, 1)[0])
        bit = classify(Phasor(float(amps[end - 1]), float(phases[end - 1])))
        hold = end - (t_free + k)
        passed = settle_cycles <= max_settle and abs(drift) < 1e-3
        if want is not None:
            passed = passed and bit is want and hold >= min_hold
        ok_all &= passed
        entry.update(settled=True, settle_cycles=int(settle_cycles), hold_cycles=int(hold),
                     lock_phase=float(phases[end - 1]), drift=drift, bit=bit.name,
                     expected=None if want is None else want.name, passed=bool(passed))
        out.append(entry)
    return {"segments": out, "pass": bool(ok_all)}


def lockstates(cfg: ExperimentConfig) -> Outcome:
    model = build_model(cfg)
    signal = cfg.analysis.signal or model.state_names[0]
    a, b = find_lock_states(model, settle_cycles=cfg.analysis.settle_cycles,
                            tail_cycles=cfg.analysis.tail_cycles, signal=signal,
                            steps_per_cycle=_spc(cfg), method=_method(cfg), **_lock_kw(cfg))
    sep = angular_distance(a.report.lock_phase, b.report.lock_phase)
    report = {"circuit": model.name, "f_ref": model.f_ref, "state_A": a.report.to_dict(),
              "state_B": b.report.to_dict(), "phase_separation": sep}
    verdicts = {"both_locked": True, "separation_deg": sep,
                "complementary": a.report.classified_bit != b.report.classified_bit}
    return Outcome(report, {"state_A": a.trace, "state_B": b.trace}, verdicts=verdicts)


def energy(cfg: ExperimentConfig) -> Outcome:
    model = build_model(cfg)
    y, t = settle(model, cfg.analysis.settle_cycles, _spc(cfg), method=_method(cfg))
    trace = integrate(model, _integrator(cfg, model, t, cfg.analysis.tail_cycles, stride=1), y)
    rep = energy_report(trace, model, model.f_ref)
    lock = detect_lock(trace, cfg.analysis.signal or model.state_names[0], model.f_ref,
                       tail_fraction=1.0, **_lock_kw(cfg))
    dissipated = sum(v for k, v in rep.per_cycle_by_component.items() if k != model.supply)
    report = {"energy": rep.to_dict(), "lock": lock.to_dict(),
              "supply_vs_dissipation": dissipated / rep.per_cycle_dissipation}
    verdicts = {"locked": lock.locked, "peak_main_tank_energy": rep.peak_main_tank_energy,
                "per_cycle_dissipation": rep.per_cycle_dissipation, "q_effective": rep.q_effective}
    return Outcome(report, {"trace": trace}, tables={"energy": rep}, verdicts=verdicts)


def _first_crossing(trace, signal, t_after):
    t = trace.times
    x = np.asarray(trace[signal])
    idx = np.nonzero((t[:-1] >= t_after) & (np.sign(x[:-1]) != np.sign(x[1:])))[0]
    if not len(idx):
        return None
    i = idx[0]
    return float(t[i] - x[i] * (t[i + 1] - t[i]) / (x[i + 1] - x[i]))


def flip_demo(cfg: ExperimentConfig) -> Outcome:
    """Settle, then actuate S1 for half a cycle at each scheduled time."""
    if cfg.experiment.circuit != "two-tank":
        raise ConfigInvalid("the flip demo drives the two-tank latch")
    fl = cfg.flip
    if not fl.times:
        raise ConfigInvalid("flip.times is empty")
    spc, method = _spc(cfg), _method(cfg)
    model = build_model(cfg)
    T = 1.0 / model.f_ref
    signal = cfg.analysis.signal or "v1"
    y, t = settle(model, cfg.analysis.settle_cycles, spc, method=method)
    lead = integrate(model, _integrator(cfg, model, t, fl.lead_cycles, stride=1), y)
    per_cycle = energy_report(lead, model, model.f_ref).per_cycle_dissipation
    t0 = lead.t_stop
    y0 = lead.final_state()
    dur = fl.duration_cycles * T

    schedule = []
    for nominal in fl.times:
        t_nom = t0 + nominal
        if fl.alignment == "LITERAL":
            tf = t_nom
        else:
            probe_model = build_model(cfg, schedule)
            probe = integrate(probe_model, _integrator(cfg, probe_model, t0,
                                                       (t_nom - t0) / T + 1.5, 1), y0,
                              components=False)
            tf = _first_crossing(probe, signal, t_nom)
            if tf is None:
                raise PhaseLatchError(f"no {signal} zero crossing after {nominal:.3g} s")
        if schedule and tf < schedule[-1][0] + schedule[-1][1]:
            raise ConfigInvalid("flip windows overlap")
        schedule.append((tf, dur))

    model = build_model(cfg, schedule)
    t_end = schedule[-1][0] + dur + fl.tail_cycles * T
    demo = integrate(model, _integrator(cfg, model, t0, (t_end - t0) / T, 1), y0)
    audits = flip_energy_audit(demo, model, model.f_ref, [s for s, _ in schedule],
                               [d for _, d in schedule], per_cycle_dissipation=per_cycle,
                               threshold_fraction=cfg.analysis.energy_threshold)
    flips = []
    for k, ((tf, d), audit) in enumerate(zip(schedule, audits)):
        tr = tf + d
        before = extract_phase(demo, signal, model.f_ref, tf - T)
        i_rel = int(np.searchsorted(demo.times, tr))
        y_rel = demo.state_at_index(i_rel)
        # counterfactual continuation with no later flips, long enough to judge re-lock
        cont_model = build_model(cfg, schedule[:k + 1])
        cont = integrate(cont_model, _integrator(cfg, cont_model, tr, fl.tail_cycles, 1), y_rel,
                         components=False)
        after = extract_phase(cont, signal, model.f_ref, tr)
        lock = detect_lock(cont, signal, model.f_ref, tail_fraction=0.5, **_lock_kw(cfg))
        relock = None if lock.settle_time is None else (lock.settle_time - tr) * model.f_ref
        change = wrap_deg(after.phase_vs_ref - before.phase_vs_ref)
        flips.append({
            "flip_time": tf, "demo_time": tf - t0, "release_time": tr,
            "phase_before": before.phase_vs_ref, "phase_after": after.phase_vs_ref,
            "phase_change": change, "relocked": lock.locked, "relock_cycles": relock,
            "drift_after": lock.phase_drift_rate, "energy": audit.to_dict(),
        })
    report = {"demo_start": t0, "per_cycle_dissipation": per_cycle, "flips": flips,
              "schedule": schedule}
    verdicts = {
        "n_flips": len(flips),
        "phase_ok": all(abs(f["phase_change"] - 180.0) <= 5.0 for f in flips),
        "relock_ok": all(f["relocked"] and f["relock_cycles"] is not None
                         and f["relock_cycles"] <= 20 for f in flips),
        "energy_neutral": all(a.verdict.value == "ENERGY_NEUTRAL" for a in audits),
        "net_crosses_zero": all(a.crosses_zero for a in audits),
    }
    return Outcome(report, {"trace": demo}, verdicts=verdicts)


def ber(cfg: ExperimentConfig) -> Outcome:
    b = cfg.ber
    rows = ber_mod.ber_sweep(b.encodings, b.ratios, b.trials, cfg.experiment.seed, b.workers)
    worst = 0.0
    for r in rows:
        p = r.analytic
        sd = math.sqrt(p * (1 - p) / r.trials)
        dev = abs(r.empirical - p)
        worst = max(worst, dev / sd if sd > 0 else (math.inf if dev else 0.0))
    report = {"seed": cfg.experiment.seed, "rows": ber_mod.sweep_to_dicts(rows),
              "max_sigma_deviation": worst}
    return Outcome(report, tables={"ber": rows}, verdicts={"within_4_sigma": worst <= 4.0})


BUILTIN_NETLISTS = {"full-adder": FULL_ADDER_NETLIST, "xor": XOR_NETLIST, "d-latch": D_LATCH_NETLIST}


def logic(cfg: ExperimentConfig, netlist_text: str | None = None) -> Outcome:
    lg = cfg.logic
    if lg.netlist == "fsm" and netlist_text is None:
        fsm_table = []
        for state in (ZERO, ONE):
            for a in (ZERO, ONE):
                for b in (ZERO, ONE):
                    fsm = FullAdderFSM()
                    fsm.master.state = fsm.slave.state = state
                    s, new = fsm_step(fsm, a, b)
                    fsm_table.append({"state": state.value, "a": a.value, "b": b.value,
                                      "sum": s.value, "new_state": new.value})
        pairs = list(zip(lg.operands[::2], lg.operands[1::2]))
        adds = [{"x": x, "y": y, "sum": serial_add(x, y, lg.width)} for x, y in pairs]
        ok = all(r["sum"] == r["x"] + r["y"] for r in adds)
        return Outcome({"fsm_transitions": fsm_table, "serial_adds": adds},
                       verdicts={"serial_adder_correct": ok})
    text = netlist_text if netlist_text is not None else BUILTIN_NETLISTS.get(lg.netlist)
    if text is None:
        with open(lg.netlist) as fh:
            text = fh.read()
    net = parse_netlist(text)
    rows = []
    if net.is_sequential:
        rng = np.random.default_rng(cfg.experiment.seed)
        state = {}
        for _ in range(64):
            inp = {n: LogicLevel(int(rng.integers(0, 2))) for n in net.inputs}
            vals, state = step_network(net, inp, state)
            outs = {o: state.get(o, vals[o]) for o in net.outputs}
            rows.append({k: v.value for k, v in {**inp, **outs}.items()})
    else:
        for k in range(2 ** len(net.inputs)):
            inp = {n: LogicLevel((k >> j) & 1) for j, n in enumerate(net.inputs)}
            vals = eval_network(net, inp)
            rows.append({n: vals[n].value for n in (*net.inputs, *net.outputs)})
    return Outcome({"netlist": lg.netlist, "rows": rows}, verdicts={"rows": len(rows)})


PIPELINES = {"TRANSIENT": transient, "LOCKSTATES": lockstates, "FLIP": flip_demo,
             "ENERGY": energy, "BER": ber, "LOGIC": logic}

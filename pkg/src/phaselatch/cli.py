"""Command line front end: ``phaselatch <subcommand> [--preset NAME | --config PATH]``."""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .ber import write_sweep_csv
from .config import PRESETS, ExperimentConfig, parse_config, preset, render
from .errors import PhaseLatchError
from .experiments import PIPELINES, Outcome

SUBCOMMANDS = {"transient": "TRANSIENT", "lockstates": "LOCKSTATES", "flip": "FLIP",
               "energy": "ENERGY", "ber": "BER", "logic": "LOGIC"}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "name"):
        return obj.name
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    """Replace non-finite floats, which JSON cannot carry, with null."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(json.loads(json.dumps(obj, default=_json_default))), fh, indent=2)
        fh.write("\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_outputs(outcome: Outcome, out_dir: Path, fmt: str, stem: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, trace in outcome.traces.items():
        if fmt == "csv":
            p = out_dir / f"{stem}_{name}.csv"
            trace.to_csv(p)
        else:
            p = out_dir / f"{stem}_{name}.json"
            dump_json({"time": trace.times, **trace.signals, "events": trace.event_marks}, p)
        files.append(p)
    for name, table in outcome.tables.items():
        if name == "ber":
            p = out_dir / f"{stem}_ber.csv"
            write_sweep_csv(table, p)
        else:
            p = out_dir / f"{stem}_{name}.csv"
            table.to_csv(p)
        files.append(p)
    p = out_dir / f"{stem}_report.json"
    dump_json({"report": outcome.report, "verdicts": outcome.verdicts}, p)
    files.append(p)
    return files


def run(subcommand: str, config: ExperimentConfig, out_dir=None, fmt=None,
        netlist_text=None) -> dict:
    """Execute one experiment and write its files plus a manifest."""
    kind = SUBCOMMANDS[subcommand]
    if config.kind != kind:
        config = config.with_kind(kind)
    out_dir = Path(out_dir or config.output.dir)
    fmt = fmt or config.output.format
    t0 = time.perf_counter()
    if kind == "LOGIC":
        outcome = PIPELINES[kind](config, netlist_text)
    else:
        outcome = PIPELINES[kind](config)
    wall = time.perf_counter() - t0
    files = write_outputs(outcome, out_dir, fmt, subcommand)
    manifest = {
        "tool": "phaselatch",
        "version": __version__,
        "subcommand": subcommand,
        "config": render(config),
        "seed": config.experiment.seed,
        "wall_time_s": wall,
        "files": [{"path": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size}
                  for p in files],
        "verdicts": outcome.verdicts,
    }
    dump_json(manifest, out_dir / f"{subcommand}_manifest.json")
    return manifest


def _summary(manifest) -> str:
    lines = [f"{manifest['subcommand']}: {manifest['wall_time_s']:.2f} s"]
    for k, v in manifest["verdicts"].items():
        lines.append(f"  {k}: {v}")
    for f in manifest["files"]:
        lines.append(f"  wrote {f['path']} ({f['bytes']} bytes)")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phaselatch", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", type=Path, help="experiment config file")
        src.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--format", choices=("csv", "json"))
        if name == "ber":
            p.add_argument("--ratios", help="comma-separated n/s grid")
            p.add_argument("--trials", type=float)
        if name == "logic":
            p.add_argument("--netlist", type=Path, help="gate netlist file")
    return ap


def _load(args) -> ExperimentConfig:
    kind = SUBCOMMANDS[args.subcommand]
    if args.config:
        cfg = parse_config(args.config.read_text(), default_kind=kind)
    elif args.preset:
        cfg = preset(args.preset).with_kind(kind)
    else:
        cfg = parse_config(f"[experiment]\nkind = {kind}\n")
    if args.seed is not None:
        cfg = replace(cfg, experiment=replace(cfg.experiment, seed=args.seed))
    if kind == "BER":
        ber = cfg.ber
        if args.ratios:
            ber = replace(ber, ratios=tuple(float(x) for x in args.ratios.split(",")))
        if args.trials:
            ber = replace(ber, trials=int(args.trials))
        cfg = replace(cfg, ber=ber)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        netlist = args.netlist.read_text() if getattr(args, "netlist", None) else None
        manifest = run(args.subcommand, cfg, args.out, args.format, netlist)
    except (PhaseLatchError, OSError, ValueError) as exc:
        print(f"phaselatch {args.subcommand}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(_summary(manifest))
    return 0


if __name__ == "__main__":
    sys.exit(main())

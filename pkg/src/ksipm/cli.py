"""Command line entry point: ``ksipm run | sweep | classify | nash-test | info``.

Exit codes: 0 success, 1 configuration error, 2 a run stopped on a blowup
flag (outputs are still written), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import diagnostics, intervals, nash
from ._kernels import BACKEND
from .config import ConfigError, RunConfig
from .dynamics import OK, SimState, run
from .initial import InitError, make_initial_data
from .snapshot import SnapshotError, from_state, read_snapshot, write_snapshot

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 1, 2, 3


def _initial_state(cfg: RunConfig) -> SimState:
    grid = cfg.grid()
    if cfg.init_kind() == "from_snapshot":
        snap = read_snapshot(cfg["init.path"])
        if snap.rho.grid != grid:
            raise ConfigError(f"snapshot grid {snap.rho.grid.shape} differs from configured {grid.shape}")
        return SimState(t=snap.t, rho=snap.rho, rho_M=snap.rho_M)
    return SimState.initial(make_initial_data(cfg.init_spec(), grid))


class _SnapshotSink:
    def __init__(self, directory, every, g):
        self.directory, self.every, self.g = directory, every, g
        self.next = None

    def __call__(self, record, state):
        if self.every <= 0:
            return
        if self.next is None:
            self.next = (math.floor(state.t / self.every + 1e-9)) * self.every
        if state.t >= self.next - 1e-12:
            write_snapshot(os.path.join(self.directory, f"snap_{state.step_count:08d}.bin"), from_state(state, self.g))
            self.next = (math.floor(state.t / self.every + 1e-9) + 1) * self.every


def run_one(cfg: RunConfig, out_dir: str, g: float | None = None) -> dict:
    """Single simulation with CSV, snapshots and a JSON summary in ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    params = cfg.params(g)
    state = _initial_state(cfg)
    max_l2 = [0.0]

    def track(record, st):
        max_l2[0] = max(max_l2[0], record.l2sq)

    with diagnostics.CsvSink(os.path.join(out_dir, "diagnostics.csv")) as csv_sink:
        sinks = [csv_sink, track, _SnapshotSink(out_dir, cfg["output.snapshot_every"], params.g)]
        res = run(params, state, sinks, record=False, nash=cfg["output.nash_ratio"])
    final = res.final
    write_snapshot(os.path.join(out_dir, "final.bin"), from_state(final, params.g))
    rec = diagnostics.make_record(final, params.g, 0.0)
    summary = {
        "g": params.g,
        "reason": res.reason,
        "t_final": final.t,
        "steps": final.step_count,
        "max_l2sq": max_l2[0],
        "final": {"mass": rec.mass, "l2sq": rec.l2sq, "linf": rec.linf, "min_rho": rec.min_rho, "E": rec.E},
        "mass_drift": abs(float(np.mean(final.rho.values)) - final.rho_M) / final.rho_M,
        "negativity_events": res.negativity_events,
        "min_rho_ratio": res.min_rho_ratio,
        "backend": BACKEND,
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def _sweep_member(args):
    text, out_dir, g = args
    return run_one(RunConfig.from_text(text), out_dir, g)


def cmd_run(cfg, out, args):
    s = run_one(cfg, out)
    print(f"{s['reason']} at t={s['t_final']:.6g} after {s['steps']} steps; final l2sq={s['final']['l2sq']:.6g}")
    return EXIT_OK if s["reason"] == OK else EXIT_BLOWUP


def cmd_sweep(cfg, out, args):
    os.makedirs(out, exist_ok=True)
    text = cfg.to_toml()
    jobs = [(text, os.path.join(out, f"g_{float(g):g}"), float(g)) for g in cfg["sweep.g_values"]]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_member, jobs))
    else:
        results = [_sweep_member(j) for j in jobs]
    with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("g", "outcome", "t_final", "max_l2sq"))
        for s in results:
            w.writerow((repr(s["g"]), s["reason"], repr(s["t_final"]), repr(s["max_l2sq"])))
    for s in results:
        print(f"g={s['g']:g}: {s['reason']} at t={s['t_final']:.6g}, max l2sq={s['max_l2sq']:.6g}")
    return EXIT_OK if all(s["reason"] == OK for s in results) else EXIT_BLOWUP


def cmd_classify(cfg, out, args):
    if not args.input:
        raise ConfigError("classify needs a diagnostics CSV")
    try:
        records = diagnostics.read_csv(args.input)
    except ValueError as exc:
        raise OSError(f"cannot read {args.input}: {exc}") from exc
    ccfg = cfg.classifier()
    clf = intervals.classify([r.t for r in records], [r.l2sq for r in records], ccfg,
                             tilde=[r.l2sq_tilde for r in records])
    os.makedirs(out, exist_ok=True)
    intervals.write_intervals_csv(clf.intervals, os.path.join(out, "intervals.csv"))
    summary = intervals.summarize(clf.intervals, clf.end_level, ccfg.N0)
    report = {
        "N0": ccfg.N0,
        "trace_end_level": summary["trace_end_level"],
        "intertwining_ok": summary["intertwining_ok"],
        "failures": summary["failures"],
        "counts": {str(k): v for k, v in summary["counts"].items()},
        "min_good_length": {str(k): v for k, v in summary["min_good_length"].items()},
        "tilde_integrals": [
            {"level": iv.level, "kind": iv.kind, "integral": iv.tilde_integral,
             "dichotomy_threshold": 2.0 ** (iv.level - 2) * iv.length}
            for iv in clf.intervals
        ],
    }
    if ccfg.c1_g_over_N is not None or ccfg.C1_budget is not None:
        mass = records[0].mass if records else None
        report["budget"] = intervals.budget_ledger(clf.intervals, cfg["physics.g"], ccfg, mass)
        report["budget"]["per_level"] = {str(k): v for k, v in report["budget"]["per_level"].items()}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"{len(clf.intervals)} intervals, intertwining_ok={summary['intertwining_ok']}")
    return EXIT_OK


def cmd_nash(cfg, out, args):
    os.makedirs(out, exist_ok=True)
    from .spectral import Grid

    grid = Grid(cfg["nash.n"], cfg["nash.n"])
    Ns = cfg["nash.N_values"]
    report = {}
    for kind in ("packets", "baseline"):
        rows = nash.ensemble(Ns, cfg["nash.a"], cfg["nash.members"], grid=grid, kind=kind)
        nash.write_ensemble_csv(rows, os.path.join(out, f"ensemble_{kind}.csv"))
        Ns_, mx = nash.ensemble_max(rows)
        report[kind] = {"N": Ns_, "max_ratio": mx, "slope": nash.loglog_slope(Ns_, mx)}
        print(f"{kind}: slope of max nash_ratio = {report[kind]['slope']:.4f}")
    with open(os.path.join(out, "nash_report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    return EXIT_OK


def cmd_info(cfg, out, args):
    grid = cfg.grid()
    print(cfg.to_toml(), end="")
    state = _initial_state(cfg)
    n = grid.n1 * grid.n2
    print("# derived")
    print(f"# rho_M = {state.rho_M!r}")
    print(f"# mass = {state.rho_M * grid.area!r}")
    print(f"# h1 = {grid.h1!r}, h2 = {grid.h2!r}")
    # about 30 live n1 x n2 float arrays during a step
    print(f"# estimated memory = {30 * 8 * n / 2**20:.1f} MiB")
    print(f"# kernel backend = {BACKEND}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "classify": cmd_classify, "nash-test": cmd_nash, "info": cmd_info}


def build_parser():
    p = argparse.ArgumentParser(prog="ksipm", description="Keller-Segel / Darcy pseudo-spectral simulator")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("input", nargs="?", help="diagnostics CSV (classify only)")
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs for sweep")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.override)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        out = args.out or cfg["output.directory"]
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, InitError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, SnapshotError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

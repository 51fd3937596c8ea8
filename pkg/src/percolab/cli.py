"""Command-line interface.

Usage::

    percolab run --config exp.toml --out results/exp
    percolab sweep --config sweep.toml --out results/sweep --workers 4 --plot
    percolab corrlen --out results/L --seed 3 --fit

Every run writes into a temporary sibling directory that is renamed to
``--out`` at the end.  ``manifest.json`` is written first (status
``running``) and rewritten last with timings, the output list and the final
status.  Exit codes: 0 success, 1 configuration error, 2 runtime or
statistical abort (partial results are kept).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import shutil
import sys
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import SECTIONS, ConfigError, RunConfig, load_config, parse_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
SCHEMA = "# schema=1"


class RuntimeAbort(RuntimeError):
    """A statistical or runtime failure after outputs were started."""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunDir:
    """Results directory written atomically through a temporary sibling."""

    def __init__(self, out: Path, cfg: RunConfig):
        self.out = Path(out)
        if self.out.exists() and (not self.out.is_dir() or any(self.out.iterdir())):
            raise ConfigError(f"output directory {self.out} already exists and is not empty")
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = self.out.parent / f".{self.out.name}.partial-{os.getpid()}"
        if self.tmp.exists():
            shutil.rmtree(self.tmp)
        self.tmp.mkdir()
        self.outputs: list[str] = []
        self.stages: dict[str, float] = {}
        self.manifest = {
            "experiment": cfg.name,
            "command": cfg.command,
            "config": cfg.resolved(),
            "seed": cfg.seed,
            "code_version": f"percolab {__version__}",
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "started": _now(),
            "finished": None,
            "status": "running",
            "stage_seconds": self.stages,
            "outputs": self.outputs,
        }
        self._write_manifest()

    def _write_manifest(self) -> None:
        with open(self.tmp / "manifest.json", "w") as fh:
            json.dump(self.manifest, fh, indent=2, default=str)
            fh.write("\n")

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.tmp / name

    def csv(self, name: str, columns, rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            fh.write(SCHEMA + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            w.writerows(rows)
        return p

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        p.write_text(content)
        return p

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = round(self.stages.get(name, 0.0) + time.perf_counter() - t0, 3)

    def finalize(self, status: str, **extra) -> Path:
        self.manifest.update(extra)
        self.manifest["status"] = status
        self.manifest["finished"] = _now()
        self._write_manifest()
        if self.out.exists():
            self.out.rmdir()
        os.replace(self.tmp, self.out)
        return self.out


# --------------------------------------------------------------------------
# commands; each returns (status, extra manifest fields)


def _pkey(p: float) -> int:
    return int(round(float(p) * 2**52))


def _records(rows, columns) -> list[dict]:
    return [dict(zip(columns, r)) for r in rows]


def cmd_xprob(cfg: RunConfig, run: RunDir, plot: bool):
    from .corrlen import crossing_prob
    from .events import EventSpec, estimate_event
    from .lattice import Window
    from .sampler import derive_seed

    prm = cfg.params
    color = 1 if prm.color == "w" else 0
    if prm.color not in ("w", "b"):
        raise ConfigError("xprob color must be 'w' or 'b'")
    cols = ("n", "p", "color", "hits", "replicas", "p_hat", "ci95")
    rows = []
    with run.stage("xprob"):
        for n in prm.ns:
            for p in prm.ps:
                s = derive_seed(cfg.seed, int(n), _pkey(p))
                if color == 1:
                    st = crossing_prob(int(n), float(p), prm.replicas, s, cfg.workers)
                else:
                    st = estimate_event(EventSpec("H", 0, n=int(n)), Window.square(int(n)),
                                        float(p), replicas=prm.replicas, seed=s,
                                        workers=cfg.workers)
                rows.append([int(n), float(p), prm.color, st.hits, st.replicas, st.p_hat, st.ci95])
    run.csv("xprob.csv", cols, rows)
    if plot:
        from .plotting import plot_crossing
        plot_crossing(_records(rows, cols), run.path("xprob.png"))
    return "complete", {}


def cmd_corrlen(cfg: RunConfig, run: RunDir, plot: bool):
    from .corrlen import PROBE_COLUMNS, estimate_L, fit_power_law
    from .sampler import derive_seed

    prm = cfg.params
    cols = ("p", "epsilon", "n_hat", "n_low", "n_high", "confident", "replicas", "status")
    rows, probes = [], []
    with run.stage("corrlen"):
        for p in prm.ps:
            p = float(p)
            # colour symmetry: below 1/2 the roles of the colours swap
            q = p if p >= 0.5 else 1.0 - p
            est = estimate_L(q, prm.epsilon, prm.n_max, prm.replicas,
                             derive_seed(cfg.seed, _pkey(q)), prm.max_replicas, cfg.workers)
            status = ("exceeds n_max" if est.exceeds else
                      "certified" if est.confident else "unresolved")
            rows.append([p, prm.epsilon, "" if est.n_hat is None else est.n_hat,
                         est.bracket[0], "" if est.bracket[1] is None else est.bracket[1],
                         int(est.confident), est.replicas, status])
            probes += [[p, *pr.row()] for pr in est.probes]
    run.csv("corrlen.csv", cols, rows)
    run.csv("corrlen_probes.csv", ("p", *PROBE_COLUMNS), probes)
    fit = None
    if cfg.params.fit:
        pts = [(abs(r[0] - 0.5) + 0.5, r[2]) for r in rows if r[2] != ""]
        try:
            fit = fit_power_law(pts)
        except ValueError as exc:
            raise RuntimeAbort(f"power-law fit failed: {exc}") from exc
        run.text("fit.json", fit.to_json() + "\n")
    if plot:
        from .plotting import plot_corrlen
        recs = _records(rows, cols)
        for r in recs:
            r["p"] = abs(r["p"] - 0.5) + 0.5
        plot_corrlen(recs, run.path("corrlen.png"), fit)
    return "complete", {}


def cmd_pplus(cfg: RunConfig, run: RunDir, plot: bool):
    from .corrlen import PROBE_COLUMNS, estimate_p_plus
    from .sampler import derive_seed

    prm = cfg.params
    cols = ("n", "epsilon", "p_hat", "p_low", "p_high", "confident")
    rows, probes = [], []
    with run.stage("pplus"):
        for eps in prm.epsilons:
            for n in prm.ns:
                est = estimate_p_plus(int(n), float(eps), prm.replicas,
                                      derive_seed(cfg.seed, int(n), _pkey(eps)), prm.rel_width,
                                      max_replicas=prm.max_replicas, workers=cfg.workers)
                rows.append([int(n), float(eps), est.p_hat, est.bracket[0], est.bracket[1],
                             int(est.confident)])
                probes += [[int(n), float(eps), *pr.row()] for pr in est.probes]
    run.csv("pplus.csv", cols, rows)
    run.csv("pplus_probes.csv", ("n", "epsilon", *PROBE_COLUMNS), probes)
    if plot:
        from .plotting import plot_pplus
        plot_pplus(_records(rows, cols), run.path("pplus.png"))
    return "complete", {}


def cmd_loops(cfg: RunConfig, run: RunDir, plot: bool):
    from .lattice import Window
    from .loops import LOOP_CSV_COLUMNS, loop_records, trace_loops, write_loop_dump
    from .sampler import sample

    prm = cfg.params
    if prm.mode not in ("plane", "closed"):
        raise ConfigError("loops mode must be 'plane' or 'closed'")
    window = Window(prm.L, prm.L, prm.delta)
    rows = []
    first = None
    with run.stage("loops"):
        for r in range(prm.configs):
            ls = trace_loops(sample(window, prm.p, cfg.seed, r), prm.mode)
            rows += [[r, *rec] for rec in loop_records(ls, window.center())]
            with open(run.path(f"replica_{r:04d}.loops"), "w") as fh:
                write_loop_dump(ls, fh)
            if first is None:
                first = ls
    run.csv("loops.csv", ("replica", *LOOP_CSV_COLUMNS), rows)
    if plot:
        from .plotting import plot_loops
        curves = [first.xy[first.voff[c]:first.voff[c + 1]] for c in np.flatnonzero(first.closed)]
        plot_loops(curves, run.path("loops.png"), window.center())
    return "complete", {}


def cmd_events(cfg: RunConfig, run: RunDir, plot: bool):
    from .events import estimate_event, parse_event
    from .lattice import Window
    from .stats import CSV_COLUMNS

    prm = cfg.params
    try:
        specs = [parse_event(e) for e in prm.events]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    window = Window(prm.L, prm.L, prm.delta)
    rows = []
    with run.stage("events"):
        for ev in specs:
            st = estimate_event(ev, window, prm.p, replicas=prm.replicas, seed=cfg.seed,
                                workers=cfg.workers)
            rows.append([*st.row(), st.extra.get("vacuous", 0)])
    cols = (*CSV_COLUMNS, "vacuous")
    run.csv("events.csv", cols, rows)
    if plot:
        from .plotting import plot_events
        plot_events(_records(rows, cols), run.path("events.png"))
    return "complete", {}


def _sweep_spec(cfg: RunConfig):
    from .regime import SweepSpec

    prm = cfg.params
    band = tuple(prm.band) if prm.band else None
    if band is not None and len(band) != 2:
        raise ConfigError("band must be [eps1, eps2]")
    if len(prm.thresholds) != 2:
        raise ConfigError("thresholds must be [t_low, t_high]")
    try:
        return SweepSpec(alpha=prm.alpha, lam=prm.lam, deltas=tuple(prm.deltas),
                         epsilon=prm.epsilon, window=prm.window, replicas=prm.replicas,
                         seed=cfg.seed, thresholds=tuple(prm.thresholds), band=band,
                         fk=tuple(prm.fk), cdf_points=prm.cdf_points,
                         max_truncation=prm.max_truncation,
                         probe_replicas=prm.probe_replicas,
                         probe_max_replicas=prm.probe_max_replicas,
                         band_rel_width=prm.band_rel_width,
                         band_max_replicas=prm.band_max_replicas, workers=cfg.workers)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[sweep] {exc}") from exc


def _write_sweep(run: RunDir, spec, levels, verdict, plot: bool) -> None:
    from .corrlen import PROBE_COLUMNS
    from .regime import LEVEL_COLUMNS, RegimeReport
    from .stats import CSV_COLUMNS

    rep = RegimeReport(spec, levels, verdict)
    level_rows = rep.level_rows()
    run.csv("levels.csv", LEVEL_COLUMNS, level_rows)
    run.csv("events.csv", ("level", *CSV_COLUMNS),
            [[lv.index, *st.row()] for lv in levels for st in lv.event_stats()])
    cdf_cols = ("level", "L", "conditional", "hits", "n", "P", "ci95")
    cdf_rows = []
    for lv in levels:
        for cond, hits, n in ((1, lv.cdf.hits_cond, lv.cdf.n_cond),
                              (0, lv.cdf.hits_uncond, lv.cdf.n_uncond)):
            for (L, P, ci), h in zip(lv.cdf.rows(bool(cond)), hits):
                cdf_rows.append([lv.index, L, cond, int(h), n, P, ci])
    run.csv("cdf.csv", cdf_cols, cdf_rows)
    run.csv("probes.csv", ("level", *PROBE_COLUMNS),
            [[lv.index, *pr.row()] for lv in levels for pr in lv.corr.probes])
    if verdict is not None:
        run.text("verdict.txt", verdict + "\n")
    if plot and levels:
        from .plotting import plot_sweep
        plot_sweep(_records(level_rows, LEVEL_COLUMNS), _records(cdf_rows, cdf_cols),
                   spec.thresholds, run.path("sweep.png"))


def cmd_sweep(cfg: RunConfig, run: RunDir, plot: bool):
    from .regime import classify, run_level, UNDETERMINED

    spec = _sweep_spec(cfg)
    levels = []
    try:
        for j in range(len(spec.deltas)):
            with run.stage(f"level_{j}"):
                levels.append(run_level(spec, j))
    except Exception as exc:
        _write_sweep(run, spec, levels, None, plot)
        raise RuntimeAbort(f"level {len(levels)} failed: {exc}") from exc
    verdict = (classify([lv.scaled for lv in levels], spec.thresholds)
               if len(levels) >= 3 else UNDETERMINED)
    _write_sweep(run, spec, levels, verdict, plot)
    aborted = [lv.index for lv in levels if lv.aborted]
    extra = {"verdict": verdict, "aborted_levels": aborted,
             "truncation_rates": [lv.truncation_rate for lv in levels]}
    return ("aborted" if aborted else "complete"), extra


def cmd_metric(cfg: RunConfig, run: RunDir, plot: bool):
    from .metric import curves_from_dump, distance_matrix, write_distance_matrix

    prm = cfg.params
    if not prm.dump:
        raise ConfigError("[metric] dump path is required")
    path = Path(prm.dump)
    if not path.is_absolute():
        path = cfg.base_dir / path
    if not path.is_file():
        raise ConfigError(f"loop dump not found: {path}")
    with open(path) as fh:
        ids, cs = curves_from_dump(fh)
    keep = [k for k, c in enumerate(cs.curves) if len(c) >= prm.min_vertices]
    if prm.max_loops:
        keep = keep[:prm.max_loops]
    ids = [ids[k] for k in keep]
    curves = [cs.curves[k] for k in keep]
    with run.stage("metric"):
        M = distance_matrix(curves, h=prm.h)
    with open(run.path("distance.csv"), "w", newline="") as fh:
        fh.write(SCHEMA + "\n")
        write_distance_matrix(ids, M, fh)
    if plot and len(ids):
        from .plotting import plot_matrix
        plot_matrix(M, run.path("distance.png"))
    return "complete", {"n_curves": len(ids)}


COMMANDS = {
    "xprob": cmd_xprob,
    "corrlen": cmd_corrlen,
    "pplus": cmd_pplus,
    "loops": cmd_loops,
    "events": cmd_events,
    "sweep": cmd_sweep,
    "metric": cmd_metric,
}


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percolab",
        description="Monte Carlo experiments for site percolation on the triangular lattice.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", type=Path, required=config_required,
                       help="TOML experiment file")
        p.add_argument("--out", type=Path, required=True, help="results directory")
        p.add_argument("--workers", type=int, default=None, help="parallel workers")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--plot", action="store_true", help="also render PNG figures")

    run = sub.add_parser("run", help="run the command named in the config file")
    common(run, True)
    run.add_argument("--fit", action="store_true", help="corrlen only: fit a power law")
    helps = {
        "xprob": "crossing probabilities over a grid of (n, p)",
        "corrlen": "correlation lengths over a grid of p",
        "pplus": "density thresholds p+ over a grid of n",
        "loops": "trace interface loops and dump them",
        "events": "estimate named events",
        "sweep": "regime sweep over lattice spacings",
        "metric": "distance matrix over a loop dump",
    }
    for name in SECTIONS:
        p = sub.add_parser(name, help=helps[name])
        common(p)
        if name == "corrlen":
            p.add_argument("--fit", action="store_true", help="fit a power law to the results")
    return parser


def _resolve(args) -> RunConfig:
    command = None if args.command == "run" else args.command
    if args.config is not None:
        cfg = load_config(args.config, command)
    else:
        cfg = parse_config({}, command)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg.seed = args.seed
    if cfg.seed is None:
        raise ConfigError("a master seed is required (config `seed` or --seed)")
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.workers = args.workers
    if getattr(args, "fit", False):
        if cfg.command != "corrlen":
            raise ConfigError("--fit applies to corrlen runs only")
        cfg.params.fit = True
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        cfg = _resolve(args)
        if cfg.command == "sweep":
            _sweep_spec(cfg)
        run = RunDir(args.out, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status, extra = COMMANDS[cfg.command](cfg, run, args.plot)
    except ConfigError as exc:
        run.finalize("failed", error=f"config error: {exc}")
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # statistical aborts and replica failures
        run.finalize("failed", error=f"{type(exc).__name__}: {exc}")
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    run.finalize(status, **extra)
    if status != "complete":
        print(f"run finished with status {status}: {extra}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command line harness: ``run``, ``sweep``, ``export`` and ``calibrate``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .environment import write_grid_csv
from .errors import ConfigError, PlanningError
from .experiment import ExperimentConfig, load_config, read_metrics, run_experiment, write_metrics
from .mcts import write_tree_stats
from .planning import PLANNER_POLICIES

log = logging.getLogger("stip")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PLANNING = 3

SUMMARY_HEADER = [
    "planner",
    "n_runs",
    "rmse_mean",
    "rmse_std",
    "distance_mean",
    "distance_std",
    "rmse_mean_t10",
    "rmse_std_t10",
    "distance_mean_t10",
    "distance_std_t10",
]


def default_out():
    return os.environ.get("STIP_OUT", "runs")


def run_dir(out, planner, seed):
    return Path(out) / f"{planner}-{seed}"


def _overrides(args, **extra):
    out = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(item, "expected --set key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    out.update({k: v for k, v in extra.items() if v is not None})
    return out


def build_config(path, overrides) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig()
        for k, v in overrides.items():
            cfg.set(k, v)
        return cfg.validate()
    return load_config(path, overrides)


def execute_run(cfg: ExperimentConfig, out, tree_stats=False, dump_forecast=False):
    """Run one experiment into ``<out>/<planner>-<seed>``; returns (dir, ok)."""
    d = run_dir(out, cfg.planner, cfg.seed)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.echo").write_text(cfg.to_text())
    ws = cfg.workspace()

    on_search = None
    if tree_stats or dump_forecast:
        if tree_stats:
            (d / "tree_stats").mkdir(exist_ok=True)
        if dump_forecast:
            (d / "forecast").mkdir(exist_ok=True)
        dim = 1 if cfg.planner == "uct" else 2

        def on_search(t, s, result, forecast):
            if tree_stats:
                write_tree_stats(d / "tree_stats" / f"t{t:04d}_a{s}.csv", result.stats, dim)
            if dump_forecast:
                for k, f in enumerate(forecast.fields):
                    write_grid_csv(d / "forecast" / f"t{t:04d}_a{s}_s{k}.csv", ws, f.values)

    try:
        records = run_experiment(cfg, on_search=on_search, record_stats=tree_stats)
    except PlanningError as exc:
        write_metrics(d / "metrics.csv", getattr(exc, "records", []))
        log.error("%s seed %d: planning failed (%s); partial metrics written", cfg.planner, cfg.seed, exc)
        return d, False
    write_metrics(d / "metrics.csv", records)
    return d, True


def _sweep_job(args):
    text, out = args
    cfg = ExperimentConfig.from_text(text).validate()
    d, ok = execute_run(cfg, out)
    return str(d), ok


def _mean_std(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def summarize(run_dirs, path):
    """Per-planner mean and sample std of the per-run average metrics."""
    per = {}
    for d in run_dirs:
        recs = read_metrics(Path(d) / "metrics.csv")
        if not recs:
            continue
        r = np.array([x.rmse for x in recs])
        dist = np.array([x.distance for x in recs])
        late = np.array([x.time_step >= 10 for x in recs])
        row = per.setdefault(recs[0].planner, [[], [], [], []])
        row[0].append(r.mean())
        row[1].append(dist.mean())
        if late.any():
            row[2].append(r[late].mean())
            row[3].append(dist[late].mean())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for planner in sorted(per):
            cols = per[planner]
            vals = [v for c in cols for v in _mean_std(c)]
            w.writerow([planner, len(cols[0])] + [repr(v) for v in vals])
    return per


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args):
    cfg = build_config(args.config, _overrides(args, planner=args.planner, seed=args.seed))
    d, ok = execute_run(cfg, args.out, args.tree_stats, args.dump_forecast)
    print(d)
    return EXIT_OK if ok else EXIT_PLANNING


def cmd_sweep(args):
    planners = [p.strip() for p in args.planners.split(",") if p.strip()]
    for p in planners:
        if p not in PLANNER_POLICIES:
            raise ConfigError("planners", f"must be drawn from {', '.join(PLANNER_POLICIES)}, got {p!r}")
    if args.seeds < 1:
        raise ConfigError("seeds", f"must be >= 1, got {args.seeds}")
    base = build_config(args.config, _overrides(args))
    jobs = []
    for seed in range(args.seed_start, args.seed_start + args.seeds):
        for p in planners:
            cfg = ExperimentConfig.from_text(base.to_text()).set("planner", p).set("seed", seed).validate()
            jobs.append((cfg.to_text(), args.out))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    summarize([d for d, _ in results], Path(args.out) / "summary.csv")
    failed = [d for d, ok in results if not ok]
    for d in failed:
        log.error("run %s ended early", d)
    print(Path(args.out) / "summary.csv")
    return EXIT_PLANNING if failed else EXIT_OK


def cmd_export(args):
    d = Path(args.run)
    echo = d / "config.echo"
    if not echo.exists():
        raise ConfigError("run", f"no config.echo in {d}")
    cfg = ExperimentConfig.from_text(echo.read_text()).validate()
    fields_dir = d / "fields"
    fields_dir.mkdir(exist_ok=True)
    ws = cfg.workspace()

    def on_step(snap):
        write_grid_csv(fields_dir / f"t{snap.time_step:04d}.csv", ws, snap.estimate.values)
        write_grid_csv(fields_dir / f"truth_t{snap.time_step:04d}.csv", ws, snap.truth.values)
        with open(fields_dir / f"traj_t{snap.time_step:04d}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "heading"])
            for p in snap.trajectory:
                w.writerow([repr(p.x), repr(p.y), repr(p.heading)])

    try:
        records = run_experiment(cfg, on_step=on_step)
    except PlanningError:
        log.error("planning failed during export; snapshots are partial")
        return EXIT_PLANNING
    metrics = d / "metrics.csv"
    if metrics.exists() and read_metrics(metrics) != records:
        log.warning("re-run metrics differ from %s", metrics)
    print(fields_dir)
    return EXIT_OK


def cmd_calibrate(args):
    cfg = build_config(args.config, _overrides(args, spread_sigma="auto"))
    print(repr(cfg.resolved_spread()))
    return EXIT_OK


def make_parser():
    ap = argparse.ArgumentParser(prog="stip", description="Hotspot monitoring with Pareto tree search.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat 'key = value' file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    p = sub.add_parser("run", help="run one planner and seed")
    common(p)
    p.add_argument("--planner", choices=sorted(PLANNER_POLICIES))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=default_out())
    p.add_argument("--tree-stats", action="store_true", help="dump root-children statistics per search")
    p.add_argument("--dump-forecast", action="store_true", help="dump predicted fields per search")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every planner for seeds 0..n-1")
    common(p)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--planners", default="uct,pareto,predictive")
    p.add_argument("--out", default=default_out())
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="write GP estimate and truth grids of a finished run")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("calibrate", help="solve the hotspot spread for the baseline RMSE")
    common(p)
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

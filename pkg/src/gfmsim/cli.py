"""Command line entry point: ``gfmsim <subcommand>`` (or ``python -m gfmsim``)."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, GfmSimError
from .harness import (
    ExperimentConfig,
    RunManifest,
    emit_summary_tables,
    is_run_dir,
    load_config,
    report_timings,
    run_experiment,
    simulate_datasets,
    write_evaluation,
    write_stats,
)
from .scenarios import describe, preset_names, preset_spec

EXIT_OK, EXIT_CELL_FAILURES, EXIT_CONFIG = 0, 1, 2


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", help="scenario preset name (see `describe`)")
    src.add_argument("--config", type=Path, help="JSON experiment config file")
    p.add_argument("--seed", type=int, help="base seed (overrides the preset)")
    p.add_argument("--replicates", type=int, help="number of replicates")
    p.add_argument("--scale", type=float, default=None, help="divide replicate counts and network epochs by this factor")
    p.add_argument("--out", type=Path, help="output directory")


def _experiment(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = ExperimentConfig.from_dict({"preset": args.preset})
    else:
        raise ConfigError("either --preset or --config is required")
    updates = {}
    for attr in ("seed", "replicates", "scale", "out"):
        v = getattr(args, attr, None)
        if v is not None:
            updates[attr] = v
    for attr in ("workers", "trials", "ensemble_seeds", "gbt", "models"):
        v = getattr(args, attr, None)
        if v is not None:
            updates["tuner_trials" if attr == "trials" else attr] = v
    if "out" not in updates and cfg.out == Path("runs/default"):
        updates["out"] = Path("runs") / (cfg.scenario.name or "experiment")
    try:
        return replace(cfg, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_describe(args) -> int:
    if not args.preset:
        print("\n".join(preset_names()))
        return EXIT_OK
    spec = preset_spec(args.preset)
    print(json.dumps(describe(spec), indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _experiment(args)
    paths = simulate_datasets(cfg.resolved_scenario, Path(cfg.out) / "datasets", args.format)
    print(f"wrote {len(paths)} dataset files under {Path(cfg.out) / 'datasets'}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _experiment(args)
    manifest = run_experiment(cfg, log=lambda msg: print(msg, file=sys.stderr))
    failed = manifest.failed
    print(f"run complete: {len(manifest.cells) - len(failed)} tasks ok, {len(failed)} failed; reports in {cfg.out / 'reports'}")
    return EXIT_CELL_FAILURES if failed else EXIT_OK


def _need_run_dir(out: Path | None) -> Path:
    if out is None or not is_run_dir(out):
        raise ConfigError(f"{out} is not a run directory (no manifest.json)")
    return out


def cmd_evaluate(args) -> int:
    out = _need_run_dir(args.out)
    for name, path in write_evaluation(out).items():
        print(f"{name}: {path}")
    return EXIT_CELL_FAILURES if RunManifest.load(out).failed else EXIT_OK


def cmd_stats(args) -> int:
    print(write_stats(_need_run_dir(args.out)))
    return EXIT_OK


def cmd_report(args) -> int:
    if args.out is None:
        raise ConfigError("--out is required")
    runs = [Path(p) for p in args.runs] or sorted(p for p in Path(args.out).iterdir() if is_run_dir(p))
    if not runs and is_run_dir(args.out):
        runs = [Path(args.out)]
    if not runs:
        raise ConfigError(f"no run directories found under {args.out}")
    summaries = []
    for run in runs:
        _need_run_dir(run)
        summary = run / "reports" / "summary.csv"
        if not summary.exists():
            write_evaluation(run)
        summaries.append(summary)
        report_timings(RunManifest.load(run), run / "reports" / "timings.csv")
    t8, t9 = emit_summary_tables(summaries, Path(args.out))
    print(f"{t8}\n{t9}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gfmsim", description="Simulation benchmark for global and local forecasting models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="list presets or show one")
    p.add_argument("--preset")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("simulate", help="write the simulated datasets of a scenario")
    _add_source(p)
    p.add_argument("--format", choices=("csv", "ndjson"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="tune, forecast, evaluate and test (resumable)")
    _add_source(p)
    p.add_argument("--workers", type=int)
    p.add_argument("--trials", type=int, help="random-search trials per neural model")
    p.add_argument("--ensemble-seeds", dest="ensemble_seeds", type=int)
    p.add_argument("--gbt", choices=("full", "desk"))
    p.add_argument("--models", nargs="+", help="override the preset's model roster")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="recompute results, summary and availability CSVs of a run")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="recompute the Friedman/Hochberg test CSV of a run")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="pivot run summaries into results tables and write timings")
    p.add_argument("runs", nargs="*", help="run directories (default: all under --out)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GfmSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CELL_FAILURES


if __name__ == "__main__":
    sys.exit(main())

"""
Experiment runner: tune, forecast every (sweep cell, model, replicate), score, test, report.

Layout under the output directory of one run::

    manifest.json
    datasets/                    (optional) simulated series
    forecasts/<model>/L<len>_N<n>_r<rep>.csv         series_id, step, forecast, actual
    forecasts/<model>/L<len>_N<n>_r<rep>.scores.csv  series_id, smape, mase
    reports/results.csv, summary.csv, tests.csv, availability.csv, timings.csv

Every number in ``reports/`` is recomputed from the per-task files in a
canonical order, so worker count and completion order never change them.
"""

from __future__ import annotations

import csv
import json
import math
import os
import traceback
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError
from .evaluation import (
    SUMMARY_HEADER,
    ErrorReport,
    ForecastMatrix,
    SeriesScore,
    aggregate,
    score,
    summary_rows,
    write_results,
)
from .io import write_rows, write_series
from .models.forecasting import ForecastTask, forecast, parse_model, tune
from .scenarios import SCENARIO_LABELS, ScenarioKind, ScenarioSpec, build_dataset, load_preset, train_test_split
from .seeding import derive_seed
from .stats import compare_models, write_tests

MANIFEST = "manifest.json"


@dataclass
class ExperimentConfig:
    scenario: ScenarioSpec
    models: list[str]
    out: Path = Path("runs/default")
    tuner_trials: int = 25
    ensemble_seeds: int = 10
    replicates: int | None = None  # overrides the scenario's replicate count
    workers: int = 1
    seed: int | None = None  # overrides the scenario's base seed
    scale: float = 1.0  # divides replicate counts and network epochs
    gbt: str = "full"  # "full" or "desk"
    model_configs: dict[str, dict[str, Any]] = field(default_factory=dict)  # frozen configs, skip tuning
    save_datasets: bool = False

    def __post_init__(self):
        self.out = Path(self.out)
        for m in self.models:
            parse_model(m)
        if self.gbt not in ("full", "desk"):
            raise ConfigError("gbt must be 'full' or 'desk'")
        if self.scale < 1:
            raise ConfigError("scale must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for m in self.models:
            spec = parse_model(m)
            if spec.order is not None and spec.kind != "SAR" and spec.order >= min(self.scenario.lengths) - self.scenario.horizon:
                raise ConfigError(f"{m}: input size too large for series of length {min(self.scenario.lengths)}")

    @property
    def num_replicates(self) -> int:
        if self.replicates is not None:
            return self.replicates
        return max(1, math.ceil(self.scenario.num_replicates / self.scale))

    @property
    def base_seed(self) -> int:
        return self.scenario.base_seed if self.seed is None else self.seed

    @property
    def resolved_scenario(self) -> ScenarioSpec:
        return replace(self.scenario, base_seed=self.base_seed, num_replicates=self.num_replicates)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["scenario"] = self.scenario.to_dict()
        d["out"] = str(self.out)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        d = dict(d)
        preset = d.pop("preset", None)
        scen = d.pop("scenario", None)
        if preset is not None:
            doc = load_preset(preset)
            sd = dict(doc["scenario"], name=preset)
            sd.update(scen or {})
            d.setdefault("models", doc["models"])
        elif scen is not None:
            sd = scen
        else:
            raise ConfigError("config needs 'preset' or 'scenario'")
        known = {f.name for f in cls.__dataclass_fields__.values()} - {"scenario"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "models" not in d:
            raise ConfigError("config needs a 'models' list")
        try:
            return cls(scenario=ScenarioSpec.from_dict(sd), **d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a JSON experiment config (see the README for the schema)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    config: dict[str, Any]
    version: str = __version__
    replicate_seeds: dict[str, int] = field(default_factory=dict)
    tuned: dict[str, dict[str, Any]] = field(default_factory=dict)  # "<cell>/<model>" -> config
    cells: dict[str, dict[str, Any]] = field(default_factory=dict)  # task key -> status, seed, timing, error

    def save(self, out: Path) -> Path:
        path = Path(out) / MANIFEST
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(asdict(self), indent=1, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, out: Path) -> "RunManifest":
        doc = json.loads((Path(out) / MANIFEST).read_text(encoding="utf-8"))
        return cls(**doc)

    @property
    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(self.config)

    @property
    def failed(self) -> list[str]:
        return sorted(k for k, v in self.cells.items() if v.get("status") != "ok")


def cell_tag(length: int, num_series: int) -> str:
    return f"L{length}_N{num_series}"


def task_key(length: int, num_series: int, model: str, replicate: int) -> str:
    return f"{cell_tag(length, num_series)}/{model}/r{replicate}"


def forecast_path(out: Path, length: int, num_series: int, model: str, replicate: int) -> Path:
    return Path(out) / "forecasts" / model / f"{cell_tag(length, num_series)}_r{replicate}.csv"


def model_seed(base_seed: int, replicate: int, model: str) -> int:
    return derive_seed(base_seed, replicate, 0, f"model:{model}")


# ---------------------------------------------------------------------------
# tasks (run in worker processes)


@lru_cache(maxsize=4)
def _dataset(spec_json: str, replicate: int, length: int, num_series: int):
    spec = ScenarioSpec.from_dict(json.loads(spec_json))
    return build_dataset(spec, replicate, length, num_series)


def make_task(dataset) -> tuple[ForecastTask, list[np.ndarray], list[np.ndarray]]:
    split = train_test_split(dataset)
    task = ForecastTask(
        tuple(split.train),
        dataset.horizon,
        dataset.seasonal_period,
        tuple(dataset.group_labels),
        dataset.num_groups,
        tuple(dataset.evaluated_indices),
        True if dataset.can_emit_zeros else None,
    )
    return task, split.train, split.test


def _model_config(payload: dict[str, Any]) -> dict[str, Any] | None:
    cfg = payload.get("model_config")
    if parse_model(payload["model"]).kind == "GBT" and payload.get("gbt") == "desk":
        cfg = {"desk": True, **(cfg or {})}
    return cfg


def compute_forecasts(payload: dict[str, Any]) -> tuple[ForecastMatrix, dict[str, float | None]]:
    """Forecast one (cell, model, replicate) task described by a manifest-style payload."""
    ds = _dataset(payload["spec"], payload["replicate"], payload["length"], payload["num_series"])
    task, train, test = make_task(ds)
    spec = parse_model(payload["model"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pred, timing = forecast(
            spec, task, _model_config(payload), payload["seed"], payload["ensemble_seeds"] if spec.is_neural else 1
        )
    ids = task.targets
    fm = ForecastMatrix(
        payload["model"],
        tuple(ids),
        pred,
        np.vstack([test[i] for i in ids]),
        tuple(train[i] for i in ids),
        payload["replicate"],
        ds.spec.label,
        ds.spec.dgp.value,
        ds.seasonal_period,
        ds.can_emit_zeros,
        payload["length"],
        payload["num_series"],
    )
    return fm, timing


def _run_task(payload: dict[str, Any]) -> dict[str, Any]:
    key = payload["key"]
    try:
        fm, timing = compute_forecasts(payload)
        scores = score(fm)
        path = Path(payload["path"])
        rows = [[sid, h, float(fm.forecasts[k, h]), float(fm.actuals[k, h])] for k, sid in enumerate(fm.series_ids) for h in range(fm.horizon)]
        write_rows(path, ["series_id", "step", "forecast", "actual"], rows)
        write_rows(path.with_suffix(".scores.csv"), ["series_id", "smape", "mase"], [[s.series_id, s.smape, s.mase] for s in scores])
        return {"key": key, "status": "ok", "timing": timing}
    except Exception as exc:  # noqa: BLE001 - any failure is recorded against the cell
        return {"key": key, "status": "failed", "error": f"{type(exc).__name__}: {exc}", "trace": traceback.format_exc(limit=3)}


def _run_tuning(payload: dict[str, Any]) -> dict[str, Any]:
    try:
        ds = _dataset(payload["spec"], 0, payload["length"], payload["num_series"])
        task, _, _ = make_task(ds)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = tune(payload["model"], task, payload["trials"], payload["seed"], epoch_scale=payload["scale"])
        return {"key": payload["key"], "status": "ok", "config": res.best_config, "score": res.best_score, "trace": res.trace}
    except Exception as exc:  # noqa: BLE001
        return {"key": payload["key"], "status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def _map(fn, payloads: list[dict[str, Any]], workers: int):
    if workers <= 1 or len(payloads) <= 1:
        for p in payloads:
            yield fn(p)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, payloads, chunksize=1)


# ---------------------------------------------------------------------------
# orchestration


def _payload(cfg: ExperimentConfig, manifest: RunManifest, length: int, n: int, model: str, rep: int) -> dict[str, Any]:
    spec = cfg.resolved_scenario
    return {
        "key": task_key(length, n, model, rep),
        "spec": json.dumps(spec.to_dict(), sort_keys=True),
        "replicate": rep,
        "length": length,
        "num_series": n,
        "model": model,
        "seed": model_seed(cfg.base_seed, rep, model),
        "ensemble_seeds": cfg.ensemble_seeds,
        "gbt": cfg.gbt,
        "model_config": manifest.tuned.get(f"{cell_tag(length, n)}/{model}"),
        "path": str(forecast_path(cfg.out, length, n, model, rep)),
    }


def payload_from_manifest(manifest: RunManifest, key: str) -> dict[str, Any]:
    cell, model, rep = key.split("/")
    length, n = (int(x[1:]) for x in cell.split("_"))
    cfg = manifest.experiment
    return _payload(cfg, manifest, length, n, model, int(rep[1:]))


def rerun_cell(out: str | Path, key: str) -> ForecastMatrix:
    """Recompute one task's forecasts from the manifest alone."""
    manifest = RunManifest.load(Path(out))
    return compute_forecasts(payload_from_manifest(manifest, key))[0]


def _tune_models(cfg: ExperimentConfig, manifest: RunManifest, log) -> None:
    spec = cfg.resolved_scenario
    payloads = []
    for length, n in spec.cells():
        for model in cfg.models:
            key = f"{cell_tag(length, n)}/{model}"
            if key in manifest.tuned:
                continue
            if model in cfg.model_configs:
                manifest.tuned[key] = dict(cfg.model_configs[model])
            elif parse_model(model).is_neural and cfg.tuner_trials > 0:
                payloads.append(
                    {
                        "key": key,
                        "spec": json.dumps(spec.to_dict(), sort_keys=True),
                        "length": length,
                        "num_series": n,
                        "model": model,
                        "trials": cfg.tuner_trials,
                        "seed": derive_seed(cfg.base_seed, 0, 0, f"tune:{key}"),
                        "scale": cfg.scale,
                    }
                )
    for res in _map(_run_tuning, payloads, cfg.workers):
        if res["status"] == "ok":
            manifest.tuned[res["key"]] = res["config"]
            trace_path = cfg.out / "tuning" / (res["key"].replace("/", "__") + ".csv")
            write_rows(trace_path, ["trial", "score", "error", "config"], [[t["trial"], t["score"], t["error"] or "", json.dumps(t["config"], sort_keys=True)] for t in res["trace"]])
            log(f"tuned {res['key']}: validation SMAPE {res['score']:.4f}")
        else:
            manifest.tuned[res["key"]] = None
            log(f"tuning failed for {res['key']}: {res['error']}; using defaults")
        manifest.save(cfg.out)


def _comparable(config: dict[str, Any]) -> dict[str, Any]:
    # worker count and location do not affect results
    d = json.loads(json.dumps(config))
    d.pop("workers", None)
    d.pop("out", None)
    return d


def run_experiment(cfg: ExperimentConfig, log=print) -> RunManifest:
    """Run (or resume) every task of ``cfg`` and write all reports."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    if (out / MANIFEST).exists():
        manifest = RunManifest.load(out)
        if _comparable(manifest.config) != _comparable(cfg.to_dict()):
            raise ConfigError(f"{out} holds a run with a different configuration")
        manifest.config = json.loads(json.dumps(cfg.to_dict()))
    else:
        manifest = RunManifest(json.loads(json.dumps(cfg.to_dict())))
    spec = cfg.resolved_scenario
    manifest.replicate_seeds = {str(r): derive_seed(cfg.base_seed, r, 0, "replicate") for r in range(cfg.num_replicates)}
    manifest.save(out)

    if cfg.save_datasets:
        simulate_datasets(spec, out / "datasets")
    _tune_models(cfg, manifest, log)

    pending = []
    for length, n in spec.cells():
        for model in cfg.models:
            for rep in range(cfg.num_replicates):
                key = task_key(length, n, model, rep)
                done = manifest.cells.get(key, {}).get("status") == "ok"
                path = forecast_path(out, length, n, model, rep)
                if done and path.with_suffix(".scores.csv").exists():
                    continue
                pending.append(_payload(cfg, manifest, length, n, model, rep))
    log(f"{len(pending)} tasks to run ({cfg.workers} worker(s))")
    seeds = {p["key"]: p["seed"] for p in pending}
    for k, res in enumerate(_map(_run_task, pending, cfg.workers), 1):
        entry = {"status": res["status"], "seed": seeds[res["key"]]}
        if res["status"] == "ok":
            entry["timing"] = res["timing"]
        else:
            entry["error"] = res["error"]
            log(f"FAILED {res['key']}: {res['error']}")
        manifest.cells[res["key"]] = entry
        if k % 50 == 0 or k == len(pending):
            manifest.save(out)
    manifest.save(out)
    write_reports(out)
    return manifest


# ---------------------------------------------------------------------------
# reports


def simulate_datasets(spec: ScenarioSpec, directory: Path, fmt: str = "csv") -> list[Path]:
    paths = []
    for rep in range(spec.num_replicates):
        for length, n in spec.cells():
            ds = build_dataset(spec, rep, length, n)
            paths.append(write_series(Path(directory) / f"{cell_tag(length, n)}_r{rep}.{fmt}", ds.series))
    return paths


def load_scores(out: Path) -> list[SeriesScore]:
    manifest = RunManifest.load(out)
    spec = manifest.experiment.resolved_scenario
    scores = []
    for key, entry in sorted(manifest.cells.items()):
        if entry.get("status") != "ok":
            continue
        cell, model, rep = key.split("/")
        length, n = (int(x[1:]) for x in cell.split("_"))
        path = forecast_path(out, length, n, model, int(rep[1:])).with_suffix(".scores.csv")
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                scores.append(
                    SeriesScore(spec.label, spec.dgp.value, int(rep[1:]), model, int(row["series_id"]), float(row["smape"]), float(row["mase"]), length, n)
                )
    return scores


def reference_cell(spec: ScenarioSpec) -> tuple[int, int]:
    """The sweep cell reported in the summary tables: the longest series and the most of them."""
    return spec.max_length, spec.max_count


def sweep_axis(spec: ScenarioSpec) -> str | None:
    if len(spec.counts) > 1:
        return "num_series"
    if len(spec.lengths) > 1:
        return "length"
    return None


def emit_availability_curves(report: ErrorReport, axis: str, path: Path, svg: bool = True) -> Path:
    """Long-format (model, axis_value, mean_smape, mean_mase), one row per sweep point."""
    rows = []
    for (model, length, n), (s, m) in report.cells.items():
        rows.append([model, length if axis == "length" else n, s, m])
    rows.sort(key=lambda r: (r[0], r[1]))
    write_rows(path, ["model", "axis_value", "mean_smape", "mean_mase"], rows)
    if svg and len({r[1] for r in rows}) > 1:
        _plot_curves(rows, axis, path.with_suffix(".svg"))
    return path


def _plot_curves(rows, axis: str, path: Path) -> Path | None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for model in sorted({r[0] for r in rows}):
        pts = [(r[1], r[2]) for r in rows if r[0] == model]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=model)
    ax.set_xlabel(axis.replace("_", " "))
    ax.set_ylabel("mean SMAPE")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _error_matrix(scores: list[SeriesScore], models: Sequence[str]):
    """Per-replicate mean SMAPE, keeping replicates where every model has a score."""
    per = defaultdict(dict)
    grouped = defaultdict(list)
    for s in scores:
        grouped[(s.replicate, s.model)].append(s.smape)
    for (rep, model), vals in grouped.items():
        per[rep][model] = math.fsum(vals) / len(vals)
    reps = sorted(r for r, d in per.items() if all(m in d for m in models))
    return np.array([[per[r][m] for m in models] for r in reps])


def write_evaluation(out: str | Path) -> dict[str, Path]:
    """Results, summary and availability CSVs recomputed from the stored task files."""
    out = Path(out)
    spec = RunManifest.load(out).experiment.resolved_scenario
    rep_dir = out / "reports"
    scores = load_scores(out)
    paths = {"results": write_results(scores, rep_dir / "results.csv")}
    ref_scores = [s for s in scores if (s.length, s.num_series) == reference_cell(spec)]
    summary = summary_rows(aggregate(ref_scores)) if ref_scores else []
    paths["summary"] = write_rows(rep_dir / "summary.csv", SUMMARY_HEADER, summary)
    axis = sweep_axis(spec)
    if axis and scores:
        paths["availability"] = emit_availability_curves(aggregate(scores), axis, rep_dir / "availability.csv")
    return paths


def write_stats(out: str | Path) -> Path:
    """Friedman and Hochberg results per sweep cell over the replicates where every model succeeded."""
    out = Path(out)
    spec = RunManifest.load(out).experiment.resolved_scenario
    scores = load_scores(out)
    tests = []
    for length, n in spec.cells():
        cell_scores = [s for s in scores if (s.length, s.num_series) == (length, n)]
        models = sorted({s.model for s in cell_scores})
        if len(models) < 2:
            continue
        mat = _error_matrix(cell_scores, models)
        if mat.shape[0] < 2:
            continue
        rep = aggregate(cell_scores)
        label = f"{spec.dgp.value} {spec.label} length={length} num_series={n}"
        tests.append(compare_models(mat, models, {m: (rep.mean_smape[m], rep.mean_mase[m]) for m in models}, label))
    return write_tests(tests, out / "reports" / "tests.csv")


def write_reports(out: str | Path) -> dict[str, Path]:
    out = Path(out)
    paths = write_evaluation(out)
    paths["tests"] = write_stats(out)
    paths["timings"] = report_timings(RunManifest.load(out), out / "reports" / "timings.csv")
    return paths


TIMING_HEADER = ["Model", "Data Preprocessing", "Model Training & Testing", "Total"]


def report_timings(manifest: RunManifest, path: Path) -> Path:
    """Wall-clock seconds per model summed over tasks; ``-`` where no preprocessing runs."""
    pre = defaultdict(float)
    fit = defaultdict(float)
    has_pre = {}
    for key, entry in manifest.cells.items():
        if entry.get("status") != "ok":
            continue
        model = key.split("/")[1]
        t = entry["timing"]
        fit[model] += t["train_test"]
        if t["preprocessing"] is None:
            has_pre.setdefault(model, False)
        else:
            has_pre[model] = True
            pre[model] += t["preprocessing"]
    rows = []
    for model in sorted(fit):
        p = pre[model] if has_pre.get(model) else None
        total = fit[model] + (p or 0.0)
        rows.append([model, "-" if p is None else f"{p:.3f}", f"{fit[model]:.3f}", f"{total:.3f}"])
    return write_rows(path, TIMING_HEADER, rows)


SCENARIO_COLUMNS = [SCENARIO_LABELS[k] for k in ScenarioKind]


def emit_summary_tables(summaries: Sequence[Path], out_dir: Path) -> tuple[Path, Path]:
    """Pivot summary CSVs into a mean-error table and a percentage-difference table.

    Columns run ``<dgp> <scenario> SMAPE|MASE`` in DGP, then scenario order.
    Missing (model, column) cells are ``-`` and each column's best model is
    marked with ``*`` in the error table.
    """
    rows = []
    for p in summaries:
        with open(p, newline="", encoding="utf-8") as fh:
            rows.extend(csv.DictReader(fh))
    order = {label: i for i, label in enumerate(SCENARIO_COLUMNS)}
    columns = sorted({(r["dgp"], r["scenario"]) for r in rows}, key=lambda c: (c[0], order.get(c[1], 99)))
    models = sorted({r["model"] for r in rows})
    cell = {(r["dgp"], r["scenario"], r["model"]): r for r in rows}
    head = ["model"] + [f"{d} {s} {m}" for d, s in columns for m in ("SMAPE", "MASE")]
    t8, t9 = [], []
    for model in models:
        a, b = [model], [model]
        for d, s in columns:
            r = cell.get((d, s, model))
            if r is None:
                a += ["-", "-"]
                b += ["-", "-"]
                continue
            for metric in ("smape", "mase"):
                diff = float(r[f"pct_diff_{metric}"])
                val = f"{float(r[f'mean_{metric}']):.4f}"
                a.append(val + ("*" if diff == 0 else ""))
                b.append(f"{diff:.2f}")
        t8.append(a)
        t9.append(b)
    out_dir = Path(out_dir)
    return write_rows(out_dir / "error_table.csv", head, t8), write_rows(out_dir / "pct_diff_table.csv", head, t9)


def failed_cells(out: str | Path) -> list[str]:
    return RunManifest.load(Path(out)).failed


def is_run_dir(path: Path) -> bool:
    return (Path(path) / MANIFEST).exists()

"""Forecast error measures and their aggregation over series and replicates."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import MetricError, ParameterError
from .io import write_rows

VARIANT_EPS = 0.1


def _pair(forecasts, actuals) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(forecasts, dtype=float).ravel()
    Y = np.asarray(actuals, dtype=float).ravel()
    if F.size != Y.size or F.size == 0:
        raise ParameterError(f"forecasts ({F.size}) and actuals ({Y.size}) must be equal, non-empty lengths")
    return F, Y


def smape(forecasts, actuals) -> float:
    """Symmetric MAPE in percent: mean of ``|F - Y| / ((|Y| + |F|) / 2)`` times 100."""
    F, Y = _pair(forecasts, actuals)
    den = (np.abs(Y) + np.abs(F)) / 2.0
    if np.any(den == 0):
        raise MetricError("SMAPE denominator is zero (F = Y = 0); use smape_variant for zero-valued data")
    return 100.0 * math.fsum(np.abs(F - Y) / den) / F.size


def smape_variant(forecasts, actuals, eps: float = VARIANT_EPS) -> float:
    """Zero-safe SMAPE: the denominator is ``max(|Y| + |F| + eps, 0.5 + eps)``."""
    F, Y = _pair(forecasts, actuals)
    den = np.maximum(np.abs(Y) + np.abs(F) + eps, 0.5 + eps)
    return 100.0 * math.fsum(np.abs(F - Y) / den) / F.size


def mase(forecasts, actuals, insample, period: int = 1) -> float:
    """MAE of the forecasts over the in-sample MAE of the seasonal naive rule with lag ``period``."""
    F, Y = _pair(forecasts, actuals)
    x = np.asarray(insample, dtype=float)
    if x.size <= period:
        raise ParameterError(f"in-sample length {x.size} must exceed the period {period}")
    scale = math.fsum(np.abs(x[period:] - x[:-period])) / (x.size - period)
    if scale == 0:
        raise MetricError("MASE denominator is zero: the in-sample data is constant at the seasonal lag")
    return math.fsum(np.abs(F - Y)) / F.size / scale


@dataclass(frozen=True)
class ForecastMatrix:
    """Forecasts and actuals of one model on the evaluated series of one replicate."""

    model: str
    series_ids: tuple[int, ...]
    forecasts: np.ndarray  # (series, H)
    actuals: np.ndarray  # (series, H)
    insample: tuple[np.ndarray, ...]
    replicate: int = 0
    scenario: str = ""
    dgp: str = ""
    seasonal_period: int = 1
    use_variant: bool = False
    length: int = 0
    num_series: int = 0

    def __post_init__(self):
        if self.forecasts.shape != self.actuals.shape:
            raise ParameterError("forecasts and actuals must have the same shape")
        if len(self.series_ids) != self.forecasts.shape[0] or len(self.insample) != self.forecasts.shape[0]:
            raise ParameterError("one row and one in-sample series per evaluated series")
        if not np.all(np.isfinite(self.forecasts)):
            raise MetricError(f"{self.model}: non-finite forecasts")

    @property
    def horizon(self) -> int:
        return self.forecasts.shape[1]


@dataclass(frozen=True)
class SeriesScore:
    scenario: str
    dgp: str
    replicate: int
    model: str
    series_id: int
    smape: float
    mase: float
    length: int = 0
    num_series: int = 0

    def row(self) -> list:
        return [self.scenario, self.dgp, self.replicate, self.model, self.series_id, self.smape, self.mase, self.length, self.num_series]


RESULTS_HEADER = ["scenario", "dgp", "replicate", "model", "series_id", "smape", "mase", "length", "num_series"]


def score(fm: ForecastMatrix) -> list[SeriesScore]:
    err = smape_variant if fm.use_variant else smape
    return [
        SeriesScore(
            fm.scenario,
            fm.dgp,
            fm.replicate,
            fm.model,
            sid,
            err(fm.forecasts[k], fm.actuals[k]),
            mase(fm.forecasts[k], fm.actuals[k], fm.insample[k], fm.seasonal_period),
            fm.length,
            fm.num_series,
        )
        for k, sid in enumerate(fm.series_ids)
    ]


@dataclass
class ErrorReport:
    scenario: str
    dgp: str
    mean_smape: dict[str, float]
    mean_mase: dict[str, float]
    counts: dict[str, int]
    cells: dict[tuple[str, int, int], tuple[float, float]] = field(default_factory=dict)  # (model, length, num_series)

    @property
    def models(self) -> list[str]:
        return sorted(self.mean_smape)

    def pct_diff(self) -> dict[str, tuple[float, float]]:
        ds = percentage_difference(self.mean_smape)
        dm = percentage_difference(self.mean_mase)
        return {m: (ds[m], dm[m]) for m in self.models}


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def aggregate(scores: Iterable[SeriesScore]) -> ErrorReport:
    """Unweighted means over every scored (series, replicate) pair, overall and per sweep cell."""
    scores = sorted(scores, key=lambda s: (s.model, s.length, s.num_series, s.replicate, s.series_id))
    if not scores:
        raise ParameterError("nothing to aggregate")
    tags = {(s.scenario, s.dgp) for s in scores}
    if len(tags) > 1:
        raise ParameterError(f"mixed scenarios in one report: {sorted(tags)}")
    by_model = defaultdict(list)
    by_cell = defaultdict(list)
    for s in scores:
        by_model[s.model].append(s)
        by_cell[(s.model, s.length, s.num_series)].append(s)
    scenario, dgp = tags.pop()
    return ErrorReport(
        scenario,
        dgp,
        {m: _mean([s.smape for s in v]) for m, v in by_model.items()},
        {m: _mean([s.mase for s in v]) for m, v in by_model.items()},
        {m: len(v) for m, v in by_model.items()},
        {k: (_mean([s.smape for s in v]), _mean([s.mase for s in v])) for k, v in by_cell.items()},
    )


def percentage_difference(errors: dict[str, float]) -> dict[str, float]:
    """``100 * (E_m - E_best) / E_best`` for every model; the best model gets 0."""
    if not errors:
        raise ParameterError("no models to compare")
    best = min(errors.values())
    out = {}
    for m, e in errors.items():
        if e == best:
            out[m] = 0.0
        elif best == 0:
            out[m] = math.inf
        else:
            out[m] = 100.0 * (e - best) / best
    return out


def write_results(scores: Iterable[SeriesScore], path: str | Path) -> Path:
    rows = sorted((s.row() for s in scores), key=lambda r: (r[3], r[7], r[8], r[2], r[4]))
    return write_rows(path, RESULTS_HEADER, rows)


SUMMARY_HEADER = ["scenario", "dgp", "model", "mean_smape", "mean_mase", "pct_diff_smape", "pct_diff_mase"]


def summary_rows(report: ErrorReport) -> list[list]:
    diffs = report.pct_diff()
    return [
        [report.scenario, report.dgp, m, report.mean_smape[m], report.mean_mase[m], diffs[m][0], diffs[m][1]]
        for m in report.models
    ]

"""
Run any model of the roster on a set of training series and return H-step forecasts.

Model names look like ``AR-3``, ``PR-10``, ``FFNN-15``, ``GBT-15``,
``RNN-12``, ``SAR-1``, ``SETAR``; a ``-Group`` suffix adds the one-hot group
indicator to the inputs of a global model. The number is the input window
(lag) size, except for SAR where it is the seasonal order.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Sequence

import numpy as np

from ..errors import EnsembleError, GfmSimError, ParameterError
from ..evaluation import smape, smape_variant
from ..preprocessing import Pipeline, WindowBatch, inverse_values
from ..seeding import derive_seed
from .ffnn import FfnnConfig, fit_ffnn
from .gbt import DESK_GBT, GbtConfig, fit_gbt
from .local import fit_ar, fit_sar, fit_setar, forecast_recursive
from .pooled import fit_pooled_regression, forecast_pooled
from .rnn import RnnConfig, fit_rnn
from .tuning import HyperRanges, TuningResult, ffnn_ranges, random_search_tune, rnn_ranges, scale_epochs

LOCAL_KINDS = ("AR", "SAR", "SETAR")
GLOBAL_KINDS = ("PR", "FFNN", "GBT", "RNN")
NEURAL_KINDS = ("FFNN", "RNN")
_NAME = re.compile(r"^(AR|SAR|SETAR|PR|FFNN|GBT|RNN)(?:-(\d+))?(-Group)?$")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    order: int | None = None
    group: bool = False

    @property
    def name(self) -> str:
        base = self.kind if self.order is None else f"{self.kind}-{self.order}"
        return base + ("-Group" if self.group else "")

    @property
    def is_global(self) -> bool:
        return self.kind in GLOBAL_KINDS

    @property
    def is_neural(self) -> bool:
        return self.kind in NEURAL_KINDS


def parse_model(name: str) -> ModelSpec:
    m = _NAME.match(name.strip())
    if not m:
        raise ParameterError(f"unknown model {name!r}")
    kind, order, group = m.group(1), m.group(2), bool(m.group(3))
    if kind == "SETAR":
        if order is not None:
            raise ParameterError("SETAR takes no order")
    elif order is None:
        raise ParameterError(f"{kind} needs an order, e.g. {kind}-3")
    if group and kind not in GLOBAL_KINDS:
        raise ParameterError("the group feature applies to global models only")
    spec = ModelSpec(kind, None if order is None else int(order), group)
    if spec.order is not None and spec.order < 1:
        raise ParameterError("model order must be >= 1")
    return spec


@dataclass(frozen=True)
class ForecastTask:
    train: tuple[np.ndarray, ...]
    horizon: int
    seasonal_period: int = 1
    group_labels: tuple[int, ...] = ()
    num_groups: int = 1
    evaluate: tuple[int, ...] = ()  # series to forecast; all when empty
    log_shift: bool | None = None  # forced +1 before the log, or decided per series when None

    @property
    def targets(self) -> tuple[int, ...]:
        return self.evaluate or tuple(range(len(self.train)))

    @property
    def labels(self) -> tuple[int, ...]:
        return self.group_labels or (0,) * len(self.train)

    def holdout(self) -> tuple["ForecastTask", list[np.ndarray]]:
        """Same task on the training series minus their last ``horizon`` points, plus those points."""
        H = self.horizon
        return replace(self, train=tuple(s[:-H] for s in self.train)), [s[-H:] for s in self.train]


# ---------------------------------------------------------------------------
# group feature


def group_onehot(labels: Sequence[int], num_groups: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if num_groups < 1:
        raise ParameterError("num_groups must be >= 1")
    if labels.size and (labels.min() < 0 or labels.max() >= num_groups):
        raise ParameterError(f"group labels must lie in [0, {num_groups})")
    out = np.zeros((labels.size, num_groups))
    out[np.arange(labels.size), labels] = 1.0
    return out


def append_group_feature(batch: WindowBatch, group_labels: Sequence[int], num_groups: int) -> WindowBatch:
    """Attach the one-hot group of each row's series; ``group_labels`` is indexed by series id."""
    labels = np.asarray(group_labels, dtype=int)[batch.series_ids]
    return replace(batch, group_onehot=group_onehot(labels, num_groups))


# ---------------------------------------------------------------------------
# ensembles


def ensemble_seeds(seed: int, num_seeds: int) -> list[int]:
    return [derive_seed(seed, series=k, purpose="ensemble") for k in range(num_seeds)]


def ensemble_median_predict(predict: Callable[[int], np.ndarray], num_seeds: int = 10, base_seed: int = 0) -> np.ndarray:
    """Elementwise median of ``predict(seed)`` over ``num_seeds`` derived seeds."""
    if num_seeds < 1:
        raise ParameterError("num_seeds must be >= 1")
    preds, failed = [], []
    for s in ensemble_seeds(base_seed, num_seeds):
        try:
            preds.append(np.asarray(predict(s), dtype=float))
        except (GfmSimError, FloatingPointError) as exc:
            failed.append((s, str(exc)))
    if failed:
        raise EnsembleError(
            f"{len(failed)} of {num_seeds} ensemble members failed (first: {failed[0][1]})", [s for s, _ in failed]
        )
    return np.median(np.stack(preds), axis=0)


# ---------------------------------------------------------------------------
# per-kind forecasting


def _config(cls, cfg: dict[str, Any] | None, **defaults):
    names = {f.name for f in fields(cls)}
    merged = {**defaults, **(cfg or {})}
    unknown = set(merged) - names
    if unknown:
        raise ParameterError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    if "hidden_sizes" in merged:
        merged["hidden_sizes"] = tuple(merged["hidden_sizes"])
    return cls(**merged)


def _local(spec: ModelSpec, task: ForecastTask) -> np.ndarray:
    out = []
    for i in task.targets:
        y = task.train[i]
        if spec.kind == "AR":
            model = fit_ar(y, spec.order)
        elif spec.kind == "SAR":
            model = fit_sar(y, spec.order, task.seasonal_period)
        else:
            model = fit_setar(y)
        out.append(forecast_recursive(model, y, task.horizon))
    return np.vstack(out)


def _pipeline(task: ForecastTask, normalize_windows: bool = True) -> Pipeline:
    return Pipeline.fit(list(task.train), shift=task.log_shift, normalize_windows=normalize_windows)


def _invert_recursive(pipe: Pipeline, rows: list[np.ndarray], ids: Sequence[int]) -> np.ndarray:
    return np.vstack([inverse_values(r, pipe.state, i) for r, i in zip(rows, ids)])


def _mimo_data(spec: ModelSpec, task: ForecastTask, pipe: Pipeline):
    m = spec.order
    batch = pipe.training_windows(m, task.horizon)
    if spec.group:
        batch = append_group_feature(batch, task.labels, task.num_groups)
    X, ids, widx = pipe.forecast_inputs(m)
    keep = np.asarray(task.targets)
    X, ids, widx = X[keep], ids[keep], widx[keep]
    if spec.group:
        X = np.hstack([X, group_onehot(np.asarray(task.labels)[ids], task.num_groups)])
    return batch, X, ids, widx


def _rnn_data(spec: ModelSpec, task: ForecastTask, pipe: Pipeline):
    m, H = spec.order, task.horizon
    batch = pipe.training_windows(m, H)
    n = len(task.train)
    if len(batch) % n:
        raise ParameterError("RNN training needs series of equal length")
    steps = len(batch) // n
    X = batch.inputs.reshape(n, steps, m)
    Y = batch.targets.reshape(n, steps, H)
    pred_x, ids, widx = pipe.forecast_inputs(m)
    seqs = []
    for i in task.targets:
        win = np.lib.stride_tricks.sliding_window_view(pipe.transformed[i], m)
        seqs.append(win - win.mean(axis=1, keepdims=True) if pipe.normalize_windows else win)
    P = np.stack(seqs)
    keep = np.asarray(task.targets)
    if spec.group:
        oh = group_onehot(task.labels, task.num_groups)
        X = np.concatenate([X, np.repeat(oh[:, None, :], steps, axis=1)], axis=2)
        P = np.concatenate([P, np.repeat(oh[keep][:, None, :], P.shape[1], axis=1)], axis=2)
    return X, Y, P, ids[keep], widx[keep]


def forecast(
    spec: ModelSpec | str,
    task: ForecastTask,
    config: dict[str, Any] | None = None,
    seed: int = 0,
    num_seeds: int = 1,
) -> tuple[np.ndarray, dict[str, float | None]]:
    """Forecasts in data units for ``task.targets`` and the time spent per phase.

    ``config`` holds model hyperparameters (for GBT, ``{"desk": true}`` selects
    the desk settings). Neural models are trained ``num_seeds`` times and
    combined by the median.
    """
    spec = parse_model(spec) if isinstance(spec, str) else spec
    t0 = time.perf_counter()
    if not spec.is_global:
        out = _local(spec, task)
        return out, {"preprocessing": None, "train_test": time.perf_counter() - t0}

    # centred lag windows sum to zero, so the linear model skips window normalisation
    pipe = _pipeline(task, normalize_windows=spec.kind != "PR")
    many = len(task.train) > 1
    if spec.kind == "PR":
        batch = pipe.training_windows(spec.order, 1, one_step=True)
        if spec.group:
            batch = append_group_feature(batch, task.labels, task.num_groups)
        t1 = time.perf_counter()
        model = fit_pooled_regression(batch, spec.order)
        rows = [
            forecast_pooled(model, pipe.transformed[i], task.horizon, task.labels[i] if spec.group else 0, pipe.normalize_windows)
            for i in task.targets
        ]
        out = _invert_recursive(pipe, rows, task.targets)
    elif spec.kind == "RNN":
        X, Y, P, ids, widx = _rnn_data(spec, task, pipe)
        t1 = time.perf_counter()
        cfg = _config(RnnConfig, config, **({} if many else {"minibatch_size": None, "epoch_size": 1}))
        raw = ensemble_median_predict(lambda s: fit_rnn(X, Y, None, cfg, s).predict_last(P), num_seeds, seed)
        out = pipe.invert(raw, ids, widx)
    else:
        batch, X, ids, widx = _mimo_data(spec, task, pipe)
        t1 = time.perf_counter()
        if spec.kind == "FFNN":
            defaults = {"hidden_sizes": (max(3, spec.order),)}
            if not many:
                defaults.update(minibatch_size=None, epoch_size=1)
            cfg = _config(FfnnConfig, config, **defaults)
            raw = ensemble_median_predict(
                lambda s: fit_ffnn(batch.features, batch.targets, cfg, s, input_size=spec.order).predict(X), num_seeds, seed
            )
        else:
            cfg = dict(config or {})
            base = DESK_GBT if cfg.pop("desk", False) else GbtConfig()
            gcfg = replace(base, **cfg, seed=derive_seed(seed, purpose="gbt-split") % (2**32))
            raw = fit_gbt(batch.features, batch.targets, gcfg).predict(X)
        out = pipe.invert(raw, ids, widx)
    t2 = time.perf_counter()
    return out, {"preprocessing": t1 - t0, "train_test": t2 - t1}


# ---------------------------------------------------------------------------
# tuning


def validation_score(spec: ModelSpec, task: ForecastTask, config: dict[str, Any], seed: int = 0) -> float:
    """Mean SMAPE on the last ``horizon`` training points of every series."""
    inner, held = task.holdout()
    inner = replace(inner, evaluate=())
    pred, _ = forecast(spec, inner, config, seed)
    err = smape_variant if task.log_shift else smape
    return float(np.mean([err(p, y) for p, y in zip(pred, held)]))


def default_ranges(spec: ModelSpec, task: ForecastTask, trials: int = 25) -> HyperRanges:
    many = len(task.train) > 1
    low = 10 if many and len(task.train[0]) > 200 else 1
    make = ffnn_ranges if spec.kind == "FFNN" else rnn_ranges
    return make(spec.order, many, low, trials)


def tune(
    spec: ModelSpec | str,
    task: ForecastTask,
    trials: int = 25,
    seed: int = 0,
    ranges: HyperRanges | None = None,
    epoch_scale: float = 1.0,
) -> TuningResult:
    """Random search on the validation split; only the neural models have a search space."""
    spec = parse_model(spec) if isinstance(spec, str) else spec
    if not spec.is_neural:
        raise ParameterError(f"{spec.name} has no hyperparameters to tune")
    ranges = ranges or default_ranges(spec, task, trials)
    result = random_search_tune(
        ranges,
        lambda cfg: validation_score(spec, task, scale_epochs(cfg, epoch_scale), seed),
        derive_seed(seed, purpose="tune"),
        trials,
    )
    result.best_config = scale_epochs(result.best_config, epoch_scale)
    return result

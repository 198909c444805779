"""
Preprocessing chain for the window-based global models and its inverse.

Stages always run in this order::

    mean scale -> log -> moving windows (MIMO) -> per-window mean removal

and :class:`PreprocessState` records what each stage did so forecasts can
be mapped back to data units. Statistics are computed from the values the
caller passes in, which should be the training region only.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateSeriesError, InternalConsistencyError, ParameterError


@dataclass
class PreprocessState:
    per_series_mean: list[float] = field(default_factory=list)
    log_shift_applied: list[bool] = field(default_factory=list)
    window_input_means: dict[tuple[int, int], float] = field(default_factory=dict)
    pipeline_flags: dict[str, bool] = field(
        default_factory=lambda: {"mean_scale": False, "log": False, "window_normalize": False}
    )

    def record_window_mean(self, series_id: int, window_index: int, mean: float) -> None:
        key = (int(series_id), int(window_index))
        old = self.window_input_means.get(key)
        if old is not None and old != mean:
            raise InternalConsistencyError(f"window {key} already recorded with a different mean")
        self.window_input_means[key] = float(mean)


@dataclass(frozen=True)
class WindowBatch:
    inputs: np.ndarray  # (rows, m)
    targets: np.ndarray  # (rows, H) or (rows, 1)
    series_ids: np.ndarray
    window_indices: np.ndarray  # start position of the input window in its series
    group_onehot: np.ndarray | None = None

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ParameterError("inputs and targets must have the same number of rows")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def features(self) -> np.ndarray:
        """Model inputs, with the group one-hot block appended when present."""
        if self.group_onehot is None:
            return self.inputs
        return np.hstack([self.inputs, self.group_onehot])

    def subset(self, rows) -> "WindowBatch":
        return WindowBatch(
            self.inputs[rows],
            self.targets[rows],
            self.series_ids[rows],
            self.window_indices[rows],
            None if self.group_onehot is None else self.group_onehot[rows],
        )


# ---------------------------------------------------------------------------
# series-level stages


def mean_scale(series: Sequence[np.ndarray], state: PreprocessState | None = None):
    """Divide each series by its own mean.

    Returns ``(scaled, state)``.
    """
    state = state or PreprocessState()
    out = []
    means = []
    for i, s in enumerate(series):
        mu = float(np.mean(s))
        if not mu > 0:
            raise DegenerateSeriesError(f"series {i} has non-positive mean {mu}")
        means.append(mu)
        out.append(np.asarray(s, dtype=float) / mu)
    state.per_series_mean = means
    state.pipeline_flags["mean_scale"] = True
    return out, state


def log_transform(
    series: Sequence[np.ndarray], state: PreprocessState, shift: bool | Sequence[bool] | None = None
) -> list[np.ndarray]:
    """Natural log, with log(y + 1) for series whose minimum is <= 0.

    ``shift`` forces the +1 for every series (bool) or per series (sequence);
    ``None`` decides from each series' own minimum.
    """
    n = len(series)
    if shift is None:
        flags = [bool(np.min(s) <= 0.0) for s in series]
    elif isinstance(shift, (bool, np.bool_)):
        flags = [bool(shift)] * n
    else:
        flags = [bool(f) for f in shift]
    out = []
    for i, (s, f) in enumerate(zip(series, flags)):
        s = np.asarray(s, dtype=float)
        if np.min(s) < 0:
            raise ParameterError(f"series {i} has negative values; log transform is undefined")
        out.append(np.log(s + 1.0) if f else np.log(s))
    state.log_shift_applied = flags
    state.pipeline_flags["log"] = True
    return out


def forward_values(values: np.ndarray, state: PreprocessState, series_id: int) -> np.ndarray:
    """Apply the recorded series-level stages to arbitrary values of one series."""
    v = np.asarray(values, dtype=float)
    if state.pipeline_flags["mean_scale"]:
        v = v / state.per_series_mean[series_id]
    if state.pipeline_flags["log"]:
        v = np.log(v + 1.0) if state.log_shift_applied[series_id] else np.log(v)
    return v


def inverse_values(values: np.ndarray, state: PreprocessState, series_id: int) -> np.ndarray:
    """Undo the series-level stages (log then mean scale)."""
    v = np.asarray(values, dtype=float)
    if state.pipeline_flags["log"]:
        v = np.exp(v)
        if state.log_shift_applied[series_id]:
            v = v - 1.0
    if state.pipeline_flags["mean_scale"]:
        v = v * state.per_series_mean[series_id]
    return v


# ---------------------------------------------------------------------------
# windows


def window_count(length: int, input_size: int, output_size: int) -> int:
    return max(0, length - input_size - output_size + 1)


def extract_windows(
    series: Sequence[np.ndarray],
    input_size: int,
    horizon: int,
    one_step: bool = False,
    series_ids: Sequence[int] | None = None,
) -> WindowBatch:
    """All stride-1 (input, target) windows of every series, in series order.

    Series too short for a single window are skipped with a warning.
    """
    out_size = 1 if one_step else horizon
    if input_size < 1 or out_size < 1:
        raise ParameterError("input and output sizes must be >= 1")
    ids = list(range(len(series))) if series_ids is None else list(series_ids)
    xs, ys, sid, widx = [], [], [], []
    for i, s in zip(ids, series):
        s = np.asarray(s, dtype=float)
        n = window_count(s.size, input_size, out_size)
        if n == 0:
            warnings.warn(f"series {i} is too short for a {input_size}+{out_size} window; skipped", RuntimeWarning)
            continue
        win = np.lib.stride_tricks.sliding_window_view(s, input_size + out_size)[:n]
        xs.append(win[:, :input_size])
        ys.append(win[:, input_size:])
        sid.append(np.full(n, i))
        widx.append(np.arange(n))
    if not xs:
        raise ParameterError("no series is long enough to form a single window")
    return WindowBatch(
        np.ascontiguousarray(np.vstack(xs)),
        np.ascontiguousarray(np.vstack(ys)),
        np.concatenate(sid),
        np.concatenate(widx),
    )


def window_normalize(batch: WindowBatch, state: PreprocessState) -> WindowBatch:
    """Subtract each input window's mean from its inputs and targets."""
    if len(batch) == 0:
        raise ParameterError("empty window batch")
    means = batch.inputs.mean(axis=1)
    for sid, w, mu in zip(batch.series_ids.tolist(), batch.window_indices.tolist(), means.tolist()):
        state.record_window_mean(sid, w, mu)
    state.pipeline_flags["window_normalize"] = True
    return replace(batch, inputs=batch.inputs - means[:, None], targets=batch.targets - means[:, None])


def forecast_inputs(
    series: Sequence[np.ndarray],
    input_size: int,
    state: PreprocessState,
    normalize: bool = True,
    series_ids: Sequence[int] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Last ``input_size`` points of each transformed series, ready for a MIMO model.

    Returns ``(inputs, series_ids, window_indices)``; the window means are
    recorded on ``state`` when ``normalize`` is set.
    """
    ids = list(range(len(series))) if series_ids is None else list(series_ids)
    rows, widx = [], []
    for i, s in zip(ids, series):
        if len(s) < input_size:
            raise ParameterError(f"series {i} shorter than input size {input_size}")
        x = np.asarray(s[-input_size:], dtype=float)
        w = len(s) - input_size
        if normalize:
            mu = float(x.mean())
            state.record_window_mean(i, w, mu)
            x = x - mu
        rows.append(x)
        widx.append(w)
    if normalize:
        state.pipeline_flags["window_normalize"] = True
    return np.vstack(rows), np.asarray(ids), np.asarray(widx)


def postprocess_forecasts(
    raw: np.ndarray, state: PreprocessState, series_ids: Sequence[int], window_indices: Sequence[int]
) -> np.ndarray:
    """Map model outputs back to data units by inverting every stage that ran.

    Row k of ``raw`` belongs to input window ``window_indices[k]`` of series
    ``series_ids[k]``.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    out = np.empty_like(raw)
    for k, (sid, w) in enumerate(zip(series_ids, window_indices)):
        v = raw[k]
        if state.pipeline_flags["window_normalize"]:
            try:
                v = v + state.window_input_means[(int(sid), int(w))]
            except KeyError:
                raise InternalConsistencyError(f"no stored window mean for series {sid}, window {w}") from None
        if state.pipeline_flags["mean_scale"] and int(sid) >= len(state.per_series_mean):
            raise InternalConsistencyError(f"no stored series mean for series {sid}")
        out[k] = inverse_values(v, state, int(sid))
    return out


# ---------------------------------------------------------------------------
# convenience wrapper


@dataclass
class Pipeline:
    """Run the full chain on training series and keep the transformed copies.

    >>> pipe = Pipeline.fit([np.array([1.0, 2.0, 3.0, 4.0, 5.0])])
    >>> batch = pipe.training_windows(input_size=2, horizon=1)
    """

    transformed: list[np.ndarray]
    state: PreprocessState
    normalize_windows: bool = True

    @classmethod
    def fit(
        cls,
        train: Sequence[np.ndarray],
        scale: bool = True,
        log: bool = True,
        shift: bool | Sequence[bool] | None = None,
        normalize_windows: bool = True,
    ) -> "Pipeline":
        state = PreprocessState()
        values = [np.asarray(s, dtype=float) for s in train]
        if scale:
            values, state = mean_scale(values, state)
        if log:
            values = log_transform(values, state, shift)
        return cls(values, state, normalize_windows)

    def training_windows(self, input_size: int, horizon: int, one_step: bool = False) -> WindowBatch:
        batch = extract_windows(self.transformed, input_size, horizon, one_step)
        return window_normalize(batch, self.state) if self.normalize_windows else batch

    def forecast_inputs(self, input_size: int):
        return forecast_inputs(self.transformed, input_size, self.state, self.normalize_windows)

    def invert(self, raw: np.ndarray, series_ids, window_indices) -> np.ndarray:
        return postprocess_forecasts(raw, self.state, series_ids, window_indices)


def dump_windows_csv(batch: WindowBatch, path: str | Path) -> Path:
    """Debug dump: series_id, window_index, inputs x0..x{m-1}, targets y0..y{H-1}."""
    path = Path(path)
    m, h = batch.inputs.shape[1], batch.targets.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series_id", "window_index"] + [f"x{i}" for i in range(m)] + [f"y{i}" for i in range(h)])
        for k in range(len(batch)):
            w.writerow(
                [int(batch.series_ids[k]), int(batch.window_indices[k])]
                + [repr(float(v)) for v in batch.inputs[k]]
                + [repr(float(v)) for v in batch.targets[k]]
            )
    return path

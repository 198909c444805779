"""Pooled linear regression: one AR coefficient vector shared by every series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..preprocessing import WindowBatch
from .local import _least_squares


@dataclass(frozen=True)
class PooledRegressionModel:
    intercept: float
    theta: tuple[float, ...]  # theta[0] multiplies lag 1
    group_effects: tuple[float, ...] = ()  # offsets for groups 1..G-1, group 0 is the reference

    @property
    def order(self) -> int:
        return len(self.theta)

    def step(self, lags_oldest_first: np.ndarray, group: int = 0) -> float:
        """One-step forecast from the last ``order`` values."""
        x = np.asarray(lags_oldest_first, dtype=float)[::-1][: self.order]
        val = self.intercept + float(np.dot(self.theta, x))
        if group and self.group_effects:
            val += self.group_effects[group - 1]
        return val


def fit_pooled_regression(batch: WindowBatch, p: int | None = None) -> PooledRegressionModel:
    """Least squares over all one-step rows of ``batch``.

    With a group one-hot block attached, the first group is the reference
    level and the others get an additive offset; this keeps the design full
    rank alongside the intercept.
    """
    if batch.targets.shape[1] != 1:
        raise ParameterError("pooled regression is fit on one-step windows")
    p = batch.inputs.shape[1] if p is None else p
    if p != batch.inputs.shape[1]:
        raise ParameterError(f"batch windows have {batch.inputs.shape[1]} inputs, expected {p}")
    if len(batch) < p + 2:
        raise ParameterError(f"need at least {p + 2} rows, got {len(batch)}")
    cols = [np.ones((len(batch), 1)), batch.inputs[:, ::-1]]
    n_groups = 0
    if batch.group_onehot is not None and batch.group_onehot.shape[1] > 1:
        n_groups = batch.group_onehot.shape[1]
        cols.append(batch.group_onehot[:, 1:])
    beta = _least_squares(np.hstack(cols), batch.targets[:, 0])
    theta = tuple(float(b) for b in beta[1 : p + 1])
    effects = tuple(float(b) for b in beta[p + 1 :]) if n_groups else ()
    return PooledRegressionModel(float(beta[0]), theta, effects)


def forecast_pooled(
    model: PooledRegressionModel, tail: np.ndarray, horizon: int, group: int = 0, normalize: bool = False
) -> np.ndarray:
    """Recursive forecast; with ``normalize`` each input window is centred on its own mean."""
    hist = list(np.asarray(tail, dtype=float))
    if len(hist) < model.order:
        raise ParameterError(f"tail shorter than model order {model.order}")
    out = []
    for _ in range(horizon):
        x = np.asarray(hist[-model.order :])
        mu = float(x.mean()) if normalize else 0.0
        val = model.step(x - mu, group) + mu
        hist.append(val)
        out.append(val)
    return np.asarray(out)

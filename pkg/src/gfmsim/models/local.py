"""
Per-series linear and threshold autoregressions.

All fits are conditional least squares on the lag design matrix, with an
intercept. Forecasts are recursive: each one-step forecast is fed back as
an input for the next step.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import FitError, ParameterError


@dataclass(frozen=True)
class FittedAr:
    intercept: float
    phi: tuple[float, ...]
    residual_variance: float
    lags: tuple[int, ...]
    sse: float = 0.0
    n_obs: int = 0

    @property
    def order(self) -> int:
        return len(self.phi)

    @property
    def max_lag(self) -> int:
        return max(self.lags)

    def to_json(self) -> str:
        return json.dumps({"kind": "AR", **asdict(self)}, sort_keys=True)


@dataclass(frozen=True)
class FittedSetar:
    regimes: tuple[tuple[float, tuple[float, ...]], ...]  # (intercept, phi) per regime, low to high
    threshold: float
    delay: int
    sse: float
    threshold_grid_meta: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.regimes[0][1])

    @property
    def max_lag(self) -> int:
        return max(self.order, self.delay)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "SETAR",
                "regimes": [[c, list(p)] for c, p in self.regimes],
                "threshold": self.threshold,
                "delay": self.delay,
                "sse": self.sse,
            },
            sort_keys=True,
        )


def lag_design(y: np.ndarray, lags: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix ``[1, y_{t-l1}, y_{t-l2}, ...]`` and target ``y_t`` for t >= max lag."""
    y = np.asarray(y, dtype=float)
    L = max(lags)
    n = y.size - L
    X = np.empty((n, len(lags) + 1))
    X[:, 0] = 1.0
    for j, lag in enumerate(lags):
        X[:, j + 1] = y[L - lag : L - lag + n]
    return X, y[L:]


def _least_squares(X: np.ndarray, target: np.ndarray) -> np.ndarray:
    # constant regressors make the design singular regardless of row count
    if X.shape[1] > 1 and np.all(np.ptp(X[:, 1:], axis=0) == 0):
        raise FitError("singular lag design: the series is constant")
    if X.shape[0] < X.shape[1]:
        warnings.warn(
            f"{X.shape[0]} rows for {X.shape[1]} parameters; using the minimum-norm solution", RuntimeWarning
        )
        return np.linalg.lstsq(X, target, rcond=None)[0]
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        raise FitError(f"singular lag design (rank {rank} < {X.shape[1]})")
    return np.linalg.lstsq(X, target, rcond=None)[0]


def _fit_lags(y: np.ndarray, lags: Sequence[int]) -> FittedAr:
    X, target = lag_design(y, lags)
    beta = _least_squares(X, target)
    resid = target - X @ beta
    sse = float(resid @ resid)
    dof = max(X.shape[0] - X.shape[1], 1)
    return FittedAr(float(beta[0]), tuple(float(b) for b in beta[1:]), sse / dof, tuple(lags), sse, X.shape[0])


def fit_ar(series: np.ndarray, p: int) -> FittedAr:
    """Conditional least squares AR(p) with intercept."""
    y = np.asarray(series, dtype=float)
    if p < 1:
        raise ParameterError("AR order must be >= 1")
    if y.size < p + 2:
        raise ParameterError(f"need at least {p + 2} points to fit AR({p}), got {y.size}")
    return _fit_lags(y, list(range(1, p + 1)))


def fit_sar(series: np.ndarray, P: int = 1, S: int = 12) -> FittedAr:
    """Least squares on the seasonal lags S, 2S, ..., PS."""
    y = np.asarray(series, dtype=float)
    if P < 1 or S < 1:
        raise ParameterError("seasonal order and period must be >= 1")
    if y.size < P * S + 2:
        raise ParameterError(f"need at least {P * S + 2} points to fit SAR({P})_{S}, got {y.size}")
    return _fit_lags(y, [S * (i + 1) for i in range(P)])


def fit_setar(
    series: np.ndarray,
    regime_order: int = 2,
    delay: int = 1,
    trim: float = 0.15,
    grid_size: int = 71,
    min_regime_obs: int = 10,
) -> FittedSetar:
    """Two-regime SETAR by grid search over the threshold.

    Candidates are ``grid_size`` evenly spaced quantiles of the delayed series
    between ``trim`` and ``1 - trim``; the winner minimises the summed
    one-step squared error of the two regime regressions.
    """
    y = np.asarray(series, dtype=float)
    if y.size < 30:
        raise ParameterError(f"need at least 30 points to fit SETAR, got {y.size}")
    if delay > regime_order:
        raise ParameterError("delay must not exceed the regime order")
    X, target = lag_design(y, list(range(1, regime_order + 1)))
    z = X[:, delay]  # y_{t-delay}
    candidates = np.unique(np.quantile(z, np.linspace(trim, 1.0 - trim, grid_size)))
    best = None
    tried = 0
    for th in candidates:
        low = z <= th
        n_low = int(low.sum())
        if n_low < min_regime_obs or z.size - n_low < min_regime_obs:
            continue
        tried += 1
        sse = 0.0
        coefs = []
        for mask in (low, ~low):
            Xm, tm = X[mask], target[mask]
            beta, *_ = np.linalg.lstsq(Xm, tm, rcond=None)
            r = tm - Xm @ beta
            sse += float(r @ r)
            coefs.append((float(beta[0]), tuple(float(b) for b in beta[1:])))
        if best is None or sse < best[0]:
            best = (sse, float(th), tuple(coefs))
    if best is None:
        raise FitError(f"no threshold candidate leaves both regimes with >= {min_regime_obs} observations")
    meta = {"candidates": int(candidates.size), "evaluated": tried, "trim": trim}
    return FittedSetar(best[2], best[1], delay, best[0], meta)


def forecast_recursive(model: FittedAr | FittedSetar, tail: np.ndarray, horizon: int) -> np.ndarray:
    """Iterate one-step forecasts ``horizon`` times from the end of ``tail``."""
    hist = [float(v) for v in np.asarray(tail, dtype=float)]
    if len(hist) < model.max_lag:
        raise ParameterError(f"tail of length {len(hist)} shorter than model lag {model.max_lag}")
    out = []
    for _ in range(horizon):
        t = len(hist)
        if isinstance(model, FittedSetar):
            k = 0 if hist[t - model.delay] <= model.threshold else 1
            c, phi = model.regimes[k]
            lags = range(1, len(phi) + 1)
        else:
            c, phi, lags = model.intercept, model.phi, model.lags
        val = c
        for lag, coef in zip(lags, phi):
            val += coef * hist[t - lag]
        hist.append(val)
        out.append(val)
    return np.asarray(out)

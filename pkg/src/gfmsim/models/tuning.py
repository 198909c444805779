"""Bounded random search over network hyperparameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..errors import GfmSimError, ParameterError, TuningError

# name -> (low, high, scale); scale is "int", "float" or "log"
Ranges = dict[str, tuple[float, float, str]]

_SHARED = {
    "l2": (1e-4, 8e-4, "float"),
    "input_noise_std": (1e-4, 8e-4, "float"),
    "init_std": (1e-4, 8e-4, "float"),
    "learning_rate": (1e-4, 0.1, "log"),
}


@dataclass(frozen=True)
class HyperRanges:
    kind: str  # "FFNN" or "RNN"
    ranges: Ranges
    input_size: int = 3
    trials: int = 25

    def sample(self, rng: np.random.Generator) -> dict[str, Any]:
        cfg: dict[str, Any] = {}
        for name, (lo, hi, scale) in sorted(self.ranges.items()):
            if name == "hidden_size":
                continue
            cfg[name] = _draw(rng, lo, hi, scale)
        if "hidden_size" in self.ranges:
            lo, hi, _ = self.ranges["hidden_size"]
            cfg["hidden_sizes"] = tuple(int(rng.integers(lo, hi + 1)) for _ in range(cfg.pop("num_layers")))
        return cfg

    def contains(self, cfg: dict[str, Any]) -> bool:
        for name, value in cfg.items():
            if name == "hidden_sizes":
                lo, hi, _ = self.ranges["hidden_size"]
                nl = self.ranges["num_layers"]
                if not nl[0] <= len(value) <= nl[1] or not all(lo <= v <= hi for v in value):
                    return False
            elif name in self.ranges:
                lo, hi, _ = self.ranges[name]
                if value is not None and not lo <= value <= hi:
                    return False
        return True


def _draw(rng: np.random.Generator, lo: float, hi: float, scale: str):
    if scale == "int":
        return int(rng.integers(int(lo), int(hi) + 1))
    if scale == "log":
        return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    return float(rng.uniform(lo, hi))


def ffnn_ranges(input_size: int, many_series: bool = True, minibatch_low: int = 10, trials: int = 25) -> HyperRanges:
    r: Ranges = {
        "num_layers": (1, 5, "int"),
        "hidden_size": (3, max(3, input_size), "int"),
        **_SHARED,
    }
    if many_series:
        r.update(minibatch_size=(minibatch_low, 100, "int"), epochs=(5, 60, "int"), epoch_size=(1, 10, "int"))
    else:
        r.update(epochs=(20, 300, "int"))
    return HyperRanges("FFNN", r, input_size, trials)


def rnn_ranges(input_size: int, many_series: bool = True, minibatch_low: int = 10, trials: int = 25) -> HyperRanges:
    r: Ranges = {"cell_dimension": (20, 50, "int"), "num_layers": (1, 2, "int"), **_SHARED}
    if many_series:
        r.update(minibatch_size=(minibatch_low, 100, "int"), epochs=(5, 30, "int"), epoch_size=(1, 10, "int"))
    else:
        r.update(epochs=(20, 300, "int"))
    return HyperRanges("RNN", r, input_size, trials)


def scale_epochs(cfg: dict[str, Any], scale: float) -> dict[str, Any]:
    """Divide the epoch count by ``scale`` (desk runs); never below one epoch."""
    out = dict(cfg)
    if scale > 1 and "epochs" in out:
        out["epochs"] = max(1, int(out["epochs"] // scale))
    return out


@dataclass
class TuningResult:
    best_config: dict[str, Any]
    best_score: float
    trace: list[dict[str, Any]] = field(default_factory=list)  # one entry per trial: config, score, error


def random_search_tune(
    ranges: HyperRanges,
    score: Callable[[dict[str, Any]], float],
    rng: np.random.Generator | int = 0,
    trials: int | None = None,
) -> TuningResult:
    """Sample ``trials`` configurations and keep the one with the lowest validation score.

    ``score`` maps a configuration to a validation error (lower is better).
    Trials whose training fails or returns a non-finite score are recorded and
    skipped.
    """
    trials = ranges.trials if trials is None else trials
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    trace = []
    best = None
    for k in range(trials):
        cfg = ranges.sample(rng)
        try:
            s = float(score(cfg))
            err = None if math.isfinite(s) else "non-finite score"
        except (GfmSimError, FloatingPointError, ValueError) as exc:
            s, err = math.inf, f"{type(exc).__name__}: {exc}"
        trace.append({"trial": k, "config": cfg, "score": s, "error": err})
        if err is None and (best is None or s < best[1]):
            best = (cfg, s)
    if best is None:
        raise TuningError(f"all {trials} tuning trials failed")
    return TuningResult(best[0], best[1], trace)

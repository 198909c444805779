"""Fully connected network (tanh hidden layers, linear output) trained with Adam on MAE + L2."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, TrainingError
from .optim import Adam


@dataclass(frozen=True)
class FfnnConfig:
    hidden_sizes: tuple[int, ...] = (8,)
    learning_rate: float = 0.01
    epochs: int = 30
    minibatch_size: int | None = 32  # None: full batch
    epoch_size: int = 1
    l2: float = 1e-4
    input_noise_std: float = 1e-4
    init_std: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))


@dataclass
class FfnnModel:
    weights: list[np.ndarray]  # W^j has shape (k_j, k_{j-1})
    biases: list[np.ndarray]
    config: FfnnConfig
    loss_trace: list[float] = field(default_factory=list)

    @property
    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    @property
    def output_size(self) -> int:
        return self.weights[-1].shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return forward(self.weights, self.biases, X)[0]


def check_hidden_sizes(hidden_sizes, input_size: int) -> None:
    for h in hidden_sizes:
        if not 3 <= h <= max(input_size, 3):
            raise ParameterError(f"hidden layer size {h} outside [3, {input_size}]")
    if not hidden_sizes:
        raise ParameterError("at least one hidden layer is required")


def init_params(layer_sizes: list[int], init_std: float, rng: np.random.Generator):
    weights = [rng.normal(0.0, init_std, size=(k, k_prev)) for k_prev, k in zip(layer_sizes, layer_sizes[1:])]
    biases = [np.zeros(k) for k in layer_sizes[1:]]
    return weights, biases


def forward(weights, biases, X):
    acts = [X]
    a = X
    last = len(weights) - 1
    for j, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W.T + b
        a = z if j == last else np.tanh(z)
        acts.append(a)
    return a, acts


def loss_and_grads(weights, biases, X, Y, l2: float):
    """MAE over every output cell plus ``l2/2 * sum(W**2)``; returns (loss, dW list, db list)."""
    out, acts = forward(weights, biases, X)
    diff = out - Y
    n = diff.size
    loss = float(np.abs(diff).sum() / n) + 0.5 * l2 * sum(float(np.sum(W * W)) for W in weights)
    delta = np.sign(diff) / n
    gW = [None] * len(weights)
    gb = [None] * len(weights)
    for j in range(len(weights) - 1, -1, -1):
        gW[j] = delta.T @ acts[j] + l2 * weights[j]
        gb[j] = delta.sum(axis=0)
        if j:
            delta = (delta @ weights[j]) * (1.0 - acts[j] ** 2)
    return loss, gW, gb


def fit_ffnn(
    X: np.ndarray,
    Y: np.ndarray,
    config: FfnnConfig,
    rng: np.random.Generator | int = 0,
    input_size: int | None = None,
) -> FfnnModel:
    """Train on rows of ``X`` (windows, plus any group columns) against ``Y``.

    ``input_size`` is the window length used to bound the hidden sizes; it
    defaults to the width of ``X``. Each epoch walks ``epoch_size`` shuffled
    copies of the data in minibatches, with Gaussian noise on the inputs.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] == 0:
        raise ParameterError("empty training batch")
    check_hidden_sizes(config.hidden_sizes, input_size or X.shape[1])
    sizes = [X.shape[1], *config.hidden_sizes, Y.shape[1]]
    weights, biases = init_params(sizes, config.init_std, rng)
    params = [*weights, *biases]
    opt = Adam(params, lr=config.learning_rate)
    nw = len(weights)
    bs = X.shape[0] if config.minibatch_size is None else max(1, min(config.minibatch_size, X.shape[0]))
    trace = []
    for epoch in range(config.epochs):
        for _ in range(config.epoch_size):
            order = rng.permutation(X.shape[0])
            for start in range(0, order.size, bs):
                rows = order[start : start + bs]
                xb = X[rows]
                if config.input_noise_std > 0:
                    xb = xb + rng.normal(0.0, config.input_noise_std, size=xb.shape)
                _, gW, gb = loss_and_grads(params[:nw], params[nw:], xb, Y[rows], config.l2)
                opt.step([*gW, *gb])
        loss = loss_and_grads(params[:nw], params[nw:], X, Y, config.l2)[0]
        if not np.isfinite(loss):
            raise TrainingError("FFNN training diverged", epoch)
        trace.append(loss)
    return FfnnModel(params[:nw], params[nw:], config, trace)

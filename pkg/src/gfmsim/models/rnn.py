"""
Stacked LSTM with peephole connections and residual links, trained by full BPTT.

Each series is one sequence whose steps are its consecutive input windows;
state starts at zero for every series. Layer j > 1 receives the sum of the
previous layer's output and that layer's input; layer 1 gets the raw window,
so no residual link is possible there. A bias-free affine map turns the top
representation into the H-step output at every time step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, TrainingError
from .optim import Adam, clip_by_global_norm


@dataclass(frozen=True)
class RnnConfig:
    cell_dimension: int = 20
    num_layers: int = 1
    learning_rate: float = 0.01
    epochs: int = 20
    minibatch_size: int | None = 10  # None: all series in one batch
    epoch_size: int = 1
    l2: float = 1e-4
    input_noise_std: float = 1e-4
    init_std: float = 1e-4
    clip_norm: float = 5.0


@dataclass
class LstmLayer:
    W: np.ndarray  # (4d, input) gate order: input, forget, candidate, output
    U: np.ndarray  # (4d, d)
    b: np.ndarray  # (4d,)
    peep: np.ndarray  # (3, d) for input, forget, output gates

    def arrays(self) -> list[np.ndarray]:
        return [self.W, self.U, self.b, self.peep]


@dataclass
class RnnModel:
    layers: list[LstmLayer]
    output: np.ndarray  # (H, d), no bias
    config: RnnConfig
    loss_trace: list[float] = field(default_factory=list)

    @property
    def params(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer.arrays()] + [self.output]

    @property
    def cell_dimension(self) -> int:
        return self.output.shape[1]

    def predict_sequences(self, X: np.ndarray) -> np.ndarray:
        """Outputs at every step for sequences ``X`` of shape (series, steps, inputs)."""
        return forward(self.layers, self.output, X)[0]

    def predict_last(self, X: np.ndarray) -> np.ndarray:
        return self.predict_sequences(X)[:, -1, :]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_model(input_size: int, horizon: int, config: RnnConfig, rng: np.random.Generator) -> tuple[list[LstmLayer], np.ndarray]:
    d = config.cell_dimension
    layers = []
    for j in range(config.num_layers):
        n_in = input_size if j == 0 else d
        b = np.zeros(4 * d)
        b[d : 2 * d] = 1.0
        layers.append(
            LstmLayer(
                rng.normal(0.0, config.init_std, size=(4 * d, n_in)),
                rng.normal(0.0, config.init_std, size=(4 * d, d)),
                b,
                rng.normal(0.0, config.init_std, size=(3, d)),
            )
        )
    return layers, rng.normal(0.0, config.init_std, size=(horizon, d))


def forward(layers: list[LstmLayer], D: np.ndarray, X: np.ndarray):
    """Run the stack over ``X`` (B, T, m); returns (outputs (B, T, H), cache)."""
    B, T, _ = X.shape
    d = D.shape[1]
    z = X
    caches = []
    for j, layer in enumerate(layers):
        h = np.zeros((B, d))
        c = np.zeros((B, d))
        hs = np.empty((B, T, d))
        steps = []
        pre = z @ layer.W.T + layer.b  # input contribution for all steps at once
        for t in range(T):
            a = pre[:, t] + h @ layer.U.T
            i = _sigmoid(a[:, :d] + layer.peep[0] * c)
            f = _sigmoid(a[:, d : 2 * d] + layer.peep[1] * c)
            g = np.tanh(a[:, 2 * d : 3 * d])
            c_new = f * c + i * g
            o = _sigmoid(a[:, 3 * d :] + layer.peep[2] * c_new)
            tc = np.tanh(c_new)
            steps.append((h, c, i, f, g, o, c_new, tc))
            h = o * tc
            c = c_new
            hs[:, t] = h
        caches.append((z, steps))
        z = hs + z if j >= 1 else hs
    return z @ D.T, (caches, z)


def loss_and_grads(layers: list[LstmLayer], D: np.ndarray, X, Y, mask, l2: float):
    """Masked MAE over all (step, horizon) cells plus ``l2/2`` times the squared weight matrices.

    Returns ``(loss, grads)`` with grads ordered like :attr:`RnnModel.params`.
    """
    out, (caches, top) = forward(layers, D, X)
    mask = np.asarray(mask, dtype=float)
    n = mask.sum() * Y.shape[2]
    if n == 0:
        raise ParameterError("no target cells in the batch")
    diff = (out - Y) * mask[:, :, None]
    reg = sum(float(np.sum(L.W**2) + np.sum(L.U**2)) for L in layers) + float(np.sum(D**2))
    loss = float(np.abs(diff).sum() / n) + 0.5 * l2 * reg
    dout = np.sign(diff) / n  # (B, T, H)
    gD = np.einsum("bth,btd->hd", dout, top) + l2 * D
    dz = dout @ D  # gradient w.r.t. the top representation
    d = D.shape[1]
    grads_rev = []
    for j in range(len(layers) - 1, -1, -1):
        layer = layers[j]
        z_in, steps = caches[j]
        dh_seq = dz  # this layer's output feeds the next input directly
        gU = np.zeros_like(layer.U)
        gp = np.zeros_like(layer.peep)
        da_all = np.empty((z_in.shape[0], z_in.shape[1], 4 * d))
        dh_next = np.zeros_like(dz[:, 0])
        dc_next = np.zeros_like(dh_next)
        for t in range(len(steps) - 1, -1, -1):
            h_prev, c_prev, i, f, g, o, c, tc = steps[t]
            dh = dh_seq[:, t] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dao = do * o * (1.0 - o)
            dc = dc + dao * layer.peep[2]
            gp[2] += np.sum(dao * c, axis=0)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dai = di * i * (1.0 - i)
            daf = df * f * (1.0 - f)
            dag = dg * (1.0 - g * g)
            gp[0] += np.sum(dai * c_prev, axis=0)
            gp[1] += np.sum(daf * c_prev, axis=0)
            dc_next = dc * f + dai * layer.peep[0] + daf * layer.peep[1]
            da = np.concatenate([dai, daf, dag, dao], axis=1)
            da_all[:, t] = da
            gU += da.T @ h_prev
            dh_next = da @ layer.U
        gW = np.einsum("btk,bti->ki", da_all, z_in) + l2 * layer.W
        gU += l2 * layer.U
        gb = da_all.sum(axis=(0, 1))
        dz_in = da_all @ layer.W
        if j >= 1:
            dz_in = dz_in + dz  # residual path into this layer's input
        dz = dz_in
        grads_rev.append([gW, gU, gb, gp])
    grads = [g for layer_grads in reversed(grads_rev) for g in layer_grads]
    return loss, grads + [gD]


def _unpack(params: list[np.ndarray], num_layers: int):
    layers = [LstmLayer(*params[4 * j : 4 * j + 4]) for j in range(num_layers)]
    return layers, params[-1]


def fit_rnn(
    X: np.ndarray,
    Y: np.ndarray,
    mask: np.ndarray | None,
    config: RnnConfig,
    rng: np.random.Generator | int = 0,
) -> RnnModel:
    """Train on per-series sequences.

    ``X`` is (series, steps, inputs) in temporal order, ``Y`` is
    (series, steps, H) and ``mask`` marks steps that carry a target.
    Minibatches are groups of whole series.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 3 or Y.ndim != 3 or X.shape[:2] != Y.shape[:2]:
        raise ParameterError("X and Y must be (series, steps, features) arrays with matching leading dims")
    mask = np.ones(X.shape[:2]) if mask is None else np.asarray(mask, dtype=float)
    if config.num_layers < 1 or config.cell_dimension < 1:
        raise ParameterError("need at least one layer with a positive cell dimension")
    layers, D = init_model(X.shape[2], Y.shape[2], config, rng)
    params = [a for L in layers for a in L.arrays()] + [D]
    opt = Adam(params, lr=config.learning_rate)
    k = config.num_layers
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
                if mask[rows].sum() == 0:
                    continue
                _, grads = loss_and_grads(*_unpack(params, k), xb, Y[rows], mask[rows], config.l2)
                opt.step(clip_by_global_norm(grads, config.clip_norm))
        loss = loss_and_grads(*_unpack(params, k), X, Y, mask, config.l2)[0]
        if not np.isfinite(loss):
            raise TrainingError("RNN training diverged", epoch)
        trace.append(loss)
    layers, D = _unpack(params, k)
    return RnnModel(layers, D, config, trace)

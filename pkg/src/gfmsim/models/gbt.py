"""
Gradient-boosted regression trees for the MAE objective, one ensemble per horizon step.

Trees grow best-first on the variance reduction of the negative L1
gradient (the residual signs). Leaf values are the median residual of the
rows in the leaf, scaled by the learning rate. Features are bucketed into
quantile bins once, and split statistics come from per-node histograms.
A child's histogram is obtained by subtracting its smaller sibling's from
the parent's.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from ..errors import ParameterError


@dataclass(frozen=True)
class GbtConfig:
    learning_rate: float = 0.075
    max_rounds: int = 1200
    early_stopping_rounds: int = 5
    max_depth: int = 6
    max_leaves: int = 31
    min_samples_leaf: int = 20
    max_bins: int = 255
    validation_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ParameterError("learning_rate must lie in (0, 1]")
        if self.max_bins < 2 or self.max_bins > 256:
            raise ParameterError("max_bins must lie in [2, 256]")
        if self.max_rounds < 1 or self.early_stopping_rounds < 1:
            raise ParameterError("max_rounds and early_stopping_rounds must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ParameterError("validation_fraction must lie in (0, 1)")


# Desk-scale settings: coarser bins and a larger step so that a 100-series,
# 600-point dataset with 12 horizon steps trains in seconds.
DESK_GBT = GbtConfig(learning_rate=0.2, max_bins=63, max_leaves=31, max_depth=6)


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray  # go left when x <= threshold
    bin_threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: int

    @property
    def num_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def _route(self, X: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        for _ in range(self.depth):
            f = self.feature[node]
            inner = np.nonzero(f >= 0)[0]
            if inner.size == 0:
                break
            nd = node[inner]
            go_left = X[inner, f[inner]] <= thresholds[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self._route(X, self.threshold)]

    def predict_binned(self, codes: np.ndarray) -> np.ndarray:
        return self.value[self._route(codes, self.bin_threshold)]


@dataclass
class GbtModel:
    per_step_ensembles: list[list[Tree]]
    init_values: list[float]
    learning_rate: float
    rounds_used: list[int]
    config: GbtConfig = field(default_factory=GbtConfig)
    traces: list[list[tuple[float, float]]] = field(default_factory=list)  # (train MAE, val MAE) per round

    @property
    def horizon(self) -> int:
        return len(self.per_step_ensembles)

    def predict_step(self, X: np.ndarray, step: int) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.init_values[step])
        for tree in self.per_step_ensembles[step]:
            out += tree.predict(X)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([self.predict_step(X, h) for h in range(self.horizon)])


# ---------------------------------------------------------------------------
# binning


def bin_edges(X: np.ndarray, max_bins: int) -> list[np.ndarray]:
    """Per-feature split candidates: midpoints between distinct values, or quantiles if there are too many."""
    edges = []
    for j in range(X.shape[1]):
        u = np.unique(X[:, j])
        if u.size <= max_bins:
            e = (u[:-1] + u[1:]) / 2.0
        else:
            e = np.unique(np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1]))
        edges.append(e)
    return edges


def apply_bins(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    codes = np.empty(X.shape, dtype=np.uint8)
    for j, e in enumerate(edges):
        codes[:, j] = np.searchsorted(e, X[:, j], side="left")
    return codes


@njit(cache=True)
def _histogram(codes, grad, rows, n_bins):
    n_feat = codes.shape[1]
    gsum = np.zeros((n_feat, n_bins))
    cnt = np.zeros((n_feat, n_bins))
    for r in rows:
        g = grad[r]
        for f in range(n_feat):
            b = codes[r, f]
            gsum[f, b] += g
            cnt[f, b] += 1.0
    return gsum, cnt


def _best_split(gsum, cnt, n_edges, min_leaf):
    """Return (gain, feature, bin) for the best valid split, or None."""
    G = gsum[0].sum()
    N = cnt[0].sum()
    gl = np.cumsum(gsum, axis=1)[:, :-1]
    nl = np.cumsum(cnt, axis=1)[:, :-1]
    nr = N - nl
    valid = (nl >= min_leaf) & (nr >= min_leaf)
    valid &= np.arange(gl.shape[1])[None, :] < n_edges[:, None]
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = gl**2 / nl + (G - gl) ** 2 / nr - G * G / N
    gain = np.where(valid, gain, -np.inf)
    k = int(np.argmax(gain))
    f, b = divmod(k, gain.shape[1])
    if not gain[f, b] > 1e-12:
        return None
    return float(gain[f, b]), f, b


def _leaf_value(resid: np.ndarray, rows: np.ndarray, lr: float) -> float:
    return lr * float(np.median(resid[rows])) if rows.size else 0.0


def build_tree(codes, edges, grad, resid, rows, config: GbtConfig, n_bins: int) -> tuple[Tree, list[np.ndarray]]:
    """Grow one tree on ``rows``; returns the tree and the row set of every leaf."""
    n_edges = np.array([e.size for e in edges])
    min_leaf = config.min_samples_leaf
    feature, bin_thr, left, right, depth = [-1], [0], [-1], [-1], [0]
    node_rows = {0: rows}
    hists = {0: _histogram(codes, grad, rows, n_bins)}
    heap = []

    def consider(node):
        if depth[node] >= config.max_depth or node_rows[node].size < 2 * min_leaf:
            hists.pop(node, None)
            return
        s = _best_split(*hists[node], n_edges, min_leaf)
        if s is None:
            hists.pop(node, None)
            return
        heapq.heappush(heap, (-s[0], node, s[1], s[2]))

    consider(0)
    leaves = 1
    while heap and leaves < config.max_leaves:
        _, node, f, b = heapq.heappop(heap)
        r = node_rows.pop(node)
        mask = codes[r, f] <= b
        lrows, rrows = r[mask], r[~mask]
        li, ri = len(feature), len(feature) + 1
        for _ in range(2):
            feature.append(-1)
            bin_thr.append(0)
            left.append(-1)
            right.append(-1)
            depth.append(depth[node] + 1)
        feature[node], bin_thr[node], left[node], right[node] = f, b, li, ri
        node_rows[li], node_rows[ri] = lrows, rrows
        pg, pc = hists.pop(node)
        small, big = (li, ri) if lrows.size <= rrows.size else (ri, li)
        sg, sc = _histogram(codes, grad, node_rows[small], n_bins)
        hists[small] = (sg, sc)
        hists[big] = (pg - sg, pc - sc)
        leaves += 1
        consider(li)
        consider(ri)

    feature_a = np.asarray(feature, dtype=np.int64)
    bin_a = np.asarray(bin_thr, dtype=np.int64)
    thr = np.array([edges[f][b] if f >= 0 else 0.0 for f, b in zip(feature, bin_thr)])
    value = np.zeros(len(feature))
    leaf_rows = []
    for node, rr in sorted(node_rows.items()):
        value[node] = _leaf_value(resid, rr, config.learning_rate)
        leaf_rows.append((node, rr))
    tree = Tree(feature_a, thr, bin_a, np.asarray(left), np.asarray(right), value, max(depth))
    return tree, leaf_rows


def _fit_step(codes, edges, y, train_rows, val_rows, config: GbtConfig, n_bins: int):
    init = float(np.median(y[train_rows]))
    pred = np.full(y.size, init)
    trees = []
    trace = []
    best_val = float(np.mean(np.abs(y[val_rows] - init)))
    best_round = 0
    since_best = 0
    for _ in range(config.max_rounds):
        resid = y - pred
        grad = np.sign(resid)
        tree, leaf_rows = build_tree(codes, edges, grad, resid, train_rows, config, n_bins)
        trees.append(tree)
        for node, rr in leaf_rows:
            pred[rr] += tree.value[node]
        pred[val_rows] += tree.predict_binned(codes[val_rows])
        tr = float(np.mean(np.abs(y[train_rows] - pred[train_rows])))
        va = float(np.mean(np.abs(y[val_rows] - pred[val_rows])))
        trace.append((tr, va))
        if va < best_val:
            best_val, best_round, since_best = va, len(trees), 0
        else:
            since_best += 1
            if since_best >= config.early_stopping_rounds:
                break
    return init, trees[:best_round], best_round, trace


def fit_gbt(X: np.ndarray, Y: np.ndarray, config: GbtConfig = GbtConfig()) -> GbtModel:
    """Fit one boosted ensemble per column of ``Y``.

    Rows are shuffled once (seeded by ``config.seed``) and split into
    training and validation parts; each ensemble keeps the rounds up to its
    best validation MAE.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] < 10:
        raise ParameterError(f"need at least 10 windows, got {X.shape[0]}")
    if X.shape[0] != Y.shape[0]:
        raise ParameterError("X and Y must have the same number of rows")
    perm = np.random.default_rng(config.seed).permutation(X.shape[0])
    n_val = max(1, int(round(config.validation_fraction * X.shape[0])))
    val_rows = np.sort(perm[:n_val])
    train_rows = np.sort(perm[n_val:])
    edges = bin_edges(X[train_rows], config.max_bins)
    codes = apply_bins(X, edges)
    n_bins = max(e.size for e in edges) + 1
    ensembles, inits, rounds, traces = [], [], [], []
    for h in range(Y.shape[1]):
        init, trees, used, trace = _fit_step(codes, edges, Y[:, h], train_rows, val_rows, config, n_bins)
        ensembles.append(trees)
        inits.append(init)
        rounds.append(used)
        traces.append(trace)
    return GbtModel(ensembles, inits, config.learning_rate, rounds, config, traces)


def with_seed(config: GbtConfig, seed: int) -> GbtConfig:
    return replace(config, seed=int(seed))

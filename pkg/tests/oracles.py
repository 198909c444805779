"""Independent reference computations used to check the package.

Each oracle is written from the defining formula in plain Python or with a
different numerical route than the implementation, so a shared bug cannot
make both agree.
"""

from __future__ import annotations

import math

import numpy as np


def ar_autocorrelations(phi, max_lag: int) -> np.ndarray:
    """Theoretical ACF of a stationary AR(p) via the Yule-Walker equations.

    Solves for rho_1..rho_p from rho_k = sum_j phi_j rho_{|k-j|} with
    rho_0 = 1, then extends with the recursion.
    """
    phi = list(phi)
    p = len(phi)
    A = np.zeros((p, p))
    b = np.zeros(p)
    for k in range(1, p + 1):
        A[k - 1, k - 1] += 1.0
        for j in range(1, p + 1):
            lag = abs(k - j)
            if lag == 0:
                b[k - 1] += phi[j - 1]
            else:
                A[k - 1, lag - 1] -= phi[j - 1]
    rho = [1.0] + list(np.linalg.solve(A, b))
    for k in range(p + 1, max_lag + 1):
        rho.append(sum(phi[j - 1] * rho[k - j] for j in range(1, p + 1)))
    return np.array(rho[: max_lag + 1])


def sample_acf(x, lag: int) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x))


def smape_loop(F, Y) -> float:
    total = 0.0
    for f, y in zip(F, Y):
        total += abs(f - y) / ((abs(y) + abs(f)) / 2.0)
    return 100.0 * total / len(F)


def smape_variant_loop(F, Y, eps=0.1) -> float:
    total = 0.0
    for f, y in zip(F, Y):
        total += abs(f - y) / max(abs(y) + abs(f) + eps, 0.5 + eps)
    return 100.0 * total / len(F)


def mase_loop(F, Y, insample, M) -> float:
    num = sum(abs(f - y) for f, y in zip(F, Y)) / len(F)
    diffs = [abs(insample[k] - insample[k - M]) for k in range(M, len(insample))]
    return num / (sum(diffs) / len(diffs))


def average_ranks(row) -> list[float]:
    order = sorted(range(len(row)), key=lambda j: row[j])
    ranks = [0.0] * len(row)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and row[order[j + 1]] == row[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def friedman_oracle(matrix) -> tuple[float, list[float]]:
    n, k = len(matrix), len(matrix[0])
    ranks = [average_ranks(r) for r in matrix]
    mean = [sum(r[j] for r in ranks) / n for j in range(k)]
    stat = 12.0 * n / (k * (k + 1)) * sum((m - (k + 1) / 2.0) ** 2 for m in mean)
    return stat, mean


def chi2_sf_df2(x: float) -> float:
    """Chi-square survival function with two degrees of freedom (closed form)."""
    return math.exp(-x / 2.0)


def hochberg_oracle(raw) -> list[float]:
    """Step-up adjustment by brute force over the definition."""
    m = len(raw)
    idx = sorted(range(m), key=lambda i: raw[i])
    srt = [raw[i] for i in idx]
    adj_sorted = []
    for i in range(m):
        adj_sorted.append(min(1.0, min((m - j) * srt[j] for j in range(i, m))))
    out = [0.0] * m
    for pos, i in enumerate(idx):
        out[i] = adj_sorted[pos]
    return out


def numeric_gradient(f, params, h: float = 1e-5) -> list[np.ndarray]:
    """Central differences of scalar ``f()`` with respect to every entry of every array in ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            old = p[ix]
            p[ix] = old + h
            up = f()
            p[ix] = old - h
            down = f()
            p[ix] = old
            g[ix] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), floor)))


def setar_hand_recursion(regimes, threshold, history, steps):
    """Two-regime SETAR(2) with delay 1, noise-free, written out longhand."""
    y = list(history)
    for _ in range(steps):
        c, p1, p2 = regimes[0] if y[-1] <= threshold else regimes[1]
        y.append(c + p1 * y[-1] + p2 * y[-2])
    return y[len(history) :]

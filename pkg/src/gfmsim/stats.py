"""
Rank-based comparison of models over replicate datasets.

The omnibus test is Friedman's chi-square on within-row average ranks (lower
error gets the lower rank). Pairwise comparisons against a control model
use the normal approximation for rank differences, with Hochberg's step-up
adjustment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import chi2, norm, rankdata

from .errors import ParameterError
from .io import write_rows

DISPLAY_FLOOR = 1e-30


def _check(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ParameterError(f"need an (n >= 2) x (k >= 2) error matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ParameterError("error matrix has missing or non-finite cells")
    return m


def mean_ranks(matrix) -> np.ndarray:
    return rankdata(_check(matrix), axis=1).mean(axis=0)


def friedman_test(matrix) -> tuple[float, float]:
    """Chi-square Friedman statistic and p-value with k - 1 degrees of freedom."""
    m = _check(matrix)
    n, k = m.shape
    r = mean_ranks(m)
    stat = 12.0 * n / (k * (k + 1)) * float(np.sum((r - (k + 1) / 2.0) ** 2))
    if stat <= 1e-12:
        return 0.0, 1.0
    return stat, float(chi2.sf(stat, k - 1))


def hochberg_adjust(raw: Sequence[float]) -> np.ndarray:
    """Step-up adjustment: the i-th smallest p becomes ``min_{j >= i} (m - j + 1) p_(j)``, capped at 1."""
    p = np.asarray(raw, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = (m - np.arange(m)) * p[order]
    adj_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj_sorted, 1.0)
    return out


def hochberg_posthoc(matrix, control: str, names: Sequence[str]) -> dict[str, tuple[float, float]]:
    """Raw and adjusted two-sided p-values of every model against ``control``."""
    m = _check(matrix)
    names = list(names)
    if len(names) != m.shape[1]:
        raise ParameterError("one name per matrix column is required")
    if control not in names:
        raise ParameterError(f"control {control!r} is not a column of the matrix")
    n, k = m.shape
    r = mean_ranks(m)
    c = names.index(control)
    se = np.sqrt(k * (k + 1) / (6.0 * n))
    others = [j for j in range(k) if j != c]
    raw = np.array([2.0 * norm.sf(abs(r[c] - r[j]) / se) for j in others])
    adj = hochberg_adjust(raw)
    return {names[j]: (float(raw[i]), float(adj[i])) for i, j in enumerate(others)}


def select_control(summary: dict[str, tuple[float, float]]) -> str:
    """Lowest mean SMAPE, then lowest mean MASE, then the lexicographically first name."""
    if not summary:
        raise ParameterError("empty summary")
    return min(summary, key=lambda name: (summary[name][0], summary[name][1], name))


def format_p(p: float) -> str:
    return f"<{DISPLAY_FLOOR:.0e}" if p < DISPLAY_FLOOR else repr(float(p))


@dataclass
class TestReport:
    scenario: str
    models: list[str]
    statistic: float
    dof: int
    p_value: float
    ranks: dict[str, float]
    control: str
    comparisons: dict[str, tuple[float, float]] = field(default_factory=dict)  # model -> (raw, adjusted)
    alpha: float = 0.05

    __test__ = False  # not a pytest class

    def rows(self) -> list[list]:
        return [
            [self.scenario, self.control, m, format_p(raw), format_p(adj), adj < self.alpha]
            for m, (raw, adj) in sorted(self.comparisons.items())
        ]


TESTS_HEADER = ["scenario", "control", "model", "raw_p", "adjusted_p", "significant_at_0.05"]


def compare_models(
    matrix, names: Sequence[str], summary: dict[str, tuple[float, float]], scenario: str = "", alpha: float = 0.05
) -> TestReport:
    """Friedman test plus Hochberg comparisons against the best model of ``summary``."""
    m = _check(matrix)
    names = list(names)
    stat, p = friedman_test(m)
    control = select_control({k: v for k, v in summary.items() if k in names})
    r = mean_ranks(m)
    return TestReport(
        scenario,
        names,
        stat,
        m.shape[1] - 1,
        p,
        dict(zip(names, map(float, r))),
        control,
        hochberg_posthoc(m, control, names),
        alpha,
    )


def write_tests(reports: Sequence[TestReport], path: str | Path) -> Path:
    return write_rows(path, TESTS_HEADER, [row for rep in reports for row in rep.rows()])

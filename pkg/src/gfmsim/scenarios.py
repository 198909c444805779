"""
Scenario specifications and replicate dataset construction.

A replicate dataset is a pure function of ``(spec, replicate)``: every
random draw comes from a stream derived with :func:`gfmsim.seeding.derive_seed`
keyed on the replicate, the series (or group) index and a purpose tag.

Length sweeps simulate the longest series once and take prefixes, so the
cells of a data-availability curve differ only in how much data they see.
Series-count sweeps keep the trailing segments (MS-Hom-Short) or the first
series (other scenarios).
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterator, Sequence

import numpy as np

from . import dgp as D
from .dgp import DGP, RawSeries
from .errors import ConfigError, ParameterError
from .seeding import derive_seed, rng_for


class ScenarioKind(str, enum.Enum):
    SS = "SS"
    MS_HOM_SHORT = "MSHomShort"
    MS_HOM_LONG = "MSHomLong"
    MS_HET = "MSHet"
    GROUP_FEATURE = "GroupFeature"


# labels used in reports, in the column order of the results tables
SCENARIO_LABELS = {
    ScenarioKind.SS: "SS",
    ScenarioKind.MS_HOM_SHORT: "MS-Hom-Short",
    ScenarioKind.MS_HOM_LONG: "MS-Hom-Long",
    ScenarioKind.MS_HET: "MS-Het",
    ScenarioKind.GROUP_FEATURE: "GroupFeature",
}


def _as_tuple(v) -> tuple[int, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(int(x) for x in v)
    return (int(v),)


@dataclass(frozen=True)
class ScenarioSpec:
    dgp: DGP
    scenario: ScenarioKind
    series_length: int | tuple[int, ...]
    num_series: int | tuple[int, ...] = 1
    horizon: int = 3
    num_replicates: int = 100
    base_seed: int = 0
    num_groups: int = 1
    ar_order: int = 3
    noise_std: float = 1.0
    # MS-Hom-Short: split one long series (True) or simulate independent short ones
    split_mother_series: bool = True
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "dgp", DGP(self.dgp))
        object.__setattr__(self, "scenario", ScenarioKind(self.scenario))
        for attr in ("series_length", "num_series"):
            v = getattr(self, attr)
            if isinstance(v, list):
                object.__setattr__(self, attr, tuple(int(x) for x in v))
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1")
        if self.num_replicates < 1:
            raise ParameterError("num_replicates must be >= 1")
        if min(self.lengths) < 1 or min(self.counts) < 1:
            raise ParameterError("lengths and series counts must be positive")
        if self.scenario is ScenarioKind.SS and self.counts != (1,):
            raise ParameterError("SS scenario implies num_series = 1")
        if self.scenario is ScenarioKind.GROUP_FEATURE:
            if self.num_groups < 1:
                raise ParameterError("GroupFeature needs num_groups >= 1")
            bad = [n for n in self.counts if n % self.num_groups]
            if bad:
                raise ParameterError(f"num_series {bad} not divisible by num_groups={self.num_groups}")

    @property
    def lengths(self) -> tuple[int, ...]:
        return _as_tuple(self.series_length)

    @property
    def counts(self) -> tuple[int, ...]:
        return _as_tuple(self.num_series)

    @property
    def max_length(self) -> int:
        return max(self.lengths)

    @property
    def max_count(self) -> int:
        return max(self.counts)

    @property
    def seasonal_period(self) -> int:
        return 12 if self.dgp is DGP.SAR else 1

    @property
    def label(self) -> str:
        return SCENARIO_LABELS[self.scenario]

    def cells(self) -> list[tuple[int, int]]:
        """All (length, num_series) sweep cells, in canonical order."""
        return [(L, n) for L in sorted(self.lengths) for n in sorted(self.counts)]

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["dgp"] = self.dgp.value
        d["scenario"] = self.scenario.value
        for k in ("series_length", "num_series"):
            if isinstance(d[k], tuple):
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SeriesDataset:
    series: tuple[RawSeries, ...]
    group_labels: tuple[int, ...]
    horizon: int
    seasonal_period: int
    replicate_index: int
    evaluation_mask: tuple[bool, ...]
    spec: ScenarioSpec
    num_groups: int = 1

    def __post_init__(self):
        lengths = {len(s) for s in self.series}
        if len(lengths) != 1:
            raise ParameterError("all series in a dataset must have the same length")
        if not len(self.series) == len(self.group_labels) == len(self.evaluation_mask):
            raise ParameterError("series, group labels and evaluation mask must align")

    @property
    def length(self) -> int:
        return len(self.series[0])

    @property
    def num_series(self) -> int:
        return len(self.series)

    @property
    def values(self) -> list[np.ndarray]:
        return [s.values for s in self.series]

    @property
    def evaluated_indices(self) -> list[int]:
        return [i for i, m in enumerate(self.evaluation_mask) if m]

    @property
    def can_emit_zeros(self) -> bool:
        return self.spec.dgp is DGP.LOGISTIC_MAP


# ---------------------------------------------------------------------------
# parameter selection


def homogeneous_params(spec: ScenarioSpec, replicate: int) -> D.DgpParams:
    """The single coefficient set shared by every series of a homogeneous replicate."""
    if spec.dgp is DGP.AR:
        return D.sample_stationary_ar_coefficients(
            spec.ar_order, rng=rng_for(spec.base_seed, replicate, 0, "coef"), noise_std=spec.noise_std
        )
    if spec.dgp is DGP.SAR:
        return dataclasses.replace(D.SAR_USACCDEATHS, noise_std=spec.noise_std)
    if spec.dgp is DGP.LOGISTIC_MAP:
        return D.LOGISTIC_REFERENCE
    if spec.dgp is DGP.SETAR:
        regimes = tuple(dataclasses.replace(r, noise_std=spec.noise_std) for r in D.SETAR_REFERENCE.regimes)
        return dataclasses.replace(D.SETAR_REFERENCE, regimes=regimes)
    return D.MACKEY_GLASS_REFERENCE


def heterogeneous_params(spec: ScenarioSpec, replicate: int, index: int, purpose: str = "coef") -> D.DgpParams:
    """A freshly drawn coefficient set following the DGP's heterogeneity rule."""
    rng = rng_for(spec.base_seed, replicate, index, purpose)
    if spec.dgp is DGP.AR:
        return D.sample_stationary_ar_coefficients(spec.ar_order, rng=rng, noise_std=spec.noise_std)
    if spec.dgp is DGP.SAR:
        return dataclasses.replace(D.sample_sar_heterogeneous(rng), noise_std=spec.noise_std)
    if spec.dgp is DGP.LOGISTIC_MAP:
        return D.sample_logistic_heterogeneous(rng)
    if spec.dgp is DGP.SETAR:
        return D.perturb_setar(homogeneous_params(spec, replicate), rng)
    return D.sample_mackey_glass_heterogeneous(rng)


def simulate(dgp: DGP, params: D.DgpParams, length: int, seed: int) -> RawSeries:
    """Simulate one series with the DGP's default burn-in and standardization."""
    if dgp is DGP.AR:
        raw = D.simulate_ar(params, length, 100, seed)
    elif dgp is DGP.SAR:
        raw = D.simulate_sar(params, length, 100, seed)
    elif dgp is DGP.LOGISTIC_MAP:
        raw = D.simulate_logistic_map(params, length, 40, seed)
    elif dgp is DGP.SETAR:
        raw = D.simulate_setar(params, length, seed)
    else:
        raw = D.simulate_mackey_glass(params, length, seed)
    return D.standardize_series(raw, D.default_standardization(dgp))


def _noise_seed(spec: ScenarioSpec, replicate: int, index: int) -> int:
    return derive_seed(spec.base_seed, replicate, index, "noise")


def _truncate(s: RawSeries, length: int, offset: int = 0) -> RawSeries:
    return s.with_values(s.values[offset : offset + length])


def _dataset(spec, replicate, series, labels, mask, num_groups=1) -> SeriesDataset:
    return SeriesDataset(
        series=tuple(series),
        group_labels=tuple(int(g) for g in labels),
        horizon=spec.horizon,
        seasonal_period=spec.seasonal_period,
        replicate_index=replicate,
        evaluation_mask=tuple(bool(m) for m in mask),
        spec=spec,
        num_groups=num_groups,
    )


def _check_kind(spec: ScenarioSpec, kind: ScenarioKind):
    if spec.scenario is not kind:
        raise ParameterError(f"expected a {kind.value} scenario, got {spec.scenario.value}")


def _resolve(spec: ScenarioSpec, length, num_series) -> tuple[int, int]:
    length = spec.max_length if length is None else int(length)
    num_series = spec.max_count if num_series is None else int(num_series)
    if length > spec.max_length or num_series > spec.max_count:
        raise ParameterError("requested cell exceeds the scenario's maximum length or series count")
    return length, num_series


# ---------------------------------------------------------------------------
# builders


def build_ss(spec: ScenarioSpec, replicate: int, length: int | None = None) -> SeriesDataset:
    _check_kind(spec, ScenarioKind.SS)
    length, _ = _resolve(spec, length, None)
    params = homogeneous_params(spec, replicate)
    full = simulate(spec.dgp, params, spec.max_length, _noise_seed(spec, replicate, 0))
    return _dataset(spec, replicate, [_truncate(full, length)], [0], [True])


def build_ms_hom_short(
    spec: ScenarioSpec, replicate: int, length: int | None = None, num_series: int | None = None
) -> SeriesDataset:
    """Many short homogeneous series, by default cut from one long mother series.

    Only the final segment is scored, so the test horizon coincides with that
    of a single series of the same total length.
    """
    _check_kind(spec, ScenarioKind.MS_HOM_SHORT)
    length, n = _resolve(spec, length, num_series)
    params = homogeneous_params(spec, replicate)
    if not spec.split_mother_series:
        series = [
            _truncate(simulate(spec.dgp, params, spec.max_length, _noise_seed(spec, replicate, i)), length)
            for i in range(n)
        ]
        return _dataset(spec, replicate, series, range(n), [True] * n)
    total = spec.max_count * spec.max_length
    mother = simulate(spec.dgp, params, total, _noise_seed(spec, replicate, 0))
    segments = split_series(mother, spec.max_count)
    # trailing segments keep the scored horizon fixed across series-count sweeps
    segments = [_truncate(s, length) for s in segments[spec.max_count - n :]]
    mask = [False] * (n - 1) + [True]
    return _dataset(spec, replicate, segments, [0] * n, mask)


def split_series(series: RawSeries, num_segments: int) -> list[RawSeries]:
    if len(series) % num_segments:
        raise ParameterError(f"length {len(series)} is not divisible into {num_segments} segments")
    seg = len(series) // num_segments
    return [series.with_values(series.values[i * seg : (i + 1) * seg], meta={"segment": i}) for i in range(num_segments)]


def build_ms_hom_long(
    spec: ScenarioSpec, replicate: int, length: int | None = None, num_series: int | None = None
) -> SeriesDataset:
    _check_kind(spec, ScenarioKind.MS_HOM_LONG)
    length, n = _resolve(spec, length, num_series)
    params = homogeneous_params(spec, replicate)
    series = [
        _truncate(simulate(spec.dgp, params, spec.max_length, _noise_seed(spec, replicate, i)), length)
        for i in range(n)
    ]
    return _dataset(spec, replicate, series, [0] * n, [True] * n)


def build_ms_het(
    spec: ScenarioSpec, replicate: int, length: int | None = None, num_series: int | None = None
) -> SeriesDataset:
    _check_kind(spec, ScenarioKind.MS_HET)
    length, n = _resolve(spec, length, num_series)
    series = []
    for i in range(n):
        params = heterogeneous_params(spec, replicate, i)
        series.append(_truncate(simulate(spec.dgp, params, spec.max_length, _noise_seed(spec, replicate, i)), length))
    return _dataset(spec, replicate, series, range(n), [True] * n, num_groups=n)


def group_params(spec: ScenarioSpec, replicate: int) -> list[D.DgpParams]:
    """Coefficient sets of a GroupFeature replicate.

    Group 0 uses the homogeneous coefficients, the others are drawn with the
    heterogeneity rule, so a single group reproduces MS-Hom-Long.
    """
    out = [homogeneous_params(spec, replicate)]
    out += [heterogeneous_params(spec, replicate, g, "group") for g in range(1, spec.num_groups)]
    return out


def build_group_feature(
    spec: ScenarioSpec, replicate: int, length: int | None = None, num_series: int | None = None
) -> SeriesDataset:
    _check_kind(spec, ScenarioKind.GROUP_FEATURE)
    length, n = _resolve(spec, length, num_series)
    if n % spec.num_groups:
        raise ParameterError(f"{n} series cannot be split evenly into {spec.num_groups} groups")
    per_group = n // spec.num_groups
    gparams = group_params(spec, replicate)
    series, labels = [], []
    for i in range(n):
        g = i // per_group
        s = simulate(spec.dgp, gparams[g], spec.max_length, _noise_seed(spec, replicate, i))
        series.append(_truncate(s, length))
        labels.append(g)
    return _dataset(spec, replicate, series, labels, [True] * n, num_groups=spec.num_groups)


_BUILDERS = {
    ScenarioKind.SS: lambda spec, r, L, n: build_ss(spec, r, L),
    ScenarioKind.MS_HOM_SHORT: build_ms_hom_short,
    ScenarioKind.MS_HOM_LONG: build_ms_hom_long,
    ScenarioKind.MS_HET: build_ms_het,
    ScenarioKind.GROUP_FEATURE: build_group_feature,
}


def build_dataset(spec: ScenarioSpec, replicate: int, length: int | None = None, num_series: int | None = None) -> SeriesDataset:
    return _BUILDERS[spec.scenario](spec, replicate, length, num_series)


def iter_cells(spec: ScenarioSpec, replicate: int) -> Iterator[tuple[tuple[int, int], SeriesDataset]]:
    for L, n in spec.cells():
        yield (L, n), build_dataset(spec, replicate, L, n)


# ---------------------------------------------------------------------------
# holdout


@dataclass(frozen=True)
class TrainTestSplit:
    train: list[np.ndarray]
    test: list[np.ndarray]
    series_ids: list[int] = field(default_factory=list)

    def joined(self, i: int) -> np.ndarray:
        return np.concatenate([self.train[i], self.test[i]])


def train_test_split(dataset: SeriesDataset, min_order: int = 1) -> TrainTestSplit:
    """Hold out the final ``horizon`` points of every series.

    Both parts are numpy views on the (read-only) series values.
    """
    H = dataset.horizon
    train, test = [], []
    for i, s in enumerate(dataset.series):
        if len(s) <= H + min_order:
            raise ParameterError(f"series {i} has length {len(s)}, need more than {H + min_order}")
        train.append(s.values[:-H])
        test.append(s.values[-H:])
    return TrainTestSplit(train, test, list(range(dataset.num_series)))


# ---------------------------------------------------------------------------
# presets


def preset_names() -> list[str]:
    root = resources.files("gfmsim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict[str, Any]:
    """Raw preset document: ``{"scenario": {...}, "models": [...], ...}``."""
    path = resources.files("gfmsim") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(path.read_text(encoding="utf-8"))


def preset_spec(name: str, **overrides) -> ScenarioSpec:
    doc = load_preset(name)
    d = dict(doc["scenario"], name=name)
    d.update(overrides)
    return ScenarioSpec.from_dict(d)


def describe(spec: ScenarioSpec) -> dict[str, Any]:
    return {
        "name": spec.name,
        "dgp": spec.dgp.value,
        "scenario": spec.label,
        "lengths": list(spec.lengths),
        "num_series": list(spec.counts),
        "horizon": spec.horizon,
        "seasonal_period": spec.seasonal_period,
        "num_replicates": spec.num_replicates,
        "num_groups": spec.num_groups,
        "cells": [list(c) for c in spec.cells()],
    }

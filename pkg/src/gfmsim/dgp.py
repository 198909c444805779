"""
Simulators for the five data generating processes.

Every simulator takes an explicit random stream (a ``numpy.random.Generator``
or an integer seed) and returns a :class:`RawSeries`. Nothing here keeps
module-level state, so calls with separate streams can run concurrently.

Processes
---------
AR           y_t = c + sum_i phi_i y_{t-i} + e_t
SAR          y_t = c + sum_i Phi_i y_{t-iS} + e_t
LogisticMap  y_t = max(r y_{t-1} (1 - y_{t-1}) + e_t / 10, 0)
SETAR        AR(p) whose coefficients switch on y_{t-d} versus thresholds
MackeyGlass  y_{t+1} = y_t + beta y_{t-tau} / (1 + y_{t-tau}^n) - gamma y_t
"""

from __future__ import annotations

import bisect
import dataclasses
import enum
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DegenerateSeriesError, ParameterError, SimulationDivergenceError
from .seeding import as_generator

RngLike = Union[np.random.Generator, int, None]

DIVERGENCE_LIMIT = 1e6


class DGP(str, enum.Enum):
    AR = "AR"
    SAR = "SAR"
    LOGISTIC_MAP = "LogisticMap"
    SETAR = "SETAR"
    MACKEY_GLASS = "MackeyGlass"


class StandardizeMode(str, enum.Enum):
    ZNORM_SHIFT = "ZNormShift"
    MIN_SHIFT_ONLY = "MinShiftOnly"
    NONE = "None"


@dataclass(frozen=True)
class ArCoefficients:
    intercept: float
    phi: tuple[float, ...]
    noise_std: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        if len(self.phi) < 1:
            raise ParameterError("AR order must be at least 1")
        if not self.noise_std >= 0:
            raise ParameterError("noise_std must be non-negative")

    @property
    def order(self) -> int:
        return len(self.phi)


@dataclass(frozen=True)
class SarCoefficients:
    intercept: float
    seasonal_phi: tuple[float, ...]
    period: int = 12
    noise_std: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "seasonal_phi", tuple(float(v) for v in self.seasonal_phi))
        if self.period < 2:
            raise ParameterError(f"seasonal period must be >= 2, got {self.period}")
        if len(self.seasonal_phi) < 1:
            raise ParameterError("seasonal order must be at least 1")


@dataclass(frozen=True)
class LogisticMapParams:
    r: float = 3.6
    y0: float = 0.5
    noise_std: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.r <= 4.0:
            raise ParameterError(f"r must lie in [0, 4], got {self.r}")
        if not 0.0 <= self.y0 <= 1.0:
            raise ParameterError(f"y0 must lie in [0, 1], got {self.y0}")
        if self.noise_std < 0:
            raise ParameterError("noise_std must be non-negative")


@dataclass(frozen=True)
class SetarParams:
    regimes: tuple[ArCoefficients, ...]
    thresholds: tuple[float, ...] = ()
    delay: int = 1
    initial_values: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple(self.regimes))
        object.__setattr__(self, "thresholds", tuple(float(v) for v in self.thresholds))
        object.__setattr__(self, "initial_values", tuple(float(v) for v in self.initial_values))
        if not self.regimes:
            raise ParameterError("SETAR needs at least one regime")
        if len(self.thresholds) != len(self.regimes) - 1:
            raise ParameterError("number of thresholds must be number of regimes - 1")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ParameterError("thresholds must be strictly increasing")
        if self.delay < 1:
            raise ParameterError("delay must be >= 1")

    @property
    def max_order(self) -> int:
        return max(reg.order for reg in self.regimes)


@dataclass(frozen=True)
class MackeyGlassParams:
    beta: float = 0.2
    gamma: float = 0.1
    n: float = 10.0
    tau: int = 23
    history_level: float = 0.5
    history_jitter: float = 0.01
    # filled in by the simulator when not given, so the series is reproducible from params
    initial_history: tuple[float, ...] | None = None

    def __post_init__(self):
        if min(self.beta, self.gamma, self.n) <= 0:
            raise ParameterError("beta, gamma and n must be strictly positive")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ParameterError(f"tau must be an integer >= 1, got {self.tau}")
        if self.initial_history is not None:
            object.__setattr__(self, "initial_history", tuple(float(v) for v in self.initial_history))


DgpParams = Union[ArCoefficients, SarCoefficients, LogisticMapParams, SetarParams, MackeyGlassParams]


@dataclass(frozen=True)
class RawSeries:
    values: np.ndarray
    dgp: DGP
    seed: int | None
    params: DgpParams
    status: str = "ok"
    standardization: str = StandardizeMode.NONE.value
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ParameterError("series values must be a non-empty 1-d array")
        if not np.all(np.isfinite(values)):
            raise SimulationDivergenceError("series contains non-finite values", int(np.argmin(np.isfinite(values))))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def with_values(self, values: np.ndarray, **changes) -> "RawSeries":
        return dataclasses.replace(self, values=values, **changes)


# ---------------------------------------------------------------------------
# coefficient sampling


def ar_coefficients_from_roots(roots: Sequence[float]) -> np.ndarray:
    """Expand prod(1 - z / r_i) into 1 - phi_1 z - ... - phi_p z^p and return phi."""
    roots = np.asarray(roots, dtype=float)
    monic = P.polyfromroots(roots)  # prod(z - r_i), lowest degree first
    poly = monic * np.prod(-1.0 / roots)
    return -poly[1:]


def characteristic_roots(phi: Sequence[float]) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return P.polyroots(np.concatenate([[1.0], -phi]))


def is_stationary(phi: Sequence[float], min_modulus: float = 1.0) -> bool:
    phi = np.asarray(phi, dtype=float)
    if not np.any(phi):
        return True
    # trailing zero coefficients lower the degree without affecting stationarity
    nz = np.flatnonzero(phi)
    return bool(np.all(np.abs(characteristic_roots(phi[: nz[-1] + 1])) > min_modulus))


def sample_stationary_ar_coefficients(
    p: int,
    root_max: float = 5.0,
    rng: RngLike = None,
    intercept: float = 0.0,
    noise_std: float = 1.0,
    root_min: float = 1.1,
) -> ArCoefficients:
    """Draw stationary AR(p) coefficients by sampling real characteristic roots.

    Each root is uniform on ``[-root_max, -root_min] U [root_min, root_max]``;
    both intervals have equal width so the sign is a fair coin.
    """
    if int(p) != p or p < 1:
        raise ParameterError(f"AR order must be a positive integer, got {p}")
    if not root_max > root_min:
        raise ParameterError(f"root_max must exceed {root_min}, got {root_max}")
    gen, _ = as_generator(rng)
    magnitudes = gen.uniform(root_min, root_max, size=p)
    signs = np.where(gen.random(p) < 0.5, -1.0, 1.0)
    phi = ar_coefficients_from_roots(magnitudes * signs)
    return ArCoefficients(intercept=intercept, phi=tuple(phi), noise_std=noise_std)


# ---------------------------------------------------------------------------
# recursions


def _lag_recursion(
    history: list[float],
    noise: np.ndarray,
    regimes: Sequence[tuple[float, Sequence[int], Sequence[float]]],
    thresholds: Sequence[float] = (),
    delay: int = 1,
) -> np.ndarray:
    """Iterate a (possibly regime-switching) linear lag recursion.

    ``history`` holds the pre-sample values, oldest first, and is extended in
    place. Each regime is ``(intercept, lags, coefficients)``. The regime at
    step t is the number of thresholds strictly below ``y_{t-delay}``, so a
    value equal to a threshold belongs to the lower regime.
    """
    y = history
    start = len(y)
    single = len(regimes) == 1
    c0, lags0, coefs0 = regimes[0]
    terms0 = list(zip(lags0, coefs0))
    terms = [list(zip(lags, coefs)) for _, lags, coefs in regimes]
    for e in noise.tolist():
        t = len(y)
        if single:
            c, tt = c0, terms0
        else:
            k = bisect.bisect_left(thresholds, y[t - delay])
            c, tt = regimes[k][0], terms[k]
        val = c
        for lag, coef in tt:
            val += coef * y[t - lag]
        val += e
        if not -DIVERGENCE_LIMIT < val < DIVERGENCE_LIMIT:
            raise SimulationDivergenceError("lag recursion diverged", t - start)
        y.append(val)
    return np.asarray(y[start:], dtype=float)


def _unconditional_mean(intercept: float, coefs: Sequence[float]) -> float:
    s = float(np.sum(coefs))
    if intercept == 0.0 or s >= 1.0:
        return 0.0
    return intercept / (1.0 - s)


def simulate_ar(
    coeffs: ArCoefficients,
    length: int,
    burn_in: int = 100,
    rng: RngLike = None,
    initial_values: Sequence[float] | None = None,
) -> RawSeries:
    """Simulate an AR(p) series and drop the first ``burn_in`` points.

    The pre-sample state defaults to the process mean ``c / (1 - sum(phi))``
    (zero when the intercept is zero). ``initial_values`` overrides it and is
    given oldest first. Non-stationary coefficients are simulated anyway, with
    a warning and ``status="nonstationary"``.
    """
    if length < 1 or burn_in < 0:
        raise ParameterError("length must be >= 1 and burn_in >= 0")
    gen, seed = as_generator(rng)
    p = coeffs.order
    status = "ok"
    if not is_stationary(coeffs.phi):
        warnings.warn("AR coefficients are not stationary; the simulation may diverge", RuntimeWarning)
        status = "nonstationary"
    if initial_values is None:
        history = [_unconditional_mean(coeffs.intercept, coeffs.phi)] * p
    else:
        if len(initial_values) < p:
            raise ParameterError(f"need {p} initial values, got {len(initial_values)}")
        history = [float(v) for v in initial_values]
    noise = gen.standard_normal(burn_in + length) * coeffs.noise_std
    values = _lag_recursion(history, noise, [(coeffs.intercept, range(1, p + 1), coeffs.phi)])
    return RawSeries(values[burn_in:], DGP.AR, seed, coeffs, status=status)


def simulate_sar(coeffs: SarCoefficients, length: int, burn_in: int = 100, rng: RngLike = None) -> RawSeries:
    """Simulate a pure seasonal AR(P)_S series.

    The pre-sample state is the process mean, see :func:`simulate_ar`.
    """
    if length < coeffs.period:
        raise ParameterError(f"length must be at least the period {coeffs.period}")
    if burn_in < 0:
        raise ParameterError("burn_in must be >= 0")
    gen, seed = as_generator(rng)
    lags = [coeffs.period * (i + 1) for i in range(len(coeffs.seasonal_phi))]
    history = [_unconditional_mean(coeffs.intercept, coeffs.seasonal_phi)] * lags[-1]
    noise = gen.standard_normal(burn_in + length) * coeffs.noise_std
    values = _lag_recursion(history, noise, [(coeffs.intercept, lags, coeffs.seasonal_phi)])
    return RawSeries(values[burn_in:], DGP.SAR, seed, coeffs)


def simulate_logistic_map(
    params: LogisticMapParams, length: int, burn_in: int = 40, rng: RngLike = None
) -> RawSeries:
    if length < 1 or burn_in < 0:
        raise ParameterError("length must be >= 1 and burn_in >= 0")
    gen, seed = as_generator(rng)
    noise = (gen.standard_normal(burn_in + length) * params.noise_std / 10.0).tolist()
    r = params.r
    y = params.y0
    out = np.empty(burn_in + length)
    for t, e in enumerate(noise):
        y = r * y * (1.0 - y) + e
        if y < 0.0:
            y = 0.0
        out[t] = y
    return RawSeries(out[burn_in:], DGP.LOGISTIC_MAP, seed, params)


def simulate_setar(params: SetarParams, length: int, rng: RngLike = None, burn_in: int = 0) -> RawSeries:
    """Simulate a self-exciting threshold AR series.

    ``initial_values`` (oldest first) seed the recursion; with a single regime
    the output is bit-identical to :func:`simulate_ar` given the same initial
    values and noise stream.
    """
    p = params.max_order
    if len(params.initial_values) < max(p, params.delay):
        raise ParameterError(f"need at least {max(p, params.delay)} initial values")
    if length < 1 or burn_in < 0:
        raise ParameterError("length must be >= 1 and burn_in >= 0")
    gen, seed = as_generator(rng)
    # one noise scale per series; regimes may differ only in their coefficients
    noise = gen.standard_normal(burn_in + length) * params.regimes[0].noise_std
    regimes = [(reg.intercept, range(1, reg.order + 1), reg.phi) for reg in params.regimes]
    values = _lag_recursion(list(params.initial_values), noise, regimes, params.thresholds, params.delay)
    status = "ok" if all(is_stationary(reg.phi) for reg in params.regimes) else "nonstationary"
    return RawSeries(values[burn_in:], DGP.SETAR, seed, params, status=status)


def simulate_mackey_glass(
    params: MackeyGlassParams, length: int, rng: RngLike = None, burn_in: int | None = None
) -> RawSeries:
    """Iterate the unit-step Mackey-Glass map.

    Without ``params.initial_history`` the tau+1 pre-sample values are
    ``history_level`` plus N(0, history_jitter^2) noise from ``rng``; the
    history actually used is stored on the returned series' params.
    """
    if length < 1:
        raise ParameterError("length must be >= 1")
    gen, seed = as_generator(rng)
    tau = int(params.tau)
    if burn_in is None:
        burn_in = max(tau, 100)
    if params.initial_history is None:
        hist = params.history_level + params.history_jitter * gen.standard_normal(tau + 1)
        params = dataclasses.replace(params, initial_history=tuple(hist.tolist()))
    hist = list(params.initial_history)
    if len(hist) < tau + 1:
        raise ParameterError(f"initial history needs tau + 1 = {tau + 1} values")
    beta, gamma, n = params.beta, params.gamma, params.n
    y = hist
    for step in range(burn_in + length):
        lagged = y[-1 - tau]
        cur = y[-1]
        nxt = cur + (beta * lagged / (1.0 + lagged**n) - gamma * cur)
        if not abs(nxt) <= DIVERGENCE_LIMIT:
            raise SimulationDivergenceError("Mackey-Glass recursion diverged", step)
        y.append(nxt)
    values = np.asarray(y[len(params.initial_history) + burn_in :], dtype=float)
    return RawSeries(values, DGP.MACKEY_GLASS, seed, params)


# ---------------------------------------------------------------------------
# post-generation scaling


def standardize_series(series: RawSeries, mode: StandardizeMode | str = StandardizeMode.ZNORM_SHIFT) -> RawSeries:
    """Z-normalise (optionally), then shift so the minimum is at least one.

    The shift follows two rules in order: subtract the minimum if it is
    negative, then add one if the minimum is still below one.
    """
    mode = StandardizeMode(mode)
    if mode is StandardizeMode.NONE:
        return series
    v = np.array(series.values, dtype=float)
    if mode is StandardizeMode.ZNORM_SHIFT:
        sd = v.std()
        if sd == 0.0:
            raise DegenerateSeriesError("cannot z-normalise a constant series")
        v = (v - v.mean()) / sd
    lo = v.min()
    if lo < 0:
        v = v - lo
    if v.min() < 1:
        v = v + 1.0
    return series.with_values(v, standardization=mode.value)


def default_standardization(dgp: DGP) -> StandardizeMode:
    if dgp is DGP.LOGISTIC_MAP:
        return StandardizeMode.NONE
    if dgp is DGP.MACKEY_GLASS:
        return StandardizeMode.MIN_SHIFT_ONLY
    return StandardizeMode.ZNORM_SHIFT


# ---------------------------------------------------------------------------
# reference parameter sets and heterogeneity rules

SAR_USACCDEATHS = SarCoefficients(intercept=9072.24, seasonal_phi=(0.85,), period=12)

SETAR_REFERENCE = SetarParams(
    regimes=(
        ArCoefficients(2.9, (-0.4, -0.1)),
        ArCoefficients(-1.5, (0.2, 0.3)),
    ),
    thresholds=(2.0,),
    delay=1,
    initial_values=(2.8, 2.2),
)

LOGISTIC_REFERENCE = LogisticMapParams(r=3.6, y0=0.5)
MACKEY_GLASS_REFERENCE = MackeyGlassParams()


def sample_sar_heterogeneous(rng: np.random.Generator, period: int = 12, low: float = -0.5, high: float = 0.5) -> SarCoefficients:
    return SarCoefficients(intercept=0.0, seasonal_phi=(float(rng.uniform(low, high)),), period=period)


def sample_logistic_heterogeneous(rng: np.random.Generator) -> LogisticMapParams:
    return LogisticMapParams(r=float(rng.uniform(0.0, 4.0)), y0=float(rng.uniform(0.0, 1.0)))


def perturb_setar(params: SetarParams, rng: np.random.Generator, std: float = 0.007, max_tries: int = 1000) -> SetarParams:
    """Add N(0, std^2) noise to every regime coefficient and intercept.

    Draws that leave any regime non-stationary are rejected and redrawn.
    """
    for _ in range(max_tries):
        regimes = []
        for reg in params.regimes:
            c = reg.intercept + rng.normal(0.0, std)
            phi = np.asarray(reg.phi) + rng.normal(0.0, std, size=reg.order)
            regimes.append(ArCoefficients(float(c), tuple(phi), reg.noise_std))
        if all(is_stationary(reg.phi) for reg in regimes):
            return dataclasses.replace(params, regimes=tuple(regimes))
    raise ParameterError("could not draw stationary SETAR perturbation")


def sample_mackey_glass_heterogeneous(rng: np.random.Generator, low: int = 17, high: int = 100) -> MackeyGlassParams:
    return dataclasses.replace(MACKEY_GLASS_REFERENCE, tau=int(rng.integers(low, high + 1)))


def params_to_dict(params: DgpParams) -> dict[str, Any]:
    d = dataclasses.asdict(params)
    d["type"] = type(params).__name__
    return d

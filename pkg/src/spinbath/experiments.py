"""Numerical protocols: decay series, power scaling, fits and figure bundles."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import InsufficientData, InvalidArgument
from .model import (
    ConstantCoupling,
    GMode,
    SystemSpec,
    TimeGrid,
    UniformCoupling,
    iter_ensemble_chunks,
    make_random_ensemble,
)

FIT_FLOOR = math.exp(-6.0)
FIT_CEILING = 0.9
VERDICT_THRESHOLD = 0.1
DESK_BASE_N = 10**7


@dataclass(frozen=True, eq=False)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    log_values: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise InvalidArgument("times and values must be 1-D arrays of equal length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if self.log_values is not None:
            lv = np.asarray(self.log_values, dtype=float)
            if lv.shape != t.shape:
                raise InvalidArgument("log companion has the wrong length")
            object.__setattr__(self, "log_values", lv)

    @classmethod
    def from_log(cls, times, log_values, label=""):
        log_values = np.asarray(log_values, dtype=float)
        return cls(times, np.exp(log_values), log_values, label)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``exp(-t/τ)`` in log space."""

    tau: float
    window: Tuple[int, int]
    residual: float
    n_samples: int


class Verdict(enum.Enum):
    DECOHERES = "decoheres"
    PERSISTS = "persists"


# --------------------------------------------------------------------------
# Series


def series_r2(source, grid: TimeGrid, workers=1, label="r2") -> TimeSeries:
    """``|r(t)|²`` on ``grid``; ``source`` may be an ensemble or chunk iterator."""
    t = grid.samples
    return TimeSeries.from_log(t, kernels.log_r2(source, t, workers), label)


def series_r2_streaming(n: int, seed: int, g_mode: GMode, grid: TimeGrid, workers=1, label="r2") -> TimeSeries:
    """Same as ``series_r2(make_random_ensemble(n, seed, g_mode), grid)``
    without holding the ensemble in memory."""
    return series_r2(iter_ensemble_chunks(n, seed, g_mode), grid, workers, label)


@dataclass(frozen=True)
class SigmaConfig:
    """Uniform M-spin system against a random N-spin environment."""

    m: int
    n: int
    decomposition: str = "general-d1"
    seed: int = 0
    g_mode: GMode = ConstantCoupling(400.0)
    s_tilde: Tuple = ((1.0, 1.0), (1.0, 1.0))

    def __post_init__(self):
        if self.decomposition not in ("general-d1", "general-d2"):
            raise InvalidArgument("decomposition must be general-d1 or general-d2")


def sigma_split(config: SigmaConfig, grid: TimeGrid, workers=1) -> kernels.SigmaSplit:
    ens = make_random_ensemble(config.n, config.seed, config.g_mode)
    sys = SystemSpec.uniform(config.m)
    t = grid.samples
    if config.decomposition == "general-d1":
        return kernels.sigma_split_general_d1(sys, None, ens, t, workers=workers)
    return kernels.sigma_split_general_d2(sys, None, ens, np.array(config.s_tilde), t, workers=workers)


def series_sigma_nd(config: SigmaConfig, grid: TimeGrid, workers=1, label=None) -> TimeSeries:
    """Non-diagonal part normalized to 1 at t=0."""
    split = sigma_split(config, grid, workers)
    return TimeSeries(grid.samples, split.normalized, None, label or f"M={config.m} N={config.n}")


def power_scale(series: TimeSeries, a: float, label=None) -> TimeSeries:
    """Raise a series to the power ``10^a`` via its log companion.

    For a product over N independent spins this stands for ``N·10^a`` spins
    with the same statistics.
    """
    if series.log_values is None:
        raise InvalidArgument("power scaling needs a log-domain series")
    return TimeSeries.from_log(series.times, series.log_values * 10.0 ** a,
                               label if label is not None else series.label)


# --------------------------------------------------------------------------
# Analysis


def fit_decoherence_time(series: TimeSeries, floor=FIT_FLOOR, ceiling=FIT_CEILING) -> DecayFit:
    """Fit ``ln v = c - t/τ`` to samples with ``floor <= v <= ceiling``."""
    v = series.values
    mask = (v >= floor) & (v <= ceiling)
    k = np.flatnonzero(mask)
    if k.size < 4:
        raise InsufficientData(f"only {k.size} samples inside the fit window")
    t = series.times[k]
    scale = float(np.max(np.abs(t))) or 1.0
    y = np.log(v[k])
    slope, icpt = np.polyfit(t / scale, y, 1)
    if slope >= 0:
        raise InsufficientData("series does not decay inside the fit window")
    resid = y - (icpt + slope * t / scale)
    return DecayFit(float(-scale / slope), (int(k[0]), int(k[-1])),
                    float(np.sqrt(np.mean(resid**2))), int(k.size))


def poincare_time(g: float) -> float:
    """Recurrence period ``π/g`` of ``|r(t)|²`` for identical couplings."""
    if not g > 0:
        raise InvalidArgument("g must be positive")
    return math.pi / g


def relaxation_estimate(g: float) -> float:
    return poincare_time(g) / 2.0


def classify(series: TimeSeries) -> Verdict:
    """DECOHERES iff ``|v|`` stays below 0.1 over the final quarter."""
    return Verdict.DECOHERES if final_quarter_max(series) < VERDICT_THRESHOLD else Verdict.PERSISTS


def final_quarter_max(series: TimeSeries) -> float:
    n = len(series)
    start = math.ceil(0.75 * (n - 1))
    return float(np.max(np.abs(series.values[start:])))


def half_decay_time(series: TimeSeries, level=0.5) -> Optional[float]:
    """First time the series drops below ``level``, linearly interpolated."""
    v = series.values
    below = np.flatnonzero(v < level)
    if below.size == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(series.times[0])
    t0, t1 = series.times[k - 1], series.times[k]
    v0, v1 = v[k - 1], v[k]
    return float(t0 + (v0 - level) / (v0 - v1) * (t1 - t0))


def decoherence_time(seed: int, g: float = 400.0, n_base: int = DESK_BASE_N, n_target: float = 1e20,
                     points: int = 200, workers=1, max_zoom: int = 8):
    """Fit τ for ``n_target`` spins from a base ensemble of ``n_base`` spins.

    The grid end is chosen so the scaled series falls to about ``e^-8``,
    estimated from the small-t curvature ``ln|r|² ≈ -t² Σ 4|α|²|β|² g²``,
    and widened until the fit window is covered.
    """
    ens = make_random_ensemble(n_base, seed, ConstantCoupling(g))
    a = math.log10(n_target / n_base)
    curv = float(np.sum(4.0 * ens.p * ens.q * ens.g**2)) * 10.0**a
    t_end = math.sqrt(8.0 / curv)
    for _ in range(max_zoom):
        grid = TimeGrid(t_end, points)
        scaled = power_scale(series_r2(ens, grid, workers), a, label=f"N={n_target:.0e}")
        if scaled.values[-1] < FIT_FLOOR:
            return fit_decoherence_time(scaled), scaled
        t_end *= 2.0
    raise InsufficientData("scaled series never reaches the fit floor")


# --------------------------------------------------------------------------
# Figures


@dataclass
class FigureBundle:
    figure_id: int
    series: List[TimeSeries]
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.series[0].times


R2_FIGURES = {
    1: (ConstantCoupling(200.0), 6e-6),
    2: (ConstantCoupling(400.0), 3e-6),
    3: (ConstantCoupling(800.0), 2e-6),
    4: (UniformCoupling(800.0), 3e-6),
}
R2_SIZES = (10**7, 10**8, 10**9)
FIG5_BASE_N = 10**10
FIG5_T0 = 2e-8
SIGMA_FIGURES = {
    7: ("general-d1", ((1, 1000), (10, 1000)), 1e-3),
    8: ("general-d1", ((1000, 10), (1000, 100)), 1e-3),
    9: ("general-d1", ((100, 1000), (1000, 1000)), 1.2e-3),
    10: ("general-d2", ((1000, 1),), 3e-2),
    11: ("general-d2", ((1000, 100),), 1e-3),
    12: ("general-d2", ((1000, 1000),), 4e-4),
}
FIGURE_IDS = tuple(sorted(set(R2_FIGURES) | {5} | set(SIGMA_FIGURES)))


def _g_desc(g_mode):
    if isinstance(g_mode, ConstantCoupling):
        return {"g": g_mode.g}
    return {"g_max": g_mode.g_max}


def run_figure(figure_id: int, seed: int, full: bool = False, points: int = 200,
               t0: Optional[float] = None, workers=1) -> FigureBundle:
    """Series for every curve of a figure.

    Desk mode evaluates ``N = 10^7`` directly and reaches larger N by power
    scaling; ``full=True`` streams each ensemble at its nominal size.
    """
    if figure_id not in FIGURE_IDS:
        raise InvalidArgument(f"unknown figure id {figure_id}; choose from {FIGURE_IDS}")
    meta: Dict[str, object] = {"figure": figure_id, "seed": seed, "points": points,
                               "mode": "full" if full else "desk"}
    if figure_id in R2_FIGURES:
        g_mode, t_default = R2_FIGURES[figure_id]
        grid = TimeGrid(t0 or t_default, points)
        meta.update(_g_desc(g_mode), t0=grid.t0)
        series = []
        if full:
            for n in R2_SIZES:
                series.append(series_r2_streaming(n, seed, g_mode, grid, workers, f"N={n:.0e}"))
            meta["base_n"] = "none"
        else:
            base = series_r2(make_random_ensemble(DESK_BASE_N, seed, g_mode), grid, workers)
            for n in R2_SIZES:
                series.append(power_scale(base, math.log10(n / DESK_BASE_N), f"N={n:.0e}"))
            meta["base_n"] = DESK_BASE_N
        return FigureBundle(figure_id, series, meta)

    if figure_id == 5:
        g_mode = ConstantCoupling(400.0)
        grid = TimeGrid(t0 or FIG5_T0, points)
        base_n = FIG5_BASE_N if full else DESK_BASE_N
        if full:
            base = series_r2_streaming(base_n, seed, g_mode, grid, workers)
        else:
            base = series_r2(make_random_ensemble(base_n, seed, g_mode), grid, workers)
        offset = math.log10(FIG5_BASE_N / base_n)
        series = [power_scale(base, a + offset, f"a={a}") for a in range(4)]
        meta.update(g=400.0, t0=grid.t0, base_n=base_n)
        return FigureBundle(figure_id, series, meta)

    decomposition, cases, t_default = SIGMA_FIGURES[figure_id]
    grid = TimeGrid(t0 or t_default, points)
    series = [series_sigma_nd(SigmaConfig(m, n, decomposition, seed), grid, workers) for m, n in cases]
    meta.update(g=400.0, t0=grid.t0, decomposition=decomposition)
    return FigureBundle(figure_id, series, meta)


def sweep(ms: Sequence[int], ns: Sequence[int], decomposition="general-d1", seed=0,
          t0=1e-3, points=200, workers=1):
    """Verdict for every (M, N) pair: list of ``(m, n, verdict, final-quarter max)``."""
    grid = TimeGrid(t0, points)
    rows = []
    for m in ms:
        for n in ns:
            s = series_sigma_nd(SigmaConfig(m, n, decomposition, seed), grid, workers)
            rows.append((m, n, classify(s), final_quarter_max(s)))
    return rows

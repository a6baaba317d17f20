"""Empirical growth classification of sampled functions.

A sampled function is cut into geometrically equal blocks.  Block minima of
``|f|`` stand in for the liminf envelope and block maxima for the limsup
envelope; log-log regression of the tail blocks estimates the lower
exponent ``pi_hat`` and the upper exponent ``xi_hat``.  Envelopes whose
incremental slopes run away monotonically beyond ``p_max`` are reported as
the infinite sentinels ``POS_INF`` / ``NEG_INF``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, ResolutionError

POS_INF = math.inf
NEG_INF = -math.inf

MIN_SAMPLES_PER_BLOCK = 4


def is_sentinel(x: float) -> bool:
    return math.isinf(x)


def format_extended(x: float) -> str:
    if x == POS_INF:
        return "+inf"
    if x == NEG_INF:
        return "-inf"
    return repr(float(x))


class GrowthClass(str, enum.Enum):
    S1 = "S1"  # faster than every power of t
    S2 = "S2"  # slower than every power of t
    S3 = "S3"  # neither


@dataclass(frozen=True, eq=False)
class SampleSeries:
    times: np.ndarray
    values: np.ndarray
    source_label: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(times) != len(values):
            raise ConfigurationError(
                f"times and values differ in length ({len(times)} vs {len(values)})"
            )
        if len(times) == 0:
            raise ConfigurationError("series is empty")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.times)

    def scaled(self, k: float) -> "SampleSeries":
        return SampleSeries(self.times, self.values * k, self.source_label)

    def finite_prefix(self) -> "SampleSeries":
        """Samples up to (excluding) the first non-finite value."""
        bad = ~np.isfinite(self.values)
        if not bad.any():
            return self
        stop = int(np.argmax(bad))
        if stop == 0:
            raise ResolutionError(f"{self.source_label or 'series'}: first sample is not finite")
        return SampleSeries(self.times[:stop], self.values[:stop], self.source_label)


@dataclass(frozen=True)
class ClassifierConfig:
    grid_ratio: float = 1.0002
    block_count: int = 16
    tail_blocks: int = 8
    p_max: float = 16.0
    slope_escape_margin: float = 2.0
    zero_floor: float = 1e-300
    stable_tol: float = 0.05

    def __post_init__(self):
        problems = []
        if not self.grid_ratio > 1:
            problems.append("grid_ratio must exceed 1")
        if int(self.block_count) != self.block_count or self.block_count < 8:
            problems.append("block_count must be an integer >= 8")
        if int(self.tail_blocks) != self.tail_blocks or self.tail_blocks < 4:
            problems.append("tail_blocks must be an integer >= 4")
        elif self.tail_blocks > self.block_count:
            problems.append("tail_blocks must not exceed block_count")
        if not self.p_max > 0:
            problems.append("p_max must be positive")
        if not self.slope_escape_margin >= 0:
            problems.append("slope_escape_margin must be nonnegative")
        if not self.zero_floor > 0:
            problems.append("zero_floor must be positive")
        if problems:
            raise ConfigurationError("; ".join(problems))

    @property
    def escape_slope(self) -> float:
        return self.p_max + self.slope_escape_margin


@dataclass(frozen=True, eq=False)
class BlockEnvelope:
    block_mid_times: np.ndarray
    block_min_abs: np.ndarray
    block_max_abs: np.ndarray
    # True where the block contains an exact zero or a sign change
    block_has_zero: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class ExponentEstimate:
    value: float
    slopes: np.ndarray
    verdict: str  # "finite", "escape_up", "escape_down" or "zero_floor"


@dataclass(frozen=True, eq=False)
class GrowthReport:
    growth_class: GrowthClass
    pi_hat: float
    xi_hat: float
    slope_sequence_min: np.ndarray
    slope_sequence_max: np.ndarray
    confident: bool
    pi_verdict: str = "finite"
    xi_verdict: str = "finite"
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "class": self.growth_class.value,
            "pi_hat": self.pi_hat,
            "xi_hat": self.xi_hat,
            "confident": self.confident,
            "pi_verdict": self.pi_verdict,
            "xi_verdict": self.xi_verdict,
            "slope_sequence_min": [float(s) for s in self.slope_sequence_min],
            "slope_sequence_max": [float(s) for s in self.slope_sequence_max],
        }


def geometric_grid(t_start: float, t_end: float, ratio: float) -> np.ndarray:
    if not ratio > 1:
        raise ConfigurationError(f"grid ratio must exceed 1, got {ratio!r}")
    if not t_end > t_start:
        raise ConfigurationError("t_end must exceed t_start")
    if not t_start >= 1:
        raise DomainError(f"geometric grids start at t >= 1, got {t_start!r}")
    count = int(math.floor(math.log(t_end / t_start) / math.log(ratio))) + 1
    pts = t_start * ratio ** np.arange(count)
    pts = pts[pts < t_end * (1 - 1e-12)]
    return np.append(pts, float(t_end))


def analysis_grid(t_start: float, t_end: float, config: ClassifierConfig,
                  per_block: int = 64) -> np.ndarray:
    """Geometric grid at ``config.grid_ratio``, refined to ``per_block`` samples per block."""
    needed = (t_end / t_start) ** (1.0 / (config.block_count * per_block))
    return geometric_grid(t_start, t_end, min(config.grid_ratio, needed))


def sample_function(f: Callable, t_start: float, t_end: float,
                    config: ClassifierConfig | None = None, label: str = "") -> SampleSeries:
    """Sample a vectorised callable on an analysis grid (overflow yields inf, not an error)."""
    config = config or ClassifierConfig()
    grid = analysis_grid(t_start, t_end, config)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        values = np.asarray(f(grid), dtype=float)
    if values.shape != grid.shape:
        values = np.broadcast_to(values, grid.shape).astype(float)
    return SampleSeries(grid, values, label)


def block_envelope(series: SampleSeries, config: ClassifierConfig) -> BlockEnvelope:
    t, v = series.times, series.values
    if t[0] < 1:
        raise DomainError(f"classification needs times >= 1, series starts at {t[0]!r}")
    if not np.all(np.isfinite(v)):
        raise ResolutionError(f"{series.source_label or 'series'} contains non-finite values")
    if len(t) < 2:
        raise ResolutionError("series must contain at least two samples")
    B = config.block_count
    edges = t[0] * (t[-1] / t[0]) ** (np.arange(B + 1) / B)
    idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, B - 1)
    counts = np.bincount(idx, minlength=B)
    if counts.min() < MIN_SAMPLES_PER_BLOCK:
        raise ResolutionError(
            f"{series.source_label or 'series'}: block {int(counts.argmin())} holds "
            f"{int(counts.min())} samples, need >= {MIN_SAMPLES_PER_BLOCK}"
        )
    absv = np.abs(v)
    mins = np.full(B, np.inf)
    maxs = np.zeros(B)
    np.minimum.at(mins, idx, absv)
    np.maximum.at(maxs, idx, absv)

    # A sign change between consecutive samples implies a zero in between;
    # it is charged to the block holding the later sample.
    has_zero = np.zeros(B, dtype=bool)
    has_zero[idx[v == 0]] = True
    flips = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
    has_zero[idx[flips + 1]] = True
    mins[has_zero] = 0.0

    mins = np.maximum(mins, config.zero_floor)
    mid = np.sqrt(edges[:-1] * edges[1:])
    return BlockEnvelope(mid, mins, maxs, has_zero)


def _regression_slope(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _estimate(env_values: np.ndarray, mids: np.ndarray, config: ClassifierConfig) -> ExponentEstimate:
    tail = slice(len(mids) - config.tail_blocks, None)
    x = np.log(mids[tail])
    at_floor = env_values[tail] <= config.zero_floor
    logs = np.log(np.maximum(env_values[tail], config.zero_floor))
    slopes = np.diff(logs) / np.diff(x)
    if at_floor.any():
        return ExponentEstimate(NEG_INF, slopes, "zero_floor")
    steps = np.diff(slopes)
    if np.all(steps >= 0) and slopes[-1] > config.escape_slope:
        return ExponentEstimate(POS_INF, slopes, "escape_up")
    if np.all(steps <= 0) and slopes[-1] < -config.escape_slope:
        return ExponentEstimate(NEG_INF, slopes, "escape_down")
    return ExponentEstimate(_regression_slope(x, logs), slopes, "finite")


def estimate_pi(series: SampleSeries, config: ClassifierConfig | None = None) -> ExponentEstimate:
    """Lower growth exponent from the block-minimum envelope."""
    config = config or ClassifierConfig()
    env = block_envelope(series, config)
    return _estimate(env.block_min_abs, env.block_mid_times, config)


def estimate_xi(series: SampleSeries, config: ClassifierConfig | None = None) -> ExponentEstimate:
    """Upper growth exponent from the block-maximum envelope."""
    config = config or ClassifierConfig()
    env = block_envelope(series, config)
    return _estimate(env.block_max_abs, env.block_mid_times, config)


def _settled(est: ExponentEstimate, tol: float) -> bool:
    # a zero inside a block is exact evidence, not a fitted trend
    if est.verdict == "zero_floor":
        return True
    last = est.slopes[-3:]
    d = np.diff(last)
    monotone = bool(np.all(d >= 0) or np.all(d <= 0))
    return monotone or float(np.ptp(last)) <= tol


def classify_growth(series: SampleSeries, config: ClassifierConfig | None = None) -> GrowthReport:
    config = config or ClassifierConfig()
    env = block_envelope(series, config)
    lo = _estimate(env.block_min_abs, env.block_mid_times, config)
    hi = _estimate(env.block_max_abs, env.block_mid_times, config)
    confident = _settled(lo, config.stable_tol) and _settled(hi, config.stable_tol)
    if lo.value == POS_INF:
        cls, pi, xi = GrowthClass.S1, POS_INF, POS_INF
    elif hi.value == NEG_INF:
        cls, pi, xi = GrowthClass.S2, NEG_INF, NEG_INF
    else:
        cls, pi, xi = GrowthClass.S3, lo.value, hi.value
    return GrowthReport(
        growth_class=cls, pi_hat=pi, xi_hat=xi,
        slope_sequence_min=lo.slopes, slope_sequence_max=hi.slopes,
        confident=confident, pi_verdict=lo.verdict, xi_verdict=hi.verdict,
        label=series.source_label,
    )


def read_series_csv(path: str | Path, label: str | None = None) -> SampleSeries:
    """Two-column ``time,value`` CSV; a non-numeric first row is taken as a header."""
    path = Path(path)
    times, values = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ConfigurationError(f"{path}:{lineno}: expected two columns")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                if not times and lineno == 1:
                    continue
                raise ConfigurationError(f"{path}:{lineno}: non-numeric row {row!r}") from None
            times.append(t)
            values.append(v)
    return SampleSeries(np.array(times), np.array(values), label or path.stem)

"""
Logarithmic returns of price series and shape statistics of their distributions.

Returns over a horizon of ``dt`` trading days are taken from every start
index (overlapping windows). Consecutive rows of a series are consecutive
trading days regardless of calendar gaps.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import stats

__all__ = [
    "InsufficientHistoryError",
    "DegenerateSampleError",
    "PriceSeries",
    "ReturnSample",
    "ReturnHistogram",
    "BimodalityReport",
    "ScalingFit",
    "log_returns",
    "histogram",
    "bin_index",
    "detect_modes",
    "effective_range",
    "quantile",
    "bimodality_measure",
    "bimodality",
    "skewness",
    "std_by_scale",
    "fit_power_law",
    "scaling_exponent",
    "CLASSIFY_BINS",
]

CLASSIFY_BINS = 20
EDGE_SNAP = 1e-9  # fraction of a bin width


class InsufficientHistoryError(ValueError):
    pass


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    dates: tuple[_dt.date, ...]
    prices: NDArray[np.float64]

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 1 or prices.size != len(self.dates):
            raise ValueError("one price per date required")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise ValueError("prices must be finite and strictly positive")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "prices", prices)

    @classmethod
    def from_prices(cls, prices: Sequence[float], ticker: str = "synthetic") -> "PriceSeries":
        """Series with consecutive daily dates, for synthetic data."""
        start = _dt.date(2000, 1, 1)
        dates = tuple(start + _dt.timedelta(days=i) for i in range(len(prices)))
        return cls(ticker, dates, np.asarray(prices, dtype=float))

    def __len__(self) -> int:
        return self.prices.size


@dataclass(frozen=True)
class ReturnSample:
    dt: int
    values: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ReturnHistogram:
    """Equal-width histogram; the last bin is closed on both sides."""

    edges: NDArray[np.float64]
    probabilities: NDArray[np.float64]

    @property
    def n_bins(self) -> int:
        return self.probabilities.size

    @property
    def width(self) -> float:
        return float(self.edges[-1] - self.edges[0]) / self.n_bins

    @property
    def centers(self) -> NDArray[np.float64]:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_dict(self) -> dict:
        return {
            "n_bins": self.n_bins,
            "edges": self.edges.tolist(),
            "probabilities": self.probabilities.tolist(),
        }


@dataclass(frozen=True)
class BimodalityReport:
    bm: float
    p_max1: float
    p_max2: float
    p_min: float
    delta_x: float
    l_eff: float
    mode_count: int
    modes: tuple[int, ...] = ()

    @property
    def classification(self) -> str:
        return "bimodal" if self.mode_count >= 2 else "unimodal"


@dataclass(frozen=True)
class ScalingFit:
    alpha: float
    alpha_stderr: float
    intercept: float
    dt_range: tuple[int, int]
    dts: NDArray[np.int64]
    std: NDArray[np.float64]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "alpha_stderr": self.alpha_stderr,
            "intercept": self.intercept,
            "dt_range": list(self.dt_range),
        }


def log_returns(series: PriceSeries, dt: int) -> ReturnSample:
    """``ln S(t + dt) - ln S(t)`` for every start index ``t``."""
    if dt < 1:
        raise ValueError("dt must be at least 1")
    if dt >= len(series):
        raise InsufficientHistoryError(
            f"insufficient history: {len(series)} prices for dt={dt}"
        )
    logp = np.log(series.prices)
    return ReturnSample(int(dt), logp[dt:] - logp[:-dt])


def bin_index(values, lo: float, width: float, n_bins: int) -> NDArray[np.int64]:
    """
    Index of the equal-width bin holding each value, grid origin ``lo``.

    Bins are half-open ``[e_k, e_{k+1})`` except that a value on the right
    edge of bin ``n_bins - 1`` belongs to that bin. Values within a 1e-9
    fraction of a bin width of an edge are snapped onto it so round-off in
    an affine map cannot move points across edges. Indices outside
    ``[0, n_bins)`` are returned as is (the caller pads).
    """
    t = (np.asarray(values, dtype=float) - lo) / width
    nearest = np.round(t)
    on_edge = np.abs(t - nearest) < EDGE_SNAP
    idx = np.where(on_edge, nearest, np.floor(t)).astype(np.int64)
    idx[on_edge & (idx == n_bins)] = n_bins - 1
    return idx


def histogram(sample: ReturnSample, n_bins: int) -> ReturnHistogram:
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    values = sample.values
    if values.size == 0:
        raise DegenerateSampleError("empty sample")
    lo, hi = float(values.min()), float(values.max())
    if not hi > lo:
        raise DegenerateSampleError("zero-width support: all returns are equal")
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(bin_index(values, lo, (hi - lo) / n_bins, n_bins), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return ReturnHistogram(edges, counts / values.size)


def detect_modes(probabilities) -> list[tuple[int, float]]:
    """
    Local maxima of binned probabilities as ``(bin index, probability)``.

    Runs of equal adjacent values are treated as one plateau; a plateau is a
    mode when it is higher than each neighbouring run, and is located at its
    central bin. Accepts a histogram or a plain probability vector.
    """
    p = np.asarray(getattr(probabilities, "probabilities", probabilities), dtype=float)
    runs = []  # (start, stop, value)
    start = 0
    for i in range(1, p.size + 1):
        if i == p.size or p[i] != p[start]:
            runs.append((start, i, p[start]))
            start = i
    modes = []
    for k, (lo, hi, value) in enumerate(runs):
        left_ok = k == 0 or runs[k - 1][2] < value
        right_ok = k == len(runs) - 1 or runs[k + 1][2] < value
        if left_ok and right_ok:
            modes.append(((lo + hi - 1) // 2, float(value)))
    return modes


def _quantile_bins(p, q: float) -> float:
    """Fractional bin coordinate where the piecewise-linear CDF reaches ``q``."""
    cdf = np.concatenate([[0.0], np.cumsum(p)])
    cdf /= cdf[-1]
    # first bin whose upper CDF reaches q, skipping empty bins
    k = int(np.searchsorted(cdf[1:], q, side="left"))
    k = min(k, p.size - 1)
    while p[k] == 0 and k < p.size - 1:
        k += 1
    frac = (q - cdf[k]) / (cdf[k + 1] - cdf[k])
    return k + float(np.clip(frac, 0.0, 1.0))


def quantile(hist: ReturnHistogram, q: float) -> float:
    """Inverse of the piecewise-linear CDF of a histogram."""
    return float(hist.edges[0] + _quantile_bins(hist.probabilities, q) * hist.width)


def effective_range(hist: ReturnHistogram) -> float:
    """Width of the central 95% of the probability, ``q(0.975) - q(0.025)``."""
    p = hist.probabilities
    return (_quantile_bins(p, 0.975) - _quantile_bins(p, 0.025)) * hist.width


def bimodality_measure(p_max1, p_max2, p_min, delta_x, l_eff) -> float:
    """``((p_max2 - p_min) / p_max1) * (delta_x / l_eff)``."""
    return ((p_max2 - p_min) / p_max1) * (delta_x / l_eff)


def bimodality(hist: ReturnHistogram) -> BimodalityReport:
    """
    Bimodality measure of a binned distribution.

    Zero for a single mode. With more than two modes the two tallest are
    used, preferring the wider-separated pair on ties. Mode positions are
    bin centres, and the minimum is taken over bins strictly between the
    two modes (or over the two mode bins when they are adjacent).
    """
    p = hist.probabilities
    modes = detect_modes(hist)
    l_eff = effective_range(hist)
    if len(modes) <= 1:
        top = modes[0][1] if modes else float(p.max())
        return BimodalityReport(0.0, top, 0.0, 0.0, 0.0, l_eff, len(modes),
                                tuple(m[0] for m in modes))

    best = None
    for i in range(len(modes)):
        for j in range(i + 1, len(modes)):
            (bi, pi), (bj, pj) = modes[i], modes[j]
            key = (max(pi, pj), min(pi, pj), bj - bi)
            if best is None or key > best[0]:
                best = (key, bi, bj)
    _, left, right = best
    p_max1, p_max2 = max(p[left], p[right]), min(p[left], p[right])
    between = p[left + 1:right] if right - left > 1 else p[[left, right]]
    p_min = float(between.min())
    delta_x = float(right - left) * hist.width
    bm = bimodality_measure(p_max1, p_max2, p_min, delta_x, l_eff)
    return BimodalityReport(float(bm), float(p_max1), float(p_max2), p_min, delta_x,
                            l_eff, len(modes), (left, right))


def skewness(sample: ReturnSample) -> float:
    """Population skewness ``m3 / m2^{3/2}``."""
    x = np.asarray(getattr(sample, "values", sample), dtype=float)
    if x.size < 3:
        raise DegenerateSampleError("skewness needs at least 3 values")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 == 0:
        raise DegenerateSampleError("zero variance")
    # d*d*d rather than d**3: numpy's power is not exactly odd in its base
    return float(np.mean(d * d * d) / m2 ** 1.5)


def std_by_scale(series: PriceSeries, dt_max: int) -> NDArray[np.float64]:
    """Population standard deviation of ``log_returns(series, dt)`` for dt = 1..dt_max."""
    if dt_max < 2:
        raise ValueError("dt_max must be at least 2")
    if dt_max >= len(series):
        raise InsufficientHistoryError(
            f"insufficient history: {len(series)} prices for dt_max={dt_max}"
        )
    out = np.empty(dt_max)
    for dt in range(1, dt_max + 1):
        out[dt - 1] = np.std(log_returns(series, dt).values)
    if np.any(out <= 0):
        raise DegenerateSampleError("zero variance at some time scale")
    return out


def fit_power_law(dts, std) -> ScalingFit:
    """Least-squares slope of ``ln std`` against ``ln dt`` with its standard error."""
    dts = np.asarray(dts)
    std = np.asarray(std, dtype=float)
    res = stats.linregress(np.log(dts), np.log(std))
    return ScalingFit(
        alpha=float(res.slope),
        alpha_stderr=float(res.stderr),
        intercept=float(res.intercept),
        dt_range=(int(dts.min()), int(dts.max())),
        dts=dts,
        std=std,
    )


def scaling_exponent(series: PriceSeries, dt_max: int = 504) -> ScalingFit:
    std = std_by_scale(series, dt_max)
    return fit_power_law(np.arange(1, dt_max + 1), std)

"""
Fitting empirical return histograms with quantum-walk distributions.

A walk distribution (coordinates ``x``) is placed on the return axis by the
affine map ``g = scale * x + origin`` and its mass is re-binned onto the
empirical histogram's bins, then moved by ``shift`` whole bins. Both vectors
are zero padded to a common support and compared bin by bin.

By default ``scale`` matches the width of the central 95% window of the walk
to that of the return sample, and ``origin`` puts the centres of the two
windows on top of each other. Walk position 0 (the starting site) lands on
``origin + shift * bin_width``.

The search over the four walk angles is a coarse grid followed by
steepest-descent on the mean absolute error with step halving.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Union

import numpy as np
from numpy.typing import NDArray

from .qwalk import (
    TWO_PI,
    CoinParams,
    InitParams,
    PositionDistribution,
    coin_matrix,
    distribution,
    ensemble_distribution,
    evolve,
    propagate,
    smooth_aggregate,
)
from .returns import ReturnHistogram, ReturnSample, bin_index, histogram

log = logging.getLogger(__name__)

__all__ = [
    "AlignmentError",
    "FixedN",
    "EnsembleN",
    "AlignmentConfig",
    "SearchConfig",
    "AlignedCurves",
    "FitResult",
    "mae",
    "ks_statistic",
    "central_window",
    "align",
    "coarse_grid",
    "hill_climb_fit",
    "refine_with_ensemble",
    "walk_distribution",
]

TAIL = 0.025


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class FixedN:
    n: int = 100

    def to_dict(self) -> dict:
        return {"policy": "fixed", "n": self.n}


@dataclass(frozen=True)
class EnsembleN:
    n_mean: float = 100.0
    n_std: float = 15.0
    samples: int = 1000
    seed: int = 42

    def to_dict(self) -> dict:
        return {"policy": "ensemble", "n_mean": self.n_mean, "n_std": self.n_std,
                "samples": self.samples, "seed": self.seed}


NPolicy = Union[FixedN, EnsembleN]


@dataclass(frozen=True)
class AlignmentConfig:
    """
    Placement of a walk distribution on the empirical histogram.

    ``scale`` and ``origin`` left as ``None`` are resolved from the data (see
    module docstring). ``origin=0.0`` pins the starting site to zero return,
    i.e. no drift.
    """

    shift: int = 0
    bin_delta: int = 0
    scale: float | None = None
    origin: float | None = None

    def __post_init__(self):
        if abs(self.bin_delta) > 4:
            raise ValueError("bin_delta must lie in [-4, 4]")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def mu_drift(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"shift": self.shift, "bin_delta": self.bin_delta, "scale": self.scale,
                "origin": self.origin, "mu_drift": self.mu_drift}


@dataclass(frozen=True)
class SearchConfig:
    grid_points: int = 8
    shift_range: tuple[int, int] = (-3, 3)
    bin_delta_range: tuple[int, int] = (-4, 4)
    precision: float = 1e-4
    max_iter: int = 10_000

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        lo, hi = self.bin_delta_range
        if lo > hi or lo < -4 or hi > 4:
            raise ValueError("bin_delta_range must be an ordered sub-range of [-4, 4]")
        if self.shift_range[0] > self.shift_range[1]:
            raise ValueError("shift_range must be ordered")

    def to_dict(self) -> dict:
        return {"grid_points": self.grid_points, "shift_range": list(self.shift_range),
                "bin_delta_range": list(self.bin_delta_range),
                "precision": self.precision, "max_iter": self.max_iter}


@dataclass(frozen=True)
class AlignedCurves:
    p_emp: NDArray[np.float64]
    p_fit: NDArray[np.float64]
    edges: NDArray[np.float64]  # padded grid, len(p_emp) + 1 entries
    n_bins: int  # bins of the empirical histogram before padding
    scale: float
    origin: float
    shift: int

    @property
    def initial_position(self) -> float:
        """Return coordinate of walk site 0."""
        return self.origin + self.shift * (self.edges[1] - self.edges[0])

    @property
    def centers(self) -> NDArray[np.float64]:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass
class FitResult:
    coin: CoinParams
    init: InitParams
    alignment: AlignmentConfig
    base_bins: int
    mae: float
    ks: float
    n_policy: NPolicy
    fitted_curve: NDArray[np.float64]
    empirical_curve: NDArray[np.float64]
    edges: NDArray[np.float64]
    initial_position: float
    converged: bool = True
    iterations: int = 0
    mae_trace: list[float] = field(default_factory=list)
    final_steps: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "coin": {"eta": self.coin.eta, "theta": self.coin.theta},
            "init": {"phi": self.init.phi, "omega": self.init.omega},
            "alignment": self.alignment.to_dict(),
            "base_bins": self.base_bins,
            "n_bins": len(self.edges) - 1,
            "mae": self.mae,
            "ks": self.ks,
            "n_policy": self.n_policy.to_dict(),
            "initial_position": self.initial_position,
            "converged": self.converged,
            "iterations": self.iterations,
            "final_steps": list(self.final_steps),
            "mae_trace": list(self.mae_trace),
            "edges": self.edges.tolist(),
            "fitted_curve": self.fitted_curve.tolist(),
            "empirical_curve": self.empirical_curve.tolist(),
        }


def _pair(p_emp, p_fit):
    a = np.asarray(p_emp, dtype=float)
    b = np.asarray(p_fit, dtype=float)
    if a.ndim != 1 or a.shape != b.shape or a.size == 0:
        raise ValueError(f"curves must be non-empty and of equal length, got {a.shape} and {b.shape}")
    return a, b


def mae(p_emp, p_fit, n_bins: int | None = None) -> float:
    """
    Mean absolute per-bin difference.

    ``n_bins`` is the bin count of the empirical histogram when the curves
    carry zero padding; padded bins add their absolute difference to the
    sum but do not enlarge the denominator. Defaults to the curve length.
    """
    a, b = _pair(p_emp, p_fit)
    return float(np.abs(a - b).sum() / (a.size if n_bins is None else n_bins))


def ks_statistic(p_emp, p_fit) -> float:
    """Largest gap between the cumulative sums of two binned distributions."""
    a, b = _pair(p_emp, p_fit)
    for name, v in (("p_emp", a), ("p_fit", b)):
        if abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} sums to {v.sum()!r}, expected 1")
    return float(np.max(np.abs(np.cumsum(a) - np.cumsum(b))))


def central_window(values, weights=None) -> tuple[float, float]:
    """
    2.5% and 97.5% quantiles of a discrete distribution.

    Uses the inverted CDF: the smallest value whose cumulative weight
    reaches the level. ``values`` need not be sorted.
    """
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="stable")
    x = x[order]
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)[order]
    cum = np.cumsum(w)
    cum /= cum[-1]
    lo, hi = np.searchsorted(cum, [TAIL, 1.0 - TAIL], side="left")
    return float(x[min(lo, x.size - 1)]), float(x[min(hi, x.size - 1)])


class _Target:
    """Empirical side of the comparison, cached per bin count."""

    def __init__(self, sample: ReturnSample, base_bins: int):
        if len(sample) == 0:
            raise ValueError("empty return sample")
        self.sample = sample
        self.base_bins = base_bins
        self.window = central_window(sample.values)
        self._hists: dict[int, ReturnHistogram] = {}

    def hist(self, bin_delta: int) -> ReturnHistogram:
        n_bins = self.base_bins + bin_delta
        if n_bins < 2:
            raise ValueError(f"base_bins + bin_delta = {n_bins} < 2")
        if n_bins not in self._hists:
            self._hists[n_bins] = histogram(self.sample, n_bins)
        return self._hists[n_bins]


def _placement(qw: PositionDistribution, target: _Target, cfg: AlignmentConfig):
    scale, origin = cfg.scale, cfg.origin
    walk_lo, walk_hi = central_window(qw.positions, qw.probabilities)
    emp_lo, emp_hi = target.window
    if scale is None:
        if not walk_hi > walk_lo:
            raise AlignmentError("walk distribution has zero effective range; give an explicit scale")
        if not emp_hi > emp_lo:
            raise AlignmentError("return sample has zero effective range")
        scale = (emp_hi - emp_lo) / (walk_hi - walk_lo)
    if origin is None:
        origin = 0.5 * (emp_lo + emp_hi) - scale * 0.5 * (walk_lo + walk_hi)
    return float(scale), float(origin)


def _padded(idx, mass, p_emp):
    n_bins = p_emp.size
    if not np.any((idx >= 0) & (idx < n_bins)):
        raise AlignmentError("alignment out of range: no walk mass falls inside the histogram")
    first = min(0, int(idx.min()))
    last = max(n_bins - 1, int(idx.max()))
    size = last - first + 1
    fit = np.bincount(idx - first, weights=mass, minlength=size)
    emp = np.zeros(size)
    emp[-first:-first + n_bins] = p_emp
    return emp, fit / fit.sum(), first


def _padded_mae(idx, mass, p_emp) -> float:
    """MAE of the padded pair without building padded arrays."""
    n_bins = p_emp.size
    inside = (idx >= 0) & (idx < n_bins)
    if not inside.any():
        return math.inf
    fit = np.bincount(idx[inside], weights=mass[inside], minlength=n_bins)
    total = np.abs(p_emp - fit).sum() + mass[~inside].sum()
    return float(total / n_bins)


def align(
    qw: PositionDistribution,
    sample: ReturnSample,
    base_bins: int,
    cfg: AlignmentConfig = AlignmentConfig(),
) -> AlignedCurves:
    """Paired empirical and fitted per-bin probabilities on a common padded grid."""
    if qw.kind not in ("smoothed", "ensemble"):
        raise ValueError(f"align expects a smoothed or ensemble distribution, got {qw.kind!r}")
    return _align(qw, _Target(sample, base_bins), cfg)


def _align(qw, target: _Target, cfg: AlignmentConfig) -> AlignedCurves:
    hist = target.hist(cfg.bin_delta)
    scale, origin = _placement(qw, target, cfg)
    lo, width = hist.edges[0], hist.width
    idx = bin_index(scale * qw.positions + origin, lo, width, hist.n_bins) + cfg.shift
    emp, fit, first = _padded(idx, qw.probabilities, hist.probabilities)
    edges = lo + width * np.arange(first, first + emp.size + 1)
    # keep the histogram's own edges exactly where they overlap
    edges[-first:-first + hist.n_bins + 1] = hist.edges
    return AlignedCurves(emp, fit, edges, hist.n_bins, scale, origin, cfg.shift)


def walk_distribution(coin: CoinParams, init: InitParams, policy: NPolicy) -> PositionDistribution:
    """Smoothed fixed-n walk or ensemble average, depending on the policy."""
    if isinstance(policy, FixedN):
        return smooth_aggregate(distribution(evolve(init, coin, policy.n)))
    return ensemble_distribution(init, coin, policy.n_mean, policy.n_std, policy.samples, policy.seed)


def coarse_grid(points: int) -> tuple[NDArray, NDArray, NDArray, NDArray]:
    """
    Starting grid ``(eta, theta, phi, omega)``.

    Periodic axes (eta, phi) use ``points`` values on [0, 2pi); the bounded
    axes (theta on [0, pi/2], omega on [-pi, pi]) include both end points.
    """
    periodic = np.arange(points) * (TWO_PI / points)
    return (
        periodic,
        np.linspace(0.0, np.pi / 2, points),
        periodic.copy(),
        np.linspace(-np.pi, np.pi, points),
    )


# parameter vector layout: (eta, theta, phi, omega, shift, bin_delta)
def _tie_key(v) -> tuple:
    eta, theta, phi, omega, shift, bin_delta = v
    return (theta, eta, omega, phi, shift, bin_delta)


class _Objective:
    def __init__(self, target: _Target, policy: NPolicy, search: SearchConfig):
        self.target = target
        self.policy = policy
        self.shifts = range(search.shift_range[0], search.shift_range[1] + 1)
        self.bin_deltas = range(search.bin_delta_range[0], search.bin_delta_range[1] + 1)
        self._walks: dict[tuple, tuple | None] = {}
        self.evaluations = 0

    def placed(self, qw: PositionDistribution):
        """Mapped walk coordinates, or None when the walk cannot be scaled."""
        try:
            scale, origin = _placement(qw, self.target, AlignmentConfig())
        except AlignmentError:
            return None
        return scale * qw.positions + origin, qw.probabilities

    def walk(self, angles):
        if angles not in self._walks:
            eta, theta, phi, omega = angles
            qw = walk_distribution(CoinParams(eta, theta), InitParams(phi, omega), self.policy)
            self._walks[angles] = self.placed(qw)
        return self._walks[angles]

    def scores(self, placed, bin_delta, shifts) -> list[float]:
        """MAE for each shift at one bin count."""
        if placed is None:
            return [math.inf for _ in shifts]
        g, mass = placed
        hist = self.target.hist(bin_delta)
        idx0 = bin_index(g, hist.edges[0], hist.width, hist.n_bins)
        self.evaluations += len(shifts)
        return [_padded_mae(idx0 + s, mass, hist.probabilities) for s in shifts]

    def __call__(self, v) -> float:
        eta, theta, phi, omega, shift, bin_delta = v
        return self.scores(self.walk((eta, theta, phi, omega)), bin_delta, [shift])[0]


def _coarse_walks(grid, policy: NPolicy, objective: _Objective):
    """Yield ``(angles, placed)`` for every grid point."""
    etas, thetas, phis, omegas = grid
    inits = [InitParams(phi, omega) for phi in phis for omega in omegas]
    if not isinstance(policy, FixedN):
        for eta in etas:
            for theta in thetas:
                for init in inits:
                    yield (eta, theta, init.phi, init.omega), objective.walk(
                        (eta, theta, init.phi, init.omega))
        return

    # fixed n: evolve the two basis spinors once per coin and superpose
    n = policy.n
    spinors = np.array([init.spinor() for init in inits])
    up = (np.array([1.0 + 0j]), np.array([0.0 + 0j]))
    down = (np.array([0.0 + 0j]), np.array([1.0 + 0j]))
    for eta in etas:
        for theta in thetas:
            U = coin_matrix(CoinParams(eta, theta))
            a_up, b_up = propagate(*up, U, n)
            a_dn, b_dn = propagate(*down, U, n)
            a = spinors[:, :1] * a_up + spinors[:, 1:] * a_dn
            b = spinors[:, :1] * b_up + spinors[:, 1:] * b_dn
            probs = (np.abs(a) ** 2 + np.abs(b) ** 2)[:, ::2]
            positions = np.arange(-n, n + 1, 2, dtype=float)
            for init, prob in zip(inits, probs):
                raw = PositionDistribution(positions, prob / prob.sum(), "raw")
                yield (eta, theta, init.phi, init.omega), objective.placed(smooth_aggregate(raw))


def _neighbours(v, steps, search: SearchConfig) -> Iterable[tuple]:
    eta, theta, phi, omega, shift, bin_delta = v
    d_eta, d_theta, d_phi, d_omega = steps
    for sign in (-1.0, 1.0):
        yield ((eta + sign * d_eta) % TWO_PI, theta, phi, omega, shift, bin_delta)
        yield (eta, float(np.clip(theta + sign * d_theta, 0.0, np.pi / 2)), phi, omega, shift, bin_delta)
        yield (eta, theta, (phi + sign * d_phi) % TWO_PI, omega, shift, bin_delta)
        yield (eta, theta, phi, float(np.clip(omega + sign * d_omega, -np.pi, np.pi)), shift, bin_delta)
    for ds in (-1, 1):
        if search.shift_range[0] <= shift + ds <= search.shift_range[1]:
            yield (eta, theta, phi, omega, shift + ds, bin_delta)
    for db in (-1, 1):
        if search.bin_delta_range[0] <= bin_delta + db <= search.bin_delta_range[1]:
            yield (eta, theta, phi, omega, shift, bin_delta + db)


def hill_climb_fit(
    sample: ReturnSample,
    base_bins: int = 20,
    n_policy: NPolicy = FixedN(100),
    search_cfg: SearchConfig = SearchConfig(),
    progress: Callable[[str], None] | None = None,
) -> FitResult:
    """
    Minimise the MAE between a return histogram and a walk distribution.

    Stage 1 scores every point of the coarse angle grid crossed with all
    shifts and bin adjustments. Stage 2 starts from the best of these and
    repeatedly moves to the best strictly improving axis neighbour (angles
    by the current step, shift and bin adjustment by one), halving the
    angle steps whenever nothing improves. It stops once every angle step
    is below ``search_cfg.precision``. Equal scores are resolved by the
    smallest ``(theta, eta, omega, phi, shift, bin_delta)``.

    Reaching ``max_iter`` first returns the best point with
    ``converged=False``.
    """
    target = _Target(sample, base_bins)
    for bd in range(search_cfg.bin_delta_range[0], search_cfg.bin_delta_range[1] + 1):
        target.hist(bd)  # fail early on degenerate data
    objective = _Objective(target, n_policy, search_cfg)
    grid = coarse_grid(search_cfg.grid_points)

    best = None
    for angles, placed in _coarse_walks(grid, n_policy, objective):
        for bd in objective.bin_deltas:
            for s, score in zip(objective.shifts, objective.scores(placed, bd, objective.shifts)):
                cand = (score, _tie_key(angles + (s, bd)), angles + (s, bd))
                if best is None or cand[:2] < best[:2]:
                    best = cand
    if best is None or not math.isfinite(best[0]):
        raise AlignmentError("no grid point produced a usable walk distribution")
    log.info("coarse grid: best MAE %.6g after %d evaluations", best[0], objective.evaluations)
    if progress:
        progress(f"coarse grid done, MAE {best[0]:.6g}")

    spacing = (
        TWO_PI / search_cfg.grid_points,
        (np.pi / 2) / (search_cfg.grid_points - 1),
        TWO_PI / search_cfg.grid_points,
        TWO_PI / (search_cfg.grid_points - 1),
    )
    steps = [d / 2 for d in spacing]
    current = best[2]
    current_score = objective(current)
    trace = [current_score]
    iterations = 0
    converged = False
    while iterations < search_cfg.max_iter:
        if max(steps) < search_cfg.precision:
            converged = True
            break
        iterations += 1
        winner = None
        for v in _neighbours(current, steps, search_cfg):
            if v == current:
                continue
            cand = (objective(v), _tie_key(v), v)
            if winner is None or cand[:2] < winner[:2]:
                winner = cand
        if winner is not None and winner[0] < current_score:
            current_score, current = winner[0], winner[2]
        else:
            steps = [d / 2 for d in steps]
        trace.append(current_score)
    else:
        converged = max(steps) < search_cfg.precision

    if not converged:
        log.warning("hill climb stopped at the iteration cap (%d) before reaching precision", iterations)

    eta, theta, phi, omega, shift, bin_delta = current
    coin, init = CoinParams(eta, theta), InitParams(phi, omega)
    qw = walk_distribution(coin, init, n_policy)
    curves = _align(qw, target, AlignmentConfig(shift, bin_delta))
    alignment = AlignmentConfig(shift, bin_delta, curves.scale, curves.origin)
    return FitResult(
        coin=coin,
        init=init,
        alignment=alignment,
        base_bins=base_bins,
        mae=mae(curves.p_emp, curves.p_fit, curves.n_bins),
        ks=ks_statistic(curves.p_emp, curves.p_fit),
        n_policy=n_policy,
        fitted_curve=curves.p_fit,
        empirical_curve=curves.p_emp,
        edges=curves.edges,
        initial_position=curves.initial_position,
        converged=converged,
        iterations=iterations,
        mae_trace=trace,
        final_steps=tuple(steps),
    )


def refine_with_ensemble(
    fit: FitResult,
    sample: ReturnSample,
    n_mean: float = 100.0,
    n_std: float = 15.0,
    samples: int = 1000,
    seed: int = 42,
) -> FitResult:
    """
    Swap the fixed-n walk of a fit for an average over normally drawn step counts.

    Angles, shift, bin adjustment and origin are kept. The scale is
    multiplied by ``n / n_mean`` because ensemble coordinates are expressed
    at ``n_mean`` steps; the factor is 1 when the two agree. Only the fitted
    curve and the scores are recomputed.
    """
    if not isinstance(fit.n_policy, FixedN):
        raise ValueError("refine_with_ensemble expects a fit made with a fixed step count")
    policy = EnsembleN(n_mean, n_std, samples, seed)
    qw = walk_distribution(fit.coin, fit.init, policy)
    alignment = replace(fit.alignment, scale=fit.alignment.scale * (fit.n_policy.n / n_mean))
    curves = align(qw, sample, fit.base_bins, alignment)
    return replace(
        fit,
        alignment=alignment,
        mae=mae(curves.p_emp, curves.p_fit, curves.n_bins),
        ks=ks_statistic(curves.p_emp, curves.p_fit),
        n_policy=policy,
        fitted_curve=curves.p_fit,
        empirical_curve=curves.p_emp,
        edges=curves.edges,
        initial_position=curves.initial_position,
        mae_trace=list(fit.mae_trace),
    )

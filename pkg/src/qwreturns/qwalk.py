"""
One-dimensional discrete-time quantum walk.

The walker carries a two-component spinor (up, down) on every integer site.
A step applies the coin to the spinor on each site, then moves the up
component one site to the right and the down component one site to the left.

Coordinates of a walk of ``n`` steps run from ``-n`` to ``n``; only sites
with ``j + n`` even can be occupied.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "CoinParams",
    "InitParams",
    "WalkState",
    "PositionDistribution",
    "coin_matrix",
    "initial_state",
    "step",
    "evolve",
    "propagate",
    "distribution",
    "smooth_aggregate",
    "draw_step_counts",
    "ensemble_distribution",
    "ENSEMBLE_GRID_POINTS",
]

TWO_PI = 2.0 * np.pi
ENSEMBLE_GRID_POINTS = 201
UNITARY_TOL = 1e-10

DistributionKind = Literal["raw", "smoothed", "ensemble"]


@dataclass(frozen=True)
class CoinParams:
    """Coin angles: ``eta`` is a phase, ``theta`` sets the mixing strength."""

    eta: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.eta) and np.isfinite(self.theta)):
            raise ValueError("coin angles must be finite")
        if not 0.0 <= self.theta <= np.pi / 2:
            raise ValueError(f"theta must lie in [0, pi/2], got {self.theta!r}")
        object.__setattr__(self, "eta", float(self.eta) % TWO_PI)
        object.__setattr__(self, "theta", float(self.theta))


@dataclass(frozen=True)
class InitParams:
    """Bloch-sphere angles of the starting spinor at the origin."""

    phi: float
    omega: float

    def __post_init__(self):
        if not (np.isfinite(self.phi) and np.isfinite(self.omega)):
            raise ValueError("initial-state angles must be finite")
        if not -np.pi <= self.omega <= np.pi:
            raise ValueError(f"omega must lie in [-pi, pi], got {self.omega!r}")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "omega", float(self.omega))

    def spinor(self) -> tuple[complex, complex]:
        up = complex(np.cos(self.omega / 2))
        down = complex(np.exp(1j * self.phi) * np.sin(self.omega / 2))
        return up, down


@dataclass(frozen=True)
class WalkState:
    """Amplitudes after ``n`` steps; index ``i`` holds site ``i - n``."""

    n: int
    a: NDArray[np.complex128]
    b: NDArray[np.complex128]

    def __post_init__(self):
        size = 2 * self.n + 1
        if self.n < 0 or self.a.shape != (size,) or self.b.shape != (size,):
            raise ValueError(f"amplitude arrays must have length 2n+1 = {size}")

    @property
    def positions(self) -> NDArray[np.int64]:
        return np.arange(-self.n, self.n + 1)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.a) ** 2) + np.sum(np.abs(self.b) ** 2))


@dataclass(frozen=True)
class PositionDistribution:
    """Probability mass over strictly increasing coordinates.

    ``kind`` records how the distribution was produced: ``raw`` for the
    site occupation probabilities, ``smoothed`` after triple aggregation,
    ``ensemble`` after averaging over step counts.
    """

    positions: NDArray[np.float64]
    probabilities: NDArray[np.float64]
    kind: DistributionKind = "raw"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        prob = np.asarray(self.probabilities, dtype=float)
        if pos.ndim != 1 or pos.shape != prob.shape:
            raise ValueError("positions and probabilities must be 1-D and equal length")
        if pos.size and np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        if np.any(prob < 0):
            raise ValueError("probabilities must be non-negative")
        if pos.size and abs(prob.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {prob.sum()!r}, expected 1")
        if self.kind not in ("raw", "smoothed", "ensemble"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "probabilities", prob)

    def __len__(self) -> int:
        return self.positions.size

    def mean(self) -> float:
        return float(np.dot(self.positions, self.probabilities))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "positions": self.positions.tolist(),
            "probabilities": self.probabilities.tolist(),
            **({"meta": self.meta} if self.meta else {}),
        }


def coin_matrix(params: CoinParams) -> NDArray[np.complex128]:
    """
    Return the 2x2 coin for the given angles.

    ``[[e^{i eta} cos(theta), sin(theta)], [sin(theta), -e^{-i eta} cos(theta)]]``

    ``(0, pi/4)`` is the Hadamard coin, ``(0, 0)`` is sigma_z and
    ``(0, pi/2)`` is sigma_x.
    """
    c, s = np.cos(params.theta), np.sin(params.theta)
    phase = np.exp(1j * params.eta)
    return np.array(
        [[phase * c, s], [s, -np.conj(phase) * c]],
        dtype=np.complex128,
    )


def _check_unitary(coin: NDArray[np.complex128]) -> NDArray[np.complex128]:
    coin = np.asarray(coin, dtype=np.complex128)
    if coin.shape != (2, 2):
        raise ValueError(f"coin must be 2x2, got shape {coin.shape}")
    deviation = np.max(np.abs(coin @ coin.conj().T - np.eye(2)))
    if deviation > UNITARY_TOL:
        raise ValueError(f"coin is not unitary (max deviation {deviation:.3g})")
    return coin


def initial_state(params: InitParams) -> WalkState:
    up, down = params.spinor()
    return WalkState(
        0,
        np.array([up], dtype=np.complex128),
        np.array([down], dtype=np.complex128),
    )


def _advance(a, b, coin):
    """One coin-then-shift update on arrays whose last axis is position."""
    mixed_up = coin[0, 0] * a + coin[0, 1] * b
    mixed_down = coin[1, 0] * a + coin[1, 1] * b
    shape = a.shape[:-1] + (a.shape[-1] + 2,)
    new_a = np.zeros(shape, dtype=np.complex128)
    new_b = np.zeros(shape, dtype=np.complex128)
    new_a[..., 2:] = mixed_up
    new_b[..., :-2] = mixed_down
    return new_a, new_b


def step(state: WalkState, coin: NDArray[np.complex128]) -> WalkState:
    """Apply one coin toss and conditional translation."""
    coin = _check_unitary(coin)
    a, b = _advance(state.a, state.b, coin)
    return WalkState(state.n + 1, a, b)


def propagate(a, b, coin, n: int):
    """
    Advance amplitude arrays by ``n`` steps.

    ``a`` and ``b`` may carry leading batch axes; the last axis is position.
    Used directly by the fitter to evolve many initial spinors at once.
    """
    coin = _check_unitary(coin)
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    for _ in range(n):
        a, b = _advance(a, b, coin)
    return a, b


def evolve(init: InitParams, coin: CoinParams, n: int) -> WalkState:
    if n < 0:
        raise ValueError("step count must be non-negative")
    start = initial_state(init)
    a, b = propagate(start.a, start.b, coin_matrix(coin), int(n))
    return WalkState(int(n), a, b)


def distribution(state: WalkState, keep_odd_sites: bool = False) -> PositionDistribution:
    """
    Occupation probability ``|a_j|^2 + |b_j|^2`` per site.

    Sites with ``j + n`` odd are always empty; they are dropped unless
    ``keep_odd_sites`` is set.
    """
    prob = np.abs(state.a) ** 2 + np.abs(state.b) ** 2
    pos = state.positions
    if not keep_odd_sites:
        prob = prob[::2]
        pos = pos[::2]
    return PositionDistribution(pos.astype(float), prob / prob.sum(), "raw", {"n": state.n})


def _aggregate_triples(pos, prob):
    keep = prob > 0
    pos, prob = pos[keep], prob[keep]
    if pos.size == 0:
        raise ValueError("cannot smooth an empty distribution")
    groups = np.arange(pos.size) // 3
    mass = np.bincount(groups, weights=prob)
    centre = np.bincount(groups, weights=prob * pos) / mass
    return centre, mass


def smooth_aggregate(dist: PositionDistribution) -> PositionDistribution:
    """
    Merge consecutive non-empty sites in groups of three.

    Each group becomes one point carrying the group's total probability,
    placed at the group's probability-weighted mean position. A trailing
    group of one or two sites is merged the same way.
    """
    if dist.kind != "raw":
        raise ValueError(f"smooth_aggregate expects a raw distribution, got {dist.kind!r}")
    centre, mass = _aggregate_triples(dist.positions, dist.probabilities)
    return PositionDistribution(centre, mass / mass.sum(), "smoothed", dict(dist.meta))


def _round_even(x: float) -> int:
    return int(2 * np.round(x / 2))


def draw_step_counts(n_mean: float, n_std: float, samples: int, seed: int) -> NDArray[np.int64]:
    """
    Draw ``samples`` even step counts from N(n_mean, n_std^2).

    Sample ``k`` uses its own PCG64 stream spawned from ``seed``, so the
    draws do not depend on evaluation order. Draws that round below 2 are
    redrawn from the same stream.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if not n_mean > 0 or n_std < 0:
        raise ValueError("need n_mean > 0 and n_std >= 0")
    if n_std == 0:
        n = _round_even(n_mean)
        if n < 2:
            raise ValueError(f"n_mean={n_mean} rounds to fewer than 2 steps")
        return np.full(samples, n, dtype=np.int64)

    children = np.random.SeedSequence(seed).spawn(samples)
    out = np.empty(samples, dtype=np.int64)
    for k, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        for _ in range(10_000):
            n = _round_even(rng.normal(n_mean, n_std))
            if n >= 2:
                break
        else:
            raise ValueError(f"N({n_mean}, {n_std}^2) almost never yields n >= 2")
        out[k] = n
    return out


def _to_grid(u, mass, grid):
    """Split each point's mass linearly between its two neighbouring grid nodes."""
    spacing = grid[1] - grid[0]
    t = np.clip((u - grid[0]) / spacing, 0.0, grid.size - 1)
    left = np.minimum(np.floor(t).astype(int), grid.size - 2)
    frac = t - left
    out = np.bincount(left, weights=mass * (1 - frac), minlength=grid.size)
    out += np.bincount(left + 1, weights=mass * frac, minlength=grid.size)
    return out


def ensemble_distribution(
    init: InitParams,
    coin: CoinParams,
    n_mean: float = 100.0,
    n_std: float = 15.0,
    samples: int = 1000,
    seed: int = 42,
) -> PositionDistribution:
    """
    Equal-weight average of smoothed walks over normally distributed step counts.

    Each smoothed walk of ``n`` steps is rescaled to ``x / n`` in [-1, 1] and
    spread onto a fixed grid of 201 nodes before averaging. Coordinates of the
    result are reported in units of an ``n_mean``-step walk (grid node times
    ``n_mean``) so that an alignment fitted at ``n = n_mean`` applies directly.

    When every draw gives the same ``n`` no regridding is needed and the
    smoothed walk itself is returned, rescaled by ``n_mean / n``.
    """
    counts = draw_step_counts(n_mean, n_std, samples, seed)
    distinct, multiplicity = np.unique(counts, return_counts=True)
    meta = {"n_mean": n_mean, "n_std": n_std, "samples": samples, "seed": seed}

    if distinct.size == 1:
        n = int(distinct[0])
        smoothed = smooth_aggregate(distribution(evolve(init, coin, n)))
        return PositionDistribution(
            smoothed.positions * (n_mean / n), smoothed.probabilities, "ensemble", meta
        )

    grid = np.linspace(-1.0, 1.0, ENSEMBLE_GRID_POINTS)
    total = np.zeros(grid.size)
    # one evolution up to the largest n, snapshotting the requested step counts
    start = initial_state(init)
    U = coin_matrix(coin)
    a, b = start.a, start.b
    done = 0
    for n, weight in zip(distinct, multiplicity):
        a, b = propagate(a, b, U, int(n) - done)
        done = int(n)
        smoothed = smooth_aggregate(distribution(WalkState(done, a, b)))
        total += (weight / samples) * _to_grid(smoothed.positions / done, smoothed.probabilities, grid)

    keep = total > 0
    return PositionDistribution(grid[keep] * n_mean, total[keep] / total.sum(), "ensemble", meta)

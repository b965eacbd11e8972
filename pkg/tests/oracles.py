"""Independent reference computations used by the tests."""

import itertools

import numpy as np

from qwreturns.fit import coarse_grid
from qwreturns.qwalk import CoinParams, InitParams, distribution, evolve, smooth_aggregate
from qwreturns.returns import ReturnSample

UP, DOWN = 0, 1


def path_sum(coin, spinor, n):
    """
    Occupation probabilities by summing over all 2^n spin paths.

    A path is the sequence of spins produced by each coin toss. The amplitude
    of a path is the starting amplitude of the first input spin times the
    coin entries ``U[out, in]`` along the path; the walker moves right after
    an up outcome and left after a down outcome. Returns ``{site: P}``.
    """
    U = np.asarray(coin)
    amp = {}
    for path in itertools.product((UP, DOWN), repeat=n):
        site = sum(1 if s == UP else -1 for s in path)
        for first in (UP, DOWN):
            a = spinor[first]
            prev = first
            for s in path:
                a = a * U[s, prev]
                prev = s
            key = (site, path[-1] if n else first)
            amp[key] = amp.get(key, 0) + a
    probs = {}
    for (site, _), a in amp.items():
        probs[site] = probs.get(site, 0.0) + abs(a) ** 2
    return probs


def grid_point(indices, points=8):
    """Angles ``(eta, theta, phi, omega)`` of the coarse search grid."""
    axes = coarse_grid(points)
    return tuple(float(axis[i]) for axis, i in zip(axes, indices))


def walk_target(coin, init, n=100, scale=0.01, origin=0.3, total=2_000_000, dt=504):
    """
    Return sample reproducing a smoothed walk placed by ``g = scale*x + origin``.

    Each smoothed point contributes ``round(P * total)`` copies of its mapped
    coordinate, so the sample's histogram equals the walk's up to count
    rounding (at most ``0.5/total`` per point).
    """
    smoothed = smooth_aggregate(distribution(evolve(init, coin, n)))
    counts = np.rint(smoothed.probabilities * total).astype(int)
    values = np.repeat(scale * smoothed.positions + origin, counts)
    return ReturnSample(dt, values), smoothed

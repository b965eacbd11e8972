"""
Gaussian and two-component Gaussian-mixture baselines.

Both models are scored on the same equal-width histogram as the walk fit:
the model density is integrated over each bin and renormalised to the
histogram's range, then compared with MAE and KS.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp
from scipy.stats import norm

from .fit import ks_statistic, mae
from .returns import DegenerateSampleError, ReturnSample, histogram

__all__ = [
    "GaussianFitResult",
    "Gmm2FitResult",
    "gaussian_fit",
    "gmm2_fit",
    "binned_mixture",
    "em_gmm2",
]

EM_TOL = 1e-8
EM_MAX_ITER = 500
COLLAPSE = 1e-10


@dataclass
class GaussianFitResult:
    mean: float
    std: float
    mae: float
    ks: float
    edges: NDArray[np.float64]
    fitted_curve: NDArray[np.float64]
    empirical_curve: NDArray[np.float64]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "mae": self.mae,
            "ks": self.ks,
            "edges": self.edges.tolist(),
            "fitted_curve": self.fitted_curve.tolist(),
            "empirical_curve": self.empirical_curve.tolist(),
        }


@dataclass
class Gmm2FitResult:
    weights: NDArray[np.float64]
    means: NDArray[np.float64]
    stds: NDArray[np.float64]
    mae: float
    ks: float
    edges: NDArray[np.float64]
    fitted_curve: NDArray[np.float64]
    empirical_curve: NDArray[np.float64]
    log_likelihood: list[float] = field(default_factory=list)
    converged: bool = True
    restart: int = 0

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "mae": self.mae,
            "ks": self.ks,
            "converged": self.converged,
            "restart": self.restart,
            "log_likelihood": list(self.log_likelihood),
            "edges": self.edges.tolist(),
            "fitted_curve": self.fitted_curve.tolist(),
            "empirical_curve": self.empirical_curve.tolist(),
        }


def binned_mixture(edges, weights, means, stds) -> NDArray[np.float64]:
    """Mixture probability per bin, conditioned on the histogram's range."""
    edges = np.asarray(edges, dtype=float)
    cdf = sum(
        w * norm.cdf(edges, loc=m, scale=s)
        for w, m, s in zip(np.atleast_1d(weights), np.atleast_1d(means), np.atleast_1d(stds))
    )
    p = np.diff(cdf)
    return p / p.sum()


def gaussian_fit(sample: ReturnSample, base_bins: int = 20) -> GaussianFitResult:
    """Moment-matched normal distribution scored on the sample's histogram."""
    x = sample.values
    mean, std = float(np.mean(x)), float(np.std(x))
    if not std > 0:
        raise DegenerateSampleError("zero variance")
    hist = histogram(sample, base_bins)
    fit = binned_mixture(hist.edges, [1.0], [mean], [std])
    return GaussianFitResult(mean, std, mae(hist.probabilities, fit), ks_statistic(hist.probabilities, fit),
                             hist.edges, fit, hist.probabilities)


def _log_components(x, weights, means, stds):
    return np.log(weights)[:, None] + norm.logpdf(x[None, :], means[:, None], stds[:, None])


def em_gmm2(x, weights, means, stds, tol=EM_TOL, max_iter=EM_MAX_ITER, min_std=0.0):
    """
    Expectation-maximisation for a 1-D two-component mixture from a given start.

    Returns ``(weights, means, stds, log_likelihood_trace, converged)``; the
    trace holds the mean log-likelihood per observation after each
    E-step. Raises ``FloatingPointError`` if a component collapses below
    ``min_std`` or loses all its weight.
    """
    weights = np.asarray(weights, dtype=float).copy()
    means = np.asarray(means, dtype=float).copy()
    stds = np.asarray(stds, dtype=float).copy()
    trace: list[float] = []
    converged = False
    for _ in range(max_iter):
        log_joint = _log_components(x, weights, means, stds)
        log_norm = logsumexp(log_joint, axis=0)
        trace.append(float(log_norm.mean()))
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        resp = np.exp(log_joint - log_norm)
        nk = resp.sum(axis=1)
        if np.any(nk <= 0):
            raise FloatingPointError("component lost all weight")
        weights = nk / x.size
        means = resp @ x / nk
        stds = np.sqrt(np.einsum("kn,kn->k", resp, (x[None, :] - means[:, None]) ** 2) / nk)
        if np.any(stds <= min_std) or np.any(weights <= 0) or np.any(weights >= 1):
            raise FloatingPointError("component collapsed")
    return weights, means, stds, trace, converged


def gmm2_fit(sample: ReturnSample, base_bins: int = 20, seed: int = 42, restarts: int = 5) -> Gmm2FitResult:
    """
    Two-component Gaussian mixture by EM, best of several starts by likelihood.

    Start 0 puts the means at the 25th and 75th percentiles with the pooled
    standard deviation and equal weights. Start 1 is two identical copies of
    the moment-matched Gaussian, which EM leaves fixed, so the single-Gaussian
    solution is always among the candidates. Further ``restarts`` starts
    perturb start 0 with draws from ``numpy.random.default_rng(seed)``.
    Starts whose components collapse are dropped.
    """
    x = sample.values
    if x.size < 10:
        raise DegenerateSampleError("gmm2_fit needs at least 10 values")
    sd = float(np.std(x))
    if not sd > 0:
        raise DegenerateSampleError("zero variance")
    q25, q75 = np.percentile(x, [25, 75])

    starts = [
        ([0.5, 0.5], [q25, q75], [sd, sd]),
        ([0.5, 0.5], [x.mean(), x.mean()], [sd, sd]),
    ]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        w = rng.uniform(0.2, 0.8)
        starts.append((
            [w, 1 - w],
            [q25 + rng.normal(0, 0.25 * sd), q75 + rng.normal(0, 0.25 * sd)],
            sd * rng.uniform(0.5, 1.5, size=2),
        ))

    best = None
    for k, start in enumerate(starts):
        try:
            w, m, s, trace, ok = em_gmm2(x, *start, min_std=COLLAPSE * sd)
        except FloatingPointError:
            continue
        if best is None or trace[-1] > best[0][-1]:
            best = (trace, w, m, s, ok, k)
    if best is None:
        raise DegenerateSampleError("every EM start collapsed")

    trace, w, m, s, ok, k = best
    order = np.argsort(m)
    w, m, s = w[order], m[order], s[order]
    hist = histogram(sample, base_bins)
    fit = binned_mixture(hist.edges, w, m, s)
    return Gmm2FitResult(w, m, s, mae(hist.probabilities, fit), ks_statistic(hist.probabilities, fit),
                         hist.edges, fit, hist.probabilities, trace, ok, k)

import numpy as np
import pytest

from qwreturns.baselines import binned_mixture, em_gmm2, gaussian_fit, gmm2_fit
from qwreturns.returns import DegenerateSampleError, ReturnSample


@pytest.fixture(scope="module")
def two_bumps():
    rng = np.random.default_rng(2024)
    which = rng.random(10_000) < 0.5
    x = np.where(which, rng.normal(-1, 0.1, 10_000), rng.normal(1, 0.1, 10_000))
    return ReturnSample(504, x)


def test_gaussian_recovers_moments():
    rng = np.random.default_rng(5)
    x = rng.normal(0.3, 2.0, 10_000)
    g = gaussian_fit(ReturnSample(1, x), 20)
    se = 2.0 / np.sqrt(x.size)
    assert abs(g.mean - 0.3) < 3 * se
    assert abs(g.std - 2.0) < 3 * 2.0 / np.sqrt(2 * x.size)
    assert g.fitted_curve.sum() == pytest.approx(1.0, abs=1e-12)


def test_gaussian_mirror_symmetry():
    rng = np.random.default_rng(6)
    x = rng.normal(0, 1, 501)
    x = np.concatenate([x, -x])
    a = gaussian_fit(ReturnSample(1, x), 21)
    b = gaussian_fit(ReturnSample(1, -x), 21)
    assert a.ks == pytest.approx(b.ks, abs=1e-12)
    assert a.mae == pytest.approx(b.mae, abs=1e-12)


def test_gaussian_zero_variance():
    with pytest.raises(DegenerateSampleError):
        gaussian_fit(ReturnSample(1, [1.0] * 5), 4)


def test_binned_mixture_matches_quadrature():
    from scipy.integrate import quad
    from scipy.stats import norm

    edges = np.linspace(-2, 3, 8)
    w, m, s = [0.3, 0.7], [-0.5, 1.2], [0.4, 0.8]
    dens = lambda t: sum(wi * norm.pdf(t, mi, si) for wi, mi, si in zip(w, m, s))
    ref = np.array([quad(dens, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])
    np.testing.assert_allclose(binned_mixture(edges, w, m, s), ref / ref.sum(), atol=1e-10)


def test_gmm_recovers_two_bumps(two_bumps):
    r = gmm2_fit(two_bumps, 20, seed=1, restarts=3)
    np.testing.assert_allclose(r.means, [-1, 1], atol=0.02)
    np.testing.assert_allclose(r.weights, [0.5, 0.5], atol=0.03)
    assert r.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(r.log_likelihood) >= -1e-9)
    assert r.mae < gaussian_fit(two_bumps, 20).mae


def test_em_log_likelihood_monotone_from_poor_start(two_bumps):
    *_, trace, _ = em_gmm2(two_bumps.values, [0.7, 0.3], [-0.2, 0.3], [2.0, 0.5])
    assert len(trace) > 3
    assert np.all(np.diff(trace) >= -1e-9)


def test_moment_matched_start_is_single_gaussian():
    # two identical moment-matched components are an EM fixed point, so the
    # candidate set always contains the single-Gaussian solution
    rng = np.random.default_rng(8)
    sample = ReturnSample(1, rng.normal(0, 1, 5000))
    g = gaussian_fit(sample, 20)
    x = sample.values
    w, m, s, trace, ok = em_gmm2(x, [0.5, 0.5], [x.mean()] * 2, [x.std()] * 2)
    assert ok
    np.testing.assert_allclose(m, g.mean, atol=1e-12)
    np.testing.assert_allclose(s, g.std, atol=1e-12)
    curve = binned_mixture(g.edges, w, m, s)
    assert np.abs(curve - g.empirical_curve).mean() <= g.mae + 1e-9


def test_gmm_on_single_gaussian_stays_unimodal():
    rng = np.random.default_rng(8)
    sample = ReturnSample(1, rng.normal(0, 1, 5000))
    r = gmm2_fit(sample, 20, seed=3)
    assert abs(r.means[1] - r.means[0]) < min(r.stds)


def test_gmm_rejects_small_or_flat():
    with pytest.raises(DegenerateSampleError):
        gmm2_fit(ReturnSample(1, np.arange(5.0)), 4)
    with pytest.raises(DegenerateSampleError):
        gmm2_fit(ReturnSample(1, np.ones(20)), 4)


def test_gmm_deterministic(two_bumps):
    a = gmm2_fit(two_bumps, 20, seed=9, restarts=2)
    b = gmm2_fit(two_bumps, 20, seed=9, restarts=2)
    np.testing.assert_array_equal(a.means, b.means)
    assert a.log_likelihood == b.log_likelihood

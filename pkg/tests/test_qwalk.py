import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwreturns.qwalk import (
    CoinParams,
    InitParams,
    PositionDistribution,
    coin_matrix,
    distribution,
    draw_step_counts,
    ensemble_distribution,
    evolve,
    initial_state,
    smooth_aggregate,
    step,
)

from oracles import path_sum

HADAMARD = CoinParams(0.0, np.pi / 4)
SIGMA_Z = CoinParams(0.0, 0.0)
SIGMA_X = CoinParams(0.0, np.pi / 2)
PURE_UP = InitParams(0.0, 0.0)
SYMMETRIC = InitParams(np.pi / 2, np.pi / 2)

etas = st.floats(0, 2 * np.pi, exclude_max=True)
thetas = st.floats(0, np.pi / 2)
phis = st.floats(0, 2 * np.pi, exclude_max=True)
omegas = st.floats(-np.pi, np.pi)


@pytest.mark.parametrize(
    "coin, expected",
    [
        (HADAMARD, np.array([[1, 1], [1, -1]]) / np.sqrt(2)),
        (SIGMA_Z, np.array([[1, 0], [0, -1]])),
        (SIGMA_X, np.array([[0, 1], [1, 0]])),
    ],
)
def test_coin_limits(coin, expected):
    np.testing.assert_allclose(coin_matrix(coin), expected, atol=1e-15)


def test_coin_params_validation():
    assert CoinParams(2 * np.pi + 0.5, 0.1).eta == pytest.approx(0.5)
    assert CoinParams(-0.5, 0.1).eta == pytest.approx(2 * np.pi - 0.5)
    with pytest.raises(ValueError):
        CoinParams(0.0, -0.1)
    with pytest.raises(ValueError):
        CoinParams(0.0, np.pi / 2 + 1e-6)
    with pytest.raises(ValueError):
        InitParams(0.0, np.pi + 1e-6)
    assert InitParams(7.0, 0.0).phi == pytest.approx(7.0 - 2 * np.pi)


@settings(max_examples=200)
@given(etas, thetas)
def test_coin_unitary(eta, theta):
    U = coin_matrix(CoinParams(eta, theta))
    assert np.max(np.abs(U @ U.conj().T - np.eye(2))) < 1e-14


@settings(max_examples=100)
@given(phis, omegas)
def test_initial_spinor_unit_norm(phi, omega):
    s = initial_state(InitParams(phi, omega))
    assert s.n == 0
    assert abs(s.norm() - 1.0) < 1e-15


@pytest.mark.parametrize(
    "init, a0, b0",
    [
        (InitParams(0, 0), 1, 0),
        (InitParams(0, np.pi), 0, 1),
        (SYMMETRIC, 1 / np.sqrt(2), 1j / np.sqrt(2)),
    ],
)
def test_initial_state(init, a0, b0):
    s = initial_state(init)
    assert s.a[0] == pytest.approx(a0, abs=1e-15)
    assert s.b[0] == pytest.approx(b0, abs=1e-15)


def test_step_sigma_z_moves_up_right():
    s = step(initial_state(PURE_UP), coin_matrix(SIGMA_Z))
    assert s.n == 1
    np.testing.assert_array_equal(np.abs(s.a), [0, 0, 1])
    np.testing.assert_array_equal(np.abs(s.b), [0, 0, 0])


def test_step_sigma_x_flips_then_moves_left():
    s = step(initial_state(PURE_UP), coin_matrix(SIGMA_X))
    # cos(pi/2) is 6e-17 in floating point
    np.testing.assert_allclose(np.abs(s.a), [0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(np.abs(s.b), [1, 0, 0], atol=1e-15)


def test_step_rejects_non_unitary():
    with pytest.raises(ValueError, match="unitary"):
        step(initial_state(PURE_UP), np.array([[1, 0], [0, 1.1]]))


def test_hadamard_two_steps():
    d = distribution(evolve(PURE_UP, HADAMARD, 2))
    np.testing.assert_array_equal(d.positions, [-2, 0, 2])
    np.testing.assert_allclose(d.probabilities, [0.25, 0.5, 0.25], atol=1e-15)
    oracle = path_sum(coin_matrix(HADAMARD), (1, 0), 2)
    assert oracle == pytest.approx({-2: 0.25, 0: 0.5, 2: 0.25}, abs=1e-15)


def test_evolve_zero_steps_is_initial_state():
    s = evolve(SYMMETRIC, HADAMARD, 0)
    ref = initial_state(SYMMETRIC)
    assert s.n == 0 and s.a[0] == ref.a[0] and s.b[0] == ref.b[0]


def test_ballistic_sigma_z():
    d = distribution(evolve(PURE_UP, SIGMA_Z, 100))
    assert d.probabilities[-1] == 1.0
    assert d.positions[-1] == 100
    assert np.count_nonzero(d.probabilities) == 1


def test_symmetric_hadamard_walk():
    d = distribution(evolve(SYMMETRIC, HADAMARD, 100))
    np.testing.assert_allclose(d.probabilities, d.probabilities[::-1], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(etas, thetas, phis, omegas, st.integers(0, 10))
def test_evolve_matches_path_sum(eta, theta, phi, omega, n):
    coin, init = CoinParams(eta, theta), InitParams(phi, omega)
    d = distribution(evolve(init, coin, n))
    oracle = path_sum(coin_matrix(coin), init.spinor(), n)
    for x, p in zip(d.positions, d.probabilities):
        assert p == pytest.approx(oracle.get(int(x), 0.0), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(etas, thetas, phis, omegas, st.integers(0, 200))
def test_normalisation_parity_support(eta, theta, phi, omega, n):
    s = evolve(InitParams(phi, omega), CoinParams(eta, theta), n)
    assert abs(s.norm() - 1.0) < 1e-12
    odd = (s.positions + n) % 2 == 1
    assert not np.any(s.a[odd]) and not np.any(s.b[odd])
    full = distribution(s, keep_odd_sites=True)
    assert full.positions[0] == -n and full.positions[-1] == n


def test_distribution_drops_odd_sites_by_default():
    s = evolve(SYMMETRIC, HADAMARD, 5)
    assert len(distribution(s)) == 6
    assert len(distribution(s, keep_odd_sites=True)) == 11


def test_single_point_distribution():
    d = distribution(initial_state(PURE_UP))
    assert d.positions.tolist() == [0] and d.probabilities.tolist() == [1.0]


def test_position_distribution_validation():
    with pytest.raises(ValueError):
        PositionDistribution(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        PositionDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.4]))


def test_smooth_three_sites_to_one():
    d = distribution(evolve(PURE_UP, HADAMARD, 2))
    s = smooth_aggregate(d)
    assert s.kind == "smoothed"
    assert s.positions[0] == pytest.approx(0.0, abs=1e-15)
    assert s.probabilities.tolist() == [1.0]


def test_smooth_weighted_mean_and_remainder():
    raw = PositionDistribution(
        np.array([-4.0, -2, 0, 2, 4]), np.array([0.1, 0.2, 0.3, 0.3, 0.1]), "raw"
    )
    s = smooth_aggregate(raw)
    np.testing.assert_allclose(s.probabilities, [0.6, 0.4])
    np.testing.assert_allclose(s.positions, [(-0.4 - 0.4) / 0.6, (0.6 + 0.4) / 0.4])
    assert s.mean() == pytest.approx(raw.mean(), abs=1e-15)


def test_smooth_skips_empty_sites():
    raw = PositionDistribution(np.array([-2.0, 0, 2, 4]), np.array([0.5, 0.0, 0.25, 0.25]), "raw")
    s = smooth_aggregate(raw)
    assert len(s) == 1 and s.probabilities[0] == 1.0


def test_smooth_n100_point_count():
    d = distribution(evolve(SYMMETRIC, HADAMARD, 100))
    assert len(d) == 101
    s = smooth_aggregate(d)
    assert len(s) == 34  # ceil(101 / 3)
    assert s.probabilities.sum() == pytest.approx(1.0, abs=1e-12)


def test_smooth_requires_raw():
    s = smooth_aggregate(distribution(evolve(PURE_UP, HADAMARD, 4)))
    with pytest.raises(ValueError):
        smooth_aggregate(s)


def test_draw_step_counts():
    n = draw_step_counts(100, 15, 1000, seed=1)
    assert np.all(n % 2 == 0) and np.all(n >= 2)
    assert abs(n.mean() - 100) < 3
    np.testing.assert_array_equal(n, draw_step_counts(100, 15, 1000, seed=1))
    # per-sample streams: a longer run starts with the same draws
    np.testing.assert_array_equal(n[:10], draw_step_counts(100, 15, 10, seed=1))
    assert np.all(draw_step_counts(3, 10, 200, seed=0) >= 2)


@pytest.mark.parametrize("args", [(100, 15, 0), (0.5, 0, 10), (-1, 1, 10), (10, -1, 10)])
def test_draw_step_counts_rejects(args):
    with pytest.raises(ValueError):
        draw_step_counts(*args, seed=0)


def test_ensemble_degenerate_equals_smoothed():
    e = ensemble_distribution(SYMMETRIC, HADAMARD, 100, 0, 1000, seed=3)
    s = smooth_aggregate(distribution(evolve(SYMMETRIC, HADAMARD, 100)))
    assert e.kind == "ensemble"
    np.testing.assert_array_equal(e.positions, s.positions)
    np.testing.assert_array_equal(e.probabilities, s.probabilities)


def test_ensemble_reproducible_and_normalised():
    coin, init = CoinParams(1.0, 0.6), InitParams(0.3, -1.2)
    a = ensemble_distribution(init, coin, 100, 15, 1000, seed=42)
    b = ensemble_distribution(init, coin, 100, 15, 1000, seed=42)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.probabilities, b.probabilities)
    assert a.probabilities.sum() == pytest.approx(1.0, abs=1e-10)
    assert a.positions.min() >= -100 and a.positions.max() <= 100
    c = ensemble_distribution(init, coin, 100, 15, 1000, seed=43)
    assert not np.array_equal(a.probabilities, c.probabilities)


def test_ensemble_preserves_mean_of_rescaled_walks():
    coin, init = CoinParams(0.4, 0.9), InitParams(1.0, 0.5)
    counts = draw_step_counts(100, 15, 50, seed=5)
    expected = np.mean([
        smooth_aggregate(distribution(evolve(init, coin, int(n)))).mean() / n for n in counts
    ]) * 100
    e = ensemble_distribution(init, coin, 100, 15, 50, seed=5)
    assert e.mean() == pytest.approx(expected, abs=1e-10)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from asymfilter.filtering import (
    ExpansionCoefficients,
    assemble,
    clip_coefficients,
    combine,
    compositions,
    compute_coefficients,
    kalman_bucy,
    riccati,
    riccati_fixed_point,
)
from asymfilter.sde import ModelParams, SamplePath, TimeGrid, path_seed, simulate_path


def test_riccati_without_gain_is_the_prior_variance():
    p = ModelParams(a=-0.4, b=0.5, c=0.0, sigma=0.3, epsilon=0.0)
    grid = TimeGrid(5.0, 0.0001)
    path = SamplePath(grid, np.zeros(grid.n_steps + 1), np.zeros(grid.n_steps + 1))
    st_ = kalman_bucy(p, path, c_eff=0.0)
    assert np.all(st_.mu == 0)
    t = grid.times
    exact = 0.25 * (np.exp(-0.8 * t) - 1) / -0.8
    np.testing.assert_allclose(st_.gamma, exact, rtol=1e-3, atol=1e-7)


def test_riccati_fixed_point(cubic):
    g_star = riccati_fixed_point(cubic)
    assert g_star == pytest.approx(0.1182, abs=1e-3)
    assert g_star ** 2 + 0.072 * g_star - 0.0225 == pytest.approx(0, abs=1e-12)
    gamma = riccati(cubic, 1000, 0.01)
    assert gamma[0] == 0
    assert np.all(gamma >= 0)
    assert np.all(np.diff(gamma) >= 0)
    assert abs(gamma[-1] - g_star) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 1), st.floats(0.05, 2), st.floats(-2, 2), st.floats(0.1, 2))
def test_riccati_positive_and_monotone(a, b, c, sigma):
    p = ModelParams(a=a, b=b, c=c, sigma=sigma, epsilon=0.0)
    dt = 1e-3
    gamma = riccati(p, 5000, dt)
    assert np.all(gamma >= 0)
    assert np.all(np.diff(gamma) >= -1e-15)
    if c != 0 or a < 0:
        assert gamma[-1] <= riccati_fixed_point(p) * (1 + 1e-9)


def test_compositions():
    assert list(compositions(0)) == [()]
    assert sorted(compositions(3)) == [(1, 1, 1), (1, 2), (2, 1), (3,)]
    assert len(list(compositions(6))) == 2 ** 5


def test_combine_second_order():
    jx = {0: 2.0, 1: 3.0, 2: 5.0}
    j1 = {1: 7.0, 2: 11.0}
    # J2(X) - J0(X) J2(1) - J1(X) J1(1) + J0(X) J1(1)^2
    expected = 5 - 2 * 11 - 3 * 7 + 2 * 49
    assert combine(jx, j1, 2, 1.0) == expected
    assert combine(jx, j1, 2, 0.5) == pytest.approx(expected * 16)


@pytest.fixture(scope="module")
def cubic_coeffs():
    p = ModelParams(a=-0.4, b=0.5, c=1.0, sigma=0.3, epsilon=0.2, j=3)
    path = simulate_path(p, TimeGrid(100.0, 0.01), path_seed(2024, 0))
    state = kalman_bucy(p, path)
    return p, path, state, compute_coefficients(p, path, state, 2)


def test_order_zero_is_kalman_bucy(cubic_coeffs):
    p, path, state, co = cubic_coeffs
    assert np.array_equal(co.n_coef[0], state.mu)
    assert np.array_equal(assemble(co, p.epsilon)[0], state.mu)
    co0 = compute_coefficients(p, path, state, 0)
    assert co0.n_coef.shape == (1, len(state.mu))


def test_zero_epsilon_assembly(cubic_coeffs):
    _, _, state, co = cubic_coeffs
    N = assemble(co, 0.0)
    for n in range(3):
        assert np.array_equal(N[n], state.mu)


def test_assemble_with_zero_corrections():
    mu = np.linspace(0, 1, 5)
    co = ExpansionCoefficients(2, np.vstack([mu, np.zeros(5), np.zeros(5)]))
    N = assemble(co, 0.3)
    assert np.array_equal(N[2], mu)
    with pytest.raises(ValueError):
        assemble(co, 0.3, clipped=True)


def test_pinned_order_two_trajectory(cubic_coeffs):
    p, _, _, co = cubic_coeffs
    N = assemble(co, p.epsilon)
    pinned = {
        100: (-0.05419669367868416, -0.030210114582019065, 0.29460819335209854),
        1000: (0.07111187482610455, 0.09213373958355357, -0.6558450707071701),
        5000: (-0.0730793458074848, 0.08605157276887165, 0.07094955745619315),
        10000: (-0.23567385733199944, 0.28304648668668764, 0.1817637179906937),
    }
    for k, (n1, n2, N2) in pinned.items():
        assert co.n_coef[1][k] == pytest.approx(n1, rel=1e-9)
        assert co.n_coef[2][k] == pytest.approx(n2, rel=1e-9)
        assert N[2][k] == pytest.approx(N2, rel=1e-9)


def test_requires_gain_c(cubic_coeffs):
    p, path, _, _ = cubic_coeffs
    state = kalman_bucy(p, path, c_eff=p.c + p.epsilon)
    with pytest.raises(ValueError):
        compute_coefficients(p, path, state, 1)
    with pytest.raises(ValueError):
        compute_coefficients(p, path, kalman_bucy(p, path), 3)


def test_linear_perturbation_converges(linear):
    """Time-averaged error against the exact gain c + eps filter decreases with order."""
    grid = TimeGrid(10.0, 0.001)
    good = 0
    n_seeds = 20
    for k in range(n_seeds):
        path = simulate_path(linear, grid, path_seed(77, k))
        state = kalman_bucy(linear, path)
        exact = kalman_bucy(linear, path, c_eff=linear.c + linear.epsilon).mu
        N = assemble(compute_coefficients(linear, path, state, 2), linear.epsilon)
        err = [np.mean((N[n] - exact) ** 2) for n in range(3)]
        good += err[0] >= err[1] >= err[2]
    assert good >= 0.95 * n_seeds


# --- clipping ----------------------------------------------------------------

coef_arrays = arrays(np.float64, (3, 40), elements=st.floats(-1e3, 1e3, allow_subnormal=False))


@settings(max_examples=60, deadline=None)
@given(coef_arrays, st.floats(0.01, 5.0), st.floats(0.0, 0.99))
def test_clipping_bound_holds_everywhere(n, r, eps):
    co = clip_coefficients(ExpansionCoefficients(2, n), eps, r)
    t = co.clipped
    assert np.array_equal(t[0], n[0])
    for i in (1, 2):
        lhs = np.abs(t[i] * eps ** i)
        rhs = r * np.abs(t[i - 1] * eps ** (i - 1))
        assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-300)
        # sign preserved, magnitude never increased
        assert np.all(np.sign(t[i]) * np.sign(n[i]) >= 0)
        assert np.all(np.abs(t[i]) <= np.abs(n[i]) * (1 + 1e-12))


@settings(max_examples=30, deadline=None)
@given(coef_arrays, st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_clipping_geometric_decay(n, r, eps):
    t = clip_coefficients(ExpansionCoefficients(2, n), eps, r).clipped
    for i in (1, 2):
        assert np.all(np.abs(t[i] * eps ** i) <= r ** i * np.abs(n[0]) * (1 + 1e-9) + 1e-300)


def test_clipping_infinite_r_is_identity(cubic_coeffs):
    p, _, _, co = cubic_coeffs
    cl = clip_coefficients(co, p.epsilon, np.inf)
    assert np.array_equal(cl.clipped, co.n_coef)
    assert np.array_equal(assemble(cl, p.epsilon, clipped=True), assemble(co, p.epsilon))


def test_clipping_zero_cascade():
    n = np.array([[1.0, 2.0], [0.0, 2.0], [5.0, 5.0]])
    t = clip_coefficients(ExpansionCoefficients(2, n), 0.5, 0.3).clipped
    assert t[1, 0] == 0 and t[2, 0] == 0
    assert t[1, 1] == pytest.approx(0.3 * 2.0 / 0.5)


def test_clipping_rejects_nonpositive_r():
    co = ExpansionCoefficients(1, np.ones((2, 3)))
    for r in (0.0, -1.0, np.nan):
        with pytest.raises(ValueError):
            clip_coefficients(co, 0.2, r)

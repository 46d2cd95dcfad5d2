import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from hdqtest.errors import DimensionMismatch, RankDeficientZ, TauOutOfRange, TooFewRows
from hdqtest.qr_core import Dataset, check_loss, fit_nuisance, quantile_score, total_check_loss


def vertex_oracle(Y, Z, tau):
    """Minimum over all q-subsets interpolated exactly (an LP optimum is a vertex)."""
    n, q = Z.shape
    best = math.inf
    for rows in itertools.combinations(range(n), q):
        Zh = Z[list(rows)]
        if abs(np.linalg.det(Zh)) < 1e-12:
            continue
        a = np.linalg.solve(Zh, Y[list(rows)])
        best = min(best, total_check_loss(Y, Z, a, tau))
    return best


def grid_oracle(Y, Z, tau, rounds=12, width=10.0, pts=41):
    """Nested grid refinement over a 2-dimensional alpha."""
    centre = np.zeros(2)
    best = math.inf
    for _ in range(rounds):
        g = np.linspace(-width, width, pts)
        for a0 in centre[0] + g:
            for a1 in centre[1] + g:
                v = total_check_loss(Y, Z, np.array([a0, a1]), tau)
                if v < best:
                    best, arg = v, np.array([a0, a1])
        centre = arg
        width *= 4.0 / (pts - 1)
    return best


def lp_oracle(Y, Z, tau):
    n, q = Z.shape
    c = np.r_[np.zeros(q), tau * np.ones(n), (1 - tau) * np.ones(n)]
    A = np.c_[Z, np.eye(n), -np.eye(n)]
    res = linprog(c, A_eq=A, b_eq=Y, bounds=[(None, None)] * q + [(0, None)] * 2 * n)
    return res.fun


def test_check_loss_values():
    assert check_loss(1.0, 0.5) == 0.5
    assert check_loss(-2.0, 0.25) == 1.5
    for tau in (0.1, 0.5, 0.9):
        assert check_loss(0.0, tau) == 0.0
    with pytest.raises(TauOutOfRange):
        check_loss(1.0, 0.0)


@given(st.floats(-1e6, 1e6), st.floats(0.01, 0.99))
def test_check_loss_nonnegative(t, tau):
    assert check_loss(t, tau) >= 0.0


def test_quantile_score_convention():
    Z = np.ones((3, 1))
    psi = quantile_score(np.array([-0.3, 0.3, 0.0]), Z, np.array([0.0]), 0.25)
    np.testing.assert_array_equal(psi, [0.75, -0.25, 0.75])
    assert quantile_score([0.0], np.ones((1, 1)), [0.0], 0.5)[0] == 0.5
    with pytest.raises(DimensionMismatch):
        quantile_score(np.zeros(3), np.ones((3, 2)), np.zeros(1), 0.5)


def test_intercept_only_median():
    fit = fit_nuisance(np.array([1.0, 2.0, 3.0]), np.ones((3, 1)), 0.5)
    assert fit.alpha_hat[0] == pytest.approx(2.0, abs=1e-12)


def test_intercept_only_flat_region():
    Y = np.array([1.0, 2.0, 3.0, 4.0])
    fit = fit_nuisance(Y, np.ones((4, 1)), 0.25)
    assert 1.0 - 1e-9 <= fit.alpha_hat[0] <= 2.0 + 1e-9
    # any point in [1, 2] has the same loss
    assert fit.objective == pytest.approx(total_check_loss(Y, np.ones((4, 1)), np.array([1.5]), 0.25))


def test_two_dim_matches_grid_and_vertex_oracles():
    rng = np.random.default_rng(3)
    Y = rng.standard_normal(6)
    Z = np.column_stack([np.ones(6), rng.standard_normal(6)])
    for tau in (0.25, 0.5, 0.7):
        fit = fit_nuisance(Y, Z, tau)
        assert fit.objective == pytest.approx(grid_oracle(Y, Z, tau), abs=1e-6)
        assert fit.objective == pytest.approx(vertex_oracle(Y, Z, tau), rel=1e-10)


@pytest.mark.parametrize("n,q,tau", [(30, 2, 0.5), (80, 3, 0.25), (200, 4, 0.9), (500, 2, 0.1)])
def test_matches_linear_programming_oracle(n, q, tau):
    rng = np.random.default_rng(n + q)
    Z = np.column_stack([np.ones(n), rng.standard_normal((n, q - 1))])
    Y = Z @ rng.standard_normal(q) + rng.standard_t(2, n)
    fit = fit_nuisance(Y, Z, tau)
    assert fit.converged
    ref = lp_oracle(Y, Z, tau)
    assert (fit.objective - ref) / ref <= 1e-8


def test_fit_invariants(rng):
    n, tau = 101, 0.3
    Z = np.column_stack([np.ones(n), rng.standard_normal(n)])
    Y = rng.standard_normal(n)
    fit = fit_nuisance(Y, Z, tau)
    resid = Y - Z @ fit.alpha_hat
    np.testing.assert_array_equal(fit.psi_hat, (resid <= 0) - tau)
    assert fit.objective == pytest.approx(float(np.sum(check_loss(resid, tau))), rel=1e-10)
    # sign condition with interpolated points treated as zero
    tol = 1e-9 * np.max(np.abs(Y))
    assert np.sum(resid < -tol) <= n * tau <= np.sum(resid <= tol)


@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
def test_equivariance_under_shift(seed, tau):
    rng = np.random.default_rng(seed)
    n = 25
    Z = np.column_stack([np.ones(n), rng.standard_normal(n)])
    Y = rng.standard_normal(n)
    c = rng.standard_normal(2)
    a = fit_nuisance(Y, Z, tau)
    b = fit_nuisance(Y + Z @ c, Z, tau)
    # objectives agree; minimizers may be set valued
    assert b.objective == pytest.approx(a.objective, rel=1e-10, abs=1e-10)
    assert total_check_loss(Y + Z @ c, Z, a.alpha_hat + c, tau) == pytest.approx(b.objective, rel=1e-10)


def test_psi_does_not_depend_on_x(rng):
    n = 40
    Z = np.column_stack([np.ones(n), rng.standard_normal(n)])
    X = rng.standard_normal((n, 5))
    Y = rng.standard_normal(n)
    a = fit_nuisance(Dataset(Y, Z, X).Y, Z, 0.5).psi_hat
    b = fit_nuisance(Dataset(Y, Z, X[:, ::-1]).Y, Z, 0.5).psi_hat
    np.testing.assert_array_equal(a, b)


def test_fit_errors():
    with pytest.raises(RankDeficientZ):
        fit_nuisance(np.arange(5.0), np.column_stack([np.ones(5), np.ones(5)]), 0.5)
    with pytest.raises(TooFewRows):
        fit_nuisance(np.arange(2.0), np.column_stack([np.ones(2), [0.0, 1.0]]), 0.5)


def test_dataset_validation():
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros(3), np.zeros((3, 1)), np.zeros((3, 2)))
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros(3), np.ones((3, 1)), np.full((3, 2), np.nan))
    d = Dataset(np.zeros(4), np.ones(4), np.zeros(4))
    assert (d.n, d.q, d.p) == (4, 1, 1)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize, minimize_scalar

from lvggm.prox import neglogdet_eigs, project_psd, prox_neglogdet, prox_trace_psd, soft_threshold


def random_sym(g, p, scale=1.0):
    A = g.standard_normal((p, p)) * scale
    return (A + A.T) / 2


seeds = st.integers(0, 2**32 - 1)


# -- soft threshold ----------------------------------------------------------


def test_soft_threshold_examples():
    A = np.array([[3.0, -0.5], [-0.5, -3.0]])
    np.testing.assert_array_equal(soft_threshold(A, 0.0), A)
    np.testing.assert_array_equal(soft_threshold(A, 1.0), [[2.0, 0.0], [0.0, -2.0]])


def test_soft_threshold_keeps_diagonal():
    A = np.array([[0.5, 2.0], [2.0, -0.2]])
    out = soft_threshold(A, 1.0, penalize_diagonal=False)
    np.testing.assert_array_equal(out, [[0.5, 1.0], [1.0, -0.2]])


def test_soft_threshold_rejects_negative_tau():
    with pytest.raises(ValueError):
        soft_threshold(np.eye(2), -1.0)


# -- log-det prox ------------------------------------------------------------


def scalar_oracle(b, rho):
    """Minimize -log r + (rho/2)(r - b)^2 over r > 0 numerically."""
    res = minimize_scalar(lambda r: -np.log(r) + 0.5 * rho * (r - b) ** 2,
                          bounds=(1e-12, abs(b) + 10), method="bounded",
                          options={"xatol": 1e-13})
    return res.x


def test_neglogdet_zero_input():
    np.testing.assert_allclose(prox_neglogdet(np.zeros((2, 2)), 1.0), np.eye(2), atol=1e-12)


def test_neglogdet_identity():
    golden = (1 + np.sqrt(5)) / 2
    out = prox_neglogdet(np.eye(3), 1.0)
    np.testing.assert_allclose(out, golden * np.eye(3), atol=1e-12)
    assert golden == pytest.approx(scalar_oracle(1.0, 1.0), abs=1e-8)


def test_neglogdet_diag():
    out = prox_neglogdet(np.diag([2.0, -1.0]), 2.0)
    expect = np.diag([(2 + np.sqrt(6)) / 2, (-1 + np.sqrt(3)) / 2])
    np.testing.assert_allclose(out, expect, atol=1e-12)
    np.testing.assert_allclose(np.diag(expect), [scalar_oracle(2, 2), scalar_oracle(-1, 2)], atol=1e-8)


def test_neglogdet_with_covariance_matches_matrix_oracle():
    """Full matrix objective minimized by a generic optimizer over a Cholesky parametrization."""
    g = np.random.default_rng(1)
    p, rho = 3, 1.7
    A = random_sym(g, p)
    S = np.cov(g.standard_normal((p, 20)))
    R = prox_neglogdet(A, rho, S)

    def obj(theta):
        C = np.zeros((p, p))
        C[np.tril_indices(p)] = theta
        X = C @ C.T
        sign, logdet = np.linalg.slogdet(X)
        if sign <= 0:
            return np.inf
        return -logdet + np.sum(S * X) + 0.5 * rho * np.sum((X - A) ** 2)

    x0 = np.linalg.cholesky(R)[np.tril_indices(p)] * 1.05
    res = minimize(obj, x0, method="BFGS", options={"gtol": 1e-10})
    assert obj(np.linalg.cholesky(R)[np.tril_indices(p)]) <= res.fun + 1e-10


@settings(max_examples=200, deadline=None)
@given(seeds, st.floats(1e-3, 1e3))
def test_neglogdet_stationarity_and_pd(seed, rho):
    g = np.random.default_rng(seed)
    A = random_sym(g, 5, scale=10.0)
    R = prox_neglogdet(A, rho)
    b, U = np.linalg.eigh(A)
    r = np.einsum("ij,jk,ki->i", U.T, R, U)
    np.testing.assert_allclose(r - b, 1.0 / (rho * r), rtol=1e-8, atol=1e-10)
    assert np.linalg.eigvalsh(R)[0] > 0


def test_neglogdet_very_negative_input_is_pd():
    R = prox_neglogdet(-1e8 * np.eye(3), 1.0)
    assert np.all(np.linalg.eigvalsh(R) > 0)
    np.testing.assert_allclose(neglogdet_eigs(np.array([-1e8]), 1.0), [1e-8], rtol=1e-12)


def test_neglogdet_rejects_bad_rho():
    with pytest.raises(ValueError):
        prox_neglogdet(np.eye(2), 0.0)


# -- trace prox --------------------------------------------------------------


def test_trace_prox_examples():
    np.testing.assert_allclose(prox_trace_psd(np.diag([3.0, -1.0]), 1.0), np.diag([2.0, 0.0]), atol=1e-15)
    g = np.random.default_rng(0)
    B = g.standard_normal((4, 4))
    A = B @ B.T
    np.testing.assert_allclose(prox_trace_psd(A, 0.0), A, atol=1e-12)
    for tau in (0.0, 0.3, 5.0):
        assert np.array_equal(prox_trace_psd(-np.eye(3), tau), np.zeros((3, 3)))


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(0, 3))
def test_trace_prox_spectrum(seed, tau):
    A = random_sym(np.random.default_rng(seed), 6)
    out = prox_trace_psd(A, tau)
    np.testing.assert_allclose(np.linalg.eigvalsh(out),
                               np.sort(np.maximum(np.linalg.eigvalsh(A) - tau, 0)), atol=1e-12)


def test_project_psd_idempotent():
    A = random_sym(np.random.default_rng(4), 5)
    P = project_psd(A)
    np.testing.assert_allclose(project_psd(P), P, atol=1e-12)


# -- non-expansiveness -------------------------------------------------------

PROXES = {
    "soft": lambda A: soft_threshold(A, 0.4),
    "neglogdet": lambda A: prox_neglogdet(A, 1.3),
    "neglogdet_cov": lambda A: prox_neglogdet(A, 0.7, np.diag([1.0, 2.0, 0.5, 1.5])),
    "trace": lambda A: prox_trace_psd(A, 0.4),
}


@pytest.mark.parametrize("name", PROXES)
@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_nonexpansive(name, seed):
    g = np.random.default_rng(seed)
    A, B = random_sym(g, 4, 3.0), random_sym(g, 4, 3.0)
    f = PROXES[name]
    assert np.linalg.norm(f(A) - f(B)) <= np.linalg.norm(A - B) + 1e-10

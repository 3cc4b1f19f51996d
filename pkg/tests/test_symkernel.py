import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lvggm.symkernel import (
    EigenError,
    SymMatrixError,
    check_symmetric,
    eig_sym,
    format_matrix,
    is_pd,
    matrix_norms,
    parse_matrix,
    read_matrix,
    schur_marginal,
    spikiness,
    write_matrix,
)


def random_sym(g, p):
    A = g.standard_normal((p, p))
    return (A + A.T) / 2


def random_pd(g, p, shift=0.5):
    A = g.standard_normal((p, p))
    return A @ A.T / p + shift * np.eye(p)


sym_matrices = st.integers(1, 12).flatmap(
    lambda p: st.integers(0, 2**32 - 1).map(lambda s: random_sym(np.random.default_rng(s), p))
)


# -- eig_sym -----------------------------------------------------------------


def test_eig_identity():
    np.testing.assert_allclose(eig_sym(np.eye(3)).eigenvalues, [1, 1, 1])


def test_eig_diagonal():
    d = eig_sym(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(d.eigenvalues, [3, 1])
    np.testing.assert_allclose(np.abs(d.eigenvectors), np.eye(2), atol=1e-14)


def test_eig_swap():
    np.testing.assert_allclose(eig_sym(np.array([[0.0, 1], [1, 0]])).eigenvalues, [1, -1], atol=1e-15)


def test_eig_rejects_asymmetric_and_nonfinite():
    with pytest.raises(SymMatrixError):
        eig_sym(np.array([[1.0, 2], [0, 1]]))
    with pytest.raises(SymMatrixError):
        eig_sym(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(SymMatrixError):
        eig_sym(np.ones((2, 3)))
    assert issubclass(EigenError, RuntimeError)


@pytest.mark.parametrize("p", [1, 2, 7, 20, 50])
def test_eig_reconstruction_and_orthonormality(p):
    g = np.random.default_rng(p)
    A = random_sym(g, p)
    d = eig_sym(A)
    scale = max(1.0, np.abs(A).max())
    assert np.all(np.diff(d.eigenvalues) <= 0)
    np.testing.assert_allclose(d.reconstruct(), A, atol=1e-10 * scale * p)
    np.testing.assert_allclose(d.eigenvectors.T @ d.eigenvectors, np.eye(p), atol=1e-10 * p)


def test_check_symmetric_tolerance():
    A = np.array([[1.0, 1.0], [1.0 + 1e-13, 1.0]])
    B = check_symmetric(A)
    assert np.array_equal(B, B.T)
    with pytest.raises(SymMatrixError):
        check_symmetric(np.array([[1.0, 1.0], [1.1, 1.0]]))


# -- norms and PD ------------------------------------------------------------


def test_norms_diag():
    n = matrix_norms(np.diag([3.0, -5.0]))
    assert n.operator == pytest.approx(5)
    assert n.frobenius == pytest.approx(np.sqrt(34))


def test_norms_zero():
    n = matrix_norms(np.zeros((3, 3)))
    assert (n.frobenius, n.operator, n.elementwise_max_abs, n.elementwise_l1) == (0, 0, 0, 0)


def test_norms_all_ones():
    n = matrix_norms(np.ones((4, 4)))
    assert n.frobenius == pytest.approx(4)
    assert n.elementwise_max_abs == 1
    assert n.operator == pytest.approx(4)


@settings(max_examples=200, deadline=None)
@given(sym_matrices)
def test_norm_ordering(A):
    n = matrix_norms(A)
    slack = 1e-12 * (1 + n.elementwise_l1)
    assert min(n.frobenius, n.operator, n.elementwise_max_abs, n.elementwise_l1) >= 0
    assert n.operator <= n.frobenius + slack
    assert n.frobenius <= n.elementwise_l1 + slack


def test_is_pd_examples():
    assert is_pd(np.eye(2), 0)
    assert not is_pd(np.diag([1.0, 0.0]), 0)
    assert not is_pd(np.diag([1.0, -1e-8]), 1e-6)
    with pytest.raises(ValueError):
        is_pd(np.eye(2), -1)


# -- Schur complement --------------------------------------------------------


def oracle_marginal(K_full, observed):
    """Invert, take the observed covariance block, invert back."""
    Sigma = np.linalg.inv(K_full)
    return np.linalg.inv(Sigma[np.ix_(observed, observed)])


def test_schur_worked_example():
    K = np.array([[2.0, 0, 1], [0, 2, 1], [1, 1, 2]])
    m = schur_marginal(K, [0, 1])
    np.testing.assert_allclose(m.S_star, [[2, 0], [0, 2]], atol=1e-15)
    np.testing.assert_allclose(m.L_star, 0.5 * np.ones((2, 2)), atol=1e-15)
    np.testing.assert_allclose(m.K_marg, [[1.5, -0.5], [-0.5, 1.5]], atol=1e-15)
    np.testing.assert_allclose(m.K_marg, oracle_marginal(K, [0, 1]), atol=1e-14)


def test_schur_block_diagonal_and_no_hidden():
    g = np.random.default_rng(3)
    K = np.zeros((5, 5))
    K[:3, :3] = random_pd(g, 3)
    K[3:, 3:] = random_pd(g, 2)
    m = schur_marginal(K, [0, 1, 2])
    assert np.array_equal(m.L_star, np.zeros((3, 3)))
    np.testing.assert_allclose(m.K_marg, K[:3, :3])
    full = schur_marginal(K, range(5))
    assert np.array_equal(full.L_star, np.zeros((5, 5)))
    np.testing.assert_allclose(full.K_marg, K)


def test_schur_validation():
    K = np.eye(3)
    with pytest.raises(SymMatrixError):
        schur_marginal(K, [0, 0])
    with pytest.raises(SymMatrixError):
        schur_marginal(K, [0, 3])
    with pytest.raises(SymMatrixError):
        schur_marginal(-np.eye(3), [0])


@pytest.mark.parametrize("seed", range(10))
def test_schur_matches_oracle(seed):
    g = np.random.default_rng(seed)
    p, h = g.integers(2, 15), g.integers(1, 5)
    K = random_pd(g, p + h)
    observed = np.sort(g.choice(p + h, size=p, replace=False))
    m = schur_marginal(K, observed)
    ref = oracle_marginal(K, observed)
    assert np.linalg.norm(m.K_marg - ref) <= 1e-8 * np.linalg.norm(ref)
    assert np.linalg.matrix_rank(m.L_star, tol=1e-10) <= h
    assert np.linalg.eigvalsh(m.L_star)[0] >= -1e-12
    assert is_pd(m.K_marg)


# -- spikiness ---------------------------------------------------------------


def test_spikiness_examples():
    p = 6
    assert spikiness(np.ones((p, p))) == pytest.approx(1)
    e1 = np.zeros((p, p))
    e1[0, 0] = 1
    assert spikiness(e1) == pytest.approx(p)
    assert spikiness(np.eye(p)) == pytest.approx(np.sqrt(p))
    with pytest.raises(ZeroDivisionError):
        spikiness(np.zeros((p, p)))


@settings(max_examples=200, deadline=None)
@given(sym_matrices)
def test_spikiness_bounds(A):
    if not np.any(A):
        return
    p = A.shape[0]
    a = spikiness(A)
    assert 1 - 1e-12 <= a <= p + 1e-12


# -- text format -------------------------------------------------------------


def test_matrix_text_round_trip(tmp_path):
    A = random_sym(np.random.default_rng(0), 4) * 1e-7
    assert np.array_equal(parse_matrix(format_matrix(A)), A)
    write_matrix(tmp_path / "A.txt", A)
    assert np.array_equal(read_matrix(tmp_path / "A.txt"), A)


def test_parse_matrix_rejects_bad_shape():
    with pytest.raises(SymMatrixError):
        parse_matrix("2\n1 0\n")

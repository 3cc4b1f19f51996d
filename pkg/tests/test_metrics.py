import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lvggm.metrics import (
    estimation_errors,
    fit_loglog_slope,
    linear_fit,
    rank_recovered,
    recovery_report,
    signed_support_metrics,
)
from lvggm.modelgen import ModelSpec, generate_ground_truth, sample_gaussian
from lvggm.solver import Estimate, RegParams, solve_lvglasso


@pytest.fixture(scope="module")
def truth():
    return generate_ground_truth(ModelSpec(p=8, h=1, seed=4))


def test_support_exact(truth):
    m = signed_support_metrics(truth.S_star, truth.S_star)
    assert m.exact_signed_support and m.support_precision == 1 and m.support_recall == 1


def test_support_empty_estimate(truth):
    m = signed_support_metrics(np.eye(8), truth.S_star)
    assert not m.exact_signed_support and m.support_recall == 0


def test_support_sign_flip(truth):
    S = truth.S_star.copy()
    i, j = sorted(truth.edges)[0]
    S[i, j] *= -1
    S[j, i] *= -1
    m = signed_support_metrics(S, truth.S_star)
    assert not m.exact_signed_support
    assert m.sign_errors == 1 and m.support_recall == 1


def test_support_tolerance():
    A = np.array([[1.0, 1e-8], [1e-8, 1.0]])
    assert signed_support_metrics(A, np.eye(2)).exact_signed_support
    assert not signed_support_metrics(A, np.eye(2), tol_zero=0).exact_signed_support


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 10).flatmap(lambda p: st.lists(st.floats(-1, 1), min_size=p * p, max_size=p * p)),
       st.floats(0, 1))
def test_support_reflexive(vals, tau):
    p = int(math.isqrt(len(vals)))
    A = np.array(vals).reshape(p, p)
    A = (A + A.T) / 2
    assert signed_support_metrics(A, A, tau).exact_signed_support


def test_rank_examples():
    assert rank_recovered(np.zeros((3, 3)), 0) == (True, 0)
    assert rank_recovered(np.diag([1.0, 1e-12, 0.0]), 1, 1e-6) == (True, 1)
    assert rank_recovered(np.diag([1.0, 0.5]), 1, 0.1) == (False, 2)
    with pytest.raises(ValueError):
        rank_recovered(np.eye(2), 1, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1e6))
def test_rank_scale_invariant(seed, c):
    g = np.random.default_rng(seed)
    B = g.standard_normal((5, 2))
    L = B @ B.T
    assert rank_recovered(c * L, 2)[1] == rank_recovered(L, 2)[1]


def test_errors_examples(truth):
    est = Estimate.from_parts(truth.S_star, truth.L_star)
    e = estimation_errors(est, truth)
    assert e.op_norm_error == pytest.approx(0, abs=1e-12)
    assert e.frob_error_S == 0 and e.frob_error_L == 0
    S = truth.S_star.copy()
    S[0, 0] += 0.1
    assert estimation_errors(Estimate.from_parts(S, truth.L_star), truth).op_norm_error == pytest.approx(0.1)
    with pytest.raises(ValueError):
        estimation_errors(Estimate.from_parts(np.eye(3), np.zeros((3, 3))), truth)


def test_errors_recomputed(truth):
    s = sample_gaussian(truth.Sigma, 200, 1)
    est, _ = solve_lvglasso(s.Sigma_hat, RegParams(0.2, 0.5))
    rep = recovery_report(est, truth)
    D = est.S_hat - est.L_hat - truth.K_marg
    assert rep.op_norm_error == pytest.approx(np.abs(np.linalg.eigvalsh(D)).max(), rel=1e-12)
    assert rep.frob_error_S == pytest.approx(np.sqrt(np.sum((est.S_hat - truth.S_star) ** 2)), rel=1e-12)
    assert rep.frob_error_L == pytest.approx(np.sqrt(np.sum((est.L_hat - truth.L_star) ** 2)), rel=1e-12)


def test_loglog_examples():
    slope, _, r2 = fit_loglog_slope([(x, x ** -0.5) for x in (1, 4, 16)])
    assert slope == pytest.approx(-0.5) and r2 == pytest.approx(1)
    assert fit_loglog_slope([(1, 3), (2, 3), (5, 3)])[0] == pytest.approx(0)
    slope, intercept, _ = fit_loglog_slope([(1, 2), (math.e, 2 * math.e)])
    assert slope == pytest.approx(1) and intercept == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        fit_loglog_slope([(1, 1)])
    with pytest.raises(ValueError):
        fit_loglog_slope([(1, 1), (1, 2)])
    with pytest.raises(ValueError):
        fit_loglog_slope([(1, 1), (2, 0)])


def test_linear_fit():
    a, b, r2 = linear_fit([0, 1, 2], [1, 3, 5])
    assert (a, b, r2) == pytest.approx((2, 1, 1))

"""Closed-form proximal maps used by the sparse/low-rank solvers."""

import numpy as np

from .symkernel import as_sym


def _sym(A):
    return 0.5 * (A + A.T)


def soft_threshold(A, tau, penalize_diagonal=True):
    """Entrywise soft-thresholding ``sign(a) * max(|a| - tau, 0)``.

    With ``penalize_diagonal=False`` the diagonal is passed through unchanged.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    A = np.asarray(A, dtype=float)
    out = np.sign(A) * np.maximum(np.abs(A) - tau, 0.0)
    if not penalize_diagonal:
        np.fill_diagonal(out, np.diag(A))
    return _sym(out)


def prox_neglogdet(A, rho, Sigma_hat=None):
    r"""Minimize ``-logdet R + tr(Sigma_hat R) + (rho/2) ||R - A||_F^2``.

    With ``B = A - Sigma_hat / rho`` and ``B = U diag(b) U^T`` the minimizer is
    ``U diag(r) U^T`` where ``r_i = (b_i + sqrt(b_i^2 + 4/rho)) / 2``. The
    result is positive definite for any symmetric ``A``.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    B = np.asarray(A, dtype=float)
    if Sigma_hat is not None:
        B = B - np.asarray(Sigma_hat, dtype=float) / rho
    b, U = np.linalg.eigh(_sym(B))
    r = neglogdet_eigs(b, rho)
    return _sym((U * r) @ U.T)


def neglogdet_eigs(b, rho):
    """Scalar root of ``r - b = 1 / (rho r)``, evaluated without cancellation."""
    b = np.asarray(b, dtype=float)
    disc = np.sqrt(b * b + 4.0 / rho)
    # for b < 0 the textbook form loses digits; use r = (2/rho) / (disc - b)
    return np.where(b >= 0, 0.5 * (b + disc), (2.0 / rho) / (disc - b))


def prox_trace_psd(A, tau):
    """Minimize ``tau * tr(L) + 0.5 ||L - A||_F^2`` over ``L`` PSD.

    Shifts the spectrum of ``A`` down by ``tau`` and clips at zero.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    d, U = np.linalg.eigh(_sym(np.asarray(A, dtype=float)))
    d = np.maximum(d - tau, 0.0)
    keep = d > 0
    if not keep.any():
        return np.zeros_like(U)
    Uk = U[:, keep]
    return _sym((Uk * d[keep]) @ Uk.T)


def project_psd(A):
    return prox_trace_psd(as_sym(A), 0.0)

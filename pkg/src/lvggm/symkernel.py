"""Dense symmetric-matrix helpers shared by every other module.

Symmetric matrices are plain ``numpy.ndarray`` objects of shape ``(p, p)``.
:func:`as_sym` is the single ingestion point: it validates the input and
returns the symmetrized copy ``(A + A.T) / 2`` so downstream code can rely
on exact symmetry.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

PD_TOL = 1e-10


class SymMatrixError(ValueError):
    """Raised for malformed, non-finite or otherwise invalid matrix input."""


class EigenError(RuntimeError):
    """Raised when the symmetric eigensolver fails to converge."""


def as_sym(A, name="matrix"):
    """Validate ``A`` as a finite square matrix and return its symmetric part."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise SymMatrixError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SymMatrixError(f"{name} contains non-finite entries")
    return 0.5 * (A + A.T)


def check_symmetric(A, name="matrix", atol=1e-10):
    """Like :func:`as_sym` but refuse inputs that are visibly asymmetric."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise SymMatrixError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SymMatrixError(f"{name} contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > atol * scale:
        raise SymMatrixError(f"{name} is not symmetric")
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class EigDecomp:
    """Eigenvalues sorted descending with matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        U, d = self.eigenvectors, self.eigenvalues
        return (U * d) @ U.T


def eig_sym(A):
    """Symmetric eigendecomposition with eigenvalues in descending order.

    Backed by LAPACK ``syevd`` through :func:`numpy.linalg.eigh`
    (Householder tridiagonalization followed by an implicit QR /
    divide-and-conquer stage).

    Raises
    ------
    EigenError
        If LAPACK reports non-convergence.
    """
    A = check_symmetric(A)
    try:
        d, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"symmetric eigensolver did not converge: {exc}") from exc
    return EigDecomp(d[::-1].copy(), U[:, ::-1].copy())


@dataclass(frozen=True)
class MatrixNorms:
    frobenius: float
    operator: float
    elementwise_max_abs: float
    elementwise_l1: float


def matrix_norms(A):
    A = as_sym(A)
    return MatrixNorms(
        frobenius=float(np.linalg.norm(A, "fro")),
        operator=float(np.max(np.abs(np.linalg.eigvalsh(A)))),
        elementwise_max_abs=float(np.max(np.abs(A))),
        elementwise_l1=float(np.sum(np.abs(A))),
    )


def op_norm(A):
    """Spectral norm of a symmetric matrix (largest absolute eigenvalue)."""
    return float(np.max(np.abs(np.linalg.eigvalsh(as_sym(A)))))


def min_eig(A):
    return float(np.linalg.eigvalsh(as_sym(A))[0])


def is_pd(A, tol=PD_TOL):
    """True iff the smallest eigenvalue of ``A`` exceeds ``tol``."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return min_eig(A) > tol


@dataclass(frozen=True)
class SchurMarginal:
    S_star: np.ndarray
    L_star: np.ndarray
    K_marg: np.ndarray


def schur_marginal(K_full, observed):
    """Marginal precision of the ``observed`` coordinates of a Gaussian.

    Splits the Schur complement ``K_OO - K_OH K_HH^{-1} K_HO`` into the
    sparse part ``S_star = K_OO`` and the PSD low-rank part
    ``L_star = K_OH K_HH^{-1} K_HO`` (rank at most the number of hidden
    coordinates).
    """
    K_full = as_sym(K_full, "K_full")
    q = K_full.shape[0]
    obs = np.asarray(list(observed), dtype=int)
    if obs.size == 0 or len(set(obs.tolist())) != obs.size:
        raise SymMatrixError("observed indices must be non-empty and distinct")
    if obs.min() < 0 or obs.max() >= q:
        raise SymMatrixError("observed index out of range")
    if not is_pd(K_full, 0.0):
        raise SymMatrixError("K_full is not positive definite")
    hid = np.setdiff1d(np.arange(q), obs)
    S = K_full[np.ix_(obs, obs)].copy()
    if hid.size == 0:
        return SchurMarginal(S, np.zeros_like(S), S.copy())
    K_oh = K_full[np.ix_(obs, hid)]
    K_hh = K_full[np.ix_(hid, hid)]
    try:
        chol = np.linalg.cholesky(K_hh)
    except np.linalg.LinAlgError as exc:
        raise SymMatrixError("hidden block K_HH is singular") from exc
    # L = (C^{-1} K_HO)^T (C^{-1} K_HO) keeps L exactly PSD up to round-off
    W = np.linalg.solve(chol, K_oh.T)
    L = as_sym(W.T @ W)
    return SchurMarginal(S, L, S - L)


def spikiness(L):
    """Spikiness ratio ``p * max|L_ij| / ||L||_F``, which lies in ``[1, p]``."""
    L = as_sym(L)
    fro = np.linalg.norm(L, "fro")
    if fro == 0.0:
        raise ZeroDivisionError("spikiness is undefined for the zero matrix")
    return float(L.shape[0] * np.max(np.abs(L)) / fro)


# -- matrix text format ------------------------------------------------------
# First line: p.  Then p lines of p whitespace-separated decimals.


def format_matrix(A):
    A = as_sym(A)
    p = A.shape[0]
    lines = [str(p)]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in A)
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    tokens = text.split()
    if not tokens:
        raise SymMatrixError("empty matrix text")
    try:
        p = int(tokens[0])
    except ValueError as exc:
        raise SymMatrixError(f"first token must be the dimension, got {tokens[0]!r}") from exc
    if p < 1:
        raise SymMatrixError("dimension must be positive")
    values = tokens[1:]
    if len(values) != p * p:
        raise SymMatrixError(f"expected {p * p} entries for p={p}, found {len(values)}")
    try:
        A = np.array([float(v) for v in values]).reshape(p, p)
    except ValueError as exc:
        raise SymMatrixError(f"non-numeric matrix entry: {exc}") from exc
    return as_sym(A)


def write_matrix(path, A):
    Path(path).write_text(format_matrix(A))


def read_matrix(path):
    return parse_matrix(Path(path).read_text())

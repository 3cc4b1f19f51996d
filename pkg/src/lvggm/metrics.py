"""Recovery metrics: signed support, rank, norm errors and rate fits."""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .symkernel import op_norm

TOL_ZERO = 1e-6
RANK_REL_TOL = 1e-3

#: Column order of a flattened :class:`RecoveryReport`; stable API.
REPORT_FIELDS = (
    "exact_signed_support",
    "support_precision",
    "support_recall",
    "sign_errors",
    "rank_recovered",
    "effective_rank",
    "op_norm_error",
    "frob_error_S",
    "frob_error_L",
)


@dataclass(frozen=True)
class SupportMetrics:
    exact_signed_support: bool
    support_precision: float
    support_recall: float
    sign_errors: int


@dataclass(frozen=True)
class ErrorMetrics:
    op_norm_error: float
    frob_error_S: float
    frob_error_L: float


@dataclass(frozen=True)
class RecoveryReport:
    exact_signed_support: bool
    support_precision: float
    support_recall: float
    sign_errors: int
    rank_recovered: bool
    effective_rank: int
    op_norm_error: float
    frob_error_S: float
    frob_error_L: float

    def as_dict(self):
        return asdict(self)


def _check_same_shape(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A, B


def signed_support_metrics(S_hat, S_star, tol_zero=TOL_ZERO):
    """Compare off-diagonal sign patterns; ``|value| <= tol_zero`` counts as zero.

    Precision and recall are over unordered pairs and are 1 when their
    denominator is empty. A detected true edge with the wrong sign counts
    toward recall and adds one to ``sign_errors``.
    """
    if tol_zero < 0:
        raise ValueError("tol_zero must be non-negative")
    S_hat, S_star = _check_same_shape(S_hat, S_star)
    iu = np.triu_indices(S_hat.shape[0], 1)
    a, b = S_hat[iu], S_star[iu]
    sa = np.where(np.abs(a) > tol_zero, np.sign(a), 0.0)
    sb = np.where(np.abs(b) > tol_zero, np.sign(b), 0.0)
    det, true = sa != 0, sb != 0
    hits = int(np.sum(det & true))
    precision = hits / det.sum() if det.any() else 1.0
    recall = hits / true.sum() if true.any() else 1.0
    sign_errors = int(np.sum(det & true & (sa != sb)))
    return SupportMetrics(
        exact_signed_support=bool(np.array_equal(sa, sb)),
        support_precision=float(precision),
        support_recall=float(recall),
        sign_errors=sign_errors,
    )


def rank_recovered(L_hat, h, rel_tol=RANK_REL_TOL):
    """Count eigenvalues above ``rel_tol`` times the largest one; compare with ``h``."""
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    ev = np.linalg.eigvalsh(np.asarray(L_hat, dtype=float))
    top = ev[-1]
    rank = 0 if top <= 0 else int(np.sum(ev > rel_tol * top))
    return rank == h, rank


def estimation_errors(est, truth):
    """Operator-norm error of ``S_hat - L_hat`` against ``K_marg`` plus per-block Frobenius errors."""
    R, K = _check_same_shape(est.S_hat - est.L_hat, truth.K_marg)
    _check_same_shape(est.L_hat, truth.L_star)
    return ErrorMetrics(
        op_norm_error=op_norm(R - K),
        frob_error_S=float(np.linalg.norm(est.S_hat - truth.S_star, "fro")),
        frob_error_L=float(np.linalg.norm(est.L_hat - truth.L_star, "fro")),
    )


def recovery_report(est, truth, tol_zero=TOL_ZERO, rank_rel_tol=RANK_REL_TOL):
    sup = signed_support_metrics(est.S_hat, truth.S_star, tol_zero)
    ok, rank = rank_recovered(est.L_hat, truth.h, rank_rel_tol)
    err = estimation_errors(est, truth)
    return RecoveryReport(rank_recovered=ok, effective_rank=rank, **asdict(sup), **asdict(err))


def fit_loglog_slope(points):
    """Least-squares line through ``(log x, log y)``; returns ``(slope, intercept, r_squared)``."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(x <= 0 or y <= 0 or not (math.isfinite(x) and math.isfinite(y)) for x, y in pts):
        raise ValueError("coordinates must be positive and finite")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    if np.unique(lx).size < 2:
        raise ValueError("need at least two distinct x values")
    return linear_fit(lx, ly)


def linear_fit(x, y):
    """Ordinary least squares ``y ~ a x + b``; returns ``(a, b, r_squared)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2

"""Sparse-plus-low-rank precision estimation by operator splitting.

:func:`solve_lvglasso` minimizes

    -logdet(S - L) + tr(Sigma_hat (S - L)) + lambda_n * (gamma * ||S||_1 + tr(L))

subject to ``L >= 0`` and ``S - L > 0``. The splitting keeps one copy of
each of ``R = S - L``, ``S`` and ``L`` that is updated through its own
proximal map, and a second copy that is projected onto the linear subspace
``{R = S - L}``. That makes it a two-block ADMM (with guaranteed
convergence) in which every step is closed form.

:func:`solve_noisy_decomposition` handles the identity-operator observation
model ``Y = S - L + W`` by exact alternating minimization.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .prox import prox_neglogdet, prox_trace_psd, soft_threshold
from .symkernel import PD_TOL, SymMatrixError, check_symmetric


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER_REACHED = "MaxIterReached"


@dataclass(frozen=True)
class RegParams:
    """Overall penalty level ``lambda_n`` and sparse/low-rank trade-off ``gamma``."""

    lambda_n: float
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("lambda_n", "gamma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    max_iter: int = 5000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    penalize_diagonal: bool = True
    adaptive_rho: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not (self.tol_primal > 0 and self.tol_dual > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class Estimate:
    S_hat: np.ndarray
    L_hat: np.ndarray
    R_hat: np.ndarray

    @classmethod
    def from_parts(cls, S_hat, L_hat):
        S_hat = np.asarray(S_hat, dtype=float)
        L_hat = np.asarray(L_hat, dtype=float)
        return cls(S_hat, L_hat, S_hat - L_hat)


@dataclass
class SolverReport:
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    kkt_residual: float
    status: Status
    rho: float
    primal_history: list = field(default_factory=list, repr=False)
    note: str = ""

    @property
    def converged(self):
        return self.status is Status.CONVERGED


def _l1(S, penalize_diagonal):
    total = np.abs(S).sum()
    if not penalize_diagonal:
        total -= np.abs(np.diag(S)).sum()
    return float(total)


def lvglasso_objective(Sigma_hat, S, L, reg, penalize_diagonal=True):
    """Penalized negative Gaussian log-likelihood at ``(S, L)``; ``inf`` off the domain."""
    R = S - L
    sign, logdet = np.linalg.slogdet(R)
    if sign <= 0:
        return np.inf
    nll = -logdet + float(np.sum(Sigma_hat * R))
    return nll + reg.lambda_n * (reg.gamma * _l1(S, penalize_diagonal) + float(np.trace(L)))


def kkt_residual(Sigma_hat, est, reg, penalize_diagonal=True, low_rank=True):
    """Largest violation of the first-order optimality conditions.

    With ``G = Sigma_hat - R_hat^{-1}`` the conditions are

    * sparse block: ``G_ij = -lambda*gamma*sign(S_ij)`` where ``S_ij != 0`` and
      ``|G_ij| <= lambda*gamma`` where ``S_ij == 0`` (``G_ii = 0`` on an
      unpenalized diagonal);
    * low-rank block: ``M = lambda*I - G`` (the gradient in ``L``) is PSD and
      ``M L = 0``;
    * feasibility: ``L`` PSD.

    ``low_rank=False`` drops the low-rank conditions (graphical lasso).
    """
    Sigma_hat = np.asarray(Sigma_hat, dtype=float)
    R = est.R_hat
    try:
        chol = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise SymMatrixError("R_hat is not positive definite") from exc
    p = R.shape[0]
    Rinv = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(p)))
    G = Sigma_hat - 0.5 * (Rinv + Rinv.T)
    t = reg.lambda_n * reg.gamma
    S = est.S_hat
    nz = S != 0
    viol = np.where(nz, np.abs(G + t * np.sign(S)), np.maximum(np.abs(G) - t, 0.0))
    if not penalize_diagonal:
        viol[np.diag_indices(p)] = np.abs(np.diag(G))
    worst = float(viol.max())
    if low_rank:
        L = est.L_hat
        M = reg.lambda_n * np.eye(p) - G
        M = 0.5 * (M + M.T)
        worst = max(
            worst,
            -float(np.linalg.eigvalsh(M)[0]),
            float(np.linalg.norm(M @ L, "fro")),
            -float(np.linalg.eigvalsh(L)[0]),
        )
    return max(worst, 0.0)


def _admm(Sigma_hat, reg, cfg, low_rank):
    """Consensus ADMM shared by :func:`solve_lvglasso` and the graphical lasso.

    ``low_rank=False`` removes the low-rank block, leaving the constraint
    ``R = S``. Once both ADMM residuals fall below their tolerances the
    KKT residual of the extracted estimate is checked every few iterations;
    the run converges when it is at most ``max(tol_primal, tol_dual)``.
    """
    p = Sigma_hat.shape[0]
    nblocks = 3 if low_rank else 2
    tau_s = reg.lambda_n * reg.gamma
    tau_l = reg.lambda_n
    kkt_tol = max(cfg.tol_primal, cfg.tol_dual)
    eps_pri = cfg.tol_primal * np.sqrt(p)
    eps_dual = cfg.tol_dual * np.sqrt(p)
    rho = cfg.rho

    Rz = np.diag(1.0 / (np.diag(Sigma_hat) + reg.lambda_n))
    Sz = Rz.copy()
    Lz = np.zeros((p, p))
    Ur = np.zeros((p, p))
    Us = np.zeros((p, p))
    Ul = np.zeros((p, p))
    L = Lz

    history = []
    est, note, kkt = None, "", np.inf
    next_check = 0
    status = Status.MAX_ITER_REACHED
    it = 0
    for it in range(1, cfg.max_iter + 1):
        R = prox_neglogdet(Rz - Ur, rho, Sigma_hat)
        S = soft_threshold(Sz - Us, tau_s / rho, cfg.penalize_diagonal)
        if low_rank:
            L = prox_trace_psd(Lz - Ul, tau_l / rho)

        # project (R + Ur, S + Us, L + Ul) onto {R = S - L}
        a, b = R + Ur, S + Us
        if low_rank:
            c = L + Ul
            gap = (a - b + c) / nblocks
        else:
            gap = (a - b) / nblocks
        Rz_new, Sz_new = a - gap, b + gap
        dz = np.sum((Rz_new - Rz) ** 2) + np.sum((Sz_new - Sz) ** 2)
        Rz, Sz = Rz_new, Sz_new
        dR, dS = R - Rz, S - Sz
        Ur += dR
        Us += dS
        sq = np.sum(dR * dR) + np.sum(dS * dS)
        if low_rank:
            Lz_new = c - gap
            dz += np.sum((Lz_new - Lz) ** 2)
            Lz = Lz_new
            dL = L - Lz
            Ul += dL
            sq += np.sum(dL * dL)
        r_norm = float(np.sqrt(sq))
        s_norm = float(rho * np.sqrt(dz))
        history.append(float(np.linalg.norm(R - S + L, "fro")))

        if r_norm <= eps_pri and s_norm <= eps_dual and it >= next_check:
            est, note = _extract(S, L, R)
            kkt = kkt_residual(Sigma_hat, est, reg, cfg.penalize_diagonal, low_rank)
            if kkt <= kkt_tol:
                status = Status.CONVERGED
                break
            next_check = it + 10

        if cfg.adaptive_rho and it % 10 == 0:
            if r_norm > 10.0 * s_norm:
                rho *= 2.0
                Ur, Us, Ul = Ur / 2.0, Us / 2.0, Ul / 2.0
            elif s_norm > 10.0 * r_norm:
                rho /= 2.0
                Ur, Us, Ul = Ur * 2.0, Us * 2.0, Ul * 2.0

    if status is not Status.CONVERGED:
        est, note = _extract(S, L, R)
        kkt = kkt_residual(Sigma_hat, est, reg, cfg.penalize_diagonal, low_rank)
    obj = lvglasso_objective(Sigma_hat, est.S_hat, est.L_hat, reg, cfg.penalize_diagonal)
    report = SolverReport(
        objective=float(obj),
        iterations=it,
        primal_residual=r_norm,
        dual_residual=s_norm,
        kkt_residual=float(kkt),
        status=status,
        rho=rho,
        primal_history=history,
        note=note,
    )
    return est, report


def _extract(S, L, R_block):
    """Return an Estimate with ``R_hat = S_hat - L_hat`` exactly.

    The sparse and low-rank prox copies carry exact zeros and an exact PSD
    spectrum, so they are preferred. If their difference is not PD the
    log-det copy is kept instead and ``S_hat := R_block + L_hat``.
    """
    est = Estimate.from_parts(S, L)
    if np.linalg.eigvalsh(est.R_hat)[0] > PD_TOL:
        return est, ""
    return Estimate.from_parts(R_block + L, L), "S_hat reconciled from the log-det block"


def _validate_cov(Sigma_hat):
    Sigma_hat = check_symmetric(Sigma_hat, "Sigma_hat")
    if np.linalg.eigvalsh(Sigma_hat)[0] < -1e-8 * max(1.0, np.abs(Sigma_hat).max()):
        raise SymMatrixError("Sigma_hat is not positive semidefinite")
    return Sigma_hat


def solve_lvglasso(Sigma_hat, reg, cfg=None):
    """Latent-variable graphical lasso.

    Parameters
    ----------
    Sigma_hat : array_like, shape (p, p)
        Empirical covariance of the observed variables.
    reg : RegParams
        Penalty level and sparse/low-rank trade-off.
    cfg : SolverConfig, optional
        Splitting parameters; defaults to ``SolverConfig()``.

    Returns
    -------
    est : Estimate
        ``(S_hat, L_hat)`` with ``R_hat = S_hat - L_hat`` positive definite.
    report : SolverReport
        Objective, iteration count, residuals and status. Hitting
        ``max_iter`` is reported through ``status``; it is not an error.
    """
    Sigma_hat = _validate_cov(Sigma_hat)
    return _admm(Sigma_hat, reg, cfg or SolverConfig(), low_rank=True)


def solve_glasso_core(Sigma_hat, lam, cfg=None):
    """Same splitting with the low-rank block switched off."""
    Sigma_hat = _validate_cov(Sigma_hat)
    return _admm(Sigma_hat, RegParams(lam, 1.0), cfg or SolverConfig(), low_rank=False)


def noisy_kkt_residual(Y, est, lambda_s, lambda_l, penalize_diagonal=True):
    """Optimality violation for ``0.5||Y - (S - L)||^2 + lambda_s||S||_1 + lambda_l tr(L)``."""
    G = est.S_hat - est.L_hat - Y
    S = est.S_hat
    nz = S != 0
    viol = np.where(nz, np.abs(G + lambda_s * np.sign(S)), np.maximum(np.abs(G) - lambda_s, 0.0))
    if not penalize_diagonal:
        viol[np.diag_indices(S.shape[0])] = np.abs(np.diag(G))
    M = lambda_l * np.eye(S.shape[0]) - G
    M = 0.5 * (M + M.T)
    return max(
        float(viol.max()),
        -float(np.linalg.eigvalsh(M)[0]),
        float(np.linalg.norm(M @ est.L_hat, "fro")),
        -float(np.linalg.eigvalsh(est.L_hat)[0]),
        0.0,
    )


def solve_noisy_decomposition(Y, lambda_s, lambda_l, cfg=None):
    """Sparse plus PSD low-rank split of a noisy symmetric observation ``Y``.

    Minimizes ``0.5||Y - (S - L)||_F^2 + lambda_s||S||_1 + lambda_l tr(L)``
    over ``L`` PSD by exact block minimization: ``S`` is a soft-threshold
    of ``Y + L`` and ``L`` is the trace prox of ``S - Y``. ``R_hat`` is not
    required to be positive definite here.
    """
    Y = check_symmetric(Y, "Y")
    if not (lambda_s > 0 and lambda_l > 0):
        raise ValueError("penalties must be positive")
    cfg = cfg or SolverConfig()
    p = Y.shape[0]
    tol = max(cfg.tol_primal, cfg.tol_dual)
    S = np.zeros((p, p))
    L = np.zeros((p, p))
    history = []
    status = Status.MAX_ITER_REACHED
    est, kkt = None, np.inf
    change = np.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        S_new = soft_threshold(Y + L, lambda_s, cfg.penalize_diagonal)
        L_new = prox_trace_psd(S_new - Y, lambda_l)
        change = float(np.sqrt(np.sum((S_new - S) ** 2) + np.sum((L_new - L) ** 2)))
        S, L = S_new, L_new
        history.append(change)
        if change <= tol * np.sqrt(p):
            est = Estimate.from_parts(S, L)
            kkt = noisy_kkt_residual(Y, est, lambda_s, lambda_l, cfg.penalize_diagonal)
            if kkt <= tol:
                status = Status.CONVERGED
                break
    if status is not Status.CONVERGED:
        est = Estimate.from_parts(S, L)
        kkt = noisy_kkt_residual(Y, est, lambda_s, lambda_l, cfg.penalize_diagonal)
    obj = (0.5 * float(np.sum((Y - est.R_hat) ** 2))
           + lambda_s * _l1(S, cfg.penalize_diagonal) + lambda_l * float(np.trace(L)))
    report = SolverReport(
        objective=obj,
        iterations=it,
        primal_residual=change,
        dual_residual=0.0,
        kkt_residual=float(kkt),
        status=status,
        rho=cfg.rho,
        primal_history=history,
    )
    return est, report

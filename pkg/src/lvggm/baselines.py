"""Comparison estimators without a low-rank component.

* :func:`glasso`: l1-penalized Gaussian MLE, solved by the same splitting
  as :func:`lvggm.solver.solve_lvglasso` with the low-rank block removed.
* :func:`neighborhood_select`: node-wise Lasso regressions combined with
  an AND / OR rule.

Lasso objective convention, used everywhere:
``(1 / (2n)) ||y - X beta||^2 + lam ||beta||_1``, so ``beta = 0`` exactly
when ``lam >= ||X^T y / n||_inf``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .solver import SolverConfig, solve_glasso_core


@dataclass(frozen=True)
class LassoProblem:
    design: np.ndarray
    response: np.ndarray
    lam: float

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.design, dtype=float))
        y = np.asarray(self.response, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"design has {X.shape[0]} rows but response has {y.shape[0]}")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)


class LassoFit(NamedTuple):
    coef: np.ndarray
    n_sweeps: int
    converged: bool


def _lasso_gram(G, c, lam, tol, max_iter):
    """Cyclic coordinate descent on ``0.5 b^T G b - c^T b + lam ||b||_1``.

    ``G = X^T X / n`` and ``c = X^T y / n``. Sweeps alternate between the
    full coordinate set and the current active set; convergence is
    declared when a full sweep leaves the KKT violation below ``tol``.
    """
    q = c.shape[0]
    beta = np.zeros(q)
    grad = c.copy()  # X^T (y - X beta) / n
    diag = np.diag(G).copy()
    usable = diag > 0
    sweeps = 0

    def sweep(idx):
        delta = 0.0
        for j in idx:
            if not usable[j]:
                continue
            old = beta[j]
            z = grad[j] + diag[j] * old
            new = np.sign(z) * max(abs(z) - lam, 0.0) / diag[j]
            if new != old:
                grad[:] -= G[:, j] * (new - old)
                beta[j] = new
                delta = max(delta, abs(new - old) * np.sqrt(diag[j]))
        return delta

    all_idx = range(q)
    while sweeps < max_iter:
        sweep(all_idx)
        sweeps += 1
        if _kkt_violation(beta, grad, lam) <= tol:
            return LassoFit(beta, sweeps, True)
        active = np.flatnonzero(beta)
        while sweeps < max_iter:
            d = sweep(active)
            sweeps += 1
            if d <= 0.1 * tol:
                break
    return LassoFit(beta, sweeps, _kkt_violation(beta, grad, lam) <= tol)


def _kkt_violation(beta, grad, lam):
    nz = beta != 0
    v = np.where(nz, np.abs(grad - lam * np.sign(beta)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(v.max()) if v.size else 0.0


def lasso_cd(prob, tol=1e-8, max_iter=10000):
    """Solve a :class:`LassoProblem` by cyclic coordinate descent.

    Returns a :class:`LassoFit`. Running out of sweeps is reported through
    ``converged=False``; the coefficients are still returned.
    """
    X, y = prob.design, prob.response
    n = X.shape[0]
    G = X.T @ X / n
    c = X.T @ y / n
    return _lasso_gram(G, c, prob.lam, tol, max_iter)


def lasso_kkt_violation(prob, coef):
    X, y = prob.design, prob.response
    grad = X.T @ (y - X @ coef) / X.shape[0]
    return _kkt_violation(np.asarray(coef, dtype=float), grad, prob.lam)


@dataclass(frozen=True)
class EdgeSet:
    """Undirected edges ``(i, j)`` with ``i < j``; ``signs`` holds the inferred sign of K_ij."""

    p: int
    edges: frozenset
    signs: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for i, j in self.edges:
            if i == j or not (0 <= i < self.p and 0 <= j < self.p):
                raise ValueError(f"invalid edge {(i, j)} for p={self.p}")

    def as_signed_matrix(self):
        M = np.zeros((self.p, self.p))
        for e in self.edges:
            s = self.signs.get(e, 1.0)
            M[e] = M[e[::-1]] = s
        return M


def neighborhood_select(samples, lam, rule="AND", tol=1e-8, max_iter=10000, jobs=1, standardize=True):
    """Graph estimate from node-wise Lasso regressions.

    Each column is regressed on all the others at penalty ``lam``. With
    ``standardize=True`` the columns are first scaled to unit second moment,
    so ``lam`` is on the correlation scale; supports and signs do not depend
    on the column scales otherwise. An edge
    is kept when both directional coefficients are nonzero (``"AND"``) or
    either one is (``"OR"``). The regression coefficient of node ``k`` for
    node ``j`` is ``-K_jk / K_jj``, so the precision sign is minus the sign
    of the coefficients.

    Parameters
    ----------
    samples : SampleSet or array_like
        Either a :class:`~lvggm.modelgen.SampleSet` or a raw ``n x p`` data
        matrix with known zero mean.
    """
    if rule not in ("AND", "OR"):
        raise ValueError("rule must be 'AND' or 'OR'")
    data = getattr(samples, "data", samples)
    X = np.atleast_2d(np.asarray(data, dtype=float))
    n, p = X.shape
    if n < 2:
        raise ValueError("neighborhood selection needs at least 2 samples")
    gram = X.T @ X / n
    if standardize:
        scale = np.sqrt(np.diag(gram))
        scale[scale == 0] = 1.0
        gram = gram / np.outer(scale, scale)

    def fit(j):
        others = np.delete(np.arange(p), j)
        G = gram[np.ix_(others, others)]
        c = gram[others, j]
        coef = _lasso_gram(G, c, lam, tol, max_iter).coef
        full = np.zeros(p)
        full[others] = coef
        return full

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            B = np.array(list(ex.map(fit, range(p))))
    else:
        B = np.array([fit(j) for j in range(p)])

    nz = B != 0
    keep = (nz & nz.T) if rule == "AND" else (nz | nz.T)
    edges, signs = set(), {}
    for i, j in zip(*np.nonzero(np.triu(keep, 1))):
        e = (int(i), int(j))
        edges.add(e)
        signs[e] = -float(np.sign(B[i, j] + B[j, i]) or np.sign(B[i, j] or B[j, i]))
    return EdgeSet(p=p, edges=frozenset(edges), signs=signs)


def glasso(Sigma_hat, lam, penalize_diagonal=True, cfg=None):
    """l1-penalized Gaussian MLE ``min -logdet K + tr(Sigma_hat K) + lam ||K||_1``.

    Returns ``(K_hat, report)``.
    """
    cfg = replace(cfg or SolverConfig(), penalize_diagonal=penalize_diagonal)
    est, report = solve_glasso_core(Sigma_hat, lam, cfg)
    return est.S_hat, report

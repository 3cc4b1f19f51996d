"""Latent-variable Gaussian graphical model selection by sparse plus low-rank decomposition."""

__version__ = "0.1.0"

from .symkernel import (  # noqa: F401
    EigDecomp,
    EigenError,
    SymMatrixError,
    eig_sym,
    is_pd,
    matrix_norms,
    schur_marginal,
    spikiness,
)
from .prox import prox_neglogdet, prox_trace_psd, project_psd, soft_threshold  # noqa: F401
from .solver import (  # noqa: F401
    Estimate,
    RegParams,
    SolverConfig,
    SolverReport,
    Status,
    kkt_residual,
    solve_lvglasso,
    solve_noisy_decomposition,
)
from .modelgen import ModelSpec, derive_seed, generate_ground_truth, sample_gaussian  # noqa: F401
from .baselines import glasso, lasso_cd, neighborhood_select  # noqa: F401
from .metrics import recovery_report  # noqa: F401

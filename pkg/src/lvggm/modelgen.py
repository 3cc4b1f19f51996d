"""Synthetic latent-variable Gaussian models with known ground truth.

The full ``(p + h) x (p + h)`` precision matrix couples a sparse graph on
the ``p`` observed nodes with ``h`` latent nodes. Marginalizing the latent
block gives ``K = S* - L*`` with ``S*`` sparse and ``L*`` of rank ``h``.

All randomness goes through :func:`rng`, a Philox (counter-based) generator
seeded by a 64-bit integer. :func:`derive_seed` hashes arbitrary keys into
such seeds so sweeps can be run in any order or in parallel.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .symkernel import SymMatrixError, as_sym, read_matrix, schur_marginal, write_matrix

GRAPHS = ("chain", "grid", "erdos_renyi")
DIAGONALS = ("shift", "dominant")
MAX_BOOST_ESCALATIONS = 10
MAX_COUPLING_REDRAWS = 20


class ModelError(RuntimeError):
    pass


def derive_seed(*keys):
    """Deterministic 64-bit seed from any tuple of str/int/float keys."""
    h = hashlib.blake2b(repr(keys).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def rng(seed):
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


@dataclass(frozen=True)
class ModelSpec:
    p: int
    h: int = 1
    graph: str = "chain"
    max_degree: int = 3
    edge_magnitude: tuple = (0.3, 0.3)
    latent_coupling: float = 0.2
    diagonal_boost: float = 0.3
    diagonal: str = "shift"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "edge_magnitude", tuple(float(v) for v in self.edge_magnitude))
        s_min, s_max = self.edge_magnitude
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.h < 0:
            raise ValueError("h must be non-negative")
        if self.graph not in GRAPHS:
            raise ValueError(f"graph must be one of {GRAPHS}, got {self.graph!r}")
        if not 0 < s_min <= s_max:
            raise ValueError("edge_magnitude must satisfy 0 < s_min <= s_max")
        if self.diagonal not in DIAGONALS:
            raise ValueError(f"diagonal must be one of {DIAGONALS}, got {self.diagonal!r}")
        if self.diagonal == "shift" and not self.diagonal_boost > 0:
            raise ValueError("shift diagonal needs diagonal_boost > 0")
        if self.graph == "erdos_renyi" and self.max_degree < 1:
            raise ValueError("erdos_renyi needs max_degree >= 1")

    @property
    def degree(self):
        """Degree bound implied by the graph family."""
        return {"chain": 2, "grid": 4}.get(self.graph, self.max_degree)

    def to_dict(self):
        d = asdict(self)
        d["edge_magnitude"] = list(self.edge_magnitude)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    K_full: np.ndarray
    S_star: np.ndarray
    L_star: np.ndarray
    K_marg: np.ndarray
    Sigma: np.ndarray
    edges: frozenset
    h: int
    spec: ModelSpec = field(compare=False)

    @property
    def p(self):
        return self.S_star.shape[0]


@dataclass(frozen=True)
class SampleSet:
    n: int
    data: np.ndarray
    Sigma_hat: np.ndarray
    seed: int


def _graph_edges(spec, g):
    p = spec.p
    if spec.graph == "chain":
        return [(i, i + 1) for i in range(p - 1)]
    if spec.graph == "grid":
        rows = max(1, int(math.isqrt(p)))
        cols = math.ceil(p / rows)
        edges = []
        for i in range(p):
            r, c = divmod(i, cols)
            if c + 1 < cols and i + 1 < p:
                edges.append((i, i + 1))
            if i + cols < p:
                edges.append((i, i + cols))
        return edges
    # Erdos-Renyi with edge probability d/(p-1), pairs visited in random
    # order and rejected once either endpoint reaches degree d.
    d = spec.max_degree
    q = min(1.0, d / (p - 1))
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    order = g.permutation(len(pairs))
    accept = g.random(len(pairs)) < q
    deg = np.zeros(p, dtype=int)
    edges = []
    for idx in order:
        if not accept[idx]:
            continue
        i, j = pairs[idx]
        if deg[i] < d and deg[j] < d:
            edges.append((i, j))
            deg[i] += 1
            deg[j] += 1
    return sorted(edges)


def _latent_block(spec, g):
    p, h = spec.p, spec.h
    K_oh = np.zeros((p, h))
    m = math.ceil(0.8 * p)
    for j in range(h):
        nodes = g.choice(p, size=m, replace=False)
        K_oh[nodes, j] = spec.latent_coupling * g.choice([-1.0, 1.0], size=m)
    return K_oh


def generate_ground_truth(spec):
    """Build a seeded latent-variable model.

    The observed graph gets edge weights with magnitudes drawn uniformly
    from ``spec.edge_magnitude`` and random signs. Each latent node couples
    to a random ``ceil(0.8 p)`` subset of observed nodes with weights
    ``+-latent_coupling``. The diagonal is then filled in one of two ways:

    * ``"shift"``: one common value chosen so the smallest eigenvalue of
      the full precision matrix equals ``diagonal_boost``;
    * ``"dominant"``: each row gets its off-diagonal l1 mass plus
      ``diagonal_boost`` (diagonal dominance, weaker partial correlations).

    If the result is not PD (possible for a negative dominant boost) the
    boost is raised additively, ``1e-3 * 2**k`` at step ``k``.

    Raises
    ------
    ModelError
        If ``h > p``, if a rank-``h`` coupling cannot be drawn, or if the
        matrix is still not PD after repeated boost escalation.
    """
    if spec.h > spec.p and spec.latent_coupling != 0:
        raise ModelError(f"rank of L* cannot reach h={spec.h} with p={spec.p}")
    g = rng(spec.seed)
    p, h = spec.p, spec.h
    edges = _graph_edges(spec, g)
    s_min, s_max = spec.edge_magnitude
    K = np.zeros((p + h, p + h))
    for i, j in edges:
        w = g.uniform(s_min, s_max) * g.choice([-1.0, 1.0])
        K[i, j] = K[j, i] = w

    if h:
        for _ in range(MAX_COUPLING_REDRAWS):
            K_oh = _latent_block(spec, g)
            if spec.latent_coupling == 0 or np.linalg.matrix_rank(K_oh) == h:
                break
        else:
            raise ModelError(f"could not draw a rank-{h} latent coupling")
        K[:p, p:] = K_oh
        K[p:, :p] = K_oh.T

    if spec.diagonal == "dominant":
        base = np.abs(K).sum(axis=1)
    else:
        base = np.full(p + h, -np.linalg.eigvalsh(K)[0])
    boost = spec.diagonal_boost
    for k in range(MAX_BOOST_ESCALATIONS + 1):
        K_full = K.copy()
        np.fill_diagonal(K_full, base + boost)
        if np.linalg.eigvalsh(K_full)[0] > 1e-10:
            break
        boost += 1e-3 * 2**k
    else:
        raise ModelError(
            f"K_full not positive definite after {MAX_BOOST_ESCALATIONS} boost escalations "
            f"(last boost {boost:g}, min eigenvalue {np.linalg.eigvalsh(K_full)[0]:.3e})"
        )

    parts = schur_marginal(K_full, range(p))
    Sigma = as_sym(np.linalg.inv(parts.K_marg))
    return GroundTruth(
        K_full=K_full,
        S_star=parts.S_star,
        L_star=parts.L_star,
        K_marg=parts.K_marg,
        Sigma=Sigma,
        edges=frozenset(edges),
        h=h,
        spec=spec,
    )


def sample_gaussian(Sigma, n, seed):
    """Draw ``n`` i.i.d. rows from ``N(0, Sigma)`` as ``Z @ chol(Sigma).T``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    Sigma = as_sym(Sigma, "Sigma")
    try:
        C = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise SymMatrixError("Sigma is not positive definite") from exc
    Z = rng(seed).standard_normal((n, Sigma.shape[0]))
    data = Z @ C.T
    return SampleSet(n=n, data=data, Sigma_hat=empirical_covariance(data), seed=seed)


def empirical_covariance(data, center=False):
    """``X^T X / n``; with ``center=True`` columns are demeaned first."""
    X = np.atleast_2d(np.asarray(data, dtype=float))
    n = X.shape[0]
    if n < 1 or (center and n < 2):
        raise ValueError(f"need at least {2 if center else 1} samples, got {n}")
    if center:
        X = X - X.mean(axis=0)
    return as_sym(X.T @ X / n)


@dataclass(frozen=True)
class Perturbation:
    K_tilde: np.ndarray
    z: np.ndarray
    E: np.ndarray


def perturb_sparse_lowrank(K, delta, k, seed):
    """Add ``delta * z z^T`` for a unit vector ``z`` with exactly ``k`` nonzeros."""
    K = as_sym(K, "K")
    p = K.shape[0]
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}]")
    g = rng(seed)
    z = np.zeros(p)
    idx = g.choice(p, size=k, replace=False)
    vals = g.standard_normal(k)
    # keep entries away from zero so the support is exactly k
    vals = np.sign(vals) * (0.5 + np.abs(vals))
    z[idx] = vals
    z /= np.linalg.norm(z)
    E = np.outer(z, z)
    K_tilde = K + delta * E
    if delta < 0:
        lo = np.linalg.eigvalsh(K_tilde)[0]
        if lo <= 0:
            raise SymMatrixError(f"perturbed matrix is not PD (min eigenvalue {lo:.3e})")
    return Perturbation(K_tilde=K_tilde, z=z, E=E)


# -- export ------------------------------------------------------------------

_EXPORT_FILES = ("K_full", "S_star", "L_star", "Sigma")


def export_ground_truth(truth, directory):
    """Write ``K_full.txt``, ``S_star.txt``, ``L_star.txt``, ``Sigma.txt`` and ``manifest.json``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name in _EXPORT_FILES:
        write_matrix(out / f"{name}.txt", getattr(truth, name))
    manifest = {
        "spec": truth.spec.to_dict(),
        "h": truth.h,
        "edges": sorted([list(e) for e in truth.edges]),
        "files": {name: f"{name}.txt" for name in _EXPORT_FILES},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_ground_truth(directory):
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text())
    mats = {name: read_matrix(src / manifest["files"][name]) for name in _EXPORT_FILES}
    return GroundTruth(
        K_full=mats["K_full"],
        S_star=mats["S_star"],
        L_star=mats["L_star"],
        K_marg=mats["S_star"] - mats["L_star"],
        Sigma=mats["Sigma"],
        edges=frozenset(tuple(e) for e in manifest["edges"]),
        h=manifest["h"],
        spec=ModelSpec.from_dict(manifest["spec"]),
    )

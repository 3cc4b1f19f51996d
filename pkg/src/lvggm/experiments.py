"""Seeded experiment sweeps over sample size, dimension, signal and perturbation.

A sweep is the cartesian product of the grid axes (``n``, ``p``, ``h``,
``s_min``, ``delta``) times ``trials`` repetitions. Every (cell, trial)
pair is an independent task with seeds hashed from ``base_seed`` and the
cell coordinates, so results do not depend on execution order or on the
number of worker processes. Rows are merged by sorting on :data:`SORT_KEY`.

Seeds ignore ``n`` for the model and ``delta`` entirely: every cell of a
trial shares one ground-truth model, and a perturbation sweep perturbs the
same model and direction at every ``delta``.
"""

import csv
import io
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import glasso, neighborhood_select
from .metrics import REPORT_FIELDS, fit_loglog_slope, linear_fit, recovery_report, signed_support_metrics
from .modelgen import (
    ModelSpec,
    derive_seed,
    empirical_covariance,
    generate_ground_truth,
    perturb_sparse_lowrank,
    sample_gaussian,
)
from .solver import Estimate, RegParams, SolverConfig, solve_lvglasso
from .symkernel import as_sym

log = logging.getLogger(__name__)

KINDS = ("scaling", "phase", "minsignal", "perturbation", "baseline_compare")
METHODS = ("lvglasso", "glasso", "neighborhood")
AXES = ("n", "p", "h", "s_min", "delta")

CSV_HEADER = (
    "experiment", "p", "h", "n", "d", "s_min", "delta", "trial", "seed", "method",
    "lambda", "gamma", *REPORT_FIELDS, "iterations", "wall_ms",
)
SORT_KEY = ("experiment", "p", "h", "n", "d", "s_min", "delta", "trial", "method")


class ExperimentError(ValueError):
    pass


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class RegRule:
    """How ``(lambda_n, gamma)`` is chosen for the latent-variable estimator.

    ``fixed``: ``lambda_n = value``. ``theory_scaled``: ``lambda_n = c * sqrt(p / n)``.
    ``holdout``: the grid value maximizing held-out Gaussian log-likelihood
    on the last ``fraction`` of the rows.

    A ``theory_scaled`` rule with a non-empty ``grid`` falls back to holdout
    selection over that grid when the solve at the theory value does not
    converge.
    """

    kind: str = "theory_scaled"
    gamma: float = 1.0
    value: float = None
    c: float = 1.0
    grid: tuple = ()
    fraction: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if self.kind not in ("fixed", "theory_scaled", "holdout"):
            raise ExperimentError(f"unknown reg rule {self.kind!r}")
        if self.kind == "fixed" and self.value is None:
            raise ExperimentError("fixed rule needs a value")
        if self.kind == "holdout" and (not self.grid or not 0 < self.fraction < 1):
            raise ExperimentError("holdout rule needs a non-empty grid and 0 < fraction < 1")

    @classmethod
    def fixed(cls, lam, gamma=1.0):
        return cls("fixed", gamma=gamma, value=lam)

    @classmethod
    def theory_scaled(cls, c=1.0, gamma=1.0):
        return cls("theory_scaled", gamma=gamma, c=c)

    @classmethod
    def holdout(cls, grid, fraction=0.25, gamma=1.0):
        return cls("holdout", gamma=gamma, grid=tuple(grid), fraction=fraction)

    def to_dict(self):
        d = {"kind": self.kind, "gamma": self.gamma}
        if self.kind == "fixed":
            d["value"] = self.value
        elif self.kind == "theory_scaled":
            d["c"] = self.c
            if self.grid:
                d.update(grid=list(self.grid), fraction=self.fraction)
        else:
            d.update(grid=list(self.grid), fraction=self.fraction)
        return d


def holdout_score(train, test, lam, gamma, cfg=None):
    """Held-out Gaussian log-likelihood (up to constants) of the fit on ``train``."""
    est, _ = solve_lvglasso(empirical_covariance(train), RegParams(lam, gamma), cfg)
    S_test = empirical_covariance(test)
    _, logdet = np.linalg.slogdet(est.R_hat)
    return float(logdet - np.sum(S_test * est.R_hat))


def choose_lambda(rule, p, n, data=None, cfg=None):
    """Return ``(lambda_n, gamma)`` under ``rule``."""
    if p < 1 or n < 1:
        raise ExperimentError("p and n must be positive")
    if rule.kind == "fixed":
        return float(rule.value), rule.gamma
    if rule.kind == "theory_scaled":
        return rule.c * math.sqrt(p / n), rule.gamma
    if data is None:
        raise ExperimentError("holdout selection needs sample data")
    X = np.asarray(data, dtype=float)
    n_test = max(1, int(round(rule.fraction * X.shape[0])))
    if X.shape[0] - n_test < 1:
        raise ExperimentError("not enough rows for a holdout split")
    train, test = X[:-n_test], X[-n_test:]
    scores = [holdout_score(train, test, lam, rule.gamma, cfg) for lam in rule.grid]
    return rule.grid[int(np.argmax(scores))], rule.gamma


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep. ``grid`` maps axis names (``n``, ``p``, ``h``, ``s_min``,
    ``delta``) to value lists; axes left out are taken from ``model``.

    ``population=True`` feeds the exact covariance of the (perturbed) model
    to the estimators instead of samples; ``n`` is then reported as 0.
    ``baseline_c`` sets the glasso / neighborhood penalty
    ``baseline_c * sqrt(log p / n)`` (neighborhood selection works on
    standardized columns). With ``record_timing=False`` the
    ``wall_ms`` column is written as 0 so reruns are byte-identical.
    """

    kind: str
    model: ModelSpec
    grid: dict
    trials: int = 1
    base_seed: int = 0
    reg_rule: RegRule = field(default_factory=RegRule)
    output_path: str = None
    format: str = "csv"
    experiment: str = None
    methods: tuple = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    population: bool = False
    perturb_k: int = 3
    small_delta_max: float = 0.1
    baseline_c: float = 2.0
    neighborhood_rule: str = "AND"
    record_timing: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExperimentError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.trials < 1:
            raise ExperimentError("trials must be at least 1")
        grid = {}
        for axis, values in dict(self.grid).items():
            if axis not in AXES:
                raise ExperimentError(f"unknown grid axis {axis!r}")
            values = list(values)
            if not values:
                raise ExperimentError(f"grid axis {axis!r} is empty")
            grid[axis] = values
        if not grid:
            raise ExperimentError("grid must have at least one axis")
        object.__setattr__(self, "grid", grid)
        methods = self.methods or (
            METHODS if self.kind == "baseline_compare" else ("lvglasso",)
        )
        if any(m not in METHODS for m in methods):
            raise ExperimentError(f"methods must be drawn from {METHODS}")
        object.__setattr__(self, "methods", tuple(methods))
        if self.experiment is None:
            object.__setattr__(self, "experiment", self.kind)
        if self.format not in ("csv", "json"):
            raise ExperimentError("format must be csv or json")
        if self.kind == "perturbation" and 0.0 not in [float(v) for v in grid.get("delta", [])]:
            raise ExperimentError("perturbation grid must include delta = 0")
        if not self.population and "n" not in grid:
            raise ExperimentError("sampled experiments need an 'n' grid axis")

    # JSON mirror ------------------------------------------------------------

    def to_dict(self):
        return {
            "kind": self.kind,
            "experiment": self.experiment,
            "model": self.model.to_dict(),
            "grid": self.grid,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "reg_rule": self.reg_rule.to_dict(),
            "output_path": self.output_path,
            "format": self.format,
            "methods": list(self.methods),
            "solver": asdict(self.solver),
            "population": self.population,
            "perturb_k": self.perturb_k,
            "small_delta_max": self.small_delta_max,
            "baseline_c": self.baseline_c,
            "neighborhood_rule": self.neighborhood_rule,
            "record_timing": self.record_timing,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ExperimentError(f"unknown config fields: {sorted(unknown)}")
        if "model" not in d or "kind" not in d or "grid" not in d:
            raise ExperimentError("config needs 'kind', 'model' and 'grid'")
        d["model"] = ModelSpec.from_dict(d["model"])
        if "reg_rule" in d:
            d["reg_rule"] = RegRule(**d["reg_rule"])
        if "solver" in d:
            d["solver"] = SolverConfig(**d["solver"])
        if d.get("methods") is not None:
            d["methods"] = tuple(d["methods"])
        return cls(**d)

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- trials ------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    n: int
    p: int
    h: int
    s_min: float
    delta: float


@dataclass(frozen=True)
class TrialData:
    """Everything an estimator may look at for one (cell, trial)."""

    truth: object
    Sigma_hat: np.ndarray
    samples: object
    n: int
    lam: float
    gamma: float
    cfg: SolverConfig


def cells(cfg):
    m = cfg.model
    axes = {
        "n": cfg.grid.get("n", [0]),
        "p": cfg.grid.get("p", [m.p]),
        "h": cfg.grid.get("h", [m.h]),
        "s_min": cfg.grid.get("s_min", [m.edge_magnitude[0]]),
        "delta": cfg.grid.get("delta", [0.0]),
    }
    out = []
    for n, p, h, s, dl in itertools.product(*(axes[a] for a in AXES)):
        out.append(Cell(n=0 if cfg.population else int(n), p=int(p), h=int(h),
                        s_min=float(s), delta=float(dl)))
    return out


def trial_seeds(base_seed, cell, trial):
    """``(model_seed, sample_seed)``; neither depends on ``delta``."""
    model_seed = derive_seed(base_seed, "model", cell.p, cell.h, cell.s_min, trial)
    sample_seed = derive_seed(base_seed, "sample", cell.p, cell.h, cell.s_min, cell.n, trial)
    return model_seed, sample_seed


def _cell_spec(cfg, cell, seed):
    s_max = max(cell.s_min, cfg.model.edge_magnitude[1])
    return replace(cfg.model, p=cell.p, h=cell.h, edge_magnitude=(cell.s_min, s_max), seed=seed)


def _fit_lvglasso(t):
    est, rep = solve_lvglasso(t.Sigma_hat, RegParams(t.lam, t.gamma), t.cfg)
    return est, rep.iterations, rep.converged


def _fit_glasso(t):
    K, rep = glasso(t.Sigma_hat, t.lam, t.cfg.penalize_diagonal, t.cfg)
    return Estimate.from_parts(K, np.zeros_like(K)), rep.iterations


def _baseline_lambda(cfg, p, n):
    if n <= 0:
        raise ExperimentError("baseline methods need samples (population mode unsupported)")
    return cfg.baseline_c * math.sqrt(math.log(p) / n)


def _nan_report():
    return {
        "exact_signed_support": False, "support_precision": math.nan,
        "support_recall": math.nan, "sign_errors": -1, "rank_recovered": False,
        "effective_rank": -1, "op_norm_error": math.nan, "frob_error_S": math.nan,
        "frob_error_L": math.nan,
    }


def _edge_report(edges, truth):
    sup = signed_support_metrics(edges.as_signed_matrix(), truth.S_star)
    d = asdict(sup)
    d.update(rank_recovered=truth.h == 0, effective_rank=0, op_norm_error=math.nan,
             frob_error_S=math.nan, frob_error_L=math.nan)
    return d


def run_trial(cfg, cell, trial, estimators=None):
    """Run every method on one (cell, trial); returns a list of row dicts."""
    estimators = estimators or {}
    model_seed, sample_seed = trial_seeds(cfg.base_seed, cell, trial)
    truth = generate_ground_truth(_cell_spec(cfg, cell, model_seed))
    base = {
        "experiment": cfg.experiment, "p": cell.p, "h": cell.h, "n": cell.n,
        "d": truth.spec.degree, "s_min": cell.s_min, "delta": cell.delta, "trial": trial,
        "seed": model_seed if cfg.population else sample_seed,
    }

    Sigma_in = truth.Sigma
    if cfg.kind == "perturbation":
        pert = perturb_sparse_lowrank(truth.K_marg, cell.delta, cfg.perturb_k,
                                      derive_seed(model_seed, "perturb"))
        Sigma_in = as_sym(np.linalg.inv(pert.K_tilde))

    if cfg.population:
        samples, Sigma_hat = None, Sigma_in
    else:
        samples = sample_gaussian(Sigma_in, cell.n, sample_seed)
        Sigma_hat = samples.Sigma_hat

    rows = []
    for method in cfg.methods:
        row = dict(base, method=method)
        t0 = time.perf_counter()
        try:
            if method == "lvglasso":
                if cfg.population and cfg.reg_rule.kind != "fixed":
                    raise ExperimentError("population mode needs a fixed reg rule")
                lam, gamma = choose_lambda(cfg.reg_rule, cell.p, max(cell.n, 1),
                                           None if samples is None else samples.data, cfg.solver)
            else:
                lam, gamma = _baseline_lambda(cfg, cell.p, cell.n), 1.0
            row.update({"lambda": lam, "gamma": gamma})
            t = TrialData(truth, Sigma_hat, samples, cell.n, lam, gamma, cfg.solver)
            if method in estimators:
                est, iters = estimators[method](t)
            elif method == "lvglasso":
                est, iters, ok = _fit_lvglasso(t)
                rule = cfg.reg_rule
                if not ok and rule.kind == "theory_scaled" and rule.grid and samples is not None:
                    lam, gamma = choose_lambda(replace(rule, kind="holdout"), cell.p, cell.n,
                                               samples.data, cfg.solver)
                    log.info("no convergence at theory lambda; holdout picked %g", lam)
                    row.update({"lambda": lam, "gamma": gamma})
                    est, more, _ = _fit_lvglasso(replace(t, lam=lam, gamma=gamma))
                    iters += more
            elif method == "glasso":
                est, iters = _fit_glasso(t)
            else:
                est = neighborhood_select(samples, lam, rule=cfg.neighborhood_rule)
                iters = 0
            if isinstance(est, Estimate):
                row.update(recovery_report(est, truth).as_dict())
            else:
                row.update(_edge_report(est, truth))
            row["iterations"] = int(iters)
        except Exception as exc:  # recorded per row, sweep continues
            log.warning("trial failed (%s, %s, trial %d): %s", method, cell, trial, exc)
            row.setdefault("lambda", math.nan)
            row.setdefault("gamma", math.nan)
            row.update(_nan_report(), iterations=-1)
        wall = (time.perf_counter() - t0) * 1e3
        row["wall_ms"] = round(wall, 3) if cfg.record_timing else 0.0
        rows.append(row)
    return rows


def _task(args):
    cfg, cell, trial, estimators = args
    return run_trial(cfg, cell, trial, estimators)


def run_rows(cfg, jobs=1, estimators=None):
    tasks = [(cfg, c, t, estimators) for c in cells(cfg) for t in range(cfg.trials)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        chunks = [_task(t) for t in tasks]
    return sort_rows([r for chunk in chunks for r in chunk])


def sort_rows(rows):
    return sorted(rows, key=lambda r: tuple(r[k] for k in SORT_KEY))


# -- summaries ---------------------------------------------------------------


@dataclass
class ExperimentResult:
    rows: list
    summary: dict


def _median(values):
    vals = [v for v in values if not math.isnan(v)]
    return float(np.median(vals)) if vals else math.nan


def _success(r):
    return bool(r["exact_signed_support"]) and bool(r["rank_recovered"])


def _group(rows, key):
    out = {}
    for r in rows:
        out.setdefault(key(r), []).append(r)
    return out


def summarize_scaling(rows, method="lvglasso"):
    by_n = _group([r for r in rows if r["method"] == method], lambda r: r["n"])
    medians = {n: _median([r["op_norm_error"] for r in rs]) for n, rs in sorted(by_n.items())}
    summary = {"median_op_norm_error": medians}
    pts = [(n, m) for n, m in medians.items() if n > 0 and m > 0 and math.isfinite(m)]
    if len(pts) >= 2:
        slope, intercept, r2 = fit_loglog_slope(pts)
        summary.update(slope=slope, intercept=intercept, r_squared=r2)
    return summary


def success_table(rows, axis="p", method="lvglasso"):
    """Fraction of trials with exact signed support and correct rank, per (n, axis) cell."""
    groups = _group([r for r in rows if r["method"] == method], lambda r: (r["n"], r[axis]))
    return [
        {"n": n, axis: a, "trials": len(rs), "success": sum(map(_success, rs)) / len(rs)}
        for (n, a), rs in sorted(groups.items())
    ]


def summarize_perturbation(rows, small_delta_max=0.1, method="lvglasso"):
    groups = _group([r for r in rows if r["method"] == method], lambda r: r["delta"])
    table = [
        {"delta": dl,
         "frob_error_S": _median([r["frob_error_S"] for r in rs]),
         "frob_error_L": _median([r["frob_error_L"] for r in rs])}
        for dl, rs in sorted(groups.items())
    ]
    errs = [t["frob_error_S"] for t in table]
    summary = {"table": table,
               "nondecreasing_S": bool(all(b >= a for a, b in zip(errs, errs[1:])))}
    small = [t for t in table if t["delta"] <= small_delta_max]
    if len({t["delta"] for t in small}) >= 2:
        slope, intercept, r2 = linear_fit([t["delta"] for t in small], [t["frob_error_S"] for t in small])
        summary["linear_fit_S"] = {"slope": slope, "intercept": intercept, "r_squared": r2}
    return summary


def summarize_compare(rows):
    groups = _group(rows, lambda r: (r["method"], r["p"], r["h"], r["n"]))
    return [
        {"method": m, "p": p, "h": h, "n": n, "trials": len(rs),
         "exact_support": sum(bool(r["exact_signed_support"]) for r in rs) / len(rs),
         "rank_recovered": sum(bool(r["rank_recovered"]) for r in rs) / len(rs)}
        for (m, p, h, n), rs in sorted(groups.items())
    ]


def summarize(cfg, rows):
    if cfg.kind == "scaling":
        return summarize_scaling(rows)
    if cfg.kind == "phase":
        return {"success": success_table(rows, "p")}
    if cfg.kind == "minsignal":
        return {"success": success_table(rows, "s_min")}
    if cfg.kind == "perturbation":
        return summarize_perturbation(rows, cfg.small_delta_max)
    return {"compare": summarize_compare(rows)}


def run_experiment(cfg, jobs=1, estimators=None):
    """Run a sweep and its kind-specific summary.

    ``estimators`` maps method names to callables ``f(TrialData) -> (Estimate, iterations)``
    that replace the built-in fit for that method (used for harness self-tests).
    """
    rows = run_rows(cfg, jobs, estimators)
    return ExperimentResult(rows, summarize(cfg, rows))


def run_scaling_experiment(cfg, jobs=1, estimators=None):
    _expect(cfg, "scaling")
    return run_experiment(cfg, jobs, estimators)


def run_phase_experiment(cfg, jobs=1, estimators=None):
    _expect(cfg, "phase", "minsignal")
    return run_experiment(cfg, jobs, estimators)


def run_perturbation_experiment(cfg, jobs=1, estimators=None):
    _expect(cfg, "perturbation")
    return run_experiment(cfg, jobs, estimators)


def run_baseline_compare(cfg, jobs=1, estimators=None):
    _expect(cfg, "baseline_compare")
    return run_experiment(cfg, jobs, estimators)


def _expect(cfg, *kinds):
    if cfg.kind not in kinds:
        raise ExperimentError(f"expected kind in {kinds}, got {cfg.kind!r}")


# -- serialization -----------------------------------------------------------

_INT_FIELDS = {"p", "h", "n", "d", "trial", "seed", "sign_errors", "effective_rank", "iterations"}
_BOOL_FIELDS = {"exact_signed_support", "rank_recovered"}
_STR_FIELDS = {"experiment", "method"}


def _fmt(key, v):
    if key in _BOOL_FIELDS:
        return "true" if v else "false"
    if key in _INT_FIELDS or key in _STR_FIELDS:
        return str(v)
    return repr(float(v))


def _parse(key, s):
    if key in _BOOL_FIELDS:
        return s == "true"
    if key in _INT_FIELDS:
        return int(s)
    if key in _STR_FIELDS:
        return s
    return float(s)


def format_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sort_rows(rows):
        w.writerow([_fmt(k, r[k]) for k in CSV_HEADER])
    return buf.getvalue()


def parse_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ExperimentError("unexpected CSV header")
    return [{k: _parse(k, v) for k, v in zip(header, line)} for line in reader if line]


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def format_json(rows):
    out = [{k: _json_safe(r[k]) for k in CSV_HEADER} for r in sort_rows(rows)]
    return json.dumps(out, indent=1) + "\n"


def parse_json(text):
    # non-finite floats were written as strings
    return [{k: float(v) if isinstance(v, str) and k not in _STR_FIELDS else v for k, v in r.items()}
            for r in json.loads(text)]


def emit_results(rows, path, format="csv"):
    """Write rows with the fixed header, sorted by :data:`SORT_KEY`."""
    text = format_csv(rows) if format == "csv" else format_json(rows)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_results(path):
    path = Path(path)
    text = path.read_text()
    return parse_json(text) if path.suffix == ".json" else parse_csv(text)


def render_report(rows):
    """Markdown summary grouped by experiment, method and cell."""
    lines = ["# Experiment report", ""]
    for exp, rs in sorted(_group(rows, lambda r: r["experiment"]).items()):
        lines += [f"## {exp}", "",
                  "| method | p | h | n | s_min | delta | trials | exact support | rank ok "
                  "| median op err | median frob S | median iters |",
                  "|---|---|---|---|---|---|---|---|---|---|---|---|"]
        groups = _group(rs, lambda r: (r["method"], r["p"], r["h"], r["n"], r["s_min"], r["delta"]))
        for (m, p, h, n, s, dl), g in sorted(groups.items()):
            k = len(g)
            exact = sum(bool(r["exact_signed_support"]) for r in g) / k
            rank = sum(bool(r["rank_recovered"]) for r in g) / k
            op = _median([r["op_norm_error"] for r in g])
            fs = _median([r["frob_error_S"] for r in g])
            it = np.median([r["iterations"] for r in g])
            lines.append(f"| {m} | {p} | {h} | {n} | {s:g} | {dl:g} | {k} | {exact:.2f} | {rank:.2f} "
                         f"| {op:.4g} | {fs:.4g} | {it:g} |")
        lines.append("")
    return "\n".join(lines)

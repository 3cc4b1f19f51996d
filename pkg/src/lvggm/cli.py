"""Command-line entry point: ``lvggm <subcommand> ...``.

Subcommands
-----------
generate   write a seeded ground-truth model to a directory
solve      fit one covariance matrix (latent-variable, glasso or noisy decomposition)
scaling, phase, minsignal, perturb, compare
           run a sweep from a JSON config and write rows plus a summary
report     render a markdown summary of result files
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import glasso
from .experiments import ExperimentConfig, ExperimentError, emit_results, read_results, render_report, run_experiment
from .modelgen import ModelSpec, export_ground_truth, generate_ground_truth
from .solver import RegParams, SolverConfig, solve_lvglasso, solve_noisy_decomposition
from .symkernel import read_matrix, write_matrix

SWEEPS = {
    "scaling": "scaling",
    "phase": "phase",
    "minsignal": "minsignal",
    "perturb": "perturbation",
    "compare": "baseline_compare",
}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def cmd_generate(args):
    if args.config:
        spec = ModelSpec.from_dict(json.loads(Path(args.config).read_text()))
    else:
        spec = ModelSpec(
            p=args.p, h=args.h, graph=args.graph, max_degree=args.max_degree,
            edge_magnitude=(args.s_min, max(args.s_min, args.s_max)),
            latent_coupling=args.coupling, diagonal_boost=args.boost,
        )
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    out = export_ground_truth(generate_ground_truth(spec), args.out)
    print(out)
    return 0


def cmd_solve(args):
    Sigma = read_matrix(args.sigma)
    cfg = SolverConfig(rho=args.rho, max_iter=args.max_iter, tol_primal=args.tol, tol_dual=args.tol,
                       penalize_diagonal=not args.no_penalize_diagonal)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "lvglasso":
        est, rep = solve_lvglasso(Sigma, RegParams(args.lam, args.gamma), cfg)
        write_matrix(out / "S_hat.txt", est.S_hat)
        write_matrix(out / "L_hat.txt", est.L_hat)
    elif args.method == "glasso":
        K, rep = glasso(Sigma, args.lam, cfg.penalize_diagonal, cfg)
        write_matrix(out / "K_hat.txt", K)
    else:
        lam_l = args.lambda_l if args.lambda_l is not None else args.lam
        est, rep = solve_noisy_decomposition(Sigma, args.lam * args.gamma, lam_l, cfg)
        write_matrix(out / "S_hat.txt", est.S_hat)
        write_matrix(out / "L_hat.txt", est.L_hat)
    report = dataclasses.asdict(rep)
    report["status"] = rep.status.value
    report.pop("primal_history", None)
    (out / "report.json").write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    print(f"{rep.status.value}: {rep.iterations} iterations, kkt {rep.kkt_residual:.3e}")
    return 0 if rep.converged else 3


def cmd_sweep(args):
    raw = json.loads(Path(args.config).read_text())
    raw["kind"] = SWEEPS[args.command]
    if args.seed is not None:
        raw["base_seed"] = args.seed
    if args.format:
        raw["format"] = args.format
    if args.no_timing:
        raw["record_timing"] = False
    cfg = ExperimentConfig.from_dict(raw)
    out = args.out or cfg.output_path or f"{cfg.experiment}.{cfg.format}"
    result = run_experiment(cfg, jobs=args.jobs)
    path = emit_results(result.rows, out, cfg.format)
    summary_path = path.with_name(path.stem + ".summary.json")
    summary_path.write_text(json.dumps(result.summary, indent=2, default=_json_default) + "\n")
    print(json.dumps(result.summary, indent=2, default=_json_default))
    return 0


def cmd_report(args):
    rows = [r for f in args.results for r in read_results(f)]
    text = render_report(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="lvggm", description="Latent-variable Gaussian graphical model selection.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded ground-truth model")
    g.add_argument("--config", help="JSON file with ModelSpec fields")
    g.add_argument("--p", type=int, default=30)
    g.add_argument("--h", type=int, default=1)
    g.add_argument("--graph", default="chain", choices=("chain", "grid", "erdos_renyi"))
    g.add_argument("--max-degree", type=int, default=3)
    g.add_argument("--s-min", type=float, default=0.3)
    g.add_argument("--s-max", type=float, default=0.3)
    g.add_argument("--coupling", type=float, default=ModelSpec.latent_coupling)
    g.add_argument("--boost", type=float, default=ModelSpec.diagonal_boost)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="fit one covariance matrix")
    s.add_argument("--sigma", required=True, help="matrix text file (p, then p rows)")
    s.add_argument("--method", default="lvglasso", choices=("lvglasso", "glasso", "noisy"))
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--lambda-l", type=float, help="trace weight for --method noisy (default: --lambda)")
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--tol", type=float, default=1e-7)
    s.add_argument("--no-penalize-diagonal", action="store_true")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_solve)

    for name, kind in SWEEPS.items():
        e = sub.add_parser(name, help=f"run a {kind} sweep")
        e.add_argument("--config", required=True, help="JSON experiment config")
        e.add_argument("--jobs", type=int, default=1)
        e.add_argument("--out", help="result file (default: config output_path)")
        e.add_argument("--format", choices=("csv", "json"))
        e.add_argument("--seed", type=int, help="override base_seed")
        e.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 (byte-stable output)")
        e.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="markdown summary of result files")
    r.add_argument("results", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ExperimentError, ValueError, OSError) as exc:
        print(f"lvggm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line harness: runs, figure reproduction, bound evaluation, tau.

Exit codes: 0 success, 1 configuration error, 2 internal error.  The
default output directory comes from $COSGD_OUT_DIR (fallback ./out).
"""

import argparse
import math
import os
import sys

import numpy as np

from . import figures
from .aggregators import CollaborationWeights
from .bounds import (BoundInputs, bound_bc, bound_oracle, bound_wga_nonconvex,
                     bound_wga_pl, gainfactor_surface)
from .config import ConfigError, ExperimentConfig, load_config
from .csvio import fmt_value, write_csv
from .objective import QuadraticTask, SimilarityParams
from .schedules import ScheduleInputs, tau_qp, tau_qp_objective
from .simulator import RunConfig, run_replicated, sweep

ENV_OUT_DIR = "COSGD_OUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _default_out_dir() -> str:
    return os.environ.get(ENV_OUT_DIR, "out")


def _parse_seeds(spec: str):
    """'0-19' (inclusive range), '0,3,7', or a single integer."""
    spec = str(spec)
    if "-" in spec:
        lo, hi = spec.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in spec.split(",")]


def _inline_run_config(args) -> ExperimentConfig:
    n = args.N
    colls = [QuadraticTask(curvature=args.a1,
                           optimum=args.x0star + args.zeta / args.a1,
                           noise_std=args.sigma / math.sqrt(n))]
    main = QuadraticTask(curvature=args.a0, optimum=args.x0star,
                         noise_std=args.sigma)
    weights = CollaborationWeights(alpha=args.alpha, tau=[1.0], beta=args.beta)
    run_cfg = RunConfig(main_task=main, collaborators=colls,
                        aggregator=args.aggregator, weights=weights,
                        step_size=args.eta, horizon=args.T, x0=args.x0,
                        c0_policy=args.c0_policy, oracle_v=args.oracle_v)
    return ExperimentConfig(run=run_cfg, seeds=_parse_seeds(args.seeds),
                            out_dir=args.out_dir, workers=args.workers,
                            csv_stride=args.csv_stride)


def _cmd_run(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if args.out_dir:
            cfg.out_dir = args.out_dir
    else:
        cfg = _inline_run_config(args)
    out_dir = cfg.out_dir or _default_out_dir()

    if cfg.sweep_axis is not None:
        results = sweep(cfg.run, cfg.sweep_axis, cfg.sweep_values, cfg.seeds,
                        workers=cfg.workers, alpha_rule=cfg.sweep_alpha_rule)
        rows = []
        for value, res in results:
            label = f"{cfg.sweep_axis}={value:g}"
            figures._write_trace(
                os.path.join(out_dir, f"trace_{cfg.sweep_axis}{value:g}.csv"),
                res, cfg.csv_stride)
            for stat, val in (("plateau_mean", res.plateau_mean),
                              ("plateau_se", res.plateau_se),
                              ("final_gap_mean", res.final_gap_mean),
                              ("final_gap_se", res.final_gap_se),
                              ("avg_grad_sq_mean", res.avg_grad_sq_mean),
                              ("avg_grad_sq_se", res.avg_grad_sq_se)):
                rows.append((label, stat, float("nan") if val is None else val))
            print(f"{label}: plateau {fmt_value(res.plateau_mean)}"
                  f" final_gap {fmt_value(res.final_gap_mean)}")
        write_csv(os.path.join(out_dir, "aggregate.csv"),
                  ["label", "statistic", "value"], rows)
        return 0

    res = run_replicated(cfg.run, cfg.seeds, workers=cfg.workers,
                         keep_traces=True)
    stride = max(1, cfg.csv_stride)
    for seed, trace in zip(cfg.seeds, res.traces):
        steps = range(0, cfg.run.horizon + 1, stride)
        write_csv(os.path.join(out_dir, f"trace_seed{seed}.csv"),
                  ["step", "test_loss", "grad_norm_sq"],
                  ((t, trace.test_loss[t], trace.grad_norm_sq[t]) for t in steps))
    figures._write_trace(os.path.join(out_dir, "aggregate_trace.csv"), res, stride)
    rows = [("run", stat, float("nan") if val is None else val)
            for stat, val in (("plateau_mean", res.plateau_mean),
                              ("plateau_se", res.plateau_se),
                              ("final_gap_mean", res.final_gap_mean),
                              ("final_gap_se", res.final_gap_se),
                              ("avg_grad_sq_mean", res.avg_grad_sq_mean),
                              ("avg_grad_sq_se", res.avg_grad_sq_se))]
    write_csv(os.path.join(out_dir, "aggregate.csv"),
              ["label", "statistic", "value"], rows)
    print(f"final loss (plateau): {fmt_value(res.plateau_mean)}"
          + ("" if res.plateau_se is None else f" +/- {fmt_value(res.plateau_se)}"))
    if res.diverged_seeds:
        print(f"diverged seeds: {res.diverged_seeds}")
    return 0


def _cmd_figure(args) -> int:
    out_dir = args.out_dir or _default_out_dir()
    seeds = _parse_seeds(args.seeds)
    common = dict(seeds=seeds, workers=args.workers)
    if args.name in ("fig2", "fig3", "fig4", "fig5"):
        common["horizon"] = args.T
        common["csv_stride"] = args.csv_stride
    if args.name == "fig2":
        res = figures.fig2(out_dir, **common)
        print(f"fig2: chosen {res.chosen}")
    elif args.name == "fig3":
        res = figures.fig3(out_dir, **common)
    elif args.name == "fig4":
        res = figures.fig4(out_dir, **common)
    elif args.name == "fig5":
        res = figures.fig5(out_dir, **common)
    elif args.name == "gainfactor":
        res = figures.gainfactor(out_dir)
    elif args.name == "sublinear":
        res = figures.sublinear(out_dir)
    else:
        raise ConfigError(
            f"unknown figure {args.name!r}; valid names: {', '.join(figures.FIGURES)}")
    for row in res.summary:
        print(" ".join(fmt_value(v) for v in row))
    print(f"wrote {args.name} CSVs to {out_dir}")
    return 0


def _bound_inputs(args) -> BoundInputs:
    sim = SimilarityParams(
        smoothness=args.L, pl_constant=args.mu,
        grad_scale_mismatch=args.m, grad_offset_sq=args.zeta_sq,
        grad_offsets_sq=[args.zeta_sq], hessian_dissimilarity=args.delta,
        noise_scales=[0.0], noise_scale_cap=0.0)
    base = ScheduleInputs(sim=sim, horizon=args.T, f0_gap=args.F0,
                          sigma0_sq=args.sigma0_sq, sigma_a_sq=args.sigma_a_sq,
                          alpha=args.alpha, oracle_var=args.v_sq,
                          grad0_sq=args.grad0_sq, n_collaborators=args.N)
    return BoundInputs(base=base, eta=args.eta, beta=args.beta, e0=args.E0,
                       c=args.c)


def _cmd_bounds(args) -> int:
    if args.which == "gainfactor":
        out_dir = args.out_dir or _default_out_dir()
        n_grid = np.unique(np.round(np.logspace(0, 2, 41)).astype(int))
        ratio_grid = np.logspace(-3, 3, 49)
        surface = gainfactor_surface(n_grid, ratio_grid)
        rows = [[r] + list(surface[i]) for i, r in enumerate(ratio_grid)]
        write_csv(os.path.join(out_dir, "gainfactor.csv"),
                  ["ratio"] + [f"N{int(n)}" for n in n_grid], rows)
        print(f"wrote gain-factor heatmap to {out_dir}/gainfactor.csv")
        return 0
    b = _bound_inputs(args)
    try:
        fn = {"wga-nc": bound_wga_nonconvex, "wga-pl": bound_wga_pl,
              "oracle": bound_oracle, "bc": bound_bc}[args.which]
        value = fn(b)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    print(fmt_value(value))
    return 0


def _cmd_tau(args) -> int:
    sigmas = [float(s) for s in args.sigmas.split(",")]
    zetas = [float(z) for z in args.zetas.split(",")]
    guard = 1.0 - args.alpha ** 2 * args.m
    if guard <= 0:
        raise ConfigError("alpha^2 m must be < 1")
    coeff = args.L / (args.mu * args.T * guard)
    try:
        tau = tau_qp(sigmas, zetas, coeff)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    obj = tau_qp_objective(tau, sigmas, zetas, coeff)
    print("tau: " + " ".join(fmt_value(t) for t in tau))
    print("objective: " + fmt_value(obj))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cosgd",
                description="Personalized collaborative SGD experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one config (file or inline flags)")
    r.add_argument("--config", help="JSON experiment config")
    r.add_argument("--aggregator", default="alone",
                   choices=("alone", "wga", "bc", "oracle_bc"))
    r.add_argument("--a0", type=float, default=1.0)
    r.add_argument("--x0star", type=float, default=0.0)
    r.add_argument("--a1", type=float, default=2.0)
    r.add_argument("--zeta", type=float, default=4.0)
    r.add_argument("--sigma", type=float, default=10.0)
    r.add_argument("--N", type=int, default=10)
    r.add_argument("--alpha", type=float, default=0.0)
    r.add_argument("--beta", type=float, default=None)
    r.add_argument("--eta", type=float, default=1e-4)
    r.add_argument("--x0", type=float, default=10.0)
    r.add_argument("--T", type=int, default=figures.DEFAULT_T)
    r.add_argument("--seeds", default="0-19")
    r.add_argument("--c0-policy", dest="c0_policy", default="first_bias",
                   choices=("first_bias", "zero", "warm_start"))
    r.add_argument("--oracle-v", dest="oracle_v", type=float, default=0.0)
    r.add_argument("--out-dir", dest="out_dir", default=None)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--csv-stride", dest="csv_stride", type=int, default=10)
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("figure", help="reproduce a figure's CSV data")
    f.add_argument("name")
    f.add_argument("--T", type=int, default=figures.DEFAULT_T)
    f.add_argument("--seeds", default="0-19")
    f.add_argument("--out-dir", dest="out_dir", default=None)
    f.add_argument("--workers", type=int, default=1)
    f.add_argument("--csv-stride", dest="csv_stride", type=int, default=10)
    f.set_defaults(func=_cmd_figure)

    b = sub.add_parser("bounds", help="evaluate a convergence bound")
    b.add_argument("which", choices=("wga-nc", "wga-pl", "oracle", "bc",
                                     "gainfactor"))
    b.add_argument("--L", type=float, default=1.0)
    b.add_argument("--mu", type=float, default=1.0)
    b.add_argument("--m", type=float, default=0.0)
    b.add_argument("--zeta-sq", dest="zeta_sq", type=float, default=0.0)
    b.add_argument("--delta", type=float, default=0.0)
    b.add_argument("--T", type=int, default=1000)
    b.add_argument("--F0", type=float, default=1.0)
    b.add_argument("--sigma0-sq", dest="sigma0_sq", type=float, default=1.0)
    b.add_argument("--sigma-a-sq", dest="sigma_a_sq", type=float, default=1.0)
    b.add_argument("--alpha", type=float, default=0.0)
    b.add_argument("--v-sq", dest="v_sq", type=float, default=0.0)
    b.add_argument("--grad0-sq", dest="grad0_sq", type=float, default=0.0)
    b.add_argument("--N", type=int, default=1)
    b.add_argument("--eta", type=float, default=1e-3)
    b.add_argument("--beta", type=float, default=0.0)
    b.add_argument("--E0", type=float, default=0.0)
    b.add_argument("--c", type=int, default=2, choices=(2, 4))
    b.add_argument("--out-dir", dest="out_dir", default=None)
    b.set_defaults(func=_cmd_bounds)

    t = sub.add_parser("tau", help="optimal collaborator mixture weights")
    t.add_argument("--sigmas", required=True, help="comma-separated sigma_k^2")
    t.add_argument("--zetas", required=True, help="comma-separated zeta_k^2")
    t.add_argument("--L", type=float, default=1.0)
    t.add_argument("--mu", type=float, default=1.0)
    t.add_argument("--T", type=int, default=1000)
    t.add_argument("--alpha", type=float, default=0.0)
    t.add_argument("--m", type=float, default=0.0)
    t.set_defaults(func=_cmd_tau)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # internal error
        print(f"internal error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

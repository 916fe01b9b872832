"""Command-line frontend.

Subcommands: gen, solve, sweep, bound, lemmas, align-demo.  Standard
output carries machine-parseable key=value lines only; progress and
warnings go to standard error.  Exit codes: 0 success, 1 I/O failure,
2 invalid input, 3 solver non-convergence.  Every run prints the resolved
seed; an omitted --seed falls back to a fixed constant so default runs
are reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import align, bench, theory
from .errors import (
    ConfigInvalid,
    DegenerateDenominator,
    InvalidSparsity,
    NoConvergence,
    PermsenseError,
)
from .model import ProblemConfig, ProblemInstance, generate_instance
from .solver import (
    EstimatorConfig,
    estimate_joint_altmin,
    estimate_two_stage,
    robust_regression,
)

DEFAULT_SEED = 1729

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3


def _estimator_config(args) -> EstimatorConfig:
    kwargs = {}
    if getattr(args, "lambda_mode", None):
        kwargs["lambda_mode"] = args.lambda_mode
    if getattr(args, "lambda_m", None) is not None:
        kwargs["theorem_m"] = args.lambda_m
    if getattr(args, "lambda_value", None) is not None:
        kwargs["lambda_mode"] = "explicit"
        kwargs["explicit_lambda"] = args.lambda_value
    return EstimatorConfig(**kwargs)


def cmd_gen(args) -> int:
    config = ProblemConfig(
        d=args.d, m=args.m, p=args.p, k=args.k, seed=args.seed,
        noise_percent=args.noise_percent, sigma=args.sigma,
    )
    inst = generate_instance(config)
    with open(args.out, "w") as fh:
        fh.write(inst.to_json())
    print(f"seed={args.seed}")
    print(
        f"d={config.d} m={config.m} p={config.p} k={config.k} "
        f"sigma={inst.sigma:.10g} out={args.out}"
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    with open(args.instance) as fh:
        inst = ProblemInstance.from_json(fh.read())
    cfg = _estimator_config(args)
    print(f"seed={inst.seed if inst.seed is not None else 'none'}")
    converged = True
    if args.estimator == "robust":
        try:
            x_hat = robust_regression(inst.a, inst.y, cfg)
        except NoConvergence as exc:
            print(f"error={exc}", file=sys.stderr)
            return EXIT_NO_CONVERGENCE
        doc = {"x_hat": x_hat.tolist(), "estimator": "robust", "converged": True}
        err = bench.normalized_error(x_hat, inst.x0)
    else:
        solver_fn = estimate_two_stage if args.estimator == "two-stage" else estimate_joint_altmin
        try:
            result = solver_fn(inst, cfg)
        except NoConvergence as exc:
            result = exc.result
            converged = False
        doc = json.loads(result.to_json())
        doc["estimator"] = args.estimator
        doc["converged"] = converged
        err = bench.normalized_error(result.x_hat, inst.x0)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh)
    print(f"normalized_error={err:.10g}")
    print(f"converged={str(converged).lower()}")
    return EXIT_OK if converged else EXIT_NO_CONVERGENCE


def cmd_sweep(args) -> int:
    if args.preset:
        spec = bench.load_preset(args.preset, base_seed=args.seed)
        stem = args.preset.replace("-", "_")
    else:
        with open(args.spec) as fh:
            spec = bench.SweepSpec.from_json(fh.read())
        if args.seed is not None:
            from dataclasses import replace

            spec = replace(spec, base_seed=args.seed)
        stem = "sweep"
    print(f"seed={spec.base_seed}")

    def progress(gp, recs):
        for rec in recs:
            print(
                f"grid {gp.index}: p={gp.p} m={gp.m} k/p={gp.perm_level} "
                f"noise={gp.noise_percent}% {rec.estimator}: "
                f"mean={rec.mean_norm_error:.4f} failed={rec.n_failed}",
                file=sys.stderr,
            )

    records = bench.run_sweep(spec, workers=args.workers, progress=progress)
    import os

    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, f"{stem}.csv")
    bench.emit_csv(records, csv_path, timing="measured" if args.timing else "zero")
    print(f"csv={csv_path}")
    if args.preset:
        gp_path = os.path.join(args.out_dir, f"{stem}.gp")
        bench.emit_gnuplot(args.preset, csv_path, gp_path)
        print(f"gnuplot={gp_path}")
    return EXIT_OK


def _parse_scan(text: str) -> list[int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigInvalid(f"scan must be start:stop:step, got {text!r}")
    start, stop, step = (int(v) for v in parts)
    if step <= 0:
        raise ConfigInvalid("scan step must be positive")
    return list(range(start, stop + 1, step))


def cmd_bound(args) -> int:
    print(f"seed={args.seed}")
    params = theory.BoundParams(
        sigma=args.sigma, d=args.d, p=args.p, m=args.m, k=args.k,
        M=args.M, alpha=args.alpha, c1=args.c1, c2=args.c2,
        epsilon_const=args.epsilon,
    )
    if args.m_scan:
        grid = _parse_scan(args.m_scan)
        results = theory.bound_monotonicity_scan(params, grid)
        for m, res in zip(grid, results):
            print(
                f"m={m} term_known_corr={res.term_known_corr:.10g} "
                f"term_excess={res.term_excess:.10g} total={res.total:.10g} "
                f"prob_lower={res.prob_lower:.10g}"
            )
    else:
        res = theory.theorem1_bound(params)
        print(f"term_known_corr={res.term_known_corr:.10g}")
        print(f"term_excess={res.term_excess:.10g}")
        print(f"total={res.total:.10g}")
        print(f"prob_lower={res.prob_lower:.10g}")
        print(f"k_condition_ok={str(res.k_condition_ok).lower()}")
        print(f"alpha_condition_ok={str(res.alpha_condition_ok).lower()}")
        print(f"vacuous={str(res.vacuous).lower()}")
    return EXIT_OK


def cmd_lemmas(args) -> int:
    print(f"seed={args.seed}")
    rate = theory.lemma_empirical_check(
        args.lemma,
        t_or_m=args.t,
        trials=args.trials,
        seed=args.seed,
        rows=args.rows,
        cols=args.cols,
        identity=args.identity,
        noise_sigma=args.noise_sigma,
        d=args.d,
        p=args.p,
        k=args.k,
        sigma=args.sigma,
        epsilon_const=args.epsilon,
    )
    print(f"lemma={args.lemma}")
    print(f"trials={args.trials}")
    print(f"violation_rate={rate:.10g}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write("lemma,t_or_M,trials,violation_rate\n")
            fh.write(f"{args.lemma},{args.t:.10g},{args.trials},{rate:.10g}\n")
        print(f"csv={args.csv}")
    return EXIT_OK


def cmd_align_demo(args) -> int:
    print(f"seed={args.seed}")
    scores = align.run_demo(
        seed=args.seed, out_dir=args.out_dir, himg=args.size, wimg=args.size,
        d=args.d, p=args.p, m=args.m, k=args.k, noise_sigma=args.noise_sigma,
    )
    for mode in align.MODES:
        print(f"nmse_{mode}={scores[mode]:.10g}")
    if args.out_dir:
        print(f"out_dir={args.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="permsense",
        description=(
            "Estimate a vector from linear measurements in which a sparse "
            "unknown subset has been shuffled and a few correspondences are trusted."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a problem instance as JSON")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--sigma", type=float, default=None)
    g.add_argument("--noise-percent", type=float, default=None)
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--estimator", choices=["two-stage", "joint", "robust"],
                   default="two-stage")
    s.add_argument("--lambda-mode", choices=["theorem", "explicit", "floor"],
                   default=None)
    s.add_argument("--lambda-m", type=float, default=None)
    s.add_argument("--lambda", dest="lambda_value", type=float, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run an experiment sweep")
    grp = w.add_mutually_exclusive_group(required=True)
    grp.add_argument("--preset", choices=list(bench.PRESET_NAMES))
    grp.add_argument("--spec")
    w.add_argument("--seed", type=int, default=DEFAULT_SEED)
    w.add_argument("--out-dir", default=".")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--timing", action="store_true",
                   help="write measured wall times into the CSV (breaks byte-level reproducibility)")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bound", help="evaluate the reconstruction-error bound")
    b.add_argument("--sigma", type=float, required=True)
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--p", type=int, required=True)
    b.add_argument("--m", type=int, default=0)
    b.add_argument("--k", type=int, default=0)
    b.add_argument("--M", type=float, default=0.0)
    b.add_argument("--alpha", type=float, default=0.1)
    b.add_argument("--c1", type=float, default=1.0)
    b.add_argument("--c2", type=float, default=1.0)
    b.add_argument("--epsilon", type=float, default=1.0)
    b.add_argument("--m-scan", default=None, help="start:stop:step grid for m")
    b.add_argument("--seed", type=int, default=DEFAULT_SEED)
    b.set_defaults(func=cmd_bound)

    l = sub.add_parser("lemmas", help="Monte-Carlo check of a concentration lemma")
    l.add_argument("--lemma", choices=list(theory.LEMMA_IDS), required=True)
    l.add_argument("--t", type=float, required=True, help="tail parameter t (or M for L4)")
    l.add_argument("--trials", type=int, default=1000)
    l.add_argument("--rows", type=int, default=None)
    l.add_argument("--cols", type=int, default=None)
    l.add_argument("--identity", action="store_true")
    l.add_argument("--noise-sigma", type=float, default=1.0)
    l.add_argument("--d", type=int, default=None)
    l.add_argument("--p", type=int, default=None)
    l.add_argument("--k", type=int, default=None)
    l.add_argument("--sigma", type=float, default=None)
    l.add_argument("--epsilon", type=float, default=1.0)
    l.add_argument("--csv", default=None)
    l.add_argument("--seed", type=int, default=DEFAULT_SEED)
    l.set_defaults(func=cmd_lemmas)

    a = sub.add_parser("align-demo", help="run the displacement-field demo")
    a.add_argument("--seed", type=int, default=DEFAULT_SEED)
    a.add_argument("--out-dir", default=None)
    a.add_argument("--size", type=int, default=64)
    a.add_argument("--d", type=int, default=10)
    a.add_argument("--p", type=int, default=179)
    a.add_argument("--m", type=int, default=8)
    a.add_argument("--k", type=int, default=100)
    a.add_argument("--noise-sigma", type=float, default=0.05)
    a.set_defaults(func=cmd_align_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigInvalid, InvalidSparsity, DegenerateDenominator) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PermsenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

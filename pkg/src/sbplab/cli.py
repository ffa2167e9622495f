"""Command-line front end: one subcommand per module capability.

Every invocation prints a JSON document whose "config" block is enough
to reproduce the run; stochastic subcommands require --seed, there is
no silent time-based seeding anywhere.  Exit codes: 0 success, 1 domain
or verification failure, 2 bad flags, 130 interrupted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from .analytic import (ModelParams, alpha_c, free_energy_profile, gauss_p,
                       k_c, log_expected_solutions, mu2, verify_shape)
from .cube import count_solutions, generate_instance, run_capacity, \
    solve_exact
from .errors import SbpError
from .experiments import EXPERIMENT_KINDS, ExperimentConfig, run_experiment
from .moments import ratio_exact

OUT_ENV = "SBPLAB_OUT"


def _resolve_out(path: Optional[str]) -> Optional[str]:
    """Relative output paths land in $SBPLAB_OUT when it is set."""
    if path is None:
        return None
    base = os.environ.get(OUT_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(document: dict, out: Optional[str]) -> None:
    text = json.dumps(document, indent=2) + "\n"
    sys.stdout.write(text)
    target = _resolve_out(out)
    if target:
        parent = os.path.dirname(target)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(target, "w", newline="") as fh:
            fh.write(text)


def _cmd_threshold(args) -> int:
    if args.K is not None:
        K, alpha = args.K, alpha_c(args.K)
    else:
        K, alpha = k_c(args.alpha), args.alpha
    doc = {"config": {"command": "threshold", "K": args.K,
                      "alpha": args.alpha, "n": args.n},
           "p": gauss_p(K), "alpha_c": alpha_c(K) if args.K is not None
           else alpha, "k_c": K, "mu2": mu2(K)}
    if args.n is not None:
        doc["m"] = round(alpha * args.n)
        doc["log_expected_solutions"] = log_expected_solutions(
            ModelParams(K=K, alpha=alpha, n=args.n))
    _emit(doc, args.out)
    return 0


def _cmd_free_energy(args) -> int:
    alpha = args.alpha if args.alpha is not None else alpha_c(args.K)
    params = ModelParams(K=args.K, alpha=alpha, n=args.n)
    grid = np.linspace(0.0, 1.0, args.grid_points)
    profile = free_energy_profile(params, grid, with_verdict=args.verdict)
    doc = {"config": {"command": "free-energy", "K": args.K, "alpha": alpha,
                      "n": args.n, "grid_points": args.grid_points,
                      "verdict": args.verdict}}
    doc.update(profile.to_dict())
    _emit(doc, args.out)
    return 0


def _cmd_shape_verify(args) -> int:
    verdict = verify_shape(args.K, grid_step=args.grid_step)
    doc = {"config": {"command": "shape-verify", "K": args.K,
                      "grid_step": args.grid_step}}
    doc.update(verdict.to_dict())
    _emit(doc, args.out)
    return 0 if verdict.ok else 1


def _cmd_second_moment(args) -> int:
    if args.m is not None:
        params = ModelParams(K=args.K, alpha=args.m / args.n, n=args.n,
                             m=args.m)
    else:
        params = ModelParams.critical_rows(alpha_c(args.K), args.n)
    report = ratio_exact(params, delta=args.delta)
    doc = {"config": {"command": "second-moment", "K": args.K, "n": args.n,
                      "m": params.m, "delta": args.delta}}
    doc.update(report.to_dict())
    _emit(doc, args.out)
    return 0


def _cmd_solve(args) -> int:
    inst = generate_instance(args.n, args.m, args.seed, args.stream_id)
    report = solve_exact(inst, count_at_k=args.count_at)
    doc = {"config": {"command": "solve", "n": args.n, "m": args.m,
                      "seed": args.seed, "stream_id": args.stream_id,
                      "count_at": args.count_at}}
    doc.update(report.to_dict())
    _emit(doc, args.out)
    return 0


def _cmd_count(args) -> int:
    inst = generate_instance(args.n, args.m, args.seed, args.stream_id)
    doc = {"config": {"command": "count", "n": args.n, "m": args.m,
                      "seed": args.seed, "stream_id": args.stream_id,
                      "K": args.K},
           "count": count_solutions(inst, args.K)}
    _emit(doc, args.out)
    return 0


def _cmd_capacity(args) -> int:
    trace = run_capacity(args.n, args.K, args.seed, args.stream_id,
                         overlap_sample_count=args.overlap_samples,
                         max_rows=args.max_rows)
    doc = {"config": {"command": "capacity", "n": args.n, "K": args.K,
                      "seed": args.seed, "stream_id": args.stream_id,
                      "overlap_samples": args.overlap_samples,
                      "max_rows": args.max_rows}}
    doc.update(trace.to_dict())
    _emit(doc, args.out)
    if args.csv:
        trace.to_csv(_resolve_out(args.csv))
    return 0


def _parse_floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _cmd_experiment(args) -> int:
    out = _resolve_out(args.out)
    if out is None and os.environ.get(OUT_ENV):
        out = os.path.join(os.environ[OUT_ENV],
                           f"{args.kind}_{args.seed}")
    config = ExperimentConfig(
        experiment_kind=args.kind,
        n_list=tuple(int(v) for v in args.n_list.split(",") if v.strip()),
        trials=args.trials, seed=args.seed, K=args.K, alpha=args.alpha,
        output_path=out,
        y_grid=_parse_floats(args.y_grid) if args.y_grid else None,
        eps_list=_parse_floats(args.eps_list) if args.eps_list
        else (0.1, 0.3, 1.0),
        x_log_factor=args.x_log_factor,
        coupled_k=_parse_floats(args.coupled_k) if args.coupled_k else (),
        threads=args.threads, cache_dir=args.cache_dir,
        allow_slow=args.allow_slow)
    report = run_experiment(config)
    for entry in report.per_n:
        bits = [f"n={entry['n']}"]
        for key in ("success_freq", "disc_std", "alpha_star_mean",
                    "ez_mean", "empty_freq_at_t0", "c_measured"):
            if key in entry and entry[key] is not None:
                bits.append(f"{key}={entry[key]:.6g}")
        sys.stdout.write("  ".join(bits) + "\n")
    if report.regression is not None:
        sys.stdout.write(
            f"slope={report.regression['slope']:.6g} "
            f"ci=[{report.regression['ci_low']:.6g}, "
            f"{report.regression['ci_high']:.6g}]\n")
    if out:
        sys.stdout.write(f"wrote {out}.json {out}.csv\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbplab",
        description="Critical-window numerics: thresholds, free-energy "
                    "shape, second-moment sums, exact solver, experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="critical curve scalars")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--K", type=float)
    group.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_threshold)

    p = sub.add_parser("free-energy", help="pair free-energy profile")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--grid-points", type=int, default=201)
    p.add_argument("--verdict", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_free_energy)

    p = sub.add_parser("shape-verify", help="two-maxima shape certificate")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--grid-step", type=float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_shape_verify)

    p = sub.add_parser("second-moment", help="exact pair-count ratio")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_second_moment)

    p = sub.add_parser("solve", help="exact disc of one instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream-id", type=int, default=0)
    p.add_argument("--count-at", type=float)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("count", help="exact solution count at K")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream-id", type=int, default=0)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_count)

    p = sub.add_parser("capacity", help="sequential solution-set process")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream-id", type=int, default=0)
    p.add_argument("--overlap-samples", type=int, default=0)
    p.add_argument("--max-rows", type=int)
    p.add_argument("--csv")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_capacity)

    p = sub.add_parser("experiment", help="Monte Carlo harness")
    p.add_argument("--kind", required=True, choices=EXPERIMENT_KINDS)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--K", type=float)
    group.add_argument("--alpha", type=float)
    p.add_argument("--n-list", required=True,
                   help="comma-separated dimensions, e.g. 12,16,20")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--y-grid", help="comma-separated tail offsets")
    p.add_argument("--eps-list", help="comma-separated window widths")
    p.add_argument("--x-log-factor", type=float, default=3.0)
    p.add_argument("--coupled-k", help="comma-separated coupled K values")
    p.add_argument("--threads", type=int,
                   help="worker count (default: all cores)")
    p.add_argument("--cache-dir")
    p.add_argument("--allow-slow", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_experiment)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        sys.stderr.write("interrupted\n")
        return 130
    except SbpError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

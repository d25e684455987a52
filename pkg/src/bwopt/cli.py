"""Command line harness for the solvers, generators, and exports.

One command per invocation; every run is reproducible from the single
``--seed`` value (labeled sub-seeds keep command streams independent).
Solver commands write an incremental trace CSV, a summary JSON, and
optionally a rendered figure next to them.

Exit codes: 0 converged (or command completed), 1 input/output problem,
2 usage error, 3 iteration budget exhausted, 4 numerical failure.
"""

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from .barycenter import (
    SolverConfig,
    StepSchedule,
    noncentered_split,
    run_bary_gd,
    run_bary_sgd,
)
from .datasets import GenSpec, generate, load_dataset, save_dataset
from .euclidean import EuclideanConfig, run_egd, run_esgd
from .experiments import (
    derive_seed,
    dim_sweep,
    robustness,
    write_dim_sweep_csv,
    write_robustness_csv,
)
from .geometry import NumericalError
from .median import MedianConfig, augment_noncentered, deaugment, run_median_gd
from .regularized import RegConfig, reg_mean, run_rbary_gd
from .reports import (
    TraceWriter,
    load_reference_point,
    summary_payload,
    write_summary_json,
)
from .sdp import sdp_export

EXIT_CONVERGED = 0
EXIT_ERROR = 1
EXIT_BUDGET = 3
EXIT_NUMERICAL = 4

_GEN_FIELDS = {"method": int, "n": int, "d": int, "alpha": float,
               "beta": float, "m": int, "seed": int}


def parse_gen_spec(text, default_seed):
    """Parse a compact ``key=value,...`` generator description.

    Recognized keys: method, n, d, alpha, beta, m, seed.  A seed inside
    the string overrides the derived default.
    """
    fields = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or key not in _GEN_FIELDS:
            raise ValueError(f"bad generator field {part!r} "
                             f"(expected key=value with key in {sorted(_GEN_FIELDS)})")
        try:
            fields[key] = _GEN_FIELDS[key](value.strip())
        except ValueError as exc:
            raise ValueError(f"bad generator value in {part!r}: {exc}") from exc
    fields.setdefault("seed", default_seed)
    return GenSpec(**fields)


def _resolve_input(args, label):
    if args.input:
        return load_dataset(args.input), None
    spec = parse_gen_spec(args.gen, derive_seed(args.seed, label))
    return generate(spec), spec


def _load_reference(args, expected_dim):
    if not getattr(args, "ref", None):
        return None
    ref = load_reference_point(args.ref)
    if ref.dim != expected_dim:
        raise ValueError(
            f"{args.ref}: reference dimension {ref.dim} does not match "
            f"solver dimension {expected_dim}"
        )
    return ref


def _run_with_trace(args, runner):
    if args.out_trace:
        with TraceWriter(args.out_trace) as writer:
            result = runner(writer.write)
    else:
        result = runner(None)
    return result


def _maybe_plot(args, trace):
    if not getattr(args, "out_plot", None):
        return
    from .figures import render_trace_figure

    rows = [{
        "iter": r.iteration,
        "objective": r.objective,
        "grad_norm_sq": r.grad_norm_sq,
        "lambda_min": r.lambda_min,
        "lambda_max": r.lambda_max,
        "w2sq_to_ref": r.w2sq_to_ref,
    } for r in trace.records]
    render_trace_figure(rows, args.out_plot, title=args.command)
    print(f"wrote {args.out_plot}")


def _finish(args, command, config_echo, trace, final_cov, final_mean=None):
    if args.out_summary:
        payload = summary_payload(command, args.seed, config_echo, trace,
                                  final_cov, final_mean)
        write_summary_json(payload, args.out_summary)
        print(f"wrote {args.out_summary}")
    if args.out_trace:
        print(f"wrote {args.out_trace}")
    _maybe_plot(args, trace)
    last = trace.records[-1]
    print(f"{command}: iterations={trace.iterations} "
          f"objective={last.objective:.12g} grad_norm_sq={last.grad_norm_sq:.6g} "
          f"stop={trace.stop_reason}")
    return EXIT_CONVERGED if trace.converged else EXIT_BUDGET


def cmd_barycenter(args):
    p, spec = _resolve_input(args, "barycenter")
    mean = np.zeros(p.dim)
    if not p.is_centered():
        mean, p = noncentered_split(p)
    reference = _load_reference(args, p.dim)
    schedule = None
    if args.sgd_theta is not None:
        schedule = StepSchedule.inverse_t(args.sgd_theta)
    config = SolverConfig(max_iters=args.max_iters, grad_tol=args.grad_tol,
                          rng_seed=derive_seed(args.seed, "barycenter/sampler"),
                          schedule=schedule)
    if args.sgd:
        runner = lambda sink: run_bary_sgd(p, config=config, reference=reference,
                                           trace_stride=args.trace_stride,
                                           on_record=sink)
    else:
        runner = lambda sink: run_bary_gd(p, config=config, reference=reference,
                                          on_record=sink)
    sigma, trace = _run_with_trace(args, runner)
    echo = {"algorithm": "sgd" if args.sgd else "gd",
            "max_iters": config.max_iters, "grad_tol": config.grad_tol,
            "schedule": repr(config.schedule) if config.schedule else None,
            "gen": asdict(spec) if spec else None}
    return _finish(args, "barycenter", echo, trace, sigma, mean)


def cmd_rbarycenter(args):
    p, spec = _resolve_input(args, "rbarycenter")
    mean = reg_mean(p, args.gamma)
    if not p.is_centered():
        _, p = noncentered_split(p)
    reference = _load_reference(args, p.dim)
    config = RegConfig(gamma=args.gamma, kappa_box=args.kappa,
                       max_iters=args.max_iters, grad_tol=args.grad_tol)
    sigma, trace = _run_with_trace(
        args, lambda sink: run_rbary_gd(p, config=config, reference=reference,
                                        on_record=sink))
    echo = {"gamma": args.gamma, "kappa": args.kappa,
            "max_iters": config.max_iters, "grad_tol": config.grad_tol,
            "gen": asdict(spec) if spec else None}
    return _finish(args, "rbarycenter", echo, trace, sigma, mean)


def cmd_median(args):
    p, spec = _resolve_input(args, "median")
    config = MedianConfig(epsilon=args.epsilon, max_iters=args.max_iters,
                          grad_tol=args.grad_tol)
    echo = {"epsilon": args.epsilon, "max_iters": config.max_iters,
            "grad_tol": config.grad_tol, "gen": asdict(spec) if spec else None}
    if p.is_centered():
        reference = _load_reference(args, p.dim)
        sigma, trace = _run_with_trace(
            args, lambda sink: run_median_gd(p, config=config,
                                             reference=reference, on_record=sink))
        return _finish(args, "median", echo, trace, sigma)
    aug, c = augment_noncentered(p)
    reference = _load_reference(args, aug.dim)
    sigma_aug, trace = _run_with_trace(
        args, lambda sink: run_median_gd(aug, config=config,
                                         reference=reference, on_record=sink))
    solution = deaugment(sigma_aug, c, p.dim)
    echo["augmented"] = True
    return _finish(args, "median", echo, trace, solution.cov, solution.mean)


def cmd_euclidean(args):
    p, spec = _resolve_input(args, "euclidean")
    mean = np.zeros(p.dim)
    if not p.is_centered():
        mean, p = noncentered_split(p)
    reference = _load_reference(args, p.dim)
    lo, hi = p.spectral_box()
    config = EuclideanConfig(
        lambda_min=args.lambda_min if args.lambda_min is not None else lo,
        lambda_max=args.lambda_max if args.lambda_max is not None else hi,
        max_iters=args.max_iters,
        rng_seed=derive_seed(args.seed, "euclidean/sampler"),
        step_override=args.step)
    if args.sgd:
        runner = lambda sink: run_esgd(p, config=config, reference=reference,
                                       trace_stride=args.trace_stride,
                                       on_record=sink)
    else:
        runner = lambda sink: run_egd(p, config=config, reference=reference,
                                      on_record=sink)
    sigma, trace = _run_with_trace(args, runner)
    echo = {"algorithm": "esgd" if args.sgd else "egd",
            "lambda_min": config.lambda_min, "lambda_max": config.lambda_max,
            "max_iters": config.max_iters, "step_override": config.step_override,
            "gen": asdict(spec) if spec else None}
    return _finish(args, "euclidean", echo, trace, sigma, mean)


def cmd_gen_data(args):
    spec = parse_gen_spec(args.gen, derive_seed(args.seed, "gen-data"))
    p = generate(spec)
    save_dataset(p, args.out, metadata=spec)
    print(f"wrote {args.out} ({p.size} atoms, dimension {p.dim})")
    return EXIT_CONVERGED


def cmd_dim_sweep(args):
    dims = [int(v) for v in args.dims.split(",") if v]
    r_exponents = [int(v) for v in args.r.split(",") if v]
    rows = dim_sweep(dims=dims, n=args.n, alpha=args.alpha, beta=args.beta,
                     r_exponents=r_exponents, seed=args.seed)
    if args.out_table:
        write_dim_sweep_csv(rows, args.out_table)
        print(f"wrote {args.out_table}")
    if args.out_plot:
        from .figures import render_dim_sweep_figure

        render_dim_sweep_figure(rows, args.out_plot)
        print(f"wrote {args.out_plot}")
    for row in rows:
        print(f"d={row['d']} r={row['r']} passes={row['passes']} "
              f"var_p={row['var_p']:.6g}")
    return EXIT_CONVERGED


def cmd_robustness(args):
    scales = [float(v) for v in args.scales.split(",") if v]
    rows = robustness(n=args.n, d=args.d, alpha=args.alpha, beta=args.beta,
                      scales=scales, fraction=args.fraction,
                      epsilon=args.epsilon, seed=args.seed)
    if args.out_table:
        write_robustness_csv(rows, args.out_table)
        print(f"wrote {args.out_table}")
    if args.out_plot:
        from .figures import render_robustness_figure

        render_robustness_figure(rows, args.out_plot)
        print(f"wrote {args.out_plot}")
    for row in rows:
        print(f"scale={row['scale']:g} median_shift={row['median_shift']:.6g} "
              f"barycenter_shift={row['barycenter_shift']:.6g}")
    return EXIT_CONVERGED


def cmd_sdp_export(args):
    p, _ = _resolve_input(args, "sdp-export")
    if not p.is_centered():
        _, p = noncentered_split(p)
    sdp_export(p, args.out)
    print(f"wrote {args.out}")
    return EXIT_CONVERGED


def _add_input_flags(sp, required=True):
    group = sp.add_mutually_exclusive_group(required=required)
    group.add_argument("--input", help="dataset JSON path")
    group.add_argument("--gen", help="generator spec, e.g. method=2,n=10,d=5,alpha=1,beta=4")


def _add_solver_flags(sp):
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--max-iters", type=int, default=1000)
    sp.add_argument("--grad-tol", type=float, default=1e-10)
    sp.add_argument("--out-trace", help="trace CSV output path")
    sp.add_argument("--out-summary", help="summary JSON output path")
    sp.add_argument("--out-plot", help="render a figure of the trace to this path")
    sp.add_argument("--ref", help="reference point file (summary JSON or "
                                  "single-atom dataset) for w2sq_to_ref")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="bwopt",
        description="Gaussian barycenters and medians on the Bures-Wasserstein manifold")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("barycenter", help="Riemannian GD/SGD barycenter")
    _add_input_flags(sp)
    _add_solver_flags(sp)
    sp.add_argument("--sgd", action="store_true", help="use the stochastic solver")
    sp.add_argument("--sgd-theta", type=float, default=None,
                    help="theta for the theta/(t+theta) step decay")
    sp.add_argument("--trace-stride", type=int, default=1,
                    help="full diagnostics every this many stochastic iterations")
    sp.set_defaults(func=cmd_barycenter)

    sp = sub.add_parser("rbarycenter", help="entropically regularized barycenter")
    _add_input_flags(sp)
    _add_solver_flags(sp)
    sp.add_argument("--gamma", type=float, required=True,
                    help="regularization weight")
    sp.add_argument("--kappa", type=float, default=None,
                    help="spectral box parameter; inferred when omitted")
    sp.set_defaults(func=cmd_rbarycenter)

    sp = sub.add_parser("median", help="smoothed geometric median")
    _add_input_flags(sp)
    _add_solver_flags(sp)
    sp.add_argument("--epsilon", type=float, default=0.1,
                    help="smoothing level / target accuracy")
    sp.set_defaults(func=cmd_median)

    sp = sub.add_parser("euclidean", help="projected Euclidean GD/SGD baseline")
    _add_input_flags(sp)
    _add_solver_flags(sp)
    sp.add_argument("--lambda-min", type=float, default=None,
                    help="box lower bound; data minimum when omitted")
    sp.add_argument("--lambda-max", type=float, default=None,
                    help="box upper bound; data maximum when omitted")
    sp.add_argument("--step", type=float, default=None,
                    help="step size override (theoretical step when omitted)")
    sp.add_argument("--sgd", action="store_true", help="use the stochastic solver")
    sp.add_argument("--trace-stride", type=int, default=1)
    sp.set_defaults(func=cmd_euclidean)

    sp = sub.add_parser("gen-data", help="generate a dataset file")
    sp.add_argument("--gen", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="dataset JSON output path")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("dim-sweep", help="passes-to-convergence across dimensions")
    sp.add_argument("--dims", default="5,20,50")
    sp.add_argument("--n", type=int, default=50)
    sp.add_argument("--alpha", type=float, default=1e-3)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--r", default="3", help="comma-separated target exponents")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-table", help="CSV output path")
    sp.add_argument("--out-plot", help="figure output path")
    sp.set_defaults(func=cmd_dim_sweep)

    sp = sub.add_parser("robustness", help="contamination shift of median vs barycenter")
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--d", type=int, default=10)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=10.0)
    sp.add_argument("--scales", default="1,2,5,10,20")
    sp.add_argument("--fraction", type=float, default=0.45)
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-table", help="CSV output path")
    sp.add_argument("--out-plot", help="figure output path")
    sp.set_defaults(func=cmd_robustness)

    sp = sub.add_parser("sdp-export", help="write the barycenter SDP in SDPA format")
    _add_input_flags(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help=".dat-s output path")
    sp.set_defaults(func=cmd_sdp_export)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        where = f" at iteration {exc.iteration}" if exc.iteration is not None else ""
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

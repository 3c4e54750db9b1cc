#!/usr/bin/env python3
"""
cmhi - Command-line experiments for the centered Metropolis-Hastings independence sampler

One experiment per subcommand. Result lines go to stdout, logs to stderr,
files to --output, and every run leaves a `<output>.manifest.txt` that can be
replayed with --manifest.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

import config
from coupling import coupling_profile, write_coupling_csv
from datagen import SWEEP_GRID, GenConfig, build_cov, gen_design, generate_dataset, write_generated
from errors import CmhiError
from mh_kernel import INDEPENDENCE, MhKernel, centered_mhi, random_walk, sample_posterior, write_trace
from mode_finder import best_mode, find_mode, find_mode_restarts, verify_dominance
from models import GLM_FAMILIES
from rates import (METRICS, NORM_METRICS, R0_BY_KIND, acceptance_probe_scan, asymptotic_curve, certify,
                   epsilon_lower_bound_glm, estimate_epsilon_mc, power_iteration_lambda_max,
                   wasserstein_lower_bound, write_rate_csv)
from replicas import run_blocks
from spd_gaussian import GaussianSpec, identity
from targets import TargetModel, build_model, load_dataset

logger = logging.getLogger("cmhi")

BUILTIN_TARGETS = ("gauss1d", "gauss2d", "rwm")
NOT_REPLAYED = {"manifest", "handler", "command"}


def _num(x) -> str:
    """Summary-line formatting."""
    return format(float(x), ".10g")


def _floats(text: str) -> List[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _output(args, default_name: str) -> Path:
    path = Path(args.output) if args.output else Path(config.get_output_dir()) / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(args, output: Path) -> Path:
    """Flat key=value record of every resolved parameter, seed included."""
    manifest = output.with_name(output.name + ".manifest.txt")
    lines = [f"command={args.command}"]
    for key, value in sorted(vars(args).items()):
        if key in NOT_REPLAYED or value is None:
            continue
        lines.append(f"{key}={value}")
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def manifest_argv(path: str) -> List[str]:
    """Rebuild a command line from a manifest."""
    fields: Dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
    if "command" not in fields:
        raise ValueError(f"INVALID_REQUEST: manifest {path} has no command")
    argv = [fields.pop("command")]
    for key, value in fields.items():
        argv += [f"--{key.replace('_', '-')}", value]
    return argv


# ---------------------------------------------------------------- model setup

def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--target", choices=BUILTIN_TARGETS, help="built-in synthetic target")
    p.add_argument("--model", choices=tuple(GLM_FAMILIES), help="GLM kind for --data")
    p.add_argument("--data", help="dataset CSV (y,x1,...,xd)")
    p.add_argument("--alpha", type=float, default=1.0, help="prior precision multiplier")
    p.add_argument("--cov-spec", default="identity", choices=("identity", "scaled_identity", "diagonal", "file"))
    p.add_argument("--s0", type=float, default=1.0, help="trace of C for scaled_identity")
    p.add_argument("--cov-diag", default=None, help="comma-separated diagonal of C")
    p.add_argument("--cov-file", default=None, help="CSV covariance matrix")
    p.add_argument("--nb-xi", type=float, default=1.0)
    p.add_argument("--proposal-alpha", type=float, default=None,
                   help="precision multiplier of the centered proposal (default: prior alpha)")
    p.add_argument("--tol", type=float, default=None, help="mode gradient-norm tolerance")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--probes", type=int, default=None, help="dominance probes")


def _build_target(args) -> TargetModel:
    if args.target and args.data:
        raise ValueError("INVALID_REQUEST: give either --target or --data, not both")
    if args.target == "gauss1d":
        return build_model("gaussian-synthetic", 1, alpha=args.alpha, target_cov=identity(1))
    if args.target == "gauss2d":
        return build_model("gaussian-synthetic", 2, alpha=args.alpha, target_cov=identity(2))
    if args.target == "rwm":
        return build_model("rwm-example", 2)
    if not (args.data and args.model):
        raise ValueError("INVALID_REQUEST: --data and --model are required without --target")
    data = load_dataset(args.data)
    cov = build_cov(args.cov_spec, data.d, args.s0, _floats(args.cov_diag) if args.cov_diag else None,
                    args.cov_file)
    return build_model(args.model, data.d, data=data, alpha=args.alpha, cov=cov, nb_xi=args.nb_xi)


def _mode_and_kernel(args, model: TargetModel, rng: np.random.Generator):
    mode = find_mode(model, np.zeros(model.dim), args.tol, args.max_iter)
    kernel = centered_mhi(model, mode, args.proposal_alpha)
    report = verify_dominance(model, mode, kernel.proposal, args.probes, rng)
    print(f"dominance={'pass' if report.passed else 'fail'} max_violation={_num(report.max_violation)}")
    return mode, kernel, report


# ---------------------------------------------------------------- subcommands

def cmd_datagen(args) -> Path:
    cfg = GenConfig(kind=args.model, n=args.n, d=args.d, sigma2=args.sigma2, alpha=args.alpha,
                    cov_spec=args.cov_spec, s0=args.s0,
                    cov_diag=_floats(args.cov_diag) if args.cov_diag else [],
                    cov_file=args.cov_file, nb_xi=args.nb_xi, seed=args.seed)
    data, beta = generate_dataset(cfg)
    out = _output(args, "data.csv")
    sidecar = write_generated(cfg, data, beta, out)
    print(f"wrote {out} (n={data.n}, d={data.d}); config echoed to {sidecar}")
    return out


def cmd_mode(args) -> Path:
    model = _build_target(args)
    rng = np.random.default_rng(args.seed)
    inits = [np.zeros(model.dim)] + [rng.standard_normal(model.dim) for _ in range(max(0, args.restarts - 1))]
    results = find_mode_restarts(model, inits, args.tol, args.max_iter, args.threads)
    mode = best_mode(results)
    spread = max(r.f_star for r in results) - min(r.f_star for r in results)
    out = _output(args, "mode.txt")
    out.write_text(mode.to_record())
    print(mode.to_record(), end="")
    print(f"restarts={len(results)} f_star_spread={_num(spread)}")
    return out


def cmd_sample(args) -> Path:
    model = _build_target(args)
    rng = np.random.default_rng(args.seed)
    if args.kernel == "rw":
        kernel = random_walk(model, step_scale=args.step_scale)
        init = np.zeros(model.dim)
    else:
        mode, kernel, _ = _mode_and_kernel(args, model, rng)
        init = mode.beta_star
    result = sample_posterior(kernel, init, args.t, rng, burnin=args.burnin, thin=args.thin)
    out = _output(args, "trace.csv")
    write_trace(result["trace"], out)
    print(f"acceptance_rate={_num(result['acceptance_rate'])}")
    print(f"posterior_mean={','.join(_num(v) for v in result['mean'])}")
    print(f"posterior_sd={','.join(_num(v) for v in result['sd'])}")
    return out


def cmd_rate(args) -> Path:
    model = _build_target(args)
    rng = np.random.default_rng(args.seed)
    mode, kernel, _ = _mode_and_kernel(args, model, rng)
    points = args.grid_points or (20001 if model.dim == 1 else 801)
    cert = certify(model, mode, kernel, metric=args.metric, method=args.method, t_max=args.tmax, m=args.m,
                   rng=rng, density_bound=args.density_bound, grid_half_width=args.grid_half_width,
                   grid_points=points, rho_t=args.rho_t, rho_replicas=args.rho_replicas, threads=args.threads)
    print(f"epsilon={_num(cert.epsilon)}")
    print(f"epsilon_stderr={_num(cert.epsilon_stderr)}")
    print(f"mean_rho={_num(cert.mean_rho)}")
    out = _output(args, "rates.csv")
    write_rate_csv([(t, w, lb, None) for t, w, lb in cert.series], out)
    return out


def cmd_lower_bound(args) -> Path:
    out = _output(args, "lower_bound.csv")
    if args.data:
        model = _build_target(args)
        r0 = args.r0 if args.r0 is not None else R0_BY_KIND.get(model.kind)
        if r0 is None:
            raise ValueError(f"INVALID_REQUEST: --r0 is required for {model.kind}")
        bound = epsilon_lower_bound_glm(model.data, model.prior_alpha, model.prior_cov, r0,
                                        rng=np.random.default_rng(args.seed))
        print(f"lambda_max={_num(bound['lambda_max'])}")
        print(f"a_dn={_num(bound['a_dn'])}")
        print(f"epsilon_lb={_num(bound['epsilon_lb'])}")
        # an upper bound on (1 - eps)^t, not the exact rate
        rows = [(t, None, None, (1.0 - bound["epsilon_lb"]) ** t) for t in range(args.tmax + 1)]
    else:
        if args.density_bound is None or args.dim is None or args.acceptance is None:
            raise ValueError("INVALID_REQUEST: --density-bound, --dim and --acceptance are required")
        c0 = wasserstein_lower_bound(args.density_bound, args.dim, 0.0, 0, args.norm)
        print(f"C0={_num(c0)}")
        rows = [(t, None, wasserstein_lower_bound(args.density_bound, args.dim, args.acceptance, t, args.norm), None)
                for t in range(args.tmax + 1)]
    write_rate_csv(rows, out)
    return out


def cmd_couple(args) -> Path:
    model = _build_target(args)
    rng = np.random.default_rng(args.seed)
    mode, kernel, _ = _mode_and_kernel(args, model, rng)
    rows = coupling_profile(kernel, mode, _ints(args.t), args.replicas, args.metric, args.burnin, rng,
                            args.threads)
    out = _output(args, "coupling.csv")
    write_coupling_csv(rows, out)
    for r in rows:
        print(f"t={r.t} mean_distance={_num(r.mean_distance)} stderr={_num(r.stderr)} "
              f"fraction_coalesced={_num(r.fraction_coalesced)}")
    print(f"burnin={args.burnin} (chosen default for the stationary partner chain)")
    return out


def cmd_curve(args) -> Path:
    gammas = _floats(args.gamma)
    out = _output(args, "curve.csv")
    for g in gammas:
        curve = asymptotic_curve(g, args.sigma2, args.s0, args.alpha, args.r0, args.tmax)
        print(f"gamma={_num(g)} a0={_num(curve['a0'])} rate={_num(curve['rate'])}")
        path = out if len(gammas) == 1 else out.with_name(f"{out.stem}_gamma{g:g}{out.suffix}")
        write_rate_csv([(t, None, None, v) for t, v in enumerate(curve["series"])], path)
    return out


def _falsify_setup(example: str, step_scale: float):
    if example == "mhi-normal":
        target = build_model("gaussian-synthetic", 1, target_cov=identity(1))
        kernel = MhKernel(target=target, proposal_kind=INDEPENDENCE,
                          proposal=GaussianSpec(mean=np.ones(1), cov=identity(1), precision_scale=1.0))
        return kernel, [np.array([-float(k)]) for k in range(1, 9)]
    target = build_model("rwm-example", 2)
    return random_walk(target, step_scale=step_scale), [np.array([float(x), 0.0]) for x in (2, 4, 8, 16, 32, 64)]


def cmd_falsify(args) -> Path:
    kernel, thetas = _falsify_setup(args.example, args.step_scale)
    scan = acceptance_probe_scan(kernel, thetas, args.m, np.random.default_rng(args.seed))
    out = _output(args, "falsify.csv")
    with open(out, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["probe"] + [f"theta_{j + 1}" for j in range(kernel.dim)] + ["acceptance", "stderr"])
        for k, (th, est) in enumerate(zip(thetas, scan["estimates"]), start=1):
            writer.writerow([k] + [repr(float(v)) for v in th] + [repr(est["mean"]), repr(est["stderr"])])
            print(f"theta={','.join(_num(v) for v in th)} acceptance={_num(est['mean'])} stderr={_num(est['stderr'])}")
    print(f"strictly_decreasing={str(scan['strictly_decreasing']).lower()} final={_num(scan['final'])}")
    return out


def cmd_sweep(args) -> Path:
    grid = [tuple(int(v) for v in pair.split("x")) for pair in args.grid.split(",")] if args.grid else SWEEP_GRID
    t_values = _ints(args.t)
    rng = np.random.default_rng(args.seed)
    out = _output(args, "sweep.csv")
    with open(out, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["d", "n", "epsilon", "epsilon_stderr", "epsilon_lb", "t", "mean_distance", "stderr"])
        for d, n in grid:
            cfg = GenConfig(kind="logistic", n=n, d=d, sigma2=1.0, alpha=1.0, cov_spec="scaled_identity",
                            s0=args.sigma0_sq, seed=int(rng.integers(0, 2**63 - 1)))
            data, _ = generate_dataset(cfg)
            model = build_model("logistic", d, data=data, alpha=1.0, cov=build_cov("scaled_identity", d, args.sigma0_sq))
            mode, kernel, report = _mode_and_kernel(args, model, rng)
            eps = estimate_epsilon_mc(model, kernel, args.m, rng, report=report)
            lb = epsilon_lower_bound_glm(data, model.prior_alpha, model.prior_cov, R0_BY_KIND["logistic"])
            rows = coupling_profile(kernel, mode, t_values, args.replicas, "l2", args.burnin, rng, args.threads)
            for r in rows:
                writer.writerow([d, n, repr(eps["epsilon"]), repr(eps["stderr"]), repr(lb["epsilon_lb"]), r.t,
                                 repr(r.mean_distance), repr(r.stderr)])
            print(f"d={d} n={n} epsilon={_num(eps['epsilon'])} epsilon_lb={_num(lb['epsilon_lb'])}")
    return out


def cmd_eigen(args) -> Path:
    cfg = GenConfig(kind="logistic", n=args.n, d=args.d, sigma2=args.sigma2)
    limit = (1.0 + np.sqrt(cfg.gamma)) ** 2 * args.sigma2
    low = args.low if args.low is not None else 0.9 * limit
    high = args.high if args.high is not None else 1.1 * limit

    def trial(_, size, rng):
        return power_iteration_lambda_max(gen_design(cfg, rng), rng=rng)

    lambdas = run_blocks(trial, args.trials, args.seed, args.threads, block_size=1)
    inside = sum(low <= lam <= high for lam in lambdas)
    out = _output(args, "eigen.csv")
    with open(out, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["trial", "lambda_max"])
        for k, lam in enumerate(lambdas, start=1):
            writer.writerow([k, repr(lam)])
    print(f"limit={_num(limit)} window=[{_num(low)},{_num(high)}] inside={inside}/{len(lambdas)}")
    return out


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmhi", description="Centered Metropolis-Hastings independence sampler experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=config.get_seed())
    common.add_argument("--threads", type=int, default=config.get_threads())
    common.add_argument("--block-size", type=int, default=config.get_block_size(),
                        help="replicas per random stream; results depend on it, so manifests record it")
    common.add_argument("--output", "-o", default=None)
    common.add_argument("--log-level", default=config.get_log_level())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", parents=[common], help="generate a synthetic GLM dataset")
    p.add_argument("--model", required=True, choices=tuple(GLM_FAMILIES))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--cov-spec", default="identity", choices=("identity", "scaled_identity", "diagonal", "file"))
    p.add_argument("--s0", type=float, default=1.0)
    p.add_argument("--cov-diag", default=None)
    p.add_argument("--cov-file", default=None)
    p.add_argument("--nb-xi", type=float, default=1.0)
    p.set_defaults(handler=cmd_datagen)

    p = sub.add_parser("mode", parents=[common], help="posterior mode by gradient descent")
    _add_model_args(p)
    p.add_argument("--restarts", type=int, default=1)
    p.set_defaults(handler=cmd_mode)

    p = sub.add_parser("sample", parents=[common], help="run a chain and write its trace")
    _add_model_args(p)
    p.add_argument("--kernel", choices=("centered", "rw"), default="centered")
    p.add_argument("--step-scale", type=float, default=1.0)
    p.add_argument("--t", type=int, default=10000)
    p.add_argument("--burnin", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("rate", parents=[common], help="certify the exact convergence rate from the mode")
    _add_model_args(p)
    p.add_argument("--method", choices=("mc", "quadrature", "glm_bound"), default="mc")
    p.add_argument("--metric", choices=METRICS, default="l2")
    p.add_argument("--m", type=int, default=100000)
    p.add_argument("--tmax", type=int, default=50)
    p.add_argument("--density-bound", type=float, default=None)
    p.add_argument("--grid-half-width", type=float, default=12.0)
    p.add_argument("--grid-points", type=int, default=None)
    p.add_argument("--rho-t", type=int, default=2000)
    p.add_argument("--rho-replicas", type=int, default=100)
    p.set_defaults(handler=cmd_rate)

    p = sub.add_parser("lower-bound", parents=[common], help="generic MH lower bound or GLM epsilon bound")
    _add_model_args(p)
    p.add_argument("--density-bound", type=float, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--acceptance", type=float, default=None)
    p.add_argument("--norm", choices=NORM_METRICS, default="l1")
    p.add_argument("--r0", type=float, default=None)
    p.add_argument("--tmax", type=int, default=50)
    p.set_defaults(handler=cmd_lower_bound)

    p = sub.add_parser("couple", parents=[common], help="synchronous coupling estimate of W_rho")
    _add_model_args(p)
    p.add_argument("--t", default="1,2,3,5,10")
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--metric", choices=METRICS, default="l2")
    p.add_argument("--burnin", type=int, default=config.get_burnin())
    p.set_defaults(handler=cmd_couple)

    p = sub.add_parser("curve", parents=[common], help="limiting rate curves (1 - exp(-a0))^t")
    p.add_argument("--gamma", required=True, help="one or more comma-separated values")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--s0", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--r0", type=float, default=0.25)
    p.add_argument("--tmax", type=int, default=100)
    p.set_defaults(handler=cmd_curve)

    p = sub.add_parser("falsify", parents=[common], help="acceptance scan along a probe sequence")
    p.add_argument("--example", choices=("mhi-normal", "rwm"), default="mhi-normal")
    p.add_argument("--step-scale", type=float, default=2.0, help="random-walk step scale for the rwm example")
    p.add_argument("--m", type=int, default=100000)
    p.set_defaults(handler=cmd_falsify)

    p = sub.add_parser("sweep", parents=[common], help="growing (d, n) logistic experiment")
    p.add_argument("--grid", default=None, help="comma-separated DxN pairs, e.g. 100x10,200x20")
    p.add_argument("--sigma0-sq", type=float, default=10.0)
    p.add_argument("--t", default="1,10,100")
    p.add_argument("--m", type=int, default=10000)
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--burnin", type=int, default=config.get_burnin())
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--probes", type=int, default=None)
    p.add_argument("--proposal-alpha", type=float, default=None)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("eigen", parents=[common], help="largest eigenvalue of X^T X against its limit")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=1000)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--low", type=float, default=None)
    p.add_argument("--high", type=float, default=None)
    p.set_defaults(handler=cmd_eigen)

    return parser


def run_subcommand(argv: Optional[List[str]] = None) -> int:
    """Parse argv and run one experiment; returns the process exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--manifest" in argv:
        i = argv.index("--manifest")
        if i + 1 >= len(argv):
            print("usage error: --manifest needs a path", file=sys.stderr)
            return 2
        try:
            replay = manifest_argv(argv[i + 1])
        except (OSError, ValueError) as e:
            print(f"usage error: {e}", file=sys.stderr)
            return 2
        rest = argv[:i] + argv[i + 2:]
        if rest and rest[0] == replay[0]:
            rest = rest[1:]
        argv = replay + rest

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )

    previous_block_size = config.get_block_size()
    try:
        config.set_block_size(args.block_size)
        output = args.handler(args)
        write_manifest(args, output)
        return 0
    except CmhiError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"Unexpected failure in {args.command}: {e}", exc_info=True)
        return 1
    finally:
        config.set_block_size(previous_block_size)


def main():
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()

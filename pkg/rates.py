#!/usr/bin/env python3
"""
Rates - Convergence-rate certificates for centered independence samplers

From the mode theta*, a centered MHI kernel satisfies
    P^t(theta*, .) = (1 - (1 - eps)^t) Pi + (1 - eps)^t delta_{theta*}
with eps = q(theta*) / pi(theta*), so W_rho(P^t(theta*, .), Pi) = (1 - eps)^t E_Pi[rho(., theta*)].
This module estimates eps, the mean distance term, the generic lower bound for
Metropolis-Hastings kernels and the high-dimensional bounds for binary GLMs.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

import config
from errors import (DimensionTooLarge, DominanceNotVerified, GridTooCoarse, InvalidBound,
                    PowerIterationStalled)
from mh_kernel import MhKernel, estimate_acceptance, mh_step_batch
from mode_finder import DominanceReport, ModeResult, verify_dominance
from replicas import mean_stderr, run_blocks
from spd_gaussian import SpdMatrix, gauss_logpdf, gauss_sample
from targets import Dataset, TargetModel

logger = logging.getLogger(__name__)

METRICS = ("l1", "l2", "linf", "tv")
NORM_METRICS = ("l1", "l2", "linf")
GRID_RTOL = 1e-6
WEIGHT_EXCESS_TOL = 1e-10
POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000
GRAM_LIMIT = 1_000_000
R0_BY_KIND = {"logistic": 0.25, "probit": 1.0}


def rho(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    """Distance between rows of a and b; tv is the 0/1 inequality indicator."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if metric == "l1":
        return np.sum(np.abs(diff), axis=-1)
    if metric == "l2":
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if metric == "linf":
        return np.max(np.abs(diff), axis=-1)
    if metric == "tv":
        return np.any(diff != 0, axis=-1).astype(float)
    raise ValueError(f"INVALID_REQUEST: unknown metric {metric!r}; expected one of {', '.join(METRICS)}")


@dataclass
class RateCertificate:
    epsilon: float
    epsilon_stderr: float
    method: str  # mc, quadrature or glm_bound
    mean_rho: float
    metric: str
    series: List[Tuple[int, float, Optional[float]]] = field(default_factory=list)

    def exact_w(self, t: int) -> float:
        return (1.0 - self.epsilon) ** t * self.mean_rho


def _mode_of(kernel: MhKernel) -> ModeResult:
    beta = np.array(kernel.proposal.mean)
    return ModeResult(beta_star=beta, f_star=kernel.target.neg_log_post(beta), grad_norm=float("nan"),
                      iterations=0, converged=True)


def require_dominance(kernel: MhKernel, rng: np.random.Generator,
                      report: Optional[DominanceReport] = None) -> DominanceReport:
    """
    Refuse to certify anything unless the kernel is a centered independence
    kernel whose proposal is dominated as required.

    Probes run on a stream spawned from rng, leaving rng's own draws untouched.
    """
    if not kernel.is_independence:
        raise DominanceNotVerified("rate certificates need a centered independence kernel")
    if report is None:
        report = verify_dominance(kernel.target, _mode_of(kernel), kernel.proposal, rng=rng.spawn(1)[0])
    if not report.passed:
        raise DominanceNotVerified(f"max violation {report.max_violation:.3e}")
    return report


def estimate_epsilon_mc(model: TargetModel, kernel: MhKernel, m: int, rng: np.random.Generator,
                        report: Optional[DominanceReport] = None) -> Dict[str, float]:
    """
    eps = E_q[w(theta') / w(theta*)] with w = pi / q; normalizing constants cancel.

    Under dominance each ratio is at most 1. Excesses up to WEIGHT_EXCESS_TOL are
    rounding and are clipped, so the estimator equals the acceptance average at
    theta*; a larger excess is a dominance failure the probes missed.
    """
    if m < 2:
        raise ValueError("INVALID_REQUEST: m must be at least 2")
    require_dominance(kernel, rng, report)
    beta_star = kernel.proposal.mean
    w_star = kernel.log_weight(beta_star, model.log_target(beta_star))
    draws = gauss_sample(kernel.proposal, rng, size=m)
    ratios = np.exp(kernel.log_weight(draws, model.log_target(draws)) - w_star)
    worst = int(np.argmax(ratios))
    if ratios[worst] > 1.0 + WEIGHT_EXCESS_TOL:
        raise DominanceNotVerified(f"weight ratio {ratios[worst]:.12g} > 1 at {draws[worst]}")
    ratios = np.minimum(ratios, 1.0)
    epsilon, stderr = mean_stderr(ratios)
    logger.info(f"MC epsilon = {epsilon:.6g} +/- {stderr:.2g} (m={m})")
    return {"epsilon": epsilon, "stderr": stderr}


def _grid(center: np.ndarray, half_width: float, points: int) -> List[np.ndarray]:
    return [np.linspace(c - half_width, c + half_width, points) for c in center]


def _integrate_on_grid(values_fn, axes: List[np.ndarray]) -> float:
    """Tensor-product trapezoid rule; values_fn maps (k, d) points to (k,) values."""
    if len(axes) == 1:
        return float(integrate.trapezoid(values_fn(axes[0][:, None]), axes[0]))
    rows = []
    for x in axes[0]:
        pts = np.column_stack([np.full(axes[1].shape, x), axes[1]])
        rows.append(integrate.trapezoid(values_fn(pts), axes[1]))
    return float(integrate.trapezoid(np.array(rows), axes[0]))


def _check_quadrature_dim(d: int):
    if d > 2:
        raise DimensionTooLarge(f"quadrature supports d <= 2, got d={d}")


def normalizer_quadrature(model: TargetModel, center, half_width: float, points: int) -> float:
    """Z' = integral of exp(-(f - f(center))) over the box center +/- half_width."""
    center = np.asarray(center, dtype=float)
    _check_quadrature_dim(model.dim)
    f0 = model.neg_log_post(center)
    axes = _grid(center, half_width, points)
    return _integrate_on_grid(lambda pts: np.exp(f0 - model.neg_log_post(pts)), axes)


def epsilon_quadrature(model: TargetModel, kernel: MhKernel, grid_half_width: float = 12.0,
                       grid_points: int = 20001) -> float:
    """
    eps = q(beta*) Z exp(f(beta*)), Z by trapezoid on [beta* - h, beta* + h]^d.

    The rule is repeated on the nested grid with 2 * points - 1 nodes; a relative
    change above 1e-6 means the grid is too coarse.
    """
    _check_quadrature_dim(model.dim)
    beta_star = np.asarray(kernel.proposal.mean)
    log_q_star = gauss_logpdf(beta_star, kernel.proposal)

    coarse = np.exp(log_q_star) * normalizer_quadrature(model, beta_star, grid_half_width, grid_points)
    fine = np.exp(log_q_star) * normalizer_quadrature(model, beta_star, grid_half_width, 2 * grid_points - 1)
    if abs(fine - coarse) > GRID_RTOL * abs(fine):
        raise GridTooCoarse(f"doubling the grid moved epsilon from {coarse:.10g} to {fine:.10g}")
    logger.info(f"Quadrature epsilon = {fine:.10g}")
    return float(fine)


def power_iteration_lambda_max(X: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER,
                               rng: Optional[np.random.Generator] = None) -> float:
    """
    Largest eigenvalue of X^T X by power iteration on the Rayleigh quotient.

    X^T X is formed only when n * d <= 1e6; otherwise each step applies X then X^T.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n == 0:
        return 0.0
    rng = rng if rng is not None else np.random.default_rng(0)
    if n * d <= GRAM_LIMIT:
        gram = X.T @ X
        apply = lambda v: gram @ v
    else:
        apply = lambda v: X.T @ (X @ v)

    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(max_iter):
        y = apply(v)
        lam_new = float(v @ y)
        y_norm = np.linalg.norm(y)
        if y_norm == 0.0:
            return 0.0
        v = y / y_norm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            logger.debug(f"Power iteration converged in {it + 1} steps: lambda_max={lam_new:.10g}")
            return lam_new
        lam = lam_new
    raise PowerIterationStalled(f"no convergence after {max_iter} iterations (last {lam:.10g})")


def epsilon_lower_bound_glm(data: Dataset, alpha: float, C: SpdMatrix, r0: float,
                            rng: Optional[np.random.Generator] = None) -> Dict[str, float]:
    """
    a_dn = (r0 / 2 alpha) lambda_max(X^T X) tr(C) and eps >= exp(-a_dn).

    r0 bounds the second derivative of the per-observation loss: 1/4 for logistic, 1 for probit.
    """
    if not r0 > 0:
        raise InvalidBound("r0 must be positive")
    lam = power_iteration_lambda_max(data.X, rng=rng)
    a_dn = r0 / (2.0 * alpha) * lam * C.trace
    return {"a_dn": a_dn, "epsilon_lb": float(np.exp(-a_dn)), "lambda_max": lam}


def exact_rate_series(epsilon: float, mean_rho: float, t_max: int, metric: Optional[str] = None) -> List[float]:
    """(1 - eps)^t * mean_rho for t = 0..t_max; tv uses mean_rho = 1."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"INVALID_REQUEST: epsilon must lie in (0, 1], got {epsilon}")
    if mean_rho < 0:
        raise ValueError("INVALID_REQUEST: mean_rho must be non-negative")
    if metric == "tv":
        mean_rho = 1.0
    return [(1.0 - epsilon) ** t * mean_rho for t in range(t_max + 1)]


def mean_rho(model: TargetModel, mode: ModeResult, metric: str, method: str = "quadrature",
             rng: Optional[np.random.Generator] = None, kernel: Optional[MhKernel] = None,
             t: int = 2000, replicas: int = 100, grid_half_width: float = 12.0,
             grid_points: int = 20001, threads: Optional[int] = None) -> Dict[str, float]:
    """
    E_Pi[rho(theta, beta*)].

    quadrature: ratio of trapezoid integrals on the box around beta* (d <= 2).
    long_chain: `replicas` centered MHI chains of t steps from beta*, each
    averaging rho over its second half; stderr across replicas.
    """
    if metric not in METRICS:
        raise ValueError(f"INVALID_REQUEST: unknown metric {metric!r}")
    if metric == "tv":
        return {"value": 1.0, "stderr": 0.0}
    beta_star = np.asarray(mode.beta_star, dtype=float)

    if method == "quadrature":
        _check_quadrature_dim(model.dim)
        f0 = model.neg_log_post(beta_star)
        axes = _grid(beta_star, grid_half_width, grid_points)
        z = _integrate_on_grid(lambda p: np.exp(f0 - model.neg_log_post(p)), axes)
        m1 = _integrate_on_grid(lambda p: rho(p, beta_star, metric) * np.exp(f0 - model.neg_log_post(p)), axes)
        return {"value": m1 / z, "stderr": 0.0}

    if method != "long_chain":
        raise ValueError(f"INVALID_REQUEST: unknown method {method!r}")
    rng = rng if rng is not None else np.random.default_rng(config.get_seed())
    if kernel is None:
        raise ValueError("INVALID_REQUEST: long_chain needs a centered kernel")
    require_dominance(kernel, rng)
    burn = t // 2

    def block(b, size, block_rng):
        pos = np.repeat(beta_star[None, :], size, axis=0)
        lp = model.log_target(pos)
        total = np.zeros(size)
        for step in range(1, t + 1):
            pos, lp, _ = mh_step_batch(kernel, pos, lp, block_rng)
            if step > burn:
                total += rho(pos, beta_star, metric)
        return total / max(1, t - burn)

    seed = int(rng.integers(0, 2**63 - 1))
    averages = np.concatenate(run_blocks(block, replicas, seed, threads))
    value, stderr = mean_stderr(averages)
    return {"value": value, "stderr": stderr}


def norm_constant(norm: str, d: int) -> float:
    """C0' with ||.|| >= C0' ||.||_1."""
    if norm == "l1":
        return 1.0
    if norm == "l2":
        return d ** -0.5
    if norm == "linf":
        return 1.0 / d
    raise ValueError(f"INVALID_REQUEST: lower bound needs a norm metric, got {norm!r}")


def wasserstein_lower_bound(M_density_bound: float, d: int, A_theta: float, t: int, norm: str = "l1") -> float:
    """
    C0 (1 - A(theta))^{t (1 + 1/d)} with
    C0 = C0' (1 - 1/(1 + d)) / (2 M^{1/d} (1 + d)^{1/d}), valid whenever pi <= M.
    """
    if not M_density_bound > 0:
        raise InvalidBound(f"density bound must be positive, got {M_density_bound}")
    if not 0.0 <= A_theta <= 1.0:
        raise InvalidBound(f"A(theta) must lie in [0, 1], got {A_theta}")
    c0 = norm_constant(norm, d) * (1.0 - 1.0 / (1.0 + d)) / (2.0 * M_density_bound ** (1.0 / d) * (1.0 + d) ** (1.0 / d))
    return c0 * (1.0 - A_theta) ** (t * (1.0 + 1.0 / d))


def verify_density_bound(model: TargetModel, M: float, center=None, half_width: float = 12.0,
                         points: int = 2001) -> Dict[str, float]:
    """Check sup pi <= M on a quadrature grid (d <= 2)."""
    _check_quadrature_dim(model.dim)
    center = np.zeros(model.dim) if center is None else np.asarray(center, dtype=float)
    f0 = model.neg_log_post(center)
    axes = _grid(center, half_width, points)
    z = _integrate_on_grid(lambda p: np.exp(f0 - model.neg_log_post(p)), axes)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.dim)
    sup = float(np.max(np.exp(f0 - model.neg_log_post(mesh)))) / z
    return {"sup_estimate": sup, "ok": sup <= M * (1.0 + 1e-9)}


def asymptotic_curve(gamma: float, sigma2: float, s0: float, alpha: float, r0: float,
                     t_max: int) -> Dict[str, object]:
    """a0 = r0 (1 + sqrt(gamma))^2 sigma2 s0 / (2 alpha); rate = 1 - exp(-a0); series rate^t."""
    for name, value in (("gamma", gamma), ("sigma2", sigma2), ("s0", s0), ("alpha", alpha), ("r0", r0)):
        if not value > 0:
            raise ValueError(f"INVALID_REQUEST: {name} must be positive")
    a0 = r0 * (1.0 + np.sqrt(gamma)) ** 2 * sigma2 * s0 / (2.0 * alpha)
    rate = float(-np.expm1(-a0))
    return {"a0": float(a0), "rate": rate, "series": [rate ** t for t in range(t_max + 1)]}


def acceptance_probe_scan(kernel: MhKernel, thetas: Iterable, m: int, rng: np.random.Generator) -> Dict[str, object]:
    """
    Estimate A(theta) along a probe sequence.

    A sequence driving A toward 0 witnesses that no uniform acceptance floor
    exists, which rules out geometric Wasserstein convergence in any norm.
    """
    estimates = [estimate_acceptance(kernel, th, m, rng) for th in thetas]
    means = [e["mean"] for e in estimates]
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    return {"estimates": estimates, "means": means, "strictly_decreasing": decreasing,
            "final": means[-1] if means else float("nan")}


def certify(model: TargetModel, mode: ModeResult, kernel: MhKernel, metric: str = "l2",
            method: str = "mc", t_max: int = 50, m: int = 100_000,
            rng: Optional[np.random.Generator] = None, density_bound: Optional[float] = None,
            rho_method: Optional[str] = None, grid_half_width: float = 12.0,
            grid_points: int = 20001, rho_t: int = 2000, rho_replicas: int = 100,
            threads: Optional[int] = None) -> RateCertificate:
    """
    Full certificate from the mode: eps by `method`, E_Pi[rho], and the exact
    series with the generic lower bound where a density bound is supplied.
    """
    rng = rng if rng is not None else np.random.default_rng(config.get_seed())
    report = require_dominance(kernel, rng)

    if method == "mc":
        est = estimate_epsilon_mc(model, kernel, m, rng, report=report)
        eps, eps_se = est["epsilon"], est["stderr"]
    elif method == "quadrature":
        eps, eps_se = epsilon_quadrature(model, kernel, grid_half_width, grid_points), 0.0
    elif method == "glm_bound":
        r0 = R0_BY_KIND.get(model.kind)
        if r0 is None:
            raise InvalidBound(f"no curvature constant r0 is known for {model.kind}")
        eps = epsilon_lower_bound_glm(model.data, kernel.proposal.precision_scale, kernel.proposal.cov, r0)["epsilon_lb"]
        eps_se = 0.0
    else:
        raise ValueError(f"INVALID_REQUEST: unknown method {method!r}")

    if rho_method is None:
        rho_method = "quadrature" if model.dim <= 2 else "long_chain"
    mr = mean_rho(model, mode, metric, rho_method, rng=rng, kernel=kernel, t=rho_t, replicas=rho_replicas,
                  grid_half_width=grid_half_width, grid_points=grid_points, threads=threads)

    exact = exact_rate_series(eps, mr["value"], t_max, metric)
    series = []
    for t, w in enumerate(exact):
        lb = None
        if density_bound is not None and metric in NORM_METRICS:
            lb = wasserstein_lower_bound(density_bound, model.dim, eps, t, metric)
        series.append((t, w, lb))
    return RateCertificate(epsilon=eps, epsilon_stderr=eps_se, method=method, mean_rho=mr["value"],
                           metric=metric, series=series)


def _cell(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def write_rate_csv(rows: Sequence[Tuple[int, Optional[float], Optional[float], Optional[float]]],
                   path: Union[str, Path]):
    """`t,exact_w,lower_bound,asymptotic_bound`; missing values are empty fields."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t", "exact_w", "lower_bound", "asymptotic_bound"])
        for t, exact, lower, asym in rows:
            writer.writerow([t, _cell(exact), _cell(lower), _cell(asym)])

#!/usr/bin/env python3
"""
Mode Finder - Posterior mode search and dominance verification for centered proposals
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

import config
from errors import MeanMismatch, NonFiniteObjective
from spd_gaussian import GaussianSpec, gauss_logpdf, gauss_sample
from targets import TargetModel

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MIN_STEP = 1e-20
MAX_STEP = 1e8
DOMINANCE_TOL = 1e-8
RAY_RADII = (1.0, 10.0, 100.0)
PROBE_INFLATION = 9.0


@dataclass
class ModeResult:
    beta_star: np.ndarray
    f_star: float
    grad_norm: float
    iterations: int
    converged: bool
    tol: float = 1e-8
    history: List[float] = field(default_factory=list, repr=False)

    def to_record(self) -> str:
        """Flat key=value text."""
        lines = [
            f"beta_star={','.join(repr(float(b)) for b in self.beta_star)}",
            f"f_star={repr(float(self.f_star))}",
            f"grad_norm={repr(float(self.grad_norm))}",
            f"iterations={self.iterations}",
            f"converged={str(self.converged).lower()}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_record(cls, text: str) -> "ModeResult":
        fields = {}
        for line in text.splitlines():
            if "=" in line:
                key, value = line.split("=", 1)
                fields[key.strip()] = value.strip()
        try:
            return cls(
                beta_star=np.array([float(v) for v in fields["beta_star"].split(",")]),
                f_star=float(fields["f_star"]),
                grad_norm=float(fields["grad_norm"]),
                iterations=int(fields["iterations"]),
                converged=fields["converged"] == "true",
            )
        except KeyError as e:
            raise ValueError(f"INVALID_REQUEST: mode record missing {e}")


def _objective(model: TargetModel, beta: np.ndarray) -> float:
    value = model.neg_log_post(beta)
    if np.isnan(value):
        raise NonFiniteObjective(f"f evaluated to NaN at {beta}")
    return value


def find_mode(model: TargetModel, init=None, tol: Optional[float] = None,
              max_iter: Optional[int] = None) -> ModeResult:
    """
    Gradient descent with backtracking Armijo line search.

    The trial step doubles after each accepted step and halves until
    f(beta - t g) <= f(beta) - c t |g|^2. When f has stopped resolving the
    decrease (differences at rounding level) a step is still accepted if it
    shrinks the gradient norm and does not raise f, so the history never
    increases and the last iterate is the best one.
    """
    tol = config.get_mode_tol() if tol is None else tol
    max_iter = config.get_mode_max_iter() if max_iter is None else max_iter
    beta = np.zeros(model.dim) if init is None else np.array(init, dtype=float)

    f = _objective(model, beta)
    if not np.isfinite(f):
        raise NonFiniteObjective("f is not finite at the initial point")
    g = model.grad_neg_log_post(beta)
    gn = float(np.linalg.norm(g))
    history = [f]
    step = 1.0
    it = 0

    while gn > tol and it < max_iter:
        if not np.isfinite(gn):
            raise NonFiniteObjective(f"gradient is not finite at iteration {it}")
        t = step
        accepted = False
        while t >= MIN_STEP:
            cand = beta - t * g
            fc = _objective(model, cand)
            if np.isfinite(fc):
                if fc <= f - ARMIJO_C * t * gn * gn:
                    accepted = True
                    break
                if fc <= f and f - fc <= 1e-14 * (1.0 + abs(f)):
                    gc = model.grad_neg_log_post(cand)
                    if np.linalg.norm(gc) < gn:
                        accepted = True
                        break
            t *= 0.5
        if not accepted:
            logger.warning(f"Line search stalled at iteration {it} with |grad|={gn:.3e}")
            break
        beta, f = cand, fc
        g = model.grad_neg_log_post(beta)
        gn = float(np.linalg.norm(g))
        history.append(f)
        step = min(2.0 * t, MAX_STEP)
        it += 1

    converged = gn <= tol
    if converged:
        logger.debug(f"Mode found in {it} iterations: f*={f:.12g}, |grad|={gn:.3e}")
    else:
        logger.warning(f"Mode search not converged after {it} iterations: |grad|={gn:.3e} > {tol:.1e}")
    return ModeResult(beta_star=beta, f_star=f, grad_norm=gn, iterations=it,
                      converged=converged, tol=tol, history=history)


def find_mode_restarts(model: TargetModel, inits: Sequence, tol: Optional[float] = None,
                       max_iter: Optional[int] = None, threads: int = 1) -> List[ModeResult]:
    """Independent restarts; results are in the order of `inits`."""
    if threads <= 1:
        return [find_mode(model, init, tol, max_iter) for init in inits]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda init: find_mode(model, init, tol, max_iter), inits))


def best_mode(results: Sequence[ModeResult]) -> ModeResult:
    return min(results, key=lambda r: r.f_star)


@dataclass
class DominanceReport:
    max_violation: float
    passed: bool
    probes: int
    worst_theta: Optional[np.ndarray] = None

    def to_dict(self) -> Dict:
        return {"max_violation": self.max_violation, "pass": self.passed, "probes": self.probes}


def _check_centered(mode: ModeResult, proposal: GaussianSpec):
    if not np.allclose(proposal.mean, mode.beta_star, rtol=0.0, atol=1e-12):
        raise MeanMismatch("proposal mean is not the posterior mode")


def dominance_probes(mode: ModeResult, proposal: GaussianSpec, probes: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Bulk draws from N(beta*, 9 alpha^{-1} C) followed by +/- axis rays at radii 1, 10, 100."""
    inflated = GaussianSpec(mean=mode.beta_star, cov=proposal.cov,
                            precision_scale=proposal.precision_scale / PROBE_INFLATION)
    bulk = gauss_sample(inflated, rng, size=probes) if probes > 0 else np.zeros((0, proposal.dim))
    d = proposal.dim
    rays = [mode.beta_star + sign * r * np.eye(d)[j]
            for j in range(d) for sign in (1.0, -1.0) for r in RAY_RADII]
    return np.vstack([bulk, np.array(rays)])


def dominance_violations(model: TargetModel, mode: ModeResult, proposal: GaussianSpec,
                         thetas: np.ndarray) -> np.ndarray:
    """v(theta) = f(theta*) + alpha (theta - theta*)^T C^{-1} (theta - theta*) / 2 - f(theta)"""
    f_star = model.neg_log_post(mode.beta_star)
    quad = 0.5 * proposal.precision_scale * proposal.cov.quad_form(thetas - mode.beta_star)
    return f_star + quad - model.neg_log_post(thetas)


def verify_dominance(model: TargetModel, mode: ModeResult, proposal: GaussianSpec,
                     probes: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> DominanceReport:
    """Probe f(theta) >= f(theta*) + alpha (theta - theta*)^T C^{-1} (theta - theta*) / 2."""
    _check_centered(mode, proposal)
    probes = config.get_dominance_probes() if probes is None else probes
    rng = rng if rng is not None else np.random.default_rng(config.get_seed())

    thetas = dominance_probes(mode, proposal, probes, rng)
    v = dominance_violations(model, mode, proposal, thetas)
    v = np.where(np.isnan(v), np.inf, v)
    worst = int(np.argmax(v))
    max_violation = max(float(v[worst]), 0.0)
    passed = max_violation <= DOMINANCE_TOL

    if passed:
        logger.info(f"Dominance verified on {len(thetas)} probes (max violation {max_violation:.3e})")
    else:
        logger.warning(f"Dominance FAILED: violation {max_violation:.3e} at {thetas[worst]}")
    return DominanceReport(max_violation=max_violation, passed=passed, probes=len(thetas),
                           worst_theta=thetas[worst])


def dominance_formulations_agree(model: TargetModel, mode: ModeResult, proposal: GaussianSpec,
                                 thetas: np.ndarray, tol: float = DOMINANCE_TOL) -> np.ndarray:
    """
    Per-probe agreement between the quadratic bound and the acceptance-weight form
    log q(theta) - log pi(theta) >= log q(theta*) - log pi(theta*).
    """
    _check_centered(mode, proposal)
    by_bound = dominance_violations(model, mode, proposal, thetas) <= tol
    weight = gauss_logpdf(thetas, proposal) - model.log_target(thetas)
    weight_star = gauss_logpdf(mode.beta_star, proposal) - model.log_target(mode.beta_star)
    by_weight = weight - weight_star >= -tol
    return by_bound == by_weight

#!/usr/bin/env python3
"""
MH Kernel - Metropolis-Hastings steps for centered independence and random-walk proposals

All acceptance arithmetic is in log space. Each step consumes the proposal
normals first and one uniform second from the caller's stream.
"""

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

import config
from errors import DimensionMismatch, ModeNotConverged, NanFault
from mode_finder import ModeResult
from replicas import mean_stderr, run_blocks
from spd_gaussian import GaussianSpec, SpdMatrix, gauss_logpdf, gauss_sample, identity
from targets import TargetModel

logger = logging.getLogger(__name__)

INDEPENDENCE = "independence"
RANDOM_WALK = "random_walk"


@dataclass(frozen=True, eq=False)
class MhKernel:
    target: TargetModel
    proposal_kind: str
    proposal: GaussianSpec  # independence: N(mean, C/alpha); random walk: zero-mean step law

    def __post_init__(self):
        if self.proposal_kind not in (INDEPENDENCE, RANDOM_WALK):
            raise ValueError(f"INVALID_REQUEST: unknown proposal kind {self.proposal_kind!r}")
        if self.proposal.dim != self.target.dim:
            raise DimensionMismatch(f"proposal dim {self.proposal.dim} vs target dim {self.target.dim}")

    @property
    def dim(self) -> int:
        return self.target.dim

    @property
    def is_independence(self) -> bool:
        return self.proposal_kind == INDEPENDENCE

    def propose(self, positions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One proposal per row of positions (or for a single position)."""
        size = None if positions.ndim == 1 else positions.shape[0]
        draw = gauss_sample(self.proposal, rng, size=size)
        return draw if self.is_independence else positions + draw

    def log_weight(self, theta, log_post=None):
        """log pi(theta) - log q(theta) for independence kernels."""
        log_post = self.target.log_target(theta) if log_post is None else log_post
        return log_post - gauss_logpdf(theta, self.proposal)


def centered_mhi(model: TargetModel, mode: ModeResult, proposal_alpha: Optional[float] = None) -> MhKernel:
    """
    Independence kernel with proposal N(beta*, C / alpha).

    alpha and C are the model's prior parameters; `proposal_alpha` overrides
    the precision multiplier (certification then rests on verify_dominance).
    """
    if not mode.converged:
        raise ModeNotConverged(f"mode search stopped with |grad|={mode.grad_norm:.3e}")
    alpha = model.prior_alpha if proposal_alpha is None else float(proposal_alpha)
    proposal = GaussianSpec(mean=np.array(mode.beta_star, dtype=float), cov=model.prior_cov,
                            precision_scale=alpha)
    logger.debug(f"Centered MHI proposal: alpha={alpha}, dim={model.dim}")
    return MhKernel(target=model, proposal_kind=INDEPENDENCE, proposal=proposal)


def random_walk(model: TargetModel, step_cov: Optional[SpdMatrix] = None, step_scale: float = 1.0) -> MhKernel:
    """Symmetric Gaussian random-walk kernel with increments N(0, step_scale^2 step_cov)."""
    step_cov = step_cov or identity(model.dim)
    proposal = GaussianSpec(mean=np.zeros(model.dim), cov=step_cov, precision_scale=1.0 / step_scale**2)
    return MhKernel(target=model, proposal_kind=RANDOM_WALK, proposal=proposal)


def log_acceptance(kernel: MhKernel, theta, log_post, theta_prop, log_post_prop):
    """
    log a(theta, theta') = min(0, [log pi(theta') - log pi(theta)] + [log q(theta', theta) - log q(theta, theta')]).

    Returns 0 wherever log pi(theta) = -inf. NaN anywhere else is a fault.
    """
    log_post = np.asarray(log_post, dtype=float)
    log_post_prop = np.asarray(log_post_prop, dtype=float)
    with np.errstate(invalid="ignore"):
        ratio = log_post_prop - log_post
        if kernel.is_independence:
            ratio = ratio - (gauss_logpdf(theta_prop, kernel.proposal) - gauss_logpdf(theta, kernel.proposal))
    out = np.where(np.isneginf(log_post), 0.0, np.minimum(0.0, ratio))
    if np.any(np.isnan(out)):
        raise NanFault("acceptance ratio is NaN")
    return float(out) if out.ndim == 0 else out


def log_accept_prob(kernel: MhKernel, theta, theta_prop):
    """log a(theta, theta') evaluated from positions alone."""
    target = kernel.target
    return log_acceptance(kernel, theta, target.log_target(theta), theta_prop, target.log_target(theta_prop))


def log_transition_density(kernel: MhKernel, theta, theta_prop):
    """log q(theta, theta')"""
    if kernel.is_independence:
        return gauss_logpdf(theta_prop, kernel.proposal)
    return gauss_logpdf(np.asarray(theta_prop) - np.asarray(theta), kernel.proposal)


@dataclass(frozen=True, eq=False)
class ChainState:
    position: np.ndarray
    log_post: float
    steps: int = 0
    accepts: int = 0
    ever_accepted: bool = False

    @classmethod
    def start(cls, kernel: MhKernel, position) -> "ChainState":
        position = np.array(position, dtype=float)
        if position.shape != (kernel.dim,):
            raise DimensionMismatch(f"initial position shape {position.shape} vs dim {kernel.dim}")
        return cls(position=position, log_post=kernel.target.log_target(position))


def mh_step(kernel: MhKernel, state: ChainState, rng: np.random.Generator) -> ChainState:
    """One Metropolis-Hastings transition; a rejection keeps the same position array."""
    prop = kernel.propose(state.position, rng)
    u = rng.random()
    lp_prop = kernel.target.log_target(prop)
    log_a = log_acceptance(kernel, state.position, state.log_post, prop, lp_prop)
    with np.errstate(divide="ignore"):
        accept = np.log(u) <= log_a
    if accept:
        return ChainState(position=prop, log_post=lp_prop, steps=state.steps + 1,
                          accepts=state.accepts + 1, ever_accepted=True)
    return replace(state, steps=state.steps + 1)


def mh_step_batch(kernel: MhKernel, positions: np.ndarray, log_posts: np.ndarray,
                  rng: np.random.Generator):
    """
    mh_step across an (R, d) ensemble: R proposals are drawn first, then R uniforms.

    Returns (positions, log_posts, accepted) without modifying the inputs.
    """
    props = kernel.propose(positions, rng)
    u = rng.random(positions.shape[0])
    lp_props = kernel.target.log_target(props)
    log_a = log_acceptance(kernel, positions, log_posts, props, lp_props)
    with np.errstate(divide="ignore"):
        accepted = np.log(u) <= log_a
    new_positions = np.where(accepted[:, None], props, positions)
    new_log_posts = np.where(accepted, lp_props, log_posts)
    return new_positions, new_log_posts, accepted


@dataclass
class ChainTrace:
    positions: np.ndarray  # (t, d), position after each step
    accepted: np.ndarray  # (t,)
    final: ChainState


@dataclass
class ChainSummary:
    final: ChainState
    acceptance_rate: float  # nan when no steps were taken
    ever_accepted: bool


def run_chain(kernel: MhKernel, init, t: int, rng: np.random.Generator,
              record: str = "summary") -> Union[ChainTrace, ChainSummary]:
    """Apply mh_step t times from init."""
    if t < 0:
        raise ValueError("INVALID_REQUEST: t must be non-negative")
    if record not in ("trace", "summary"):
        raise ValueError(f"INVALID_REQUEST: record must be trace or summary, got {record!r}")

    state = ChainState.start(kernel, init)
    positions = np.empty((t, kernel.dim)) if record == "trace" else None
    accepted = np.zeros(t, dtype=bool) if record == "trace" else None

    for i in range(t):
        before = state.accepts
        state = mh_step(kernel, state, rng)
        if record == "trace":
            positions[i] = state.position
            accepted[i] = state.accepts > before

    if record == "trace":
        return ChainTrace(positions=positions, accepted=accepted, final=state)
    rate = state.accepts / state.steps if state.steps else float("nan")
    return ChainSummary(final=state, acceptance_rate=rate, ever_accepted=state.ever_accepted)


def write_trace(trace: ChainTrace, path: Union[str, Path]):
    """`step,beta_1,...,beta_d,accepted`, one row per step."""
    d = trace.positions.shape[1] if trace.positions.ndim == 2 else trace.final.position.shape[0]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["step"] + [f"beta_{j + 1}" for j in range(d)] + ["accepted"])
        for i, (pos, acc) in enumerate(zip(trace.positions, trace.accepted), start=1):
            writer.writerow([i] + [repr(float(v)) for v in pos] + [int(acc)])


@dataclass
class Ensemble:
    positions: np.ndarray  # (R, d) final positions
    log_posts: np.ndarray
    accepts: np.ndarray  # (R,) accepted-move counts
    ever_accepted: np.ndarray  # (R,) bool


def run_ensemble(kernel: MhKernel, init, t: int, replicas: int, seed: int,
                 threads: Optional[int] = None, block_size: Optional[int] = None) -> Ensemble:
    """
    `replicas` independent chains of t steps from a common init (d,) or per-replica inits (R, d).

    Blocks of replicas share one derived stream and are stepped together.
    """
    init = np.asarray(init, dtype=float)
    block_size = block_size or config.get_block_size()

    def block(b, size, rng):
        lo = b * block_size
        pos = np.array(np.broadcast_to(init if init.ndim == 1 else init[lo:lo + size], (size, kernel.dim)))
        lp = kernel.target.log_target(pos)
        accepts = np.zeros(size, dtype=int)
        for _ in range(t):
            pos, lp, acc = mh_step_batch(kernel, pos, lp, rng)
            accepts += acc
        return pos, lp, accepts

    parts = run_blocks(block, replicas, seed, threads, block_size)
    accepts = np.concatenate([p[2] for p in parts])
    return Ensemble(positions=np.vstack([p[0] for p in parts]), log_posts=np.concatenate([p[1] for p in parts]),
                    accepts=accepts, ever_accepted=accepts > 0)


def estimate_acceptance(kernel: MhKernel, theta, m: int, rng: np.random.Generator) -> Dict[str, float]:
    """Monte Carlo estimate of A(theta) = E_q[a(theta, theta')] over m proposals."""
    if m < 2:
        raise ValueError("INVALID_REQUEST: m must be at least 2")
    theta = np.asarray(theta, dtype=float)
    positions = np.broadcast_to(theta, (m, kernel.dim))
    props = kernel.propose(np.array(positions), rng)
    log_post = kernel.target.log_target(theta)
    log_a = log_acceptance(kernel, positions, np.full(m, log_post), props, kernel.target.log_target(props))
    mean, stderr = mean_stderr(np.exp(log_a))
    return {"mean": mean, "stderr": stderr}


def sample_posterior(kernel: MhKernel, init, t: int, rng: np.random.Generator,
                     burnin: int = 0, thin: int = 1) -> Dict:
    """Draws after burn-in with thinning, plus per-coordinate summaries."""
    trace = run_chain(kernel, init, burnin + t, rng, record="trace")
    draws = trace.positions[burnin::max(1, thin)]
    return {
        "draws": draws,
        "mean": draws.mean(axis=0) if len(draws) else np.full(kernel.dim, np.nan),
        "sd": draws.std(axis=0, ddof=1) if len(draws) > 1 else np.full(kernel.dim, np.nan),
        "acceptance_rate": float(trace.accepted[burnin:].mean()) if t else float("nan"),
        "trace": trace,
    }

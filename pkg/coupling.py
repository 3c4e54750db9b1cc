#!/usr/bin/env python3
"""
Coupling - Synchronous couplings of independence chains

Two chains share every proposal and uniform. Once both accept the same
proposal they sit on the same point and move together from then on, so the
mean distance at time t upper-bounds the Wasserstein distance.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

import config
from errors import NotIndependenceKernel
from mh_kernel import ChainState, MhKernel, log_acceptance, mh_step_batch, run_ensemble
from mode_finder import ModeResult
from rates import METRICS, rho
from replicas import child_seed, mean_stderr, run_blocks

logger = logging.getLogger(__name__)

MIN_REPLICAS = 100


@dataclass(frozen=True, eq=False)
class CoupledPair:
    chain_a: ChainState  # started at beta*
    chain_b: ChainState  # started from an approximate stationary draw
    coalesced: bool = False
    coalesce_step: Optional[int] = None


def _require_independence(kernel: MhKernel):
    if not kernel.is_independence:
        raise NotIndependenceKernel("synchronous coupling needs a shared independence proposal")


def _require_replicas(replicas: int):
    if replicas < MIN_REPLICAS:
        raise ValueError(f"INVALID_REQUEST: at least {MIN_REPLICAS} replicas are required, got {replicas}")


def _advance(state: ChainState, prop, lp_prop, accept: bool) -> ChainState:
    if accept:
        return ChainState(position=prop, log_post=lp_prop, steps=state.steps + 1,
                          accepts=state.accepts + 1, ever_accepted=True)
    return ChainState(position=state.position, log_post=state.log_post, steps=state.steps + 1,
                      accepts=state.accepts, ever_accepted=state.ever_accepted)


def couple_step(kernel: MhKernel, pair: CoupledPair, rng: np.random.Generator) -> CoupledPair:
    """Draw one proposal then one uniform; each chain accepts or rejects with the shared pair."""
    _require_independence(kernel)
    prop = kernel.propose(pair.chain_a.position, rng)
    log_u = np.log(rng.random())
    lp_prop = kernel.target.log_target(prop)

    a = pair.chain_a
    b = pair.chain_b
    accept_a = log_u <= log_acceptance(kernel, a.position, a.log_post, prop, lp_prop)
    accept_b = log_u <= log_acceptance(kernel, b.position, b.log_post, prop, lp_prop)

    new_a = _advance(a, prop, lp_prop, accept_a)
    new_b = _advance(b, prop, lp_prop, accept_b)
    coalesced = pair.coalesced or bool(accept_a and accept_b)
    step = pair.coalesce_step
    if coalesced and step is None:
        step = new_a.steps
    return CoupledPair(chain_a=new_a, chain_b=new_b, coalesced=coalesced, coalesce_step=step)


def couple_step_batch(kernel: MhKernel, pos_a, lp_a, pos_b, lp_b, rng: np.random.Generator):
    """couple_step across R pairs: R proposals first, then R uniforms."""
    props = kernel.propose(pos_a, rng)
    with np.errstate(divide="ignore"):
        log_u = np.log(rng.random(pos_a.shape[0]))
    lp_props = kernel.target.log_target(props)
    acc_a = log_u <= log_acceptance(kernel, pos_a, lp_a, props, lp_props)
    acc_b = log_u <= log_acceptance(kernel, pos_b, lp_b, props, lp_props)
    pos_a = np.where(acc_a[:, None], props, pos_a)
    pos_b = np.where(acc_b[:, None], props, pos_b)
    return (pos_a, np.where(acc_a, lp_props, lp_a), pos_b, np.where(acc_b, lp_props, lp_b),
            acc_a, acc_a & acc_b)


@dataclass
class CouplingRow:
    t: int
    mean_distance: float
    stderr: float
    fraction_coalesced: float
    fraction_at_mode: float


def coupling_profile(kernel: MhKernel, mode: ModeResult, t_values: Sequence[int], replicas: int,
                     metric: str = "l2", stationary_burnin: Optional[int] = None,
                     rng: Optional[np.random.Generator] = None, threads: Optional[int] = None,
                     block_size: Optional[int] = None) -> List[CouplingRow]:
    """
    One coupled ensemble run to max(t_values), summarised at each requested t.

    Each block first burns in its partner chains from beta* for
    `stationary_burnin` steps, then runs the coupled pairs.
    """
    _require_independence(kernel)
    _require_replicas(replicas)
    if metric not in METRICS:
        raise ValueError(f"INVALID_REQUEST: unknown metric {metric!r}")
    stationary_burnin = config.get_burnin() if stationary_burnin is None else stationary_burnin
    rng = rng if rng is not None else np.random.default_rng(config.get_seed())
    t_values = sorted(set(int(t) for t in t_values))
    t_max = t_values[-1] if t_values else 0
    beta_star = np.asarray(mode.beta_star, dtype=float)
    logger.info(f"Coupling {replicas} pairs to t={t_max} after burn-in {stationary_burnin} "
                f"(burn-in length is a chosen default, not derived)")

    def block(b, size, block_rng):
        pos_b = np.repeat(beta_star[None, :], size, axis=0)
        lp_b = kernel.target.log_target(pos_b)
        for _ in range(stationary_burnin):
            pos_b, lp_b, _ = mh_step_batch(kernel, pos_b, lp_b, block_rng)

        pos_a = np.repeat(beta_star[None, :], size, axis=0)
        lp_a = kernel.target.log_target(pos_a)
        coalesced = np.zeros(size, dtype=bool)
        moved_a = np.zeros(size, dtype=bool)
        snapshots = {}
        for step in range(t_max + 1):
            if step in t_values:
                snapshots[step] = (rho(pos_a, pos_b, metric), coalesced.copy(), ~moved_a)
            if step == t_max:
                break
            pos_a, lp_a, pos_b, lp_b, acc_a, both = couple_step_batch(kernel, pos_a, lp_a, pos_b, lp_b, block_rng)
            coalesced |= both
            moved_a |= acc_a
        return snapshots

    seed = child_seed(rng)
    parts = run_blocks(block, replicas, seed, threads, block_size)

    rows = []
    for t in t_values:
        dist = np.concatenate([p[t][0] for p in parts])
        coal = np.concatenate([p[t][1] for p in parts])
        at_mode = np.concatenate([p[t][2] for p in parts])
        mean, stderr = mean_stderr(dist)
        rows.append(CouplingRow(t=t, mean_distance=mean, stderr=stderr,
                                fraction_coalesced=float(coal.mean()), fraction_at_mode=float(at_mode.mean())))
    return rows


def estimate_wasserstein_coupling(kernel: MhKernel, mode: ModeResult, t: int, replicas: int,
                                  metric: str = "l2", stationary_burnin: Optional[int] = None,
                                  rng: Optional[np.random.Generator] = None,
                                  threads: Optional[int] = None) -> Dict[str, float]:
    """Mean of rho(chain_a(t), chain_b(t)) over coupled replicas, an upper bound on W_rho(P^t(beta*, .), Pi)."""
    row = coupling_profile(kernel, mode, [t], replicas, metric, stationary_burnin, rng, threads)[0]
    return {"estimate": row.mean_distance, "stderr": row.stderr, "fraction_coalesced": row.fraction_coalesced}


def atom_mass(kernel: MhKernel, mode: ModeResult, t: int, replicas: int,
              rng: Optional[np.random.Generator] = None, threads: Optional[int] = None) -> Dict[str, float]:
    """Fraction of chains started at beta* that have not accepted a move after t steps."""
    _require_replicas(replicas)
    rng = rng if rng is not None else np.random.default_rng(config.get_seed())
    ens = run_ensemble(kernel, mode.beta_star, t, replicas, child_seed(rng), threads)
    fraction, stderr = mean_stderr((~ens.ever_accepted).astype(float))
    return {"fraction_at_mode": fraction, "stderr": stderr}


def conditional_moments(kernel: MhKernel, mode: ModeResult, t: int, replicas: int,
                        rng: Optional[np.random.Generator] = None,
                        threads: Optional[int] = None) -> Dict[str, np.ndarray]:
    """Mean and variance of the chains that have left beta* by time t, with standard errors."""
    _require_replicas(replicas)
    rng = rng if rng is not None else np.random.default_rng(config.get_seed())
    ens = run_ensemble(kernel, mode.beta_star, t, replicas, child_seed(rng), threads)
    moved = ens.positions[ens.ever_accepted]
    k = moved.shape[0]
    mean = moved.mean(axis=0)
    var = moved.var(axis=0, ddof=1)
    centred = moved - mean
    m4 = np.mean(centred ** 4, axis=0)
    return {
        "count": k,
        "mean": mean,
        "mean_stderr": np.sqrt(var / k),
        "var": var,
        "var_stderr": np.sqrt(np.maximum(m4 - var ** 2, 0.0) / k),
    }


def write_coupling_csv(rows: Sequence[CouplingRow], path: Union[str, Path]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t", "mean_distance", "stderr", "fraction_coalesced", "fraction_at_mode"])
        for r in rows:
            writer.writerow([r.t, repr(r.mean_distance), repr(r.stderr), repr(r.fraction_coalesced),
                             repr(r.fraction_at_mode)])

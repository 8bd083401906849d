"""
Metropolis-Hastings chains over reservoir samples and the contribution-weight update.

A chain state is a sample together with its contribution C (the target expressed in
primary sample space) and its target p_hat (in the sample's own measure). Acceptance is
computed from C and the kernel ratio; the reservoir's W is rescaled with p_hat so that
W * p_hat stays fixed along the chain and w_sum, M are left untouched.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol, Tuple

import numpy as np

from restirmcmc.core.reservoir import Reservoir, lane_count, select_samples, uniform_columns
from restirmcmc.errors import ContractViolationError
from restirmcmc.mcmc.pss import MutationConfig

logger = logging.getLogger(__name__)


@dataclass
class MutationProposal:
    """
    One proposed move per lane.

    contribution_ratio is C(u')/C(u); 0 encodes an infeasible candidate. kernel_ratio is
    T(u'->u)/T(u->u') and equals 1 for symmetric strategies. p_hat and contribution are
    the candidate's target and C, cached so an accepted candidate needs no re-evaluation.
    """
    candidate: Any
    kernel_ratio: np.ndarray
    contribution_ratio: np.ndarray
    p_hat: np.ndarray
    contribution: np.ndarray


class ProposalStrategy(Protocol):
    """A mutation strategy: numbers_per_step random numbers consumed by each propose()."""
    numbers_per_step: int

    def contribution(self, samples: Any, pixels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return (C, p_hat) of each sample."""
        ...

    def propose(self, samples: Any, pixels: np.ndarray, contribution: np.ndarray, rng) -> MutationProposal:
        ...


@dataclass
class MutationStats:
    """Proposal and acceptance counts for one batch of chains."""
    proposed: int = 0
    accepted: int = 0
    accepted_per_lane: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


@dataclass
class ChainResult:
    samples: Any
    p_hat: np.ndarray
    contribution: np.ndarray
    stats: MutationStats


def mh_acceptance(p_hat_x, p_hat_z, kernel_ratio) -> np.ndarray:
    """
    Acceptance probability min(1, p_hat(z) / p_hat(x) * kernel_ratio).

    Args:
        p_hat_x: Target (or contribution) of the current state, must be > 0
        p_hat_z: Target of the candidate; 0 means infeasible
        kernel_ratio: T(z->x) / T(x->z)

    Returns:
        Acceptance probabilities in [0, 1]

    Raises:
        ContractViolationError: If the current state is off support
    """
    p_x = np.asarray(p_hat_x, dtype=float)
    if np.any(~(p_x > 0)):
        raise ContractViolationError(
            "Markov chain state must lie on the target's support",
            f"{int(np.count_nonzero(~(p_x > 0)))} state(s) have p_hat <= 0",
        )
    p_z = np.asarray(p_hat_z, dtype=float)
    kr = np.asarray(kernel_ratio, dtype=float)
    feasible = (p_z > 0) & np.isfinite(p_z) & (kr > 0) & np.isfinite(kr)
    ratio = np.where(feasible, p_z / p_x * np.where(feasible, kr, 1.0), 0.0)
    return np.minimum(1.0, ratio)


def run_chain(strategy: ProposalStrategy, samples: Any, pixels: np.ndarray, steps: int, rng,
              active: Optional[np.ndarray] = None, accept_all: bool = False,
              record: Optional[Callable[[int, Any], None]] = None,
              initial: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> ChainResult:
    """
    Run `steps` MH iterations on every active lane.

    Each iteration consumes strategy.numbers_per_step + 1 numbers per lane whether or not
    the lane is active or the proposal accepted.

    Args:
        strategy: Proposal strategy
        samples: Initial states
        pixels: Pixel (or lane) index per state
        steps: Number of iterations
        rng: Generator-like source
        active: Lanes allowed to move; defaults to lanes with C > 0
        accept_all: Accept every feasible proposal (negative control only)
        record: Called as record(step, samples) after each iteration
        initial: Precomputed (C, p_hat) of the initial states

    Returns:
        ChainResult with final states and counts
    """
    n = lane_count(samples)
    C, p_hat = strategy.contribution(samples, pixels) if initial is None else initial
    active = (C > 0) if active is None else (np.asarray(active, dtype=bool) & (C > 0))
    accepted = np.zeros(n, dtype=np.int64)

    for step in range(steps):
        proposal = strategy.propose(samples, pixels, C, rng)
        u = uniform_columns(rng, n, 1)[:, 0]
        if accept_all:
            a = np.where(proposal.contribution_ratio > 0, 1.0, 0.0)
        else:
            a = mh_acceptance(np.ones(n), proposal.contribution_ratio, proposal.kernel_ratio)
        take = active & (u < a)
        samples = select_samples(take, proposal.candidate, samples)
        p_hat = np.where(take, proposal.p_hat, p_hat)
        C = np.where(take, proposal.contribution, C)
        accepted += take
        if record is not None:
            record(step, samples)

    n_active = int(np.count_nonzero(active))
    stats = MutationStats(n_active * steps, int(accepted.sum()), accepted)
    return ChainResult(samples, p_hat, C, stats)


def mutate_sample(pixels: np.ndarray, r: Reservoir, strategy: ProposalStrategy,
                  cfg: MutationConfig, rng) -> Tuple[Reservoir, MutationStats]:
    """
    Mutate each reservoir's sample with cfg.iters MH steps.

    W is updated as W(x^k) = p_hat(x^0) / p_hat(x^k) * W(x^0); w_sum and M are unchanged.
    Lanes without a sample, or with p_hat = 0, are left as they are.

    Returns:
        (mutated reservoirs, acceptance statistics)
    """
    n = len(r)
    if cfg.iters == 0:
        return r, MutationStats(0, 0, np.zeros(n, dtype=np.int64))

    C0, p0 = strategy.contribution(r.sample, pixels)
    active = r.has_sample & (p0 > 0) & (C0 > 0)
    chain = run_chain(strategy, r.sample, pixels, cfg.iters, rng, active=active, initial=(C0, p0))

    ok = active & (chain.p_hat > 0)
    W = np.where(ok, np.divide(p0, chain.p_hat, out=np.ones(n), where=ok) * r.W, r.W)
    logger.debug("mutation: %d/%d accepted", chain.stats.accepted, chain.stats.proposed)
    return Reservoir(chain.samples, r.w_sum, r.M, W), chain.stats

"""Metropolis-Hastings mutations of reservoir samples in primary sample space."""
from .kernels import ChainResult, MutationProposal, MutationStats, mh_acceptance, mutate_sample, run_chain
from .pss import DEFAULT_S1, DEFAULT_S2, MutationConfig, MutationStrategy, pss_perturb, wrap_unit

__all__ = [
    "ChainResult", "MutationProposal", "MutationStats", "mh_acceptance", "mutate_sample", "run_chain",
    "DEFAULT_S1", "DEFAULT_S2", "MutationConfig", "MutationStrategy", "pss_perturb", "wrap_unit",
]

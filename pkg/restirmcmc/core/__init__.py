"""Domain-agnostic resampling: reservoirs, MIS weights, shifts and reuse."""
from restirmcmc.core.mis import MisContext, mis_balance, mis_pairwise, mis_temporal
from restirmcmc.core.reservoir import (
    Reservoir, finalize_contribution_weight, reservoir_update, resampling_weight,
    select_samples, stream_candidates, take_samples,
)
from restirmcmc.core.reuse import ReuseContext, combine_spatial, combine_temporal
from restirmcmc.core.shift import ShiftMode, ShiftResult, identity_shift, shift_map

__all__ = [
    "MisContext", "mis_balance", "mis_pairwise", "mis_temporal",
    "Reservoir", "finalize_contribution_weight", "reservoir_update", "resampling_weight",
    "select_samples", "stream_candidates", "take_samples",
    "ReuseContext", "combine_spatial", "combine_temporal",
    "ShiftMode", "ShiftResult", "identity_shift", "shift_map",
]

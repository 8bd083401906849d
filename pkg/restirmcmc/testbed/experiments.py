"""
Statistical experiments on analytic 1D targets and on fixed scene slices.

Every experiment is vectorised over trials (or chains). Each trial draws its numbers from
counter-based streams keyed by the trial index, so results do not depend on how trials
are chunked across the worker pool.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from restirmcmc.core.mis import mis_balance
from restirmcmc.core.reservoir import Reservoir, finalize_contribution_weight, stream_candidates
from restirmcmc.core.reuse import combine_spatial, combine_temporal
from restirmcmc.core.shift import ShiftResult, identity_shift
from restirmcmc.errors import ErrorHandler, InvalidValueError
from restirmcmc.mcmc.kernels import MutationProposal, MutationStats, mutate_sample, run_chain
from restirmcmc.mcmc.mutations import DirectionMutation, ReconnectionMutation, trace_to_light
from restirmcmc.mcmc.pss import MutationConfig, MutationStrategy, wrap_unit
from restirmcmc.parallel import WorkerPool
from restirmcmc.render.geometry import normalize
from restirmcmc.render.materials import direction_pdf, invert_direction, sample_direction
from restirmcmc.render.pipeline import light_candidates, path_from_numbers
from restirmcmc.render.scene import builtin_scene
from restirmcmc.render.targets import RenderMode, SceneReuseContext, primary_shading
from restirmcmc.streams import LaneSource, RandomStreams, Stream
from restirmcmc.testbed.targets import SOURCES, AnalyticTarget, Density, SourceDensity, sample_exact

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 0.05
EXACT_ROUNDS = 32
TRIAL_CHUNK = 16384


def _pool(pool: Optional[WorkerPool]) -> WorkerPool:
    return pool if pool is not None else WorkerPool(1, TRIAL_CHUNK)


def _ratio(num, den) -> np.ndarray:
    num, den = np.broadcast_arrays(np.asarray(num, dtype=float), np.asarray(den, dtype=float))
    return np.divide(num, den, out=np.zeros(num.shape), where=den > 0)


class RandomWalkStrategy:
    """
    Gaussian random walk on the unit circle [0, 1) targeting p_hat.

    The wrapped Gaussian is symmetric, so the kernel ratio is 1 and the contribution is
    p_hat itself.
    """
    numbers_per_step = 1

    def __init__(self, p_hat: Density, sigma: float = DEFAULT_SIGMA):
        self.p_hat = p_hat
        self.sigma = sigma

    def contribution(self, samples: np.ndarray, pixels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p = np.asarray(self.p_hat(samples), dtype=float)
        return p, p

    def propose(self, samples: np.ndarray, pixels: np.ndarray, contribution: np.ndarray, rng) -> MutationProposal:
        z = wrap_unit(samples + self.sigma * rng.standard_normal(samples.shape))
        p = np.asarray(self.p_hat(z), dtype=float)
        return MutationProposal(z, np.ones(len(z)), _ratio(p, contribution), p, p)


class LineReuseContext:
    """Reuse context over 1D 'pixels', each with its own target; the shift is the identity."""

    def __init__(self, targets: Sequence[Density]):
        self.targets = list(targets)

    def target(self, samples: np.ndarray, pixels: np.ndarray) -> np.ndarray:
        samples = np.asarray(samples, dtype=float)
        pixels = np.broadcast_to(np.asarray(pixels), samples.shape)
        out = np.zeros(samples.shape)
        for p in np.unique(pixels):
            m = pixels == p
            out[m] = self.targets[int(p)](samples[m])
        return out

    def shift(self, samples, from_pixels, to_pixels) -> ShiftResult:
        return identity_shift(samples)


def ris_uniform(p_hat: Density, M: int, rng, n: int) -> Reservoir:
    """
    Plain RIS from M uniform candidates per lane with weights p_hat / M.

    Consumes 2 * M numbers per lane: M candidates, then M selection numbers.
    """
    x = rng.random((n, M))
    p = np.asarray(p_hat(x), dtype=float)
    r, p_sel = stream_candidates(((x[:, m], p[:, m] / M, p[:, m]) for m in range(M)), rng, x[:, 0])
    return finalize_contribution_weight(r, p_sel)


def ris_sources(p_hat: Density, M: int, sources: Sequence[SourceDensity], mis: str, rng, n: int) -> Reservoir:
    """
    RIS with candidate m drawn from sources[m % len(sources)].

    Args:
        p_hat: Target
        M: Candidate count
        sources: Candidate techniques
        mis: "balance" for the balance heuristic over the M candidate techniques,
            "uniform" for constant 1/M weights
        rng: Generator-like source, 2 * M numbers per lane
        n: Lane count
    """
    techniques = [sources[m % len(sources)] for m in range(M)]
    u = rng.random((n, M))
    x = np.stack([t.inverse_cdf(u[:, m]) for m, t in enumerate(techniques)], axis=1)
    # q[:, m, t]: density of technique t at candidate m
    q = np.stack([t.pdf(x) for t in techniques], axis=-1)
    own = np.stack([q[:, m, m] for m in range(M)], axis=1)
    if mis == "balance":
        m_w = np.stack([mis_balance(q[:, m, :], m) for m in range(M)], axis=1)
    else:
        m_w = np.full((n, M), 1.0 / M)
    p = np.asarray(p_hat(x), dtype=float)
    w = m_w * _ratio(p, own)
    r, p_sel = stream_candidates(((x[:, m], w[:, m], p[:, m]) for m in range(M)), rng, x[:, 0])
    return finalize_contribution_weight(r, p_sel)


@dataclass
class UnbiasednessResult:
    target: str
    M: int
    k_mutations: int
    trials: int
    mean: float
    stderr: float
    oracle: float
    z: float
    variance: float
    conservation_error: float
    acceptance_rate: float

    @property
    def passed(self) -> bool:
        return abs(self.z) < 3.0


def _unbiasedness_chunk(target: AnalyticTarget, M: int, k: int, sources: Sequence[SourceDensity],
                        mis: str, sigma: float, streams: RandomStreams, lanes: np.ndarray):
    n = len(lanes)
    cand_rng = LaneSource(streams, Stream.TESTBED_CANDIDATES, lanes, 2 * M)
    r = ris_sources(target.p_hat, M, sources, mis, cand_rng, n)
    conserved_before = r.W * np.asarray(target.p_hat(r.sample), dtype=float)

    chain_rng = LaneSource(streams, Stream.TESTBED_CHAIN, lanes, max(2 * k, 1))
    mutated, stats = mutate_sample(lanes, r, RandomWalkStrategy(target.p_hat, sigma), MutationConfig(iters=k),
                                   chain_rng)
    conserved_after = mutated.W * np.asarray(target.p_hat(mutated.sample), dtype=float)
    err = np.abs(conserved_after - conserved_before) / np.maximum(np.abs(conserved_before), 1e-300)

    est = np.where(mutated.has_sample, np.asarray(target.f(mutated.sample), dtype=float) * mutated.W, 0.0)
    return est, err, stats


def run_unbiasedness_trial(target: AnalyticTarget, M: int, k_mutations: int, trials: int, seed: int,
                           sources: Sequence[str] = ("uniform",), mis: str = "balance",
                           sigma: float = DEFAULT_SIGMA, pool: Optional[WorkerPool] = None) -> UnbiasednessResult:
    """
    RIS-select x0 from M candidates, apply k MH steps with the contribution-weight update,
    and compare the mean of f(x_k) W(x_k) with the quadrature value of the integral of f.

    Args:
        target: Analytic target and integrand
        M: Candidates per trial
        k_mutations: MH steps per trial (0 = plain RIS)
        trials: Trial count
        seed: Experiment seed
        sources: Candidate source names ("uniform", "skewed"), used round-robin
        mis: "balance" or "uniform"
        sigma: Random-walk step
        pool: Worker pool for trial chunks

    Returns:
        UnbiasednessResult with z = (mean - oracle) / SE
    """
    M = ErrorHandler.validate_range("testbed.M", M, 1, integer=True)
    k_mutations = ErrorHandler.validate_range("testbed.k_mutations", k_mutations, 0, integer=True)
    trials = ErrorHandler.validate_range("testbed.trials", trials, 2, integer=True)
    ErrorHandler.validate_choice("testbed.mis", mis, ("balance", "uniform"))
    source_list = [SOURCES[ErrorHandler.validate_choice("testbed.sources", s, SOURCES)]() for s in sources]

    streams = RandomStreams(seed)
    parts = _pool(pool).map(
        lambda lanes: _unbiasedness_chunk(target, M, k_mutations, source_list, mis, sigma, streams, lanes),
        np.arange(trials))
    est = np.concatenate([p[0] for p in parts])
    err = np.concatenate([p[1] for p in parts])
    proposed = sum(p[2].proposed for p in parts)
    accepted = sum(p[2].accepted for p in parts)

    mean = float(est.mean())
    variance = float(est.var(ddof=1))
    stderr = float(np.sqrt(variance / trials))
    oracle = target.f_integral
    z = (mean - oracle) / stderr if stderr > 0 else (0.0 if np.isclose(mean, oracle) else float("inf"))
    result = UnbiasednessResult(target.name, M, k_mutations, trials, mean, stderr, oracle, z, variance,
                                float(err.max()), accepted / proposed if proposed else 0.0)
    logger.info("unbiasedness %s M=%d k=%d: mean %.6f oracle %.6f z %.2f", target.name, M, k_mutations,
                mean, oracle, z)
    return result


@dataclass
class VarianceComparison:
    variance_without: float
    variance_with: float

    @property
    def ratio(self) -> float:
        return self.variance_with / self.variance_without if self.variance_without > 0 else 1.0


def variance_neutrality(target: AnalyticTarget, M: int, k_mutations: int, trials: int, seed: int,
                        pool: Optional[WorkerPool] = None) -> VarianceComparison:
    """Single-pixel estimator variance with 0 and with k mutations (same seeds)."""
    base = run_unbiasedness_trial(target, M, 0, trials, seed, pool=pool)
    mutated = run_unbiasedness_trial(target, M, k_mutations, trials, seed, pool=pool)
    return VarianceComparison(base.variance, mutated.variance)


@dataclass
class TwoPixelConfig:
    """
    Two pixels resampling from M inputs each.

    pixel_targets are the two pixels' targets; every input is generated for input_target.
    inputs is "exact" (rejection sampling from the normalized input target) or "ris"
    (RIS from ris_candidates uniform candidates). shared = False gives each pixel its own
    inputs.
    """
    pixel_targets: Tuple[AnalyticTarget, AnalyticTarget]
    input_target: AnalyticTarget
    M: int = 4
    mutations: int = 64
    trials: int = 100_000
    inputs: str = "exact"
    ris_candidates: int = 8
    shared: bool = True
    sigma: float = DEFAULT_SIGMA
    seed: int = 0

    def __post_init__(self):
        self.M = ErrorHandler.validate_range("testbed.two_pixel.M", self.M, 1, integer=True)
        self.mutations = ErrorHandler.validate_range("testbed.two_pixel.mutations", self.mutations, 0, integer=True)
        self.trials = ErrorHandler.validate_range("testbed.two_pixel.trials", self.trials, 2, integer=True)
        ErrorHandler.validate_choice("testbed.two_pixel.inputs", self.inputs, ("exact", "ris"))


@dataclass
class TwoPixelResult:
    cov_without: float
    cov_with: float
    se_without: float
    se_with: float
    trials: int

    @property
    def ratio(self) -> float:
        return self.cov_with / self.cov_without if self.cov_without != 0 else float("nan")

    @property
    def reduction(self) -> float:
        return 1.0 - self.ratio


def _inputs(cfg: TwoPixelConfig, streams: RandomStreams, lanes: np.ndarray, frame: int):
    n = len(lanes)
    target = cfg.input_target
    if cfg.inputs == "exact":
        rng = LaneSource(streams, Stream.TESTBED_INPUTS, lanes, cfg.M * 2 * EXACT_ROUNDS, frame)
        x = np.stack([sample_exact(target, rng, n, EXACT_ROUNDS) for _ in range(cfg.M)], axis=1)
        return x, target.p_hat_integral / np.asarray(target.p_hat(x), dtype=float)
    rng = LaneSource(streams, Stream.TESTBED_INPUTS, lanes, cfg.M * 2 * cfg.ris_candidates, frame)
    res = [ris_uniform(target.p_hat, cfg.ris_candidates, rng, n) for _ in range(cfg.M)]
    return np.stack([r.sample for r in res], axis=1), np.stack([r.W for r in res], axis=1)


def _resample(p_hat: Density, x: np.ndarray, W: np.ndarray, rng) -> np.ndarray:
    """Resample M inputs with constant MIS weights 1/M; returns the estimate p_hat(Z) W_Z."""
    M = x.shape[1]
    p = np.asarray(p_hat(x), dtype=float)
    w = p * W / M
    r, p_sel = stream_candidates(((x[:, j], w[:, j], p[:, j]) for j in range(M)), rng, x[:, 0])
    r = finalize_contribution_weight(r, p_sel)
    return p_sel * r.W


def _two_pixel_chunk(cfg: TwoPixelConfig, streams: RandomStreams, lanes: np.ndarray):
    n = len(lanes)
    inputs = [_inputs(cfg, streams, lanes, 0)]
    inputs.append(inputs[0] if cfg.shared else _inputs(cfg, streams, lanes, 1))

    without, with_mut = [], []
    strategy = RandomWalkStrategy(cfg.input_target.p_hat, cfg.sigma)
    mcfg = MutationConfig(iters=cfg.mutations)
    for i, target in enumerate(cfg.pixel_targets):
        x, W = inputs[i]
        without.append(_resample(target.p_hat, x, W, LaneSource(streams, Stream.TESTBED_SELECT, lanes, cfg.M, i)))

        ys, wys = [], []
        for j in range(cfg.M):
            p_in = np.asarray(cfg.input_target.p_hat(x[:, j]), dtype=float)
            r = Reservoir(x[:, j], p_in * W[:, j], np.ones(n), W[:, j])
            chain_rng = LaneSource(streams, Stream.TESTBED_CHAIN, lanes, max(2 * cfg.mutations, 1), i * cfg.M + j)
            mutated, _ = mutate_sample(lanes, r, strategy, mcfg, chain_rng)
            ys.append(mutated.sample)
            wys.append(mutated.W)
        with_mut.append(_resample(target.p_hat, np.stack(ys, axis=1), np.stack(wys, axis=1),
                                  LaneSource(streams, Stream.TESTBED_SELECT, lanes, cfg.M, 2 + i)))
    return without[0], without[1], with_mut[0], with_mut[1]


def _covariance(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    """Unbiased covariance and its standard error."""
    prod = (a - a.mean()) * (b - b.mean())
    n = len(a)
    cov = float(prod.sum() / (n - 1))
    return cov, float(prod.std(ddof=1) / np.sqrt(n))


def run_two_pixel_covariance(cfg: TwoPixelConfig, pool: Optional[WorkerPool] = None) -> TwoPixelResult:
    """
    Covariance between two pixel estimates that resample the same (or disjoint) inputs,
    without and with per-pixel mutations of the inputs.

    Returns:
        TwoPixelResult with both covariances, their standard errors and the ratio
    """
    streams = RandomStreams(cfg.seed)
    parts = _pool(pool).map(lambda lanes: _two_pixel_chunk(cfg, streams, lanes), np.arange(cfg.trials))
    a0, b0, a1, b1 = (np.concatenate([p[i] for p in parts]) for i in range(4))
    cov0, se0 = _covariance(a0, b0)
    cov1, se1 = _covariance(a1, b1)
    logger.info("two-pixel covariance: without %.4g (se %.2g), with %d mutations %.4g (se %.2g)",
                cov0, se0, cfg.mutations, cov1, se1)
    return TwoPixelResult(cov0, cov1, se0, se1, cfg.trials)


@dataclass
class ReuseTrialResult:
    mode: str
    mean: float
    stderr: float
    oracle: float
    z: float


def run_reuse_trial(targets: Sequence[AnalyticTarget], M: int, trials: int, seed: int,
                    mode: str = "spatial", m_cap: float = 20.0,
                    pool: Optional[WorkerPool] = None) -> ReuseTrialResult:
    """
    Reuse between 1D pixels with different targets: pixel 0 is canonical.

    spatial: pixel 0 merges RIS reservoirs of pixels 1..k with pairwise MIS.
    temporal: pixel 0 merges with pixel 1's reservoir (capped at m_cap).
    The estimate f_0(x) W at pixel 0 is compared with the integral of f_0.
    """
    ErrorHandler.validate_choice("testbed.reuse_mode", mode, ("spatial", "temporal"))
    if mode == "temporal" and len(targets) != 2:
        raise InvalidValueError("testbed.targets", len(targets), "exactly 2 targets for temporal reuse")
    ctx = LineReuseContext([t.p_hat for t in targets])
    k = len(targets) - 1
    streams = RandomStreams(seed)

    def chunk(lanes: np.ndarray) -> np.ndarray:
        n = len(lanes)
        res = [ris_uniform(t.p_hat, M, LaneSource(streams, Stream.TESTBED_CANDIDATES, lanes, 2 * M, i), n)
               for i, t in enumerate(targets)]
        rng = LaneSource(streams, Stream.TESTBED_SELECT, lanes, k + 1)
        canonical = np.zeros(n, dtype=np.int64)
        if mode == "spatial":
            neighbor_pixels = np.tile(np.arange(1, k + 1), (n, 1))
            out = combine_spatial(res[0], res[1:], ctx, rng, pixels=canonical, neighbor_pixels=neighbor_pixels)
        else:
            out = combine_temporal(res[0], res[1], m_cap, ctx, rng, pixels=canonical,
                                   previous_pixels=np.ones(n, dtype=np.int64))
        return np.where(out.has_sample, np.asarray(targets[0].f(out.sample), dtype=float) * out.W, 0.0)

    est = np.concatenate(_pool(pool).map(chunk, np.arange(trials)))
    mean = float(est.mean())
    stderr = float(est.std(ddof=1) / np.sqrt(trials))
    oracle = targets[0].f_integral
    return ReuseTrialResult(mode, mean, stderr, oracle, (mean - oracle) / stderr if stderr > 0 else 0.0)


@dataclass
class ChainTestResult:
    tv_distance: float
    histogram: np.ndarray
    expected: np.ndarray
    samples: int
    acceptance_rate: float

    def passed(self, threshold: float = 0.02) -> bool:
        return self.tv_distance < threshold


def tv_distance(counts: np.ndarray, expected: np.ndarray) -> float:
    """Total variation distance between a histogram and bin probabilities."""
    counts = np.asarray(counts, dtype=float).ravel()
    return float(0.5 * np.abs(counts / counts.sum() - np.asarray(expected).ravel()).sum())


def chain_distribution_test(target: AnalyticTarget, steps: int = 1_000_000, bins: int = 32,
                            chains: int = 20_000, sigma: float = DEFAULT_SIGMA, seed: int = 0,
                            accept_all: bool = False, pool: Optional[WorkerPool] = None) -> ChainTestResult:
    """
    Histogram MH chain states against the bin masses of p_hat / ||p_hat||.

    `steps` states are recorded in total, spread over `chains` chains started from exact
    samples of the target, so any drift of the histogram comes from the kernel. This checks
    that the target is stationary under the kernel, not that one long chain started
    elsewhere converges to it; the two agree only when every chain mixes within its
    `steps // chains` states. chains=1 runs a single long chain, which needs the target to
    be ergodic for the kernel within `steps`.

    Args:
        target: Target on [0, 1]
        steps: Total recorded states
        bins: Histogram bins
        chains: Parallel chains
        sigma: Random-walk step
        seed: Experiment seed
        accept_all: Accept every proposal (negative control)
        pool: Worker pool for chain chunks

    Returns:
        ChainTestResult with the TV distance
    """
    chains = ErrorHandler.validate_range("testbed.chains", chains, 1, integer=True)
    per_chain = max(1, steps // chains)
    streams = RandomStreams(seed)
    strategy = RandomWalkStrategy(target.p_hat, sigma)

    def chunk(lanes: np.ndarray):
        n = len(lanes)
        start = sample_exact(target, LaneSource(streams, Stream.TESTBED_INPUTS, lanes, 128), n, 64)
        counts = np.zeros(bins, dtype=np.int64)

        def record(step, samples):
            counts[:] += np.bincount(np.minimum((samples * bins).astype(np.int64), bins - 1), minlength=bins)

        rng = LaneSource(streams, Stream.TESTBED_CHAIN, lanes, 2 * per_chain)
        result = run_chain(strategy, start, lanes, per_chain, rng, accept_all=accept_all, record=record)
        return counts, result.stats

    parts = _pool(pool).map(chunk, np.arange(chains))
    counts = sum(p[0] for p in parts)
    stats = MutationStats(sum(p[1].proposed for p in parts), sum(p[1].accepted for p in parts))
    expected = target.bin_masses(bins)
    tv = tv_distance(counts, expected)
    logger.info("chain test %s%s: TV %.4f over %d states", target.name, " (accept-all)" if accept_all else "",
                tv, int(counts.sum()))
    return ChainTestResult(tv, counts, expected, int(counts.sum()), stats.acceptance_rate)


# fixed slices of builtin scenes: pixel position as fractions of the image, and the
# expected stationary density in primary sample space
SLICES: Dict[str, Dict] = {
    "low_light_slice": {"strategy": MutationStrategy.RECONNECTION_VERTEX, "pixel": (0.5, 0.5)},
    "glossy_floor": {"strategy": MutationStrategy.DI_DIRECTION, "pixel": (0.5, 0.75)},
}


def slice_distribution_test(scene_name: str = "low_light_slice", chains: int = 20_000, steps: int = 1_000_000,
                            s1: float = 1.0 / 16.0, s2: float = 0.5, use_kernel_ratio: bool = True,
                            accept_all: bool = False, grid: int = 256, bins: Tuple[int, int] = (8, 4),
                            size: int = 16, seed: int = 0) -> ChainTestResult:
    """
    Stationarity of a scene mutation strategy on one pixel of a builtin scene.

    The chain state is the bounce direction's primary-sample coordinates u in [0, 1)^2;
    the light point is fixed for the reconnection strategy. The expected density over u
    is p_hat / p(omega) for reconnection chains and C(u) for direction chains, tabulated
    on a grid x grid lattice; chains start at lattice cell centres drawn from it.

    Args:
        scene_name: Key of SLICES
        chains: Parallel chains
        steps: Total recorded states
        s1: Smallest perturbation scale
        s2: Largest perturbation scale
        use_kernel_ratio: False drops the reconnection kernel ratio (negative control)
        accept_all: Accept every feasible proposal (negative control)
        grid: Lattice resolution per axis
        bins: Histogram bins along u0 and u1
        size: Image width and height used to place the pixel
        seed: Experiment seed
    """
    ErrorHandler.validate_choice("testbed.slice", scene_name, SLICES)
    slice_def = SLICES[scene_name]
    scene = builtin_scene(scene_name)
    shading = primary_shading(scene, size, size)
    fx, fy = slice_def["pixel"]
    pixel = int(min(size - 1, int(fy * size)) * size + min(size - 1, int(fx * size)))
    if not shading.valid[pixel]:
        raise InvalidValueError("testbed.slice", scene_name, "a pixel whose camera ray hits the scene")
    cfg = MutationConfig(iters=1, s1=s1, s2=s2, strategy=slice_def["strategy"])
    reconnection = slice_def["strategy"] is MutationStrategy.RECONNECTION_VERTEX
    ctx = SceneReuseContext(scene, shading, RenderMode.PATH if reconnection else RenderMode.DI)
    strategy = (ReconnectionMutation(ctx, cfg, use_kernel_ratio) if reconnection
                else DirectionMutation(ctx, cfg))

    def states(u: np.ndarray):
        n = len(u)
        pixels = np.full(n, pixel)
        ids = np.full(n, -1, dtype=np.int64)
        if reconnection:
            # light point fixed at the centre of the (single) emitter
            full = np.concatenate([u, np.tile([0.0, 0.5, 0.5], (n, 1))], axis=1)
            samples, q = path_from_numbers(ctx, pixels, full, ids)
            ok = q > 0
        else:
            template, _ = light_candidates(ctx, np.full((n, 3), 0.5), ids)
            sh = shading.take(pixels)
            wi = sample_direction(u, sh.normal, sh.wo, sh.kind, sh.exponent)
            samples, ok = trace_to_light(ctx, sh, wi, template)
        return samples, pixels, ok

    def coordinates(samples, pixels) -> np.ndarray:
        if samples.u is not None:
            return samples.u[:, :2]
        sh = shading.take(pixels)
        wi = normalize(samples.light_pos - sh.position)
        return invert_direction(wi, sh.normal, sh.wo, sh.kind, sh.exponent)

    # tabulate the stationary density on lattice centres
    centres = (np.arange(grid) + 0.5) / grid
    uu = np.stack(np.meshgrid(centres, centres, indexing="ij"), axis=-1).reshape(-1, 2)
    samples, pixels, ok = states(uu)
    C, p_hat = strategy.contribution(samples, pixels)
    if reconnection:
        sh = shading.take(pixels)
        pdf1 = direction_pdf(sh.normal, sh.wo, normalize(samples.rc_pos - sh.position), sh.kind, sh.exponent)
        density = np.where(ok & (C > 0), _ratio(p_hat, pdf1), 0.0)
    else:
        density = np.where(ok, C, 0.0)
    mass = density / density.sum()
    b0, b1 = bins
    cell_bin = (np.minimum((uu[:, 0] * b0).astype(int), b0 - 1) * b1
                + np.minimum((uu[:, 1] * b1).astype(int), b1 - 1))
    expected = np.bincount(cell_bin, weights=mass, minlength=b0 * b1)

    per_chain = max(1, steps // chains)
    streams = RandomStreams(seed)
    cdf = np.cumsum(mass)
    lanes = np.arange(chains)
    pick = LaneSource(streams, Stream.TESTBED_INPUTS, lanes, 1).random((chains,))
    start_cells = np.minimum(np.searchsorted(cdf, pick * cdf[-1], side="right"), len(cdf) - 1)
    start, chain_pixels, _ = states(uu[start_cells])

    counts = np.zeros(b0 * b1, dtype=np.int64)

    def record(step, current):
        u = coordinates(current, chain_pixels)
        idx = (np.minimum((u[:, 0] * b0).astype(int), b0 - 1) * b1
               + np.minimum((u[:, 1] * b1).astype(int), b1 - 1))
        counts[:] += np.bincount(idx, minlength=b0 * b1)

    rng = LaneSource(streams, Stream.TESTBED_CHAIN, lanes, per_chain * (strategy.numbers_per_step + 1))
    result = run_chain(strategy, start, chain_pixels, per_chain, rng, accept_all=accept_all, record=record)
    tv = tv_distance(counts, expected)
    logger.info("slice test %s (kernel ratio %s): TV %.4f, acceptance %.3f", scene_name,
                "on" if use_kernel_ratio else "off", tv, result.stats.acceptance_rate)
    return ChainTestResult(tv, counts.reshape(b0, b1), expected.reshape(b0, b1), int(counts.sum()),
                           result.stats.acceptance_rate)

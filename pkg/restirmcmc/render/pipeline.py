"""
Per-frame reservoir pipeline: initial candidates -> temporal reuse -> mutation ->
spatial reuse (rounds) -> shading.

Every stage runs over pixel chunks on a WorkerPool; stages are barriers, so spatial reuse
reads the fully mutated grid of the same frame. Random numbers come from counter-based
streams keyed by (seed, frame, stage, pixel), which makes frames independent of the
thread count.
"""
import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from restirmcmc.benchmark import Benchmark, BenchmarkResult, MemoryMonitor, Timer
from restirmcmc.core.reservoir import Reservoir, finalize_contribution_weight, stream_candidates
from restirmcmc.core.reuse import combine_spatial, combine_temporal
from restirmcmc.errors import InvalidValueError
from restirmcmc.mcmc.kernels import MutationStats, mutate_sample
from restirmcmc.mcmc.mutations import DirectionMutation, ReconnectionMutation
from restirmcmc.mcmc.pss import MutationConfig, MutationStrategy
from restirmcmc.parallel import WorkerPool, concat_lanes
from restirmcmc.render.geometry import offset_origin
from restirmcmc.render.materials import direction_pdf, sample_direction
from restirmcmc.render.scene import Scene
from restirmcmc.render.targets import (
    DEFAULT_EXPONENT_CAP, LightPathSample, RenderMode, SceneReuseContext, primary_shading,
)
from restirmcmc.streams import LaneSource, RandomStreams, Stream

logger = logging.getLogger(__name__)

LIGHT_NUMBERS = 3
PATH_NUMBERS = 5


# the mutation strategy each render mode runs
MODE_STRATEGY = {RenderMode.DI: MutationStrategy.DI_DIRECTION, RenderMode.PATH: MutationStrategy.RECONNECTION_VERTEX}


@dataclass
class RenderSettings:
    """
    Knobs of the frame pipeline.

    mutation defaults to the strategy of `mode`; a config naming another strategy is rejected.
    """
    width: int = 64
    height: int = 64
    mode: RenderMode = RenderMode.DI
    M: int = 32
    m_cap: float = 50.0
    mutation: Optional[MutationConfig] = None
    spatial_k: int = 5
    spatial_radius: float = 10.0
    spatial_rounds: int = 1
    exponent_cap: float = DEFAULT_EXPONENT_CAP

    def __post_init__(self):
        self.mode = RenderMode(self.mode)
        expected = MODE_STRATEGY[self.mode]
        if self.mutation is None:
            self.mutation = MutationConfig(strategy=expected)
        elif self.mutation.strategy is not expected:
            raise InvalidValueError("mutation.strategy", self.mutation.strategy.value,
                                    f"'{expected.value}' in {self.mode.value} mode")

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    @property
    def id_slots(self) -> int:
        # one slot per initial candidate plus one for samples created by mutation
        return self.M + 1


@dataclass
class FrameState:
    """Reservoir grid carried to the next frame."""
    frame: int = 0
    reservoirs: Optional[Reservoir] = None


@dataclass
class FrameResult:
    image: np.ndarray
    ids: np.ndarray
    state: FrameState
    stats: MutationStats
    stage_ms: Dict[str, float]


def light_candidates(ctx: SceneReuseContext, u: np.ndarray, ids: np.ndarray) -> Tuple[LightPathSample, np.ndarray]:
    """Area-sampled emitter points from three uniforms each; returns samples and their density."""
    light = ctx.scene.sample_light(u)
    return LightPathSample(light.position, light.normal, light.radiance, ids), light.pdf_area


def path_from_numbers(ctx: SceneReuseContext, pixels: np.ndarray, u: np.ndarray,
                      ids: np.ndarray) -> Tuple[LightPathSample, np.ndarray]:
    """
    Regenerate one-bounce paths from five uniforms per pixel.

    u[:, :2] samples the bounce direction from the primary hit's BSDF, u[:, 2:] the light
    point. Returns the samples and their density (solid angle x area).
    """
    sh = ctx.shading.take(pixels)
    wi = sample_direction(u[:, :2], sh.normal, sh.wo, sh.kind, sh.exponent)
    pdf_dir = direction_pdf(sh.normal, sh.wo, wi, sh.kind, sh.exponent)
    hit = ctx.scene.intersect(offset_origin(sh.position, sh.normal, wi), wi)
    light = ctx.scene.sample_light(u[:, 2:])
    samples = LightPathSample(
        light.position, light.normal, light.radiance, ids,
        rc_pos=hit.position, rc_normal=hit.normal,
        rc_material=np.where(hit.hit, hit.material, -1), u=np.array(u, dtype=float),
    )
    q = np.where(sh.valid & (pdf_dir > 0), pdf_dir * light.pdf_area, 0.0)
    return samples, q


def trace_one_bounce(ctx: SceneReuseContext, pixels: np.ndarray, rng,
                     ids: Optional[np.ndarray] = None) -> Tuple[LightPathSample, np.ndarray]:
    """Sample a fresh one-bounce path per pixel; escaped bounces have p_hat = 0."""
    n = len(pixels)
    ids = np.full(n, -1, dtype=np.int64) if ids is None else ids
    return path_from_numbers(ctx, pixels, rng.random((n, PATH_NUMBERS)), ids)


def _candidate_numbers(mode: RenderMode) -> int:
    return LIGHT_NUMBERS if mode is RenderMode.DI else PATH_NUMBERS


def initial_candidates(ctx: SceneReuseContext, pixels: np.ndarray, M: int, rng,
                       ids: Optional[np.ndarray] = None) -> Reservoir:
    """
    Stream M candidates per pixel with weights (1/M) * p_hat / q and finalize W.

    Args:
        ctx: Reuse context of the frame
        pixels: Pixel indices
        M: Candidate count, >= 1
        rng: Generator-like source; M * d candidate numbers then M selection numbers
        ids: Optional (n, M) sample ids per candidate

    Returns:
        Finalized reservoirs (empty where no candidate had p_hat > 0)
    """
    n = len(pixels)
    d = _candidate_numbers(ctx.mode)
    u = rng.random((n, M * d)).reshape(n, M, d)
    if ids is None:
        ids = np.full((n, M), -1, dtype=np.int64)

    def candidate(m: int):
        if ctx.mode is RenderMode.DI:
            y, q = light_candidates(ctx, u[:, m], ids[:, m])
        else:
            y, q = path_from_numbers(ctx, pixels, u[:, m], ids[:, m])
        p_hat = ctx.target(y, pixels)
        w = np.divide(p_hat, M * q, out=np.zeros(n), where=q > 0)
        return y, w, p_hat

    first = candidate(0)

    def stream():
        yield first
        for m in range(1, M):
            yield candidate(m)

    r, p_selected = stream_candidates(stream(), rng, first[0])
    return finalize_contribution_weight(r, p_selected)


def shade(ctx: SceneReuseContext, pixels: np.ndarray, r: Reservoir) -> np.ndarray:
    """f(x) * W plus radiance emitted at the primary hit; NaN, Inf and negatives become 0."""
    f = ctx.integrand(r.sample, pixels)
    color = np.where(r.has_sample[:, None], f * r.W[:, None], 0.0)
    color = color + ctx.shading.emitted[pixels]
    color = np.nan_to_num(color, nan=0.0, posinf=0.0, neginf=0.0)
    return np.maximum(color, 0.0)


def empty_like(r: Reservoir, mask: np.ndarray) -> Reservoir:
    """Zero the weights of lanes in mask."""
    return Reservoir(r.sample, np.where(mask, 0.0, r.w_sum), np.where(mask, 0.0, r.M),
                     np.where(mask, 0.0, r.W))


def spatial_neighbors(pixels: np.ndarray, width: int, height: int, k: int, radius: float,
                      rng) -> Tuple[np.ndarray, np.ndarray]:
    """
    k neighbors per pixel, uniform in a disc of the given radius (rounded to the grid).

    Returns (neighbor pixel indices (n, k), valid mask (n, k)); neighbors outside the
    image or equal to the pixel itself are invalid and point back at the pixel.
    """
    n = len(pixels)
    u = rng.random((n, 2 * k)).reshape(n, k, 2)
    angle = 2.0 * np.pi * u[..., 0]
    rad = radius * np.sqrt(u[..., 1])
    dx = np.rint(rad * np.cos(angle)).astype(np.int64)
    dy = np.rint(rad * np.sin(angle)).astype(np.int64)
    x = (pixels % width)[:, None] + dx
    y = (pixels // width)[:, None] + dy
    valid = (x >= 0) & (x < width) & (y >= 0) & (y < height) & ((dx != 0) | (dy != 0))
    idx = np.where(valid, y * width + x, pixels[:, None])
    return idx, valid


class Renderer:
    """Renders frames of one scene with fixed settings."""

    def __init__(self, scene: Scene, settings: RenderSettings, seed: int,
                 pool: Optional[WorkerPool] = None):
        self.scene = scene
        self.settings = settings
        self.streams = RandomStreams(seed)
        self.pool = pool or WorkerPool(1)
        self.shading = primary_shading(scene, settings.width, settings.height)
        self.ctx = SceneReuseContext(scene, self.shading, settings.mode, settings.exponent_cap)
        self.benchmark = Benchmark()
        self.memory = MemoryMonitor()
        if settings.mode is RenderMode.DI:
            self.strategy = DirectionMutation(self.ctx, settings.mutation)
        else:
            self.strategy = ReconnectionMutation(self.ctx, settings.mutation)

    def _ids(self, frame: int, pixels: np.ndarray, slots: np.ndarray) -> np.ndarray:
        s = self.settings
        base = np.int64(frame) * s.pixel_count * s.id_slots
        return base + pixels.astype(np.int64)[:, None] * s.id_slots + slots[None, :]

    def _initial(self, frame: int, pixels: np.ndarray) -> Reservoir:
        s = self.settings
        d = _candidate_numbers(s.mode)
        rng = LaneSource(self.streams, Stream.INITIAL, pixels, s.M * (d + 1), frame)
        ids = self._ids(frame, pixels, np.arange(s.M))
        return initial_candidates(self.ctx, pixels, s.M, rng, ids)

    def _temporal(self, frame: int, current: Reservoir, previous: Reservoir,
                  pixels: np.ndarray) -> Reservoir:
        rng = LaneSource(self.streams, Stream.TEMPORAL, pixels, 2, frame)
        return combine_temporal(current.take(pixels), previous.take(pixels), self.settings.m_cap,
                                self.ctx, rng, pixels=pixels)

    def _mutate(self, frame: int, grid: Reservoir, pixels: np.ndarray) -> Tuple[Reservoir, MutationStats]:
        cfg = self.settings.mutation
        dims = cfg.iters * (self.strategy.numbers_per_step + 1)
        rng = LaneSource(self.streams, Stream.MUTATION, pixels, max(dims, 1), frame)
        out, stats = mutate_sample(pixels, grid.take(pixels), self.strategy, cfg, rng)
        moved = stats.accepted_per_lane > 0
        if np.any(moved):
            fresh = self._ids(frame, pixels, np.array([self.settings.M]))[:, 0]
            out = replace(out, sample=replace(out.sample, ids=np.where(moved, fresh, out.sample.ids)))
        return out, stats

    def _spatial(self, frame: int, round_index: int, grid: Reservoir, pixels: np.ndarray) -> Reservoir:
        s = self.settings
        rng = LaneSource(self.streams, Stream.SPATIAL + round_index, pixels,
                         3 * s.spatial_k + 1, frame)
        nb_idx, nb_valid = spatial_neighbors(pixels, s.width, s.height, s.spatial_k, s.spatial_radius, rng)
        neighbors = [empty_like(grid.take(nb_idx[:, j]), ~nb_valid[:, j]) for j in range(s.spatial_k)]
        return combine_spatial(grid.take(pixels), neighbors, self.ctx, rng, pixels=pixels,
                               neighbor_pixels=nb_idx)

    def _stage(self, name: str, timings: Dict[str, float], fn: Callable[[np.ndarray], Any]) -> Any:
        """Run fn over all pixel chunks as one timed barrier."""
        pixels = np.arange(self.settings.pixel_count)
        with Timer(name) as timer:
            out = self.pool.map(fn, pixels)
        self.benchmark.results.append(BenchmarkResult(name, timer.duration_ms))
        timings[name] = timer.duration_ms
        return out

    def render_frame(self, state: FrameState) -> FrameResult:
        """
        Render one frame from the carried state.

        Returns:
            FrameResult with the (h, w, 3) image, the (h, w) sample-id map (-1 where the
            pixel holds no sample) and the state for the next frame
        """
        s = self.settings
        frame = state.frame
        timings: Dict[str, float] = {}

        grid = concat_lanes(self._stage("initial", timings, lambda p: self._initial(frame, p)))
        if state.reservoirs is not None and s.m_cap > 0:
            current, previous = grid, state.reservoirs
            grid = concat_lanes(self._stage(
                "temporal", timings, lambda p: self._temporal(frame, current, previous, p)))

        stats = MutationStats(0, 0, np.zeros(s.pixel_count, dtype=np.int64))
        if s.mutation.iters > 0:
            before = grid
            parts = self._stage("mutate", timings, lambda p: self._mutate(frame, before, p))
            grid = concat_lanes([r for r, _ in parts])
            stats = MutationStats(sum(st.proposed for _, st in parts), sum(st.accepted for _, st in parts),
                                  np.concatenate([st.accepted_per_lane for _, st in parts]))

        rounds = s.spatial_rounds if s.spatial_k > 0 else 0
        for round_index in range(rounds):
            # every round reads the complete grid of the previous one
            source = grid
            grid = concat_lanes(self._stage(
                f"spatial_{round_index}", timings,
                lambda p, i=round_index, g=source: self._spatial(frame, i, g, p)))

        final = grid
        color = concat_lanes(self._stage("shade", timings, lambda p: shade(self.ctx, p, final.take(p))))
        ids = np.where(grid.has_sample, grid.sample.ids, -1)

        logger.info("frame %d: %.1f ms, acceptance %.3f, rss %.1f MB", frame, sum(timings.values()),
                    stats.acceptance_rate, self.memory.sample())
        return FrameResult(color.reshape(s.height, s.width, 3), ids.reshape(s.height, s.width),
                           FrameState(frame + 1, grid), stats, timings)

    def run(self, frames: int, on_frame: Optional[Callable[[FrameResult], None]] = None) -> FrameResult:
        """Render `frames` consecutive frames from an empty history; returns the last."""
        state = FrameState()
        result = None
        for _ in range(frames):
            result = self.render_frame(state)
            state = result.state
            if on_frame is not None:
                on_frame(result)
        return result


def render_ensemble(scene: Scene, settings: RenderSettings, seed: int, runs: int, warmup: int,
                    pool: Optional[WorkerPool] = None,
                    on_run: Optional[Callable[[int, FrameResult], None]] = None) -> List[FrameResult]:
    """
    K independent runs, each rendering `warmup` frames before capturing one more.

    Run k uses the seed stream spawned at offset k.
    """
    root = RandomStreams(seed)
    captured = []
    for k in range(runs):
        renderer = Renderer(scene, settings, root.spawn(k).seed, pool)
        result = renderer.run(warmup + 1)
        captured.append(result)
        if on_run is not None:
            on_run(k, result)
    return captured


def reference_image(ctx: SceneReuseContext, width: int, height: int, candidates: int = 4096,
                    seed: int = 0, batch: int = 64) -> Tuple[np.ndarray, np.ndarray]:
    """
    Independent Monte Carlo estimate of every pixel with `candidates` samples.

    Returns:
        (mean image, standard-error image), both (h, w, 3); emitted radiance at the
        primary hit is added to the mean with zero error
    """
    streams = RandomStreams(seed)
    pixels = np.arange(width * height)
    n = len(pixels)
    d = _candidate_numbers(ctx.mode)
    total = np.zeros((n, 3))
    total_sq = np.zeros((n, 3))
    ids = np.full(n, -1, dtype=np.int64)
    for start in range(0, candidates, batch):
        count = min(batch, candidates - start)
        u = streams.uniform(Stream.REFERENCE, n, count * d, frame=start).reshape(n, count, d)
        for m in range(count):
            if ctx.mode is RenderMode.DI:
                y, q = light_candidates(ctx, u[:, m], ids)
            else:
                y, q = path_from_numbers(ctx, pixels, u[:, m], ids)
            f = ctx.integrand(y, pixels)
            est = np.divide(f, q[:, None], out=np.zeros_like(f), where=q[:, None] > 0)
            total += est
            total_sq += est * est
    mean = total / candidates
    var = np.maximum(total_sq / candidates - mean * mean, 0.0) * candidates / max(candidates - 1, 1)
    stderr = np.sqrt(var / candidates)
    mean = mean + ctx.shading.emitted
    return mean.reshape(height, width, 3), stderr.reshape(height, width, 3)

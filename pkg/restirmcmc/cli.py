"""
Command-line interface for restirmcmc
"""
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

import click
import numpy as np
import pandas as pd
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn

from restirmcmc import __version__
from restirmcmc.config import RunConfig, parse_config, write_config
from restirmcmc.errors import ErrorHandler, FileError, GateFailureError, RestirMcmcError
from restirmcmc.metrics import (
    ImageEnsemble, decay_inversions, duplicate_heatmap, heatmap_image, heatmap_rows, mean_duplicates, mse,
    radial_covariance,
)
from restirmcmc.parallel import WorkerPool
from restirmcmc.render.image_io import read_pfm, write_ids, write_pfm, write_ppm
from restirmcmc.render.pipeline import Renderer, RenderSettings, reference_image, render_ensemble
from restirmcmc.render.scene import resolve_scene
from restirmcmc.render.targets import RenderMode, SceneReuseContext, primary_shading
from restirmcmc.testbed import (
    TwoPixelConfig, chain_distribution_test, named_target, run_two_pixel_covariance, run_unbiasedness_trial,
    slice_distribution_test,
)
from restirmcmc.testbed.targets import dissimilar_pair, uniform_target
from restirmcmc.ui.rich_formatter import RichFormatter

logger = logging.getLogger("restirmcmc")

# Configure console for cross-platform compatibility
console = Console(
    force_terminal=True,
    no_color=False,
    width=120
)
formatter = RichFormatter(console)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_TESTBED_GATE = 3
EXIT_METRICS_GATE = 4

EXIT_CODES_HELP = """\b
Exit codes:
  0  success, every configured gate passed
  1  configuration or input error
  2  file I/O error (or command-line usage error)
  3  testbed gate failed
  4  metrics gate failed
"""

CSV_FLOAT = "%.10g"
CONSERVATION_TOLERANCE = 1e-12
TV_THRESHOLD = 0.02
CONTROL_TV_THRESHOLD = 0.2
Z_THRESHOLD = 3.0


def print_banner():
    """Print application banner"""
    formatter.print_banner()


def _configure_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]", force=True,
                        handlers=[RichHandler(console=console, show_path=False)])


def _write_csv(rows, path: Path) -> Path:
    frame = pd.DataFrame(rows)
    ErrorHandler.handle_file_operation(
        lambda: frame.to_csv(path, index=False, float_format=CSV_FLOAT), str(path), "write")
    return path


def _prepare_output(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    ErrorHandler.handle_file_operation(lambda: out.mkdir(parents=True, exist_ok=True), str(out), "create")
    write_config(cfg, out / "config.json")
    return out


def _subdir(out: Path, name: str) -> Path:
    path = out / name
    ErrorHandler.handle_file_operation(lambda: path.mkdir(parents=True, exist_ok=True), str(path), "create")
    return path


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def render_settings(cfg: RunConfig) -> RenderSettings:
    """RenderSettings of a render-mode configuration."""
    r = cfg.render
    return RenderSettings(
        width=r.width, height=r.height,
        mode=RenderMode.PATH if cfg.mode == "render-path" else RenderMode.DI,
        M=r.M, m_cap=r.M_cap, mutation=cfg.mutation_config(),
        spatial_k=cfg.spatial.k, spatial_radius=cfg.spatial.radius, spatial_rounds=cfg.spatial.rounds,
        exponent_cap=r.exponent_cap,
    )


def _run_render(cfg: RunConfig, pool: WorkerPool, out: Path):
    scene = resolve_scene(cfg.render.scene)
    settings = render_settings(cfg)
    logger.info("rendering %s (%dx%d, %s)", scene.name, settings.width, settings.height, cfg.mode)

    if cfg.render.frames > 0:
        frames_dir = _subdir(out, "frames")
        rows: List[Dict] = []
        durations: List[float] = []

        def on_frame(result):
            f = result.state.frame - 1
            write_ppm(frames_dir / f"frame_{f:04d}.ppm", result.image)
            write_pfm(frames_dir / f"frame_{f:04d}.pfm", result.image)
            write_ids(frames_dir / f"ids_{f:04d}.npy", result.ids)
            rows.append({"frame": f, "pixel_count": settings.pixel_count, "proposed": result.stats.proposed,
                         "accepted": result.stats.accepted, "acceptance_rate": result.stats.acceptance_rate})
            durations.append(sum(result.stage_ms.values()))

        renderer = Renderer(scene, settings, cfg.seed, pool)
        renderer.run(cfg.render.frames, on_frame)
        _write_csv(rows, out / "acceptance.csv")
        renderer.benchmark.export_csv(str(out / "timings.csv"))
        formatter.print_frame_table([{**row, "duration_ms": d} for row, d in zip(rows, durations)])
        formatter.print_success(f"{len(rows)} frames written to [bold]{frames_dir}[/bold]")

    if cfg.render.ensemble > 0:
        ensemble_dir = _subdir(out, "ensemble")
        with Progress(TextColumn("[progress.description]{task.description}"), BarColumn(),
                      TextColumn("{task.completed}/{task.total}"), TimeElapsedColumn(),
                      console=console) as progress:
            task = progress.add_task(f"[cyan]Rendering {cfg.render.ensemble} independent runs...",
                                     total=cfg.render.ensemble)

            def on_run(k, result):
                write_pfm(ensemble_dir / f"run_{k:03d}.pfm", result.image)
                write_ids(ensemble_dir / f"run_{k:03d}_ids.npy", result.ids)
                progress.advance(task)

            render_ensemble(scene, settings, cfg.seed, cfg.render.ensemble, cfg.render.warmup, pool, on_run)
        formatter.print_success(f"ensemble of {cfg.render.ensemble} images written to [bold]{ensemble_dir}[/bold]")

    if cfg.render.reference_candidates > 0:
        ctx = SceneReuseContext(scene, primary_shading(scene, settings.width, settings.height), settings.mode,
                                settings.exponent_cap)
        mean, stderr = reference_image(ctx, settings.width, settings.height, cfg.render.reference_candidates,
                                       seed=cfg.seed)
        write_pfm(out / "reference.pfm", mean)
        write_pfm(out / "reference_stderr.pfm", stderr)
        write_ppm(out / "reference.ppm", mean)
        formatter.print_success(f"reference with {cfg.render.reference_candidates} candidates per pixel")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _run_metrics(cfg: RunConfig, pool: WorkerPool, out: Path):
    mt = cfg.metrics
    ensemble_dir = Path(mt.ensemble)
    ens = ImageEnsemble.from_directory(ensemble_dir)
    if ens.K > mt.K:
        ens = ImageEnsemble(ens.images[:mt.K])
    elif ens.K < mt.K:
        logger.warning("ensemble holds %d images, fewer than metrics.K = %d", ens.K, mt.K)

    reports = {flag: radial_covariance(ens, mt.radii, include_self=flag) for flag in (False, True)}
    rows = reports[False].rows() + reports[True].rows()
    _write_csv(rows, out / "covariance.csv")
    formatter.print_covariance_table(rows)

    primary = reports[mt.include_self]
    summary: Dict[str, float] = {"images": float(ens.K)}
    if mt.gate_radius in primary.maps:
        cov_map = primary.maps[mt.gate_radius]
        write_pfm(out / f"covariance_r{mt.gate_radius}.pfm", np.repeat(cov_map[..., None], 3, axis=-1))
        summary[f"image_avg_covariance_r{mt.gate_radius}"] = primary.image_average[mt.gate_radius]

    id_files = sorted(ensemble_dir.glob("*_ids.npy"))
    if id_files:
        maps = [ErrorHandler.handle_file_operation(lambda f=f: np.load(f), str(f)) for f in id_files[:ens.K]]
        heatmap = np.mean([duplicate_heatmap(ids, mt.window) for ids in maps], axis=0)
        _write_csv(heatmap_rows(heatmap), out / "heatmap.csv")
        write_ppm(out / "heatmap.ppm", heatmap_image(heatmap, mt.window))
        summary["mean_duplicates"] = mean_duplicates(heatmap)

    if mt.reference:
        reference = read_pfm(mt.reference)
        errors = [{"image": i, "mse": mse(image, reference)} for i, image in enumerate(ens.images)]
        _write_csv(errors, out / "error.csv")
        summary["mean_mse"] = float(np.mean([e["mse"] for e in errors]))

    _write_csv([{"metric": k, "value": v} for k, v in summary.items()], out / "summary.csv")
    formatter.print_metric_summary(summary)

    if mt.check_radial_decay:
        inversions = decay_inversions(primary)
        if inversions:
            raise GateFailureError("radial covariance decay",
                                   f"box-averaged covariance increases at {inversions} radius step(s)")


# ---------------------------------------------------------------------------
# testbed
# ---------------------------------------------------------------------------

def _run_unbiasedness(cfg: RunConfig, pool: WorkerPool, out: Path):
    t = cfg.testbed
    target = named_target(t.target)
    runs = [(M, 0, t.sources) for M in t.M_values]
    runs += [(t.mutation_M, k, t.mutation_sources) for k in t.k_values]
    results = []
    for i, (M, k, sources) in enumerate(runs):
        results.append(run_unbiasedness_trial(target, M, k, t.trials, cfg.seed + i, sources=sources,
                                              mis=t.mis, pool=pool))
    rows = [{**vars(r), "sources": "+".join(s), "passed": r.passed} for r, (_, _, s) in zip(results, runs)]
    _write_csv(rows, out / "unbiasedness.csv")
    formatter.print_unbiasedness_table(results)

    failed = [r for r in results if not r.passed]
    if failed:
        raise GateFailureError("unbiasedness", ", ".join(f"M={r.M} k={r.k_mutations} z={r.z:+.2f}" for r in failed))
    worst = max(r.conservation_error for r in results)
    if worst > CONSERVATION_TOLERANCE:
        raise GateFailureError("contribution weight conservation", f"largest relative drift {worst:.3e}")


def _run_two_pixel(cfg: RunConfig, pool: WorkerPool, out: Path):
    tp = cfg.testbed.two_pixel
    same = named_target(cfg.testbed.target)
    cases = {
        "identical": TwoPixelConfig((same, same), same, tp.M, tp.mutations, tp.trials, "exact",
                                    shared=tp.shared, seed=cfg.seed),
        "dissimilar": TwoPixelConfig(dissimilar_pair(), uniform_target(), tp.M, tp.mutations, tp.trials,
                                     tp.inputs, shared=tp.shared, seed=cfg.seed + 1),
    }
    rows = []
    for case, case_cfg in cases.items():
        result = run_two_pixel_covariance(case_cfg, pool)
        if case == "identical":
            passed = (abs(result.cov_without) <= Z_THRESHOLD * result.se_without + 1e-12
                      and abs(result.cov_with) <= Z_THRESHOLD * result.se_with + 1e-12)
        else:
            significant = abs(result.cov_without) > Z_THRESHOLD * result.se_without
            passed = significant and abs(result.cov_with) <= (1.0 - tp.min_reduction) * abs(result.cov_without)
        rows.append({"case": case, "cov_without": result.cov_without, "se_without": result.se_without,
                     "cov_with": result.cov_with, "se_with": result.se_with,
                     "reduction": 1.0 - abs(result.cov_with) / abs(result.cov_without) if result.cov_without else 0.0,
                     "trials": result.trials, "passed": passed})
    _write_csv(rows, out / "two_pixel.csv")
    formatter.print_two_pixel_table(rows)
    failed = [row["case"] for row in rows if not row["passed"]]
    if failed:
        raise GateFailureError("two-pixel covariance", f"failing cases: {', '.join(failed)}")


def _run_chain(cfg: RunConfig, pool: WorkerPool, out: Path):
    t = cfg.testbed
    target = named_target(t.chain_target)
    rows = []

    def add(name: str, result, control: bool):
        passed = result.tv_distance > CONTROL_TV_THRESHOLD if control else result.passed(TV_THRESHOLD)
        rows.append({"chain": name, "samples": result.samples, "tv_distance": result.tv_distance,
                     "acceptance_rate": result.acceptance_rate,
                     "expectation": f"TV > {CONTROL_TV_THRESHOLD}" if control else f"TV < {TV_THRESHOLD}",
                     "passed": passed})

    add(target.name, chain_distribution_test(target, t.chain_steps, t.chain_bins, t.chains, seed=cfg.seed,
                                             pool=pool), control=False)
    # an always-accept chain on a uniform target is still exact, so no control there
    if target.name != "uniform":
        add(f"{target.name} (accept-all)",
            chain_distribution_test(target, t.chain_steps, t.chain_bins, t.chains, seed=cfg.seed, accept_all=True,
                                    pool=pool), control=True)
    for scene_name in t.slices:
        add(scene_name, slice_distribution_test(scene_name, t.chains, t.chain_steps, seed=cfg.seed), control=False)
        if scene_name == "low_light_slice":
            add(f"{scene_name} (no kernel ratio)",
                slice_distribution_test(scene_name, t.chains, t.chain_steps, use_kernel_ratio=False, seed=cfg.seed),
                control=True)

    _write_csv(rows, out / "chain.csv")
    formatter.print_chain_table(rows)
    failed = [row["chain"] for row in rows if not row["passed"]]
    if failed:
        raise GateFailureError("chain stationarity", f"failing chains: {', '.join(failed)}")


RUNNERS: Dict[str, Callable[[RunConfig, WorkerPool, Path], None]] = {
    "render-di": _run_render,
    "render-path": _run_render,
    "metrics": _run_metrics,
    "testbed-unbiasedness": _run_unbiasedness,
    "testbed-two-pixel": _run_two_pixel,
    "testbed-chain": _run_chain,
}


def _gate_exit(mode: str) -> int:
    return EXIT_METRICS_GATE if mode == "metrics" else EXIT_TESTBED_GATE


def run(cfg: RunConfig) -> int:
    """
    Execute a validated configuration.

    Args:
        cfg: Run configuration

    Returns:
        Process exit code (see EXIT_CODES_HELP)
    """
    start = time.perf_counter()
    try:
        out = _prepare_output(cfg)
        with WorkerPool(cfg.threads or None) as pool:
            RUNNERS[cfg.mode](cfg, pool, out)
    except GateFailureError as e:
        formatter.print_error(e)
        return _gate_exit(cfg.mode)
    except FileError as e:
        formatter.print_error(e)
        return EXIT_IO
    except RestirMcmcError as e:
        formatter.print_error(e)
        return EXIT_CONFIG
    logger.info("%s finished in %.1f s", cfg.mode, time.perf_counter() - start)
    formatter.print_success(f"artifacts in [bold]{cfg.output}[/bold]")
    return EXIT_OK


def _load(config: Optional[str], overrides: Dict, family: str) -> RunConfig:
    try:
        return parse_config(config, overrides, family)
    except FileError as e:
        formatter.print_error(e)
        sys.exit(EXIT_IO)
    except RestirMcmcError as e:
        formatter.print_error(e)
        sys.exit(EXIT_CONFIG)


def _finish(cfg: RunConfig):
    code = run(cfg)
    if code != EXIT_OK:
        sys.exit(code)


def run_options(fn):
    """Options shared by every run subcommand."""
    fn = click.option("--out", "-o", "out", type=click.Path(file_okay=False),
                      help="Output directory (default: $RESTIRMCMC_OUTPUT_ROOT or ./restirmcmc_output)")(fn)
    fn = click.option("--threads", "-t", type=click.IntRange(min=0), help="Worker threads (0 = logical cores)")(fn)
    fn = click.option("--seed", "-s", type=click.IntRange(0, 2 ** 64 - 1), help="Root random seed")(fn)
    fn = click.option("--config", "-c", "config", type=click.Path(exists=True, dir_okay=False),
                      help="JSON configuration file")(fn)
    return fn


def _common(seed, threads, out) -> Dict:
    return {"seed": seed, "threads": threads, "output": out}


@click.group(epilog=EXIT_CODES_HELP)
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.option("--quiet", "-q", is_flag=True, help="Warnings and errors only")
def main(verbose, quiet):
    """restirmcmc - Reservoir resampling with Metropolis-Hastings mutations"""
    _configure_logging(verbose, quiet)


@main.command(epilog=EXIT_CODES_HELP)
@run_options
@click.option("--mode", "-m", type=click.Choice(["di", "path"]), help="Direct lighting or one-bounce paths")
@click.option("--scene", help="Builtin scene name or JSON scene file")
@click.option("--width", type=click.IntRange(min=1), help="Image width")
@click.option("--height", type=click.IntRange(min=1), help="Image height")
@click.option("--frames", "-f", type=click.IntRange(min=0), help="Consecutive frames to render and write")
@click.option("--candidates", "-M", "M", type=click.IntRange(min=1), help="Initial candidates per pixel")
@click.option("--mutations", "-k", "iters", type=click.IntRange(min=0), help="MH mutations per pixel and frame")
@click.option("--ensemble", "-K", type=click.IntRange(min=0), help="Independent runs to capture after warm-up")
@click.option("--warmup", type=click.IntRange(min=0), help="Frames rendered before each ensemble capture")
@click.option("--reference", "reference", type=click.IntRange(min=0),
              help="Also render a reference with this many candidates per pixel")
def render(config, seed, threads, out, mode, scene, width, height, frames, M, iters, ensemble, warmup, reference):
    """Render frames, an ensemble of independent runs, or a reference image"""
    print_banner()
    cfg = _load(config, {
        **_common(seed, threads, out),
        "mode": f"render-{mode}" if mode else None,
        "render.scene": scene, "render.width": width, "render.height": height, "render.frames": frames,
        "render.M": M, "render.ensemble": ensemble, "render.warmup": warmup,
        "render.reference_candidates": reference, "mutation.iters": iters,
    }, "render")
    formatter.print_config(cfg.to_dict())
    _finish(cfg)


@main.command(epilog=EXIT_CODES_HELP)
@run_options
@click.option("--ensemble", "-e", type=click.Path(exists=True, file_okay=False),
              help="Directory of PFM images (and *_ids.npy sample-id maps)")
@click.option("--reference", "-r", type=click.Path(exists=True, dir_okay=False), help="Reference PFM image")
@click.option("--window", "-w", type=click.IntRange(min=1), help="Duplicate heatmap window")
@click.option("--include-self/--exclude-self", default=None, help="Count a pixel's own variance in box averages")
@click.option("--check-decay/--no-check-decay", default=None, help="Fail when covariance grows with radius")
def metrics(config, seed, threads, out, ensemble, reference, window, include_self, check_decay):
    """Covariance, duplicate heatmap and error metrics of an image ensemble"""
    print_banner()
    cfg = _load(config, {
        **_common(seed, threads, out),
        "metrics.ensemble": ensemble, "metrics.reference": reference, "metrics.window": window,
        "metrics.include_self": include_self, "metrics.check_radial_decay": check_decay,
    }, "metrics")
    _finish(cfg)


@main.command(epilog=EXIT_CODES_HELP)
@run_options
@click.option("--experiment", "-x", type=click.Choice(["unbiasedness", "two-pixel", "chain"]),
              help="Experiment to run")
@click.option("--trials", "-n", type=click.IntRange(min=2), help="Trials for the unbiasedness experiment")
@click.option("--target", help="Analytic target name")
def testbed(config, seed, threads, out, experiment, trials, target):
    """Oracle-backed statistical experiments on 1D targets"""
    print_banner()
    cfg = _load(config, {
        **_common(seed, threads, out),
        "mode": f"testbed-{experiment}" if experiment else None,
        "testbed.trials": trials, "testbed.target": target,
    }, "testbed")
    formatter.print_config(cfg.to_dict())
    _finish(cfg)


@main.command()
@click.argument("directory", type=click.Path(file_okay=False), required=False)
@click.option("--force", is_flag=True, help="Overwrite existing configuration")
def init(directory, force):
    """Write a configuration file with every default filled in"""
    print_banner()

    target = Path(directory or ".").resolve()
    config_file = target / "restirmcmc.json"

    if config_file.exists() and not force:
        console.print(f"[yellow][WARN][/yellow] Configuration already exists: {config_file}")
        console.print("[dim]Use --force to overwrite[/dim]")
        return

    try:
        ErrorHandler.handle_file_operation(lambda: target.mkdir(parents=True, exist_ok=True), str(target), "create")
        write_config(RunConfig(), config_file)
    except FileError as e:
        formatter.print_error(e)
        sys.exit(EXIT_IO)

    console.print(f"[green]✓[/green] Configuration saved to: [bold]{config_file}[/bold]")
    console.print("\n[bold]Next steps:[/bold]")
    console.print(f"  1. Edit {config_file.name} (mode, scene, M, mutation, spatial, metrics, testbed)")
    console.print(f"  2. Run: [cyan]restirmcmc render --config {config_file.name}[/cyan]")
    console.print(f"  3. Run: [cyan]restirmcmc metrics --config {config_file.name} --ensemble <dir>[/cyan]")


if __name__ == '__main__':
    main()

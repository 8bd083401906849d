"""
Run configuration: JSON file, command-line overrides and validation.

Precedence is flags > file > defaults. Keys are addressed with dots ("render.M",
"mutation.iters") both in error messages and in overrides.
"""
import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from restirmcmc.errors import (
    ConfigError, ErrorHandler, InvalidValueError, MissingSceneError, UnknownConfigKeyError,
)
from restirmcmc.mcmc.pss import DEFAULT_S1, DEFAULT_S2, MutationConfig, MutationStrategy
from restirmcmc.render.scene import BUILTIN_SCENES
from restirmcmc.testbed.experiments import SLICES
from restirmcmc.testbed.targets import SOURCES, TARGETS

OUTPUT_ROOT_ENV = "RESTIRMCMC_OUTPUT_ROOT"
DEFAULT_OUTPUT = "restirmcmc_output"

MODES = ("render-di", "render-path", "testbed-unbiasedness", "testbed-two-pixel", "testbed-chain", "metrics")
RENDER_STRATEGY = {"render-di": MutationStrategy.DI_DIRECTION, "render-path": MutationStrategy.RECONNECTION_VERTEX}
# mode used by a subcommand when the file names a mode of another family
FAMILY_DEFAULTS = {"render": "render-di", "testbed": "testbed-unbiasedness", "metrics": "metrics"}


def default_output_root() -> str:
    return os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT)


@dataclass
class RenderOptions:
    scene: str = "glossy_box"
    width: int = 64
    height: int = 64
    frames: int = 1
    warmup: int = 30
    ensemble: int = 0
    M: int = 32
    M_cap: float = 50.0
    exponent_cap: float = 100.0
    reference_candidates: int = 0


@dataclass
class MutationOptions:
    iters: int = 1
    s1: float = DEFAULT_S1
    s2: float = DEFAULT_S2
    # resolved from the render mode when left empty
    strategy: Optional[str] = None


@dataclass
class SpatialOptions:
    k: int = 5
    radius: float = 10.0
    rounds: int = 1


@dataclass
class MetricsOptions:
    K: int = 100
    radii: List[int] = field(default_factory=lambda: [1, 2, 4, 8, 16])
    gate_radius: int = 8
    include_self: bool = False
    window: int = 20
    ensemble: Optional[str] = None
    reference: Optional[str] = None
    check_radial_decay: bool = False


@dataclass
class TwoPixelOptions:
    M: int = 4
    mutations: int = 64
    trials: int = 100_000
    inputs: str = "exact"
    shared: bool = True
    min_reduction: float = 0.3


@dataclass
class TestbedOptions:
    trials: int = 100_000
    target: str = "mixture"
    M_values: List[int] = field(default_factory=lambda: [1, 4, 32])
    sources: List[str] = field(default_factory=lambda: ["uniform"])
    mis: str = "balance"
    # mutation runs start from a deliberately skewed single-candidate initialization
    k_values: List[int] = field(default_factory=lambda: [1, 4, 16])
    mutation_M: int = 1
    mutation_sources: List[str] = field(default_factory=lambda: ["skewed"])
    chain_target: str = "bimodal"
    chain_steps: int = 1_000_000
    chains: int = 20_000
    chain_bins: int = 32
    # both scene mutation strategies; low_light_slice also runs without the kernel ratio
    slices: List[str] = field(default_factory=lambda: ["low_light_slice", "glossy_floor"])
    two_pixel: TwoPixelOptions = field(default_factory=TwoPixelOptions)


@dataclass
class RunConfig:
    """Every knob of a run; serialises to the documented JSON layout."""
    mode: str = "render-di"
    seed: int = 0
    threads: int = 0
    output: str = field(default_factory=default_output_root)
    render: RenderOptions = field(default_factory=RenderOptions)
    mutation: MutationOptions = field(default_factory=MutationOptions)
    spatial: SpatialOptions = field(default_factory=SpatialOptions)
    metrics: MetricsOptions = field(default_factory=MetricsOptions)
    testbed: TestbedOptions = field(default_factory=TestbedOptions)

    @property
    def is_render(self) -> bool:
        return self.mode.startswith("render")

    def mutation_config(self) -> MutationConfig:
        return MutationConfig(self.mutation.iters, self.mutation.s1, self.mutation.s2,
                              MutationStrategy(self.mutation.strategy))

    def to_dict(self) -> Dict[str, Any]:
        return _plain(asdict(self))


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    return value


def _check_keys(data: Mapping, template, prefix: str = ""):
    valid = {f.name: f for f in fields(template)}
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if key not in valid:
            raise UnknownConfigKeyError(dotted, [f"{prefix}{k}" for k in valid])
        nested = getattr(template, key)
        if is_dataclass(nested):
            if not isinstance(value, Mapping):
                raise InvalidValueError(dotted, value, "an object")
            _check_keys(value, nested, f"{dotted}.")


def _build(cls, data: Mapping):
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        default = getattr(cls(), f.name)
        kwargs[f.name] = _build(type(default), value) if is_dataclass(default) else value
    return cls(**kwargs)


def _set_dotted(data: Dict, key: str, value: Any):
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def load_config_file(path) -> Dict:
    """Read a JSON config file; an empty file means all defaults."""
    path = Path(path)
    text = ErrorHandler.handle_file_operation(lambda: path.read_text(encoding="utf-8"), str(path))
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file is not valid JSON: {path}", details=str(e))
    if not isinstance(data, dict):
        raise ConfigError(f"Config file must hold a JSON object: {path}")
    return data


def parse_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                 family: Optional[str] = None) -> RunConfig:
    """
    Build a validated RunConfig.

    Args:
        path: Optional JSON config file
        overrides: Dotted keys set from command-line flags; None values are ignored
        family: "render", "testbed" or "metrics"; a mode outside the family is replaced
            by the family's default mode

    Returns:
        Fully validated RunConfig with defaults filled in

    Raises:
        UnknownConfigKeyError: For keys that are not part of the schema
        InvalidValueError: For out-of-range values, naming the dotted key
        MissingSceneError: If the scene is neither builtin nor an existing file
    """
    data = load_config_file(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(data, key, value)
    if family is not None and not str(data.get("mode", "")).startswith(family):
        data["mode"] = FAMILY_DEFAULTS[family]
    _check_keys(data, RunConfig())
    try:
        cfg = _build(RunConfig, data)
    except TypeError as e:
        raise ConfigError("Malformed configuration", details=str(e))
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> RunConfig:
    """Range and consistency checks; normalizes numeric types in place."""
    v = ErrorHandler
    cfg.mode = v.validate_choice("mode", cfg.mode, MODES)
    cfg.seed = v.validate_range("seed", cfg.seed, 0, 2 ** 64 - 1, integer=True)
    cfg.threads = v.validate_range("threads", cfg.threads, 0, integer=True)
    if not isinstance(cfg.output, str) or not cfg.output:
        raise InvalidValueError("output", cfg.output, "a directory path")

    r = cfg.render
    r.width = v.validate_range("render.width", r.width, 1, integer=True)
    r.height = v.validate_range("render.height", r.height, 1, integer=True)
    r.frames = v.validate_range("render.frames", r.frames, 0, integer=True)
    r.warmup = v.validate_range("render.warmup", r.warmup, 0, integer=True)
    r.ensemble = v.validate_range("render.ensemble", r.ensemble, 0, integer=True)
    r.M = v.validate_range("render.M", r.M, 1 if cfg.is_render else 0, integer=True)
    r.M_cap = v.validate_range("render.M_cap", r.M_cap, 0)
    r.exponent_cap = v.validate_range("render.exponent_cap", r.exponent_cap, 0, low_inclusive=False)
    r.reference_candidates = v.validate_range("render.reference_candidates", r.reference_candidates, 0, integer=True)
    if cfg.is_render and r.scene not in BUILTIN_SCENES and not Path(r.scene).is_file():
        raise MissingSceneError(r.scene)

    m = cfg.mutation
    if m.strategy is None:
        m.strategy = RENDER_STRATEGY.get(cfg.mode, MutationStrategy.DI_DIRECTION).value
    m.strategy = v.validate_choice("mutation.strategy", m.strategy, [s.value for s in MutationStrategy])
    expected = RENDER_STRATEGY.get(cfg.mode)
    if expected is not None and m.strategy != expected.value:
        raise InvalidValueError("mutation.strategy", m.strategy, f"'{expected.value}' in mode {cfg.mode}")
    mc = cfg.mutation_config()
    m.iters, m.s1, m.s2 = mc.iters, mc.s1, mc.s2

    s = cfg.spatial
    s.k = v.validate_range("spatial.k", s.k, 0, integer=True)
    s.radius = v.validate_range("spatial.radius", s.radius, 0)
    s.rounds = v.validate_range("spatial.rounds", s.rounds, 0, integer=True)

    mt = cfg.metrics
    mt.K = v.validate_range("metrics.K", mt.K, 2, integer=True)
    if not isinstance(mt.radii, list) or not mt.radii:
        raise InvalidValueError("metrics.radii", mt.radii, "a non-empty list of radii")
    mt.radii = [v.validate_range("metrics.radii", x, 0, integer=True) for x in mt.radii]
    mt.gate_radius = v.validate_range("metrics.gate_radius", mt.gate_radius, 0, integer=True)
    mt.window = v.validate_range("metrics.window", mt.window, 1, integer=True)
    if cfg.mode == "metrics":
        if not mt.ensemble or not Path(mt.ensemble).is_dir():
            raise InvalidValueError("metrics.ensemble", mt.ensemble, "an existing ensemble directory")
        if mt.reference and not Path(mt.reference).is_file():
            raise InvalidValueError("metrics.reference", mt.reference, "an existing PFM file")

    t = cfg.testbed
    t.trials = v.validate_range("testbed.trials", t.trials, 2, integer=True)
    t.M_values = [v.validate_range("testbed.M_values", x, 1, integer=True) for x in t.M_values]
    t.k_values = [v.validate_range("testbed.k_values", x, 0, integer=True) for x in t.k_values]
    t.mutation_M = v.validate_range("testbed.mutation_M", t.mutation_M, 1, integer=True)
    for name in list(t.sources) + list(t.mutation_sources):
        v.validate_choice("testbed.sources", name, SOURCES)
    v.validate_choice("testbed.target", t.target, TARGETS)
    v.validate_choice("testbed.chain_target", t.chain_target, TARGETS)
    for name in t.slices:
        v.validate_choice("testbed.slices", name, SLICES)
    t.chain_steps = v.validate_range("testbed.chain_steps", t.chain_steps, 1, integer=True)
    t.chains = v.validate_range("testbed.chains", t.chains, 1, integer=True)
    t.chain_bins = v.validate_range("testbed.chain_bins", t.chain_bins, 2, integer=True)
    v.validate_choice("testbed.mis", t.mis, ("balance", "uniform"))
    tp = t.two_pixel
    tp.M = v.validate_range("testbed.two_pixel.M", tp.M, 1, integer=True)
    tp.mutations = v.validate_range("testbed.two_pixel.mutations", tp.mutations, 0, integer=True)
    tp.trials = v.validate_range("testbed.two_pixel.trials", tp.trials, 2, integer=True)
    v.validate_choice("testbed.two_pixel.inputs", tp.inputs, ("exact", "ris"))
    tp.min_reduction = v.validate_range("testbed.two_pixel.min_reduction", tp.min_reduction, 0, 1)
    return cfg


def write_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    text = json.dumps(cfg.to_dict(), indent=2) + "\n"
    ErrorHandler.handle_file_operation(lambda: path.write_text(text, encoding="utf-8"), str(path), "write")
    return path

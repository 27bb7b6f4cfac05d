"""Flat ``section.key = value`` experiment configuration files.

Unknown keys are hard errors so typos never silently fall back to
defaults.  ``#`` starts a comment; blank lines are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .arena import ArenaSpec, TemplateSpec
from .controller import ControllerConfig
from .errors import ConfigError
from .fluidsim import Density, FlowParams
from .perception import DetectorParams
from .trajectory import TrajectoryKind
from .util import fmt

CONSTANT_STOP_MODES = ("confidence_rule", "fixed_window")


@dataclass
class ExperimentConfig:
    """Everything a sweep needs, resolved from defaults + file + flags."""

    densities: tuple[Density, ...] = (Density.LOW, Density.MEDIUM, Density.HIGH)
    trajectories: tuple[TrajectoryKind, ...] = tuple(TrajectoryKind)
    speed_trajectory: TrajectoryKind = TrajectoryKind.FOUR_SMALL_CIRCLES
    trials_per_cell: int = 20
    master_seed: int = 0
    out_dir: Path = Path("out")
    arena: ArenaSpec = field(default_factory=ArenaSpec)
    template: TemplateSpec = field(default_factory=TemplateSpec)
    flow: FlowParams = field(default_factory=FlowParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    n_lines: int = 8
    spacing: float = 0.1
    v_max: float = 20.0
    dt: float = 0.02
    count_normalizer: float = 100.0
    constant_stop: str = "confidence_rule"
    coefficients_path: Path | None = None

    def __post_init__(self) -> None:
        if self.trials_per_cell < 1:
            raise ConfigError(f"trials_per_cell must be >= 1, got {self.trials_per_cell}")
        if not self.densities:
            raise ConfigError("density set must not be empty")
        if not self.trajectories:
            raise ConfigError("trajectory set must not be empty")
        if self.constant_stop not in CONSTANT_STOP_MODES:
            raise ConfigError(
                f"speed_comparison.constant_stop must be one of {CONSTANT_STOP_MODES}, "
                f"got {self.constant_stop!r}"
            )


_SECTION_CLASSES = {
    "arena": ArenaSpec,
    "template": TemplateSpec,
    "flow": FlowParams,
    "detector": DetectorParams,
    "controller": ControllerConfig,
}

_EXPERIMENT_KEYS = {
    "densities", "trajectories", "trials_per_cell", "seed", "out_dir",
    "coefficients", "speed_trajectory",
}
_TRAJECTORY_KEYS = {"n_lines", "spacing", "v_max"}
_SIM_KEYS = {"dt"}
_PERCEPTION_KEYS = {"count_normalizer"}
_SPEED_KEYS = {"constant_stop"}


def known_keys() -> set[str]:
    keys: set[str] = set()
    for section, cls in _SECTION_CLASSES.items():
        keys.update(f"{section}.{f.name}" for f in fields(cls))
    keys.update(f"experiment.{k}" for k in _EXPERIMENT_KEYS)
    keys.update(f"trajectory.{k}" for k in _TRAJECTORY_KEYS)
    keys.update(f"sim.{k}" for k in _SIM_KEYS)
    keys.update(f"perception.{k}" for k in _PERCEPTION_KEYS)
    keys.update(f"speed_comparison.{k}" for k in _SPEED_KEYS)
    return keys


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key/value pairs, validated against the known-key registry."""
    valid = known_keys()
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in valid:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _convert(key: str, value: str, target_type):
    try:
        if target_type is bool:
            return value.lower() in ("1", "true", "yes")
        return target_type(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc


def _build_section(section: str, cls, entries: dict[str, str]):
    kwargs = {}
    for f in fields(cls):
        key = f"{section}.{f.name}"
        if key in entries:
            target = type(getattr(cls(), f.name))
            kwargs[f.name] = _convert(key, entries[key], target)
    return cls(**kwargs)


def config_from_entries(entries: dict[str, str]) -> ExperimentConfig:
    cfg_kwargs = {}
    for section, cls in _SECTION_CLASSES.items():
        cfg_kwargs[section] = _build_section(section, cls, entries)

    if "experiment.densities" in entries:
        cfg_kwargs["densities"] = tuple(
            Density.from_name(n) for n in entries["experiment.densities"].split(",") if n.strip()
        )
    if "experiment.trajectories" in entries:
        cfg_kwargs["trajectories"] = tuple(
            TrajectoryKind.from_name(n)
            for n in entries["experiment.trajectories"].split(",") if n.strip()
        )
    if "experiment.speed_trajectory" in entries:
        cfg_kwargs["speed_trajectory"] = TrajectoryKind.from_name(
            entries["experiment.speed_trajectory"]
        )
    if "experiment.trials_per_cell" in entries:
        cfg_kwargs["trials_per_cell"] = _convert(
            "experiment.trials_per_cell", entries["experiment.trials_per_cell"], int
        )
    if "experiment.seed" in entries:
        cfg_kwargs["master_seed"] = _convert("experiment.seed", entries["experiment.seed"], int)
    if "experiment.out_dir" in entries:
        cfg_kwargs["out_dir"] = Path(entries["experiment.out_dir"])
    if "experiment.coefficients" in entries:
        cfg_kwargs["coefficients_path"] = Path(entries["experiment.coefficients"])
    for key, name, typ in (
        ("trajectory.n_lines", "n_lines", int),
        ("trajectory.spacing", "spacing", float),
        ("trajectory.v_max", "v_max", float),
        ("sim.dt", "dt", float),
        ("perception.count_normalizer", "count_normalizer", float),
    ):
        if key in entries:
            cfg_kwargs[name] = _convert(key, entries[key], typ)
    if "speed_comparison.constant_stop" in entries:
        cfg_kwargs["constant_stop"] = entries["speed_comparison.constant_stop"]
    return ExperimentConfig(**cfg_kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return config_from_entries(parse_config_text(path.read_text(), source=str(path)))


def resolved_lines(cfg: ExperimentConfig) -> list[str]:
    """The full effective configuration, one ``section.key = value`` per line."""
    lines: list[str] = []
    for section, _ in _SECTION_CLASSES.items():
        obj = getattr(cfg, section)
        for f in fields(obj):
            value = getattr(obj, f.name)
            lines.append(f"{section}.{f.name} = {fmt(value) if isinstance(value, float) else value}")
    lines.append("experiment.densities = " + ",".join(d.value for d in cfg.densities))
    lines.append("experiment.trajectories = " + ",".join(k.value for k in cfg.trajectories))
    lines.append(f"experiment.speed_trajectory = {cfg.speed_trajectory.value}")
    lines.append(f"experiment.trials_per_cell = {cfg.trials_per_cell}")
    lines.append(f"experiment.seed = {cfg.master_seed}")
    lines.append(f"experiment.out_dir = {cfg.out_dir}")
    if cfg.coefficients_path is not None:
        lines.append(f"experiment.coefficients = {cfg.coefficients_path}")
    lines.append(f"trajectory.n_lines = {cfg.n_lines}")
    lines.append(f"trajectory.spacing = {fmt(cfg.spacing)}")
    lines.append(f"trajectory.v_max = {fmt(cfg.v_max)}")
    lines.append(f"sim.dt = {fmt(cfg.dt)}")
    lines.append(f"perception.count_normalizer = {fmt(cfg.count_normalizer)}")
    lines.append(f"speed_comparison.constant_stop = {cfg.constant_stop}")
    return lines

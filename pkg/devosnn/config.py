"""Experiment configuration: YAML or flat ``key=value`` files with dotted keys."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import yaml

from devosnn.constraint import ConstraintConfig
from devosnn.optim import AdamSettings
from devosnn.pruning import PruneSchedule
from devosnn.spec import NetworkSpec, build_network_spec
from devosnn.states import AblationMode, parse_mode

_DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config.yaml"

START_FRACTION = 0.24
MID_FRACTION = 0.40


@dataclass
class NetworkConfig:
    architecture: str = "Input-8C3-AvgPool2-16C3-AvgPool2-Flatten-100FC-4FC"
    time_steps: int = 8
    tau: float = 0.2
    v_th: float = 0.5
    a: float = 1.0


@dataclass
class DataConfig:
    source: str = "synthetic"
    path: str = ""
    shape: list[int] = field(default_factory=lambda: [1, 16, 16])
    class_count: int = 4
    n_train: int = 2000
    n_test: int = 500
    seed: int = 7
    noise: float = 0.1


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 64
    seed: int = 0
    mode: str = "full"


@dataclass
class OptimConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class PruneConfig:
    rho_conv: float = 10.0
    rho_fc: float = 35.0
    alpha: float = 1.0
    beta: float = 0.00075
    start_epoch: int | None = None   # None: round(0.24 * epochs)
    mid_epoch: int | None = None     # None: round(0.40 * epochs)
    rho_cap: float = 95.0
    per_layer: bool = False


@dataclass
class RegenConfig:
    rho_g: float = 1.0
    gamma: float = 1.1
    t_num: int | None = None   # None: share constraint.t_num


@dataclass
class OutputConfig:
    runs_dir: str = "runs"
    max_runs: int = 20

    @property
    def runs_path(self) -> Path:
        path = Path(self.runs_dir).expanduser()
        if path.is_absolute():
            return path
        return _DEFAULT_CONFIG.parent / path


@dataclass
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    constraint: ConstraintConfig = field(default_factory=ConstraintConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    regen: RegenConfig = field(default_factory=RegenConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def mode(self) -> AblationMode:
        return parse_mode(self.train.mode)

    @property
    def start_epoch(self) -> int:
        if self.prune.start_epoch is not None:
            return self.prune.start_epoch
        return round(START_FRACTION * self.train.epochs)

    @property
    def mid_epoch(self) -> int:
        if self.prune.mid_epoch is not None:
            return self.prune.mid_epoch
        return max(round(MID_FRACTION * self.train.epochs), self.start_epoch + 1)

    @property
    def regen_t_num(self) -> int:
        return self.regen.t_num if self.regen.t_num is not None else self.constraint.t_num

    def network_spec(self) -> NetworkSpec:
        n = self.network
        return build_network_spec(n.architecture, self.data.shape, n.time_steps, n.tau, n.v_th, n.a)

    def prune_schedule(self) -> PruneSchedule:
        p = self.prune
        return PruneSchedule(
            rho_conv=p.rho_conv, rho_fc=p.rho_fc, alpha=p.alpha, beta=p.beta,
            start_epoch=self.start_epoch, mid_epoch=self.mid_epoch,
            rho_cap=p.rho_cap, per_layer=p.per_layer,
        )

    def adam_settings(self) -> AdamSettings:
        o = self.optim
        return AdamSettings(lr=o.lr, beta1=o.beta1, beta2=o.beta2, eps=o.eps)


# Section classes; the order also decides which section a bare key resolves to.
_SECTIONS: dict[str, type] = {
    "train": TrainConfig,
    "network": NetworkConfig,
    "optim": OptimConfig,
    "constraint": ConstraintConfig,
    "prune": PruneConfig,
    "regen": RegenConfig,
    "data": DataConfig,
    "output": OutputConfig,
}


def param_keys() -> list[str]:
    """Every dotted key a config file may set."""
    return [f"{s}.{f.name}" for s, cls in _SECTIONS.items() for f in dataclasses.fields(cls)]


def resolve_param_key(key: str) -> str:
    """Map ``t_num`` -> ``constraint.t_num``; dotted keys are checked and returned."""
    keys = param_keys()
    if "." in key:
        if key not in keys:
            raise ValueError(f"unknown config key {key!r}")
        return key
    matches = [k for k in keys if k.split(".", 1)[1] == key]
    if not matches:
        raise ValueError(f"unknown config key {key!r}")
    return matches[0]


def _expand_dotted(raw: dict[str, Any]) -> dict[str, Any]:
    """Turn top-level ``prune.alpha: 1`` entries into nested sections."""
    out: dict[str, Any] = {}
    for key, value in raw.items():
        if "." in str(key):
            section, name = str(key).split(".", 1)
            out.setdefault(section, {})
            if not isinstance(out[section], dict):
                raise ValueError(f"config section {section!r} must be a mapping")
            out[section][name] = value
        elif isinstance(value, dict):
            out.setdefault(key, {}).update(value)
        else:
            out[key] = value
    return out


def _parse_assignment(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ValueError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), yaml.safe_load(value.strip())


def _read_flat(path: Path) -> dict[str, Any]:
    raw: dict[str, Any] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, value = _parse_assignment(line)
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: {e}") from e
        raw[key] = value
    return raw


def _read_file(path: Path) -> dict[str, Any]:
    if path.suffix in (".yaml", ".yml"):
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        return raw
    return _read_flat(path)


def _coerce(value: Any, type_name: str) -> Any:
    """Best-effort typing of values that YAML left as strings (e.g. ``1e-3``)."""
    base = type_name.replace(" | None", "")
    if value is None:
        if "None" in type_name:
            return None
        raise ValueError("must not be null")
    if base == "float":
        if isinstance(value, bool):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    if base == "int":
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    if base == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"expected true/false, got {value!r}")
        return value
    if base == "str":
        return str(value)
    if base.startswith("list"):
        if isinstance(value, str):
            value = [v for v in value.replace("x", ",").split(",") if v.strip()]
        return [int(v) for v in value]
    return value


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    """Build a config from a nested (or dotted) mapping; unknown keys are errors."""
    raw = _expand_dotted(raw)
    errors: list[str] = []
    sections: dict[str, Any] = {}
    for name, values in raw.items():
        if name not in _SECTIONS:
            errors.append(f"unknown config section {name!r}")
            continue
        if not isinstance(values, dict):
            errors.append(f"{name}: must be a mapping")
            continue
        cls = _SECTIONS[name]
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, value in values.items():
            if key not in fields:
                errors.append(f"unknown config key '{name}.{key}'")
                continue
            try:
                kwargs[key] = _coerce(value, str(fields[key].type))
            except (TypeError, ValueError) as e:
                errors.append(f"{name}.{key}: {e}")
        sections[name] = cls(**kwargs)
    if errors:
        raise ValueError("Config validation failed:\n" + "\n".join(f"  - {e}" for e in errors))
    return ExperimentConfig(**sections)


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def apply_overrides(cfg: ExperimentConfig, overrides: Iterable[str]) -> ExperimentConfig:
    """Apply ``key=value`` strings (dotted or bare keys) on top of ``cfg``."""
    raw = config_to_dict(cfg)
    for text in overrides:
        key, value = _parse_assignment(text)
        section, name = resolve_param_key(key).split(".", 1)
        raw[section][name] = value
    return config_from_dict(raw)


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Load config from a file, falling back to defaults, then apply overrides."""
    if path is None:
        path = _DEFAULT_CONFIG
    path = Path(path)
    if not path.exists():
        if path != _DEFAULT_CONFIG:
            raise FileNotFoundError(f"Config file not found: {path}")
        cfg = ExperimentConfig()
    else:
        cfg = config_from_dict(_read_file(path))
    return apply_overrides(cfg, overrides)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)


def validate_config(cfg: ExperimentConfig, check_files: bool = True) -> None:
    """Check every setting before a run starts. Raises ValueError listing all problems."""
    from devosnn.data.registry import create_default_registry

    errors: list[str] = []

    try:
        spec = cfg.network_spec()
        if spec.class_count != cfg.data.class_count:
            errors.append(
                f"network readout has {spec.class_count} units but data.class_count is {cfg.data.class_count}"
            )
    except ValueError as e:
        errors.append(f"network: {e}")

    d = cfg.data
    registry = create_default_registry()
    source = registry.get(d.source)
    if source is None:
        names = ", ".join(s.name for s in registry.list_sources())
        errors.append(f"data.source {d.source!r} is not one of: {names}")
    if len(d.shape) != 3 or any(v < 1 for v in d.shape):
        errors.append(f"data.shape must be [channels, height, width] >= 1, got {d.shape}")
    if d.class_count < 2:
        errors.append(f"data.class_count must be >= 2, got {d.class_count}")
    if d.source == "synthetic" and min(d.n_train, d.n_test) < d.class_count:
        errors.append("data.n_train and data.n_test must be >= data.class_count")
    if d.noise < 0:
        errors.append(f"data.noise must be >= 0, got {d.noise}")
    if source is not None and source.name != "synthetic" and not d.path:
        errors.append(f"data.path is required for source {source.name!r}")
    elif check_files and source is not None:
        for required in source.required_files(d):
            if not required.exists():
                errors.append(f"data file not found: {required}")

    t = cfg.train
    if t.epochs < 1:
        errors.append(f"train.epochs must be >= 1, got {t.epochs}")
    if t.batch_size < 1:
        errors.append(f"train.batch_size must be >= 1, got {t.batch_size}")
    try:
        parse_mode(t.mode)
    except ValueError as e:
        errors.append(f"train.mode: {e}")

    o = cfg.optim
    if o.lr <= 0:
        errors.append(f"optim.lr must be > 0, got {o.lr}")
    if not (0 <= o.beta1 < 1 and 0 <= o.beta2 < 1):
        errors.append("optim.beta1 and optim.beta2 must lie in [0, 1)")
    if o.eps <= 0:
        errors.append(f"optim.eps must be > 0, got {o.eps}")

    c = cfg.constraint
    if c.t_num < 1:
        errors.append(f"constraint.t_num must be >= 1, got {c.t_num}")
    if not 0 < c.epsilon < 1:
        errors.append(f"constraint.epsilon must lie in (0, 1), got {c.epsilon}")

    p = cfg.prune
    if not 0 <= p.rho_cap < 100:
        errors.append(f"prune.rho_cap must lie in [0, 100), got {p.rho_cap}")
    for name in ("rho_conv", "rho_fc"):
        value = getattr(p, name)
        if not 0 <= value <= p.rho_cap:
            errors.append(f"prune.{name} must lie in [0, rho_cap={p.rho_cap}], got {value}")
    if not 0 < p.alpha <= 1:
        errors.append(f"prune.alpha must lie in (0, 1], got {p.alpha}")
    if not 0 <= p.beta <= 1:
        errors.append(f"prune.beta must lie in [0, 1], got {p.beta}")
    if cfg.start_epoch < 0 or cfg.start_epoch >= cfg.mid_epoch:
        errors.append(f"pruning start ({cfg.start_epoch}) must be >= 0 and before mid ({cfg.mid_epoch})")

    r = cfg.regen
    if r.gamma <= 1:
        errors.append(f"regen.gamma must be > 1, got {r.gamma}")
    if not 0 <= r.rho_g <= 99:
        errors.append(f"regen.rho_g must lie in [0, 99], got {r.rho_g}")
    if r.t_num is not None and r.t_num < 1:
        errors.append(f"regen.t_num must be >= 1, got {r.t_num}")

    if cfg.output.max_runs < 1:
        errors.append(f"output.max_runs must be >= 1, got {cfg.output.max_runs}")

    if errors:
        raise ValueError("Config validation failed:\n" + "\n".join(f"  - {e}" for e in errors))

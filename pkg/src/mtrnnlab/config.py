"""Experiment configuration: defaults, file IO, overrides, hashing.

Configs are nested dataclasses serialised as JSON (human-editable,
nested keys, floats at full round-trip precision).  Unknown keys are
rejected on load; every value is re-validated when the domain objects
are built.  `--set a.b.c=value` overrides parse the value as a JSON
literal with a string fallback.
"""

from dataclasses import asdict, dataclass, field, fields
import hashlib
import json
from pathlib import Path

from .encoders import ACTIONS, COLOURS, OBJECTS
from .errors import ConfigError
from .network import Direction, IoActivation, NetworkTopology
from .training import TrainHyper


@dataclass
class TopologyConfig:
    io_count: int
    cf_count: int
    cs_count: int
    csc_count: int = 0  # 0 = ceil(cs_count / 2)
    tau_io: float = 2.0
    tau_cf: float = 5.0
    tau_cs: float = 70.0

    def build(self, direction: Direction,
              io_activation: IoActivation) -> NetworkTopology:
        return NetworkTopology(io_count=self.io_count, cf_count=self.cf_count,
                               cs_count=self.cs_count, csc_count=self.csc_count,
                               direction=direction, io_activation=io_activation,
                               tau_io=self.tau_io, tau_cf=self.tau_cf,
                               tau_cs=self.tau_cs)


@dataclass
class HyperConfig:
    alpha: float = 0.1
    eta0: float = 0.05
    beta0: float = 0.05
    zeta0: float = 0.05
    xi_plus: float = 1.01
    xi_minus: float = 0.96
    eta_max: float = 1.0
    eta_min: float = 1e-6
    psi: float = 0.0
    max_epochs: int = 20000
    convergence_threshold: float = 1e-3
    state_rate_scale: float = 1.0

    def build(self) -> TrainHyper:
        return TrainHyper(**asdict(self))


@dataclass
class DatasetConfig:
    actions: list = field(default_factory=lambda: list(ACTIONS))
    colours: list = field(default_factory=lambda: list(COLOURS))
    objects: list = field(default_factory=lambda: list(OBJECTS))
    variants: int = 4
    noise_level: float = 0.02
    base_steps: int = 50
    dir: str | None = None  # load scene files instead of synthesising

    def validate(self) -> None:
        for got, known, what in ((self.actions, ACTIONS, "action"),
                                 (self.colours, COLOURS, "colour"),
                                 (self.objects, OBJECTS, "object")):
            unknown = set(got) - set(known)
            if unknown or not got:
                raise ConfigError(f"bad {what} list {got!r}")
        if self.variants < 1:
            raise ConfigError("variants must be >= 1")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be >= 0")


@dataclass
class CosineConfig:
    topology: TopologyConfig = field(default_factory=lambda: TopologyConfig(
        io_count=2, cf_count=6, cs_count=4, tau_cs=16.0))
    hyper: HyperConfig = field(default_factory=lambda: HyperConfig(
        max_epochs=2500, convergence_threshold=1e-5, state_rate_scale=1500.0))
    psi_grid: list = field(default_factory=lambda: [0.0, 1e-5, 5e-5, 2e-4])
    seeds: int = 20
    snapshot_every: int = 0


@dataclass
class ModelConfig:
    auditory: TopologyConfig = field(default_factory=lambda: TopologyConfig(
        io_count=44, cf_count=80, cs_count=23, csc_count=12, tau_cs=70.0))
    somatosensory: TopologyConfig = field(default_factory=lambda: TopologyConfig(
        io_count=5, cf_count=40, cs_count=23, csc_count=12, tau_cs=50.0))
    visual: TopologyConfig = field(default_factory=lambda: TopologyConfig(
        io_count=19, cf_count=40, cs_count=23, csc_count=12, tau_cs=16.0))
    auditory_hyper: HyperConfig = field(default_factory=lambda: HyperConfig(
        alpha=0.1, max_epochs=50000, convergence_threshold=1e-3,
        state_rate_scale=1.0))
    somatosensory_hyper: HyperConfig = field(default_factory=lambda: HyperConfig(
        psi=5e-4, max_epochs=50000, convergence_threshold=1e-5,
        state_rate_scale=1000.0))
    visual_hyper: HyperConfig = field(default_factory=lambda: HyperConfig(
        psi=5e-5, max_epochs=50000, convergence_threshold=1e-5,
        state_rate_scale=1000.0))
    associator_epochs: int = 5000
    associator_threshold: float = 1e-6
    weight_range: float = 0.025
    initial_csc_range: float = 0.01
    final_csc_range: float = 1.0


@dataclass
class ExperimentConfig:
    seed: int = 1
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    cosine: CosineConfig = field(default_factory=CosineConfig)

    def validate(self) -> None:
        self.dataset.validate()
        # building the domain objects runs their own range checks
        self.cosine.topology.build(Direction.CONTEXT_ABSTRACTION,
                                   IoActivation.SIGMOID)
        self.cosine.hyper.build()
        self.model.auditory.build(Direction.CONTEXT_BIAS,
                                  IoActivation.DECISIVE_NORMALISATION)
        self.model.somatosensory.build(Direction.CONTEXT_ABSTRACTION,
                                       IoActivation.SIGMOID)
        self.model.visual.build(Direction.CONTEXT_ABSTRACTION,
                                IoActivation.SIGMOID)
        for h in (self.model.auditory_hyper, self.model.somatosensory_hyper,
                  self.model.visual_hyper):
            h.build()
        for psi in self.cosine.psi_grid:
            if not (0.0 <= psi < 1.0):
                raise ConfigError(f"psi grid value {psi} out of [0, 1)")
        if self.cosine.seeds < 1:
            raise ConfigError("cosine.seeds must be >= 1")


def _from_dict(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping for {cls.__name__}, got {data!r}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys in {cls.__name__}: "
                          f"{sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _DATACLASS_FIELDS.get((cls, name))
        kwargs[name] = _from_dict(sub, value) if sub is not None else value
    return cls(**kwargs)


# nested dataclass fields that need recursive construction
_DATACLASS_FIELDS = {
    (ExperimentConfig, "dataset"): DatasetConfig,
    (ExperimentConfig, "model"): ModelConfig,
    (ExperimentConfig, "cosine"): CosineConfig,
    (ModelConfig, "auditory"): TopologyConfig,
    (ModelConfig, "somatosensory"): TopologyConfig,
    (ModelConfig, "visual"): TopologyConfig,
    (ModelConfig, "auditory_hyper"): HyperConfig,
    (ModelConfig, "somatosensory_hyper"): HyperConfig,
    (ModelConfig, "visual_hyper"): HyperConfig,
    (CosineConfig, "topology"): TopologyConfig,
    (CosineConfig, "hyper"): HyperConfig,
}


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = _from_dict(ExperimentConfig, data)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(config_json(cfg))


def config_json(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=1) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply `key.path=value` settings on top of a config."""
    data = config_to_dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config path {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return config_from_dict(data)

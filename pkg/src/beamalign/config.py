"""Flat ``key = value`` experiment configuration.

Lines starting with ``#`` are comments. Lists are comma separated. Every key
must name a field of :class:`ExperimentConfig`; anything else is an error.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .env import EnvConfig
from .maps import MapTrainingConfig
from .ppo import PpoConfig

MODES = ("train-map", "train-agent", "eval", "baselines", "export-patterns")
METHODS = ("drl", "mrc_csi", "mrc_omp", "exhaustive")


@dataclass
class ExperimentConfig:
    mode: str = "train-agent"
    output_dir: str = "runs"
    seed: int = 0
    num_seeds: int = 1

    # environment
    n_rx: int = 32
    T: int = 5
    L: int = 1
    snr_db: float = 20.0

    # agent
    map_kind: str = "direct"
    map_checkpoint: str = ""
    agent_checkpoint: str = ""
    updates: int = 100_000
    checkpoint_every: int = 100
    best_window: int = 20
    resume: bool = False
    clip: float = 0.2
    ent_coef: float = 0.001
    vf_coef: float = 0.5
    gamma: float = 1.0
    lr: float = 3e-4
    batch_episodes: int = 2000
    workers: int = 2000
    max_grad_norm: float = 0.5
    epochs: int = 4
    minibatch_episodes: int = 500
    hidden: int = 128
    gru_layers: int = 2
    ff_layers: int = 2
    log_std_init: float = -0.5

    # beamforming module pretraining
    map_batch: int = 1000
    map_K: int = 1000
    map_epsilon: float = 1.0
    map_updates: int = 5000
    map_lr: float = 1e-3
    map_hidden: int = 128

    # evaluation
    eval_episodes: int = 10_000
    snr_list: list = field(default_factory=lambda: [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    methods: list = field(default_factory=lambda: list(METHODS))
    omp_grid: int = 256

    # pattern export
    pattern_beams: int = 8
    pattern_grid: int = 1000
    pattern_specs: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.map_kind not in ("direct", "beamforming"):
            raise ValueError("map_kind must be 'direct' or 'beamforming'")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if not self.snr_list:
            raise ValueError("snr_list must not be empty")
        if self.num_seeds < 1 or self.eval_episodes < 1 or self.updates < 0:
            raise ValueError("num_seeds and eval_episodes must be >= 1, updates >= 0")

    # ------------------------------------------------------------ views

    def env_config(self, snr_db: float | None = None, seed: int | None = None) -> EnvConfig:
        return EnvConfig(self.n_rx, self.T, self.L,
                         self.snr_db if snr_db is None else float(snr_db),
                         self.seed if seed is None else seed)

    def ppo_config(self) -> PpoConfig:
        names = {f.name for f in fields(PpoConfig)}
        return PpoConfig(**{k: getattr(self, k) for k in names})

    def map_config(self) -> MapTrainingConfig:
        return MapTrainingConfig(n_rx=self.n_rx, batch=self.map_batch, K=self.map_K,
                                 epsilon=self.map_epsilon, updates=self.map_updates,
                                 lr=self.map_lr, hidden=self.map_hidden, seed=self.seed)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # ------------------------------------------------------------ text form

    @classmethod
    def field_types(cls) -> dict[str, type]:
        hints = {"int": int, "float": float, "str": str, "bool": bool, "list": list}
        return {f.name: hints[f.type] if isinstance(f.type, str) else f.type for f in fields(cls)}

    @classmethod
    def parse_value(cls, key: str, text: str):
        types = cls.field_types()
        if key not in types:
            raise KeyError(f"unknown config key {key!r}")
        kind = types[key]
        text = text.strip()
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"{key}: expected a boolean, got {text!r}")
        if kind is list:
            items = [s.strip() for s in text.split(",") if s.strip()]
            if key == "snr_list":
                return [float(s) for s in items]
            return items
        return kind(text)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                values[key] = cls.parse_value(key, value)
            except KeyError as exc:
                raise KeyError(f"line {lineno}: {exc.args[0]}") from None
        values.update(overrides)
        return cls(**values)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), **overrides)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

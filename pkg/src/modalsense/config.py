"""Experiment configuration: keys, validation, file loading, CLI overrides."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

from .field import Workspace

__all__ = ["ExperimentConfig", "load_config", "apply_overrides", "downsample_step"]

METHODS = ("batch", "general", "longterm")
GENERATORS = ("damped_oscillation", "lti", "external_series")


def downsample_step(full: int, coarse: int) -> int:
    """Stride that downsamples ``full`` cells onto exactly ``coarse`` cells."""
    if coarse > full:
        raise ValueError(f"coarse dimension {coarse} exceeds full dimension {full}")
    step = math.ceil(full / coarse)
    if math.ceil(full / step) != coarse:
        raise ValueError(
            f"no integer stride maps {full} cells onto {coarse}; "
            "pick a coarse dimension of the form ceil(full / step)"
        )
    return step


@dataclass
class ExperimentConfig:
    """All knobs of the closed-loop scenario and the experiment commands.

    Grid dimensions are given for the full (truth) grid, the wide-area (av)
    grid, and the high-fidelity (mv) grid; the av and mv grids must be
    integer-stride downsamples of the full grid. The model is built on the
    mv grid. ``init_t`` counts snapshot pairs collected before the first
    model; ``update_every`` is the assimilation cadence in steps.
    """

    full_width: int = 20
    full_height: int = 20
    av_width: int = 5
    av_height: int = 5
    mv_width: int = 10
    mv_height: int = 10
    spacing: float = 1.0
    t_total: int = 240
    dt: float = 0.02
    init_t: int = 60
    update_every: int = 10
    av_time_step: int = 1
    mv_time_step: int = 5
    noise_variance: float = 0.04
    sensing_radius: int = 1
    mv_count: int = 3
    av_count: int = 2
    gamma: float = 1.0
    method: str = "general"
    seed: int = 0
    generator: str = "damped_oscillation"
    cont_eigs: str = "-1"
    lti_amplitude: float = 0.0  # 0 means sqrt(N) of the full grid
    series_path: str = ""
    rank_tol: float = 1e-10
    fixed_rank: int = 0  # 0 means no cap
    general_time_stride: int = 1
    sigma0: float = 0.1
    beta: float = 0.1
    lloyd_max_iters: int = 100
    lloyd_tol: float = 1e-6
    mv_random_placement: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {GENERATORS}")
        if self.init_t < 2:
            raise ValueError("init_t must be at least 2")
        if self.update_every < 1 or self.av_time_step < 1 or self.mv_time_step < 1:
            raise ValueError("step cadences must be at least 1")
        if self.t_total <= self.init_t:
            raise ValueError("t_total must exceed init_t")
        if self.mv_time_step % self.av_time_step:
            raise ValueError("mv_time_step must be a multiple of av_time_step")
        if self.init_t % self.av_time_step or self.update_every % self.av_time_step:
            raise ValueError("init_t and update_every must align with av_time_step")
        if self.general_time_stride < 1:
            raise ValueError("general_time_stride must be at least 1")
        if not (0 < self.gamma <= 1):
            raise ValueError("gamma must lie in (0, 1]")
        if self.mv_count < 1 or self.av_count < 1:
            raise ValueError("robot counts must be at least 1")
        # raises if the coarse grids are not integer-stride downsamples
        self.av_steps()
        self.mv_steps()
        if self.method == "longterm" and self.init_t < self.mv_width * self.mv_height:
            raise ValueError(
                "method 'longterm' requires init_t >= N of the modeling grid "
                f"({self.mv_width * self.mv_height}); got {self.init_t}"
            )
        if self.generator == "external_series" and not self.series_path:
            raise ValueError("generator 'external_series' requires series_path")

    def full_workspace(self) -> Workspace:
        return Workspace(self.full_width, self.full_height, self.spacing)

    def av_steps(self) -> tuple[int, int]:
        return (downsample_step(self.full_width, self.av_width),
                downsample_step(self.full_height, self.av_height))

    def mv_steps(self) -> tuple[int, int]:
        return (downsample_step(self.full_width, self.mv_width),
                downsample_step(self.full_height, self.mv_height))

    def parsed_cont_eigs(self) -> list[complex]:
        parts = [p.strip() for p in str(self.cont_eigs).split(",") if p.strip()]
        if not parts:
            raise ValueError("cont_eigs must name at least one eigenvalue")
        return [complex(p.replace("i", "j")) for p in parts]

    def amplitude(self) -> float:
        if self.lti_amplitude > 0:
            return self.lti_amplitude
        return math.sqrt(self.full_width * self.full_height)

    def rank_cap(self) -> int | None:
        return self.fixed_rank if self.fixed_rank > 0 else None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path) -> ExperimentConfig:
    """Read a JSON config file; missing keys take their defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return ExperimentConfig.from_dict(data)


def _cast(kind, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean from {raw!r}")
    return kind(raw)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply ``key=value`` strings on top of a config, re-validating."""
    data = cfg.to_dict()
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    kinds = {"int": int, "float": float, "str": str, "bool": bool}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in data:
            raise ValueError(f"unknown config key {key!r}")
        data[key] = _cast(kinds[str(types[key])], raw)
    return ExperimentConfig.from_dict(data)

"""Scenario configuration: JSON with ``system``, ``channel``, ``scenario``, ``security``."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .channel import ChannelParams
from .errors import ConfigError, QKDSimError
from .protocol import SystemParams

SCENARIOS = ("visibility-scan", "long-run", "loss-sweep", "postprocess-demo")
REFERENCE_LOSSES = (10.0, 12.6, 15.0, 20.0, 25.0)


@dataclass(frozen=True)
class SecurityParams:
    block_size: int = 2 ** 20
    epsilon_sec: float = 1e-10
    epsilon_cor: float = 1e-15
    f_ec: float = 1.14

    def __post_init__(self):
        if self.block_size < 1024:
            raise ConfigError("block_size must be >= 1024")
        if not (0 < self.epsilon_sec < 1 and 0 < self.epsilon_cor < 1):
            raise ConfigError("epsilon_sec and epsilon_cor must lie in (0, 1)")
        if self.f_ec < 1:
            raise ConfigError("f_ec must be >= 1")


@dataclass(frozen=True)
class VisibilityOptions:
    rounds: int = 120
    pulses_per_point: int = 1_000_000
    v_min: float = -5.0
    v_max: float = 5.0
    v_step: float = 0.05
    v_pi: float = 2.5
    scan_mean_photon: float = 20.0
    round_interval_s: float = 360.0
    histogram_bins: int = 20

    def __post_init__(self):
        if self.rounds < 1 or self.pulses_per_point < 1 or self.histogram_bins < 1:
            raise ConfigError("rounds, pulses_per_point and histogram_bins must be positive")
        if not (self.v_step > 0 and self.v_max > self.v_min and self.v_pi > 0):
            raise ConfigError("voltage sweep needs v_step > 0, v_max > v_min and v_pi > 0")
        if self.scan_mean_photon <= 0 or self.round_interval_s < 0:
            raise ConfigError("scan_mean_photon must be positive and round_interval_s non-negative")


@dataclass(frozen=True)
class LongRunOptions:
    duration_s: float = 10 * 86400.0
    compression: float = 1000.0
    step_seconds: float = 0.05
    tracking: bool = True
    tracker_window: int = 4000
    tracker_gain: float = 1.0
    bin_seconds: float = 3 * 3600.0  # nominal time
    native_seconds: float = 1.0  # simulated time

    def __post_init__(self):
        if min(self.compression, self.step_seconds, self.bin_seconds, self.native_seconds) <= 0:
            raise ConfigError("compression, step_seconds, bin_seconds and native_seconds must be positive")
        if self.duration_s / self.compression < self.step_seconds:
            raise ConfigError("duration_s / compression must cover at least one step")
        if self.tracker_window < 1 or not 0 < self.tracker_gain <= 2:
            raise ConfigError("tracker_window must be >= 1 and tracker_gain in (0, 2]")


@dataclass(frozen=True)
class LossSweepOptions:
    losses: tuple[float, ...] = REFERENCE_LOSSES
    fine_min: float = 0.0
    fine_max: float = 32.0
    fine_step: float = 0.5
    mc_pulses: int = 100_000_000

    def __post_init__(self):
        if not self.losses or min(self.losses) < 0:
            raise ConfigError("losses must be a non-empty list of non-negative values")
        if self.fine_step <= 0 or self.fine_max < self.fine_min or self.fine_min < 0:
            raise ConfigError("fine grid needs 0 <= fine_min <= fine_max and fine_step > 0")
        if self.mc_pulses < 0:
            raise ConfigError("mc_pulses must be >= 0 (0 disables the Monte Carlo check)")


@dataclass(frozen=True)
class DemoOptions:
    min_signal_bits: int = 0  # 0 means: one full block

    def __post_init__(self):
        if self.min_signal_bits < 0 or 0 < self.min_signal_bits < 1024:
            raise ConfigError("min_signal_bits must be 0 or >= 1024")


OPTION_TYPES = {"visibility-scan": VisibilityOptions, "long-run": LongRunOptions,
                "loss-sweep": LossSweepOptions, "postprocess-demo": DemoOptions}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    system: SystemParams = field(default_factory=SystemParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    security: SecurityParams = field(default_factory=SecurityParams)
    options: object = None
    seed: int = 0
    output_path: str = "out"

    def to_dict(self) -> dict:
        return {
            "scenario": {"name": self.scenario, "seed": self.seed, "output_path": self.output_path,
                         **_plain(asdict(self.options))},
            "system": _plain(asdict(self.system)),
            "channel": _plain(asdict(self.channel)),
            "security": _plain(asdict(self.security)),
        }


def _plain(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _build(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except QKDSimError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def from_dict(data: dict, scenario: str | None = None) -> ScenarioConfig:
    """Validate a raw config mapping; ``scenario`` overrides ``scenario.name``."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"system", "channel", "scenario", "security"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    scen = dict(data.get("scenario", {}))
    name = scenario or scen.get("name")
    if scenario and scen.get("name") not in (None, scenario):
        raise ConfigError(f"config is for scenario {scen.get('name')!r}, not {scenario!r}")
    scen.pop("name", None)
    if name not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {name!r}")
    seed = scen.pop("seed", 0)
    output_path = scen.pop("output_path", "out")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("[scenario] seed must be a non-negative integer")
    return ScenarioConfig(
        scenario=name,
        system=_build(SystemParams, data.get("system", {}), "system"),
        channel=_build(ChannelParams, data.get("channel", {}), "channel"),
        security=_build(SecurityParams, data.get("security", {}), "security"),
        options=_build(OPTION_TYPES[name], scen, "scenario"),
        seed=seed,
        output_path=str(output_path),
    )


def load(path: str | Path, scenario: str | None = None) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(data, scenario)

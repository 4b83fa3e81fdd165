"""Scenario configuration files (JSON, schema_version 1)."""
from __future__ import annotations

import json
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .car_following import (
    DEFAULT_S_STAR,
    DriverParams,
    Equilibrium,
    equilibrium_from_spacing,
    solve_equilibrium,
)
from .errors import LccError
from .region_scanner import GainAxis, ScanSpec
from .simulator import Perturbation
from .string_stability import OmegaGrid
from .system_builder import FeedbackGains, LccTopology

SCHEMA_VERSION = 1


class ConfigError(Exception):
    """Config does not parse or fails validation; the message names the field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DriverBlock(_Strict):
    alpha: float = 0.6
    beta: float = 0.9
    v_max: float = 30.0
    s_st: float = 5.0
    s_go: float = 35.0


class EquilibriumBlock(_Strict):
    s_star: Optional[float] = None
    v_star: Optional[float] = None


class TopologyBlock(_Strict):
    variant: Literal["general", "car_following", "free_driving"] = "general"
    n: int
    m: int = 0


class FeedbackBlock(_Strict):
    mu: dict[int, float] = Field(default_factory=dict)
    k: dict[int, float] = Field(default_factory=dict)


class OmegaBlock(_Strict):
    omega_min: float = 1e-3
    omega_max: float = 1e2
    points: int = 1000
    margin: float = 1e-6


class GainAxisBlock(_Strict):
    vehicle: int
    kind: Literal["mu", "k"]


class ScanBlock(_Strict):
    x_gain: GainAxisBlock
    y_gain: GainAxisBlock
    x_range: tuple[float, float, int] = (-10.0, 10.0, 201)
    y_range: tuple[float, float, int] = (-10.0, 10.0, 201)


class PerturbationBlock(_Strict):
    kind: Literal["sine_pulse", "brake_pulse", "step"] = "sine_pulse"
    amplitude: float = 2.0
    duration: float = 10.0
    start_time: float = 20.0


class SimulationBlock(_Strict):
    horizon: float = 100.0
    dt: float = 0.01
    mode: Literal["linear", "nonlinear"] = "linear"


class ScenarioConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = ""
    driver: DriverBlock = Field(default_factory=DriverBlock)
    equilibrium: EquilibriumBlock = Field(default_factory=EquilibriumBlock)
    topology: TopologyBlock
    feedback: FeedbackBlock = Field(default_factory=FeedbackBlock)
    omega_grid: OmegaBlock = Field(default_factory=OmegaBlock)
    scan: Optional[ScanBlock] = None
    perturbation: PerturbationBlock = Field(default_factory=PerturbationBlock)
    simulation: SimulationBlock = Field(default_factory=SimulationBlock)

    @field_validator("equilibrium")
    @classmethod
    def _one_equilibrium(cls, v):
        if v.s_star is not None and v.v_star is not None:
            raise ValueError("give s_star or v_star, not both")
        return v

    # domain objects ---------------------------------------------------

    def driver_params(self) -> DriverParams:
        return DriverParams(**self.driver.model_dump())

    def equilibrium_point(self) -> Equilibrium:
        p = self.driver_params()
        if self.equilibrium.v_star is not None:
            return solve_equilibrium(p, self.equilibrium.v_star)
        s_star = DEFAULT_S_STAR if self.equilibrium.s_star is None else self.equilibrium.s_star
        return equilibrium_from_spacing(p, s_star)

    def lcc_topology(self) -> LccTopology:
        return LccTopology(**self.topology.model_dump())

    def feedback_gains(self) -> FeedbackGains:
        return FeedbackGains(self.feedback.mu, self.feedback.k)

    def grid(self) -> OmegaGrid:
        return OmegaGrid(**self.omega_grid.model_dump())

    def perturbation_signal(self) -> Perturbation:
        return Perturbation(**self.perturbation.model_dump())

    def scan_spec(self, gains) -> ScanSpec:
        if self.scan is None:
            raise ConfigError("scan: block is required for this subcommand")
        return ScanSpec(
            topology=self.lcc_topology(),
            gains=gains,
            x_gain=GainAxis(**self.scan.x_gain.model_dump()),
            y_gain=GainAxis(**self.scan.y_gain.model_dump()),
            x_range=self.scan.x_range,
            y_range=self.scan.y_range,
            fixed_gains=self.feedback_gains(),
            omega_grid=self.grid(),
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from None
    _check_semantics(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _check_semantics(cfg: ScenarioConfig) -> None:
    """Build every domain object once so bad values fail before any output."""
    checks = [
        ("driver", cfg.driver_params),
        ("topology", cfg.lcc_topology),
        ("omega_grid", cfg.grid),
        ("perturbation", cfg.perturbation_signal),
        ("equilibrium", cfg.equilibrium_point),
    ]
    for name, make in checks:
        try:
            make()
        except (ValueError, LccError) as exc:
            raise ConfigError(f"{name}: {exc}") from None
    try:
        cfg.feedback_gains().check(cfg.lcc_topology())
    except LccError as exc:
        raise ConfigError(f"feedback: {exc}") from None
    sim = cfg.simulation
    if not sim.dt > 0 or sim.horizon < sim.dt:
        raise ConfigError("simulation: need dt > 0 and horizon >= dt")
    if cfg.scan is not None:
        from .car_following import LinearGains

        try:
            # Placeholder gains; only the axis/range checks matter here.
            cfg.scan_spec(LinearGains(1.0, 2.0, 1.0))
        except ValueError as exc:
            raise ConfigError(f"scan: {exc}") from None

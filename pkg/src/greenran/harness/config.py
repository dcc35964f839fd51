"""Experiment configuration files.

Configs are TOML.  Every table is a strict schema: unknown keys are errors,
so a typo fails validation instead of silently running the default.  See
``configs/`` in the repository for a commented example of each kind.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from .. import beam_tracker as bt
from .. import carrier_switch as cs
from .. import network_env as ne
from .. import radio_env as re_
from ..errors import ConfigError, UnknownParameter, UnknownPreset
from ..gp_surrogate import KernelSpec

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# -- beam tracking -----------------------------------------------------------

class GridConfig(_Strict):
    n_az: int = 8
    n_el: int = 8


class KernelConfig(_Strict):
    lengthscale_az: float = 1.5
    lengthscale_el: float = 1.5
    lengthscale_time: float = 8.0
    signal_variance: float = 25.0
    noise_variance: float = 1.0
    prior_mean_dbm: float = -100.0


class ScenarioConfig(_Strict):
    name: str = "urban-2lobe"
    mobility: Union[float, str] = "urban"
    grid: GridConfig = GridConfig()
    peaks_dbm: list[float] = [-70.0, -76.0]
    lobe_width: float = 1.5
    floor_dbm: float = -110.0
    measurement_noise_db: float = 0.5
    horizon_slots: int = 500


class TrackerSection(_Strict):
    budget_per_slot: int = 24
    window_slots: int = 4
    n_max: int = 256
    coldstart_slots: int = 15
    coldstart_threshold_db: float = 3.0


class BeamExperiment(_Strict):
    kind: Literal["beam"]
    seeds: list[int] = [0]
    output_dir: Optional[str] = None
    scenario: ScenarioConfig = ScenarioConfig()
    tracker: TrackerSection = TrackerSection()
    kernel: KernelConfig = KernelConfig()

    def speed(self) -> float:
        mob = self.scenario.mobility
        return re_.mobility_preset(mob) if isinstance(mob, str) else float(mob)

    def grid(self) -> re_.BeamGrid:
        return re_.BeamGrid(self.scenario.grid.n_az, self.scenario.grid.n_el)

    def tracker_config(self) -> bt.TrackerConfig:
        k = self.kernel
        spec = KernelSpec(k.lengthscale_az, k.lengthscale_el, k.lengthscale_time,
                          k.signal_variance, k.noise_variance)
        t = self.tracker
        return bt.TrackerConfig(self.grid(), t.budget_per_slot, t.window_slots, spec, k.prior_mean_dbm, t.n_max)

    def scenario_for(self, seed: int) -> re_.ChannelScenario:
        s = self.scenario
        return re_.make_scenario(
            seed, mobility=self.speed(), grid=self.grid(), peaks_dbm=s.peaks_dbm,
            lobe_width=s.lobe_width, floor_dbm=s.floor_dbm,
            measurement_noise_db=s.measurement_noise_db, horizon_slots=s.horizon_slots,
        )

    def check(self) -> None:
        self.speed()
        self.tracker_config()
        self.scenario_for(self.seeds[0] if self.seeds else 0)
        if not self.scenario.peaks_dbm:
            raise ValueError("scenario.peaks_dbm needs at least one lobe")
        if self.tracker.coldstart_slots < 0 or self.tracker.coldstart_slots >= self.scenario.horizon_slots:
            raise ValueError("tracker.coldstart_slots must lie in [0, horizon_slots)")


# -- carrier switch-off ------------------------------------------------------

class CarrierEntry(_Strict):
    freq_mhz: float
    capacity_units: float = 25.0
    coverage_locked: bool = False
    switch_order: int = 0


def _default_carriers() -> list[CarrierEntry]:
    return [CarrierEntry(**vars(c)) for c in cs.default_carriers()]


class SectorConfig(_Strict):
    carriers: list[CarrierEntry] = Field(default_factory=_default_carriers)
    rho_critical: float = 0.9
    stochastic_qos: bool = False
    qos_temperature: float = 0.03


class TrafficConfig(_Strict):
    mean_demand: float = 55.0
    diurnal_amplitude: float = 32.0
    period_slots: int = 96
    noise_std: float = 2.0
    trough_period: float = 16.0


class EnergyConfig(_Strict):
    p_static_w: float = 100.0
    p_dynamic_slope: float = 4.0
    p_tx_max_w: float = 20.0
    p_sleep_w: float = 10.0


class PolicySection(_Strict):
    enabled: bool = True
    pinned_rho_min: Optional[float] = None
    delta: float = 0.95
    gap: float = 0.15
    sigma_loc: float = 0.5
    sigma_scale: float = 0.25
    region: tuple[float, float] = (0.02, 0.8)
    n_loc: int = 61
    scale_range: tuple[float, float] = (0.01, 0.3)
    n_scale: int = 15
    warm_start_trace: Optional[str] = None

    @model_validator(mode="after")
    def _ranges(self) -> "PolicySection":
        if not 0 <= self.region[0] < self.region[1] <= 1:
            raise ValueError("policy.region must satisfy 0 <= lo < hi <= 1")
        if not 0 < self.scale_range[0] < self.scale_range[1]:
            raise ValueError("policy.scale_range must satisfy 0 < lo < hi")
        if self.n_loc < 2 or self.n_scale < 1:
            raise ValueError("policy grid needs n_loc >= 2 and n_scale >= 1")
        if self.region[1] + self.gap > 1:
            raise ValueError("policy.region upper end plus gap exceeds 1")
        return self


class CarrierExperiment(_Strict):
    kind: Literal["carrier"]
    seeds: list[int] = [0]
    output_dir: Optional[str] = None
    days: int = 30
    sector: SectorConfig = SectorConfig()
    traffic: TrafficConfig = TrafficConfig()
    energy: EnergyConfig = EnergyConfig()
    policy: PolicySection = PolicySection()

    @property
    def n_periods(self) -> int:
        return self.days * self.traffic.period_slots

    def env_for(self, seed: int) -> ne.SectorEnv:
        t = self.traffic
        profile = ne.TrafficProfile(t.mean_demand, t.diurnal_amplitude, t.period_slots, t.noise_std,
                                    int(seed), t.trough_period)
        carriers = tuple(cs.CarrierConfig(c.freq_mhz, c.capacity_units, c.coverage_locked, c.switch_order)
                         for c in self.sector.carriers)
        return ne.SectorEnv(profile, carriers, ne.EnergyModel(**self.energy.model_dump()),
                            self.sector.rho_critical, self.sector.stochastic_qos, self.sector.qos_temperature)

    def policy_config(self) -> ne.PolicyConfig:
        p = self.policy
        pinned = p.pinned_rho_min if p.enabled else 0.0
        return ne.PolicyConfig(p.delta, p.gap, p.sigma_loc, p.sigma_scale, pinned)

    def prior(self) -> cs.ThresholdBelief:
        p = self.policy
        return cs.ThresholdBelief.uniform(p.region, p.n_loc, p.scale_range, p.n_scale)

    def check(self) -> None:
        if self.days < 1:
            raise ValueError("days must be positive")
        env = self.env_for(self.seeds[0] if self.seeds else 0)
        if not env.carriers:
            raise ValueError("sector.carriers must not be empty")
        if not 0 < self.sector.rho_critical <= 1:
            raise ValueError("sector.rho_critical must lie in (0, 1]")
        self.policy_config()
        self.prior()


ExperimentConfig = Annotated[Union[BeamExperiment, CarrierExperiment], Field(discriminator="kind")]
_ADAPTER = TypeAdapter(ExperimentConfig)


def parse_config(data: dict[str, Any]) -> BeamExperiment | CarrierExperiment:
    """Validate a raw mapping, including every module-level invariant."""
    try:
        cfg = _ADAPTER.validate_python(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None
    try:
        if not cfg.seeds:
            raise ValueError("seeds must not be empty")
        cfg.check()
    except (ValueError, UnknownPreset) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_config(path: str | Path) -> BeamExperiment | CarrierExperiment:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw)


def with_overrides(cfg, **top_level: Any):
    data = cfg.model_dump()
    data.update({k: v for k, v in top_level.items() if v is not None})
    return parse_config(data)


def set_parameter(cfg, axis: str, value: Any):
    """Copy of ``cfg`` with the dotted parameter ``axis`` set to ``value``."""
    data = cfg.model_dump()
    keys = axis.split(".")
    node: Any = data
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise UnknownParameter(f"unknown parameter {axis!r}")
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node or isinstance(node[keys[-1]], (dict, list)):
        raise UnknownParameter(f"unknown or non-scalar parameter {axis!r}")
    if keys[-1] in ("kind", "output_dir"):
        raise UnknownParameter(f"{axis!r} cannot be swept")
    node[keys[-1]] = value
    return parse_config(data)


def resolved(cfg) -> dict[str, Any]:
    """JSON-ready dump of the fully defaulted config."""
    return cfg.model_dump(mode="json")

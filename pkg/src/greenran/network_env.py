"""Single-sector traffic, load, QoS and power model for scoring switch-off policies.

Demand follows a daily sinusoid plus white noise.  Active carriers share the
demand at equal utilisation, so switching one off raises the load on the
rest.  A period meets QoS when no carrier exceeds ``rho_critical`` and no
traffic is dropped.  Power per carrier is a static draw plus a PA term
proportional to load; sleeping carriers draw a small residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import expit

from . import carrier_switch as cs
from .carrier_switch import CarrierConfig, QosObservation, SwitchState, ThresholdBelief
from .errors import DegenerateLikelihood, LengthMismatch, NoActiveCarriers

PERIOD_HOURS = 0.25


@dataclass(frozen=True)
class TrafficProfile:
    """Daily demand in capacity units. ``trough_period`` places the sinusoid minimum."""

    mean_demand: float = 30.0
    diurnal_amplitude: float = 22.0
    period_slots: int = 96
    noise_std: float = 2.0
    seed: int = 0
    trough_period: float = 16.0  # 04:00 with 15-minute periods

    def __post_init__(self) -> None:
        if self.mean_demand <= 0:
            raise ValueError("mean_demand must be positive")
        if not 0 <= self.diurnal_amplitude <= self.mean_demand:
            raise ValueError("diurnal_amplitude must lie in [0, mean_demand]")
        if self.period_slots <= 0 or self.noise_std < 0:
            raise ValueError("period_slots must be positive and noise_std non-negative")

    @property
    def phase(self) -> float:
        return -0.5 * math.pi - 2.0 * math.pi * self.trough_period / self.period_slots


def _noise(profile: TrafficProfile, t: int) -> float:
    if profile.noise_std == 0:
        return 0.0
    # counter-based: each (seed, t) gets its own stream, so demand(t) is a pure function
    rng = np.random.default_rng(np.random.SeedSequence([profile.seed, int(t), 0xD3AD]))
    return profile.noise_std * float(rng.standard_normal())


def demand(profile: TrafficProfile, t: int) -> float:
    if t < 0:
        raise ValueError("t must be non-negative")
    base = profile.mean_demand + profile.diurnal_amplitude * math.sin(
        2.0 * math.pi * t / profile.period_slots + profile.phase)
    return max(0.0, base + _noise(profile, t))


def demand_trace(profile: TrafficProfile, n: int) -> np.ndarray:
    return np.array([demand(profile, t) for t in range(n)])


@dataclass(frozen=True)
class LoadSplit:
    loads: tuple[float, ...]  # per carrier, 0 for inactive carriers
    served: float
    dropped: float


def distribute_load(demand_units: float, carriers: Sequence[CarrierConfig], active: Sequence[bool]) -> LoadSplit:
    capacity = sum(c.capacity_units for c, on in zip(carriers, active) if on)
    if capacity <= 0:
        raise NoActiveCarriers("at least one active carrier is required")
    util = min(1.0, demand_units / capacity)
    served = min(demand_units, capacity)
    loads = tuple(util if on else 0.0 for on in active)
    return LoadSplit(loads, served, demand_units - served)


def qos_outcome(loads: Sequence[float], rho_critical: float = 0.9, dropped: float = 0.0) -> bool:
    """QoS met iff every carrier load is at most ``rho_critical`` (inclusive) and nothing is dropped."""
    return max(loads, default=0.0) <= rho_critical and dropped <= 0.0


@dataclass(frozen=True)
class EnergyModel:
    p_static_w: float = 100.0
    p_dynamic_slope: float = 4.0
    p_tx_max_w: float = 20.0
    p_sleep_w: float = 10.0

    def __post_init__(self) -> None:
        if min(self.p_static_w, self.p_dynamic_slope, self.p_tx_max_w) <= 0 or self.p_sleep_w < 0:
            raise ValueError("power figures must be positive (sleep power non-negative)")
        if self.p_sleep_w >= self.p_static_w:
            raise ValueError("p_sleep_w must be below p_static_w")


def power_draw(model: EnergyModel, active: Sequence[bool], loads: Sequence[float]) -> float:
    total = 0.0
    for on, load in zip(active, loads):
        if on:
            total += model.p_static_w + model.p_dynamic_slope * load * model.p_tx_max_w
        else:
            total += model.p_sleep_w
    return total


@dataclass(frozen=True)
class EnergySummary:
    kwh: float
    baseline_kwh: float
    saving_fraction: float
    off_time_fraction: float


def energy_summary(power: Sequence[float], baseline: Sequence[float], period_hours: float = PERIOD_HOURS,
                   off_counts: Sequence[int] | None = None, n_unlocked: int = 0) -> EnergySummary:
    """Energy of a policy trace against a baseline trace (plain sums, no trapezoid).

    ``off_counts[t]`` is the number of unlocked carriers asleep in period ``t``.
    """
    if len(power) != len(baseline):
        raise LengthMismatch(f"policy trace has {len(power)} periods, baseline {len(baseline)}")
    if off_counts is not None and len(off_counts) != len(power):
        raise LengthMismatch("off_counts must match the power trace length")
    kwh = math.fsum(power) * period_hours / 1000.0
    base_kwh = math.fsum(baseline) * period_hours / 1000.0
    saving = 1.0 - kwh / base_kwh if base_kwh > 0 else 0.0
    slots = n_unlocked * len(power)
    off = sum(off_counts) / slots if (off_counts is not None and slots) else 0.0
    return EnergySummary(kwh, base_kwh, saving, off)


@dataclass(frozen=True)
class SectorEnv:
    profile: TrafficProfile = field(default_factory=TrafficProfile)
    carriers: tuple[CarrierConfig, ...] = field(default_factory=cs.default_carriers)
    energy: EnergyModel = field(default_factory=EnergyModel)
    rho_critical: float = 0.9
    stochastic_qos: bool = False
    qos_temperature: float = 0.03

    @property
    def total_capacity(self) -> float:
        return sum(c.capacity_units for c in self.carriers)

    @property
    def n_unlocked(self) -> int:
        return sum(not c.coverage_locked for c in self.carriers)


@dataclass(frozen=True)
class PolicyConfig:
    delta: float = 0.95
    gap: float = 0.15
    sigma_loc: float = 0.5
    sigma_scale: float = 0.25
    pinned_rho_min: float | None = None  # fixes rho_min and disables learning

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.gap < 1:
            raise ValueError("gap must lie in (0, 1)")
        if self.sigma_loc < 0 or self.sigma_scale < 0:
            raise ValueError("transition std devs must be non-negative")
        if self.pinned_rho_min is not None and not 0 <= self.pinned_rho_min <= 1 - self.gap:
            raise ValueError("pinned_rho_min must lie in [0, 1 - gap]")


@dataclass(frozen=True)
class PolicyState:
    switch: SwitchState
    belief: ThresholdBelief
    prev_load: float | None = None


@dataclass(frozen=True)
class KpiReport:
    period: int
    demand: float
    per_carrier_load: tuple[float, ...]
    sector_load: float
    served: float
    dropped: float
    congested: bool
    active_count: int

    @property
    def max_carrier_load(self) -> float:
        return max(self.per_carrier_load, default=0.0)


@dataclass(frozen=True)
class PeriodResult:
    kpi: KpiReport
    observation: QosObservation | None
    satisfied: bool
    power_w: float
    rho_min: float
    rho_max: float
    action: str  # "off", "on" or "hold"
    state: PolicyState


def initial_policy_state(env: SectorEnv, belief: ThresholdBelief | None = None, gap: float = 0.15) -> PolicyState:
    belief = belief if belief is not None else ThresholdBelief.uniform()
    return PolicyState(SwitchState.all_on(env.carriers, 0.0, gap), belief)


def _thresholds(policy: PolicyConfig, belief: ThresholdBelief) -> tuple[float, float, bool]:
    """(rho_min, rho_max, learning) for the coming period."""
    if policy.pinned_rho_min is not None:
        rho_min, learning = policy.pinned_rho_min, False
    else:
        rho = cs.select_threshold(belief, policy.delta)
        # no safe threshold: probe at the most conservative end of the search region
        rho_min, learning = (belief.region[0] if rho is None else rho), True
    rho_min = min(rho_min, 1.0 - policy.gap)
    return rho_min, cs.derive_upper(rho_min, policy.gap), learning


def _qos(env: SectorEnv, split: LoadSplit, period: int) -> bool:
    if not env.stochastic_qos:
        return qos_outcome(split.loads, env.rho_critical, split.dropped)
    if split.dropped > 0:
        return False
    p_ok = float(expit((env.rho_critical - max(split.loads)) / env.qos_temperature))
    rng = np.random.default_rng(np.random.SeedSequence([env.profile.seed, int(period), 0x0A05]))
    return bool(rng.random() < p_ok)


def run_period(env: SectorEnv, policy: PolicyConfig, state: PolicyState, period: int) -> PeriodResult:
    """Thresholds -> hysteresis on last period's load -> load split -> QoS -> power.

    The returned state carries this period's sector load; the belief is not
    touched here (see :func:`learn`).
    """
    rho_min, rho_max, learning = _thresholds(policy, state.belief)
    switch = state.switch.with_thresholds(rho_min, rho_max)
    action = "hold"
    if state.prev_load is not None:
        stepped = cs.hysteresis_step(switch, state.prev_load)
        if stepped.active_count < switch.active_count:
            action = "off"
        elif stepped.active_count > switch.active_count:
            action = "on"
        switch = stepped
    d = demand(env.profile, period)
    split = distribute_load(d, switch.carriers, switch.active)
    satisfied = _qos(env, split, period)
    congested = max(split.loads) > env.rho_critical
    power = power_draw(env.energy, switch.active, split.loads)
    kpi = KpiReport(
        period=period,
        demand=d,
        per_carrier_load=split.loads,
        sector_load=split.served / env.total_capacity,
        served=split.served,
        dropped=split.dropped,
        congested=congested,
        active_count=switch.active_count,
    )
    obs = QosObservation(rho_min, satisfied) if learning else None
    new_state = replace(state, switch=switch, prev_load=kpi.sector_load)
    return PeriodResult(kpi, obs, satisfied, power, rho_min, rho_max, action, new_state)


def learn(belief: ThresholdBelief, obs: QosObservation | None, policy: PolicyConfig) -> ThresholdBelief:
    """Bayes update on the period's outcome, then one forgetting step."""
    if obs is not None:
        try:
            belief = cs.belief_update(belief, obs)
        except DegenerateLikelihood:
            belief = ThresholdBelief(belief.loc_grid, belief.scale_grid,
                                     np.full(belief.density.shape, 1.0 / belief.density.size))
    return cs.belief_transition(belief, policy.sigma_loc, policy.sigma_scale)


def simulate(env: SectorEnv, policy: PolicyConfig, n_periods: int,
             belief: ThresholdBelief | None = None) -> tuple[list[PeriodResult], PolicyState]:
    """Run ``n_periods`` consecutive periods, learning after each one unless pinned."""
    state = initial_policy_state(env, belief, policy.gap)
    results = []
    for period in range(n_periods):
        res = run_period(env, policy, state, period)
        results.append(res)
        state = res.state
        if policy.pinned_rho_min is None:
            state = replace(state, belief=learn(state.belief, res.observation, policy))
    return results, state


def all_on_policy(policy: PolicyConfig) -> PolicyConfig:
    return replace(policy, pinned_rho_min=0.0)

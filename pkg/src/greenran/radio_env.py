"""Synthetic RSRP landscape over a transmit-beam grid.

The ground truth is a power sum of Gaussian lobes in beam-index space.  Each
lobe drifts linearly in time and exists between a birth and a death slot, so
hotspots move across the grid and get replaced, roughly the behaviour of a
UE driving past reflectors.  Measurements add white Gaussian noise in dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import OutOfHorizon, UnknownPreset

SLOT_SECONDS = 0.020

# Beam indices per 20 ms slot; see angular_drift for the geometry.
MOBILITY_PRESETS = {
    "pedestrian": 0.01,
    "urban": 0.2,
    "highway": 0.6,
}


def angular_drift(speed_mps: float, standoff_m: float, beam_pitch_deg: float = 1.0,
                  slot_s: float = SLOT_SECONDS) -> float:
    """Beam indices swept per slot by a UE moving tangentially at ``speed_mps``."""
    deg_per_s = math.degrees(speed_mps / standoff_m)
    return deg_per_s * slot_s / beam_pitch_deg


def mobility_preset(name: str) -> float:
    try:
        return MOBILITY_PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown mobility preset {name!r}; expected one of {sorted(MOBILITY_PRESETS)}") from None


@dataclass(frozen=True)
class BeamGrid:
    n_az: int = 8
    n_el: int = 8

    def __post_init__(self) -> None:
        if self.n_az < 1 or self.n_el < 1 or self.n_az * self.n_el < 2:
            raise ValueError(f"beam grid needs positive sides and at least 2 beams, got {self.n_az}x{self.n_el}")

    @property
    def size(self) -> int:
        return self.n_az * self.n_el

    def index(self, az: int, el: int) -> int:
        """Linearised beam index used for tie-breaking."""
        return az * self.n_el + el

    def beams(self) -> np.ndarray:
        """All ``(az, el)`` pairs in linearised order, shape ``(size, 2)``."""
        az, el = np.meshgrid(np.arange(self.n_az), np.arange(self.n_el), indexing="ij")
        return np.column_stack([az.ravel(), el.ravel()])

    def contains(self, az: int, el: int) -> bool:
        return 0 <= az < self.n_az and 0 <= el < self.n_el


@dataclass(frozen=True)
class Lobe:
    peak_dbm: float
    center_az0: float
    center_el0: float
    drift_az: float
    drift_el: float
    width_az: float
    width_el: float
    birth_slot: int
    death_slot: int

    def __post_init__(self) -> None:
        if self.width_az <= 0 or self.width_el <= 0:
            raise ValueError("lobe widths must be positive")
        if self.birth_slot >= self.death_slot:
            raise ValueError("lobe birth_slot must precede death_slot")

    def alive(self, slot: int) -> bool:
        return self.birth_slot <= slot < self.death_slot

    def center(self, slot: int) -> tuple[float, float]:
        return self.center_az0 + self.drift_az * slot, self.center_el0 + self.drift_el * slot


@dataclass(frozen=True)
class ChannelScenario:
    grid: BeamGrid
    lobes: tuple[Lobe, ...]
    floor_dbm: float = -110.0
    measurement_noise_db: float = 0.5
    horizon_slots: int = 500
    seed: int = 0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "lobes", tuple(self.lobes))
        if self.measurement_noise_db < 0:
            raise ValueError("measurement_noise_db must be >= 0")
        if self.horizon_slots < 1:
            raise ValueError("horizon_slots must be positive")
        births = sorted((lb.birth_slot, lb.death_slot) for lb in self.lobes)
        covered = 0
        for birth, death in births:
            if birth > covered:
                break
            covered = max(covered, death)
        if covered < self.horizon_slots:
            raise ValueError(f"no live lobe at slot {covered}; every slot in the horizon needs one")

    def _check_slot(self, slot: int) -> None:
        if not 0 <= slot < self.horizon_slots:
            raise OutOfHorizon(f"slot {slot} outside horizon [0, {self.horizon_slots})")

    def landscape(self, slot: int) -> np.ndarray:
        """True RSRP (dBm) of every beam at ``slot``, shape ``(n_az, n_el)``."""
        self._check_slot(slot)
        cached = self._cache.get(slot)
        if cached is not None:
            return cached
        az = np.arange(self.grid.n_az, dtype=float)[:, None]
        el = np.arange(self.grid.n_el, dtype=float)[None, :]
        power_mw = np.full((self.grid.n_az, self.grid.n_el), 10.0 ** (self.floor_dbm / 10.0))
        for lobe in self.lobes:
            if not lobe.alive(slot):
                continue
            c_az, c_el = lobe.center(slot)
            shape = np.exp(-0.5 * (((az - c_az) / lobe.width_az) ** 2 + ((el - c_el) / lobe.width_el) ** 2))
            power_mw = power_mw + 10.0 ** (lobe.peak_dbm / 10.0) * shape
        out = 10.0 * np.log10(power_mw)
        out.setflags(write=False)
        self._cache[slot] = out
        return out


def rsrp_true(scenario: ChannelScenario, beam: tuple[int, int], slot: int) -> float:
    az, el = beam
    if not scenario.grid.contains(az, el):
        raise ValueError(f"beam {beam} outside the {scenario.grid.n_az}x{scenario.grid.n_el} grid")
    return float(scenario.landscape(slot)[az, el])


def best_beam_oracle(scenario: ChannelScenario, slot: int) -> tuple[tuple[int, int], float]:
    """Exhaustive-search baseline: strongest beam at ``slot``, lowest index on ties."""
    flat = scenario.landscape(slot).ravel()
    idx = int(np.argmax(flat))  # first maximum == smallest linearised index
    az, el = divmod(idx, scenario.grid.n_el)
    return (az, el), float(flat[idx])


def measure(scenario: ChannelScenario, beam: tuple[int, int], slot: int, rng: np.random.Generator) -> float:
    """Noisy RSRP reading. ``rng`` is owned by the caller and advanced in place."""
    value = rsrp_true(scenario, beam, slot)
    noise = rng.standard_normal()
    return value + scenario.measurement_noise_db * float(noise)


def _exit_time(pos: float, vel: float, lo: float, hi: float) -> float:
    if vel > 0:
        return (hi - pos) / vel
    if vel < 0:
        return (lo - pos) / vel
    return math.inf


def _spawn_lobes(
    rng: np.random.Generator,
    grid: BeamGrid,
    peak_dbm: float,
    width: float,
    speed: float,
    horizon: int,
) -> list[Lobe]:
    """One lobe track: a lobe drifts until it leaves the grid, then another enters from an edge."""
    margin = 4.0 * width
    lo = (-margin, -margin)
    hi = (grid.n_az - 1 + margin, grid.n_el - 1 + margin)
    lobes: list[Lobe] = []
    birth = 0
    pos = (rng.uniform(0, grid.n_az - 1), rng.uniform(0, grid.n_el - 1))
    heading = rng.uniform(0, 2 * math.pi)
    while birth < horizon:
        vel = (speed * math.cos(heading), speed * math.sin(heading))
        t_exit = min(_exit_time(pos[i], vel[i], lo[i], hi[i]) for i in range(2))
        life = horizon - birth if not math.isfinite(t_exit) else max(1, math.ceil(t_exit))
        death = min(horizon, birth + life)
        lobes.append(Lobe(
            peak_dbm=peak_dbm,
            center_az0=pos[0] - vel[0] * birth,
            center_el0=pos[1] - vel[1] * birth,
            drift_az=vel[0], drift_el=vel[1],
            width_az=width, width_el=width,
            birth_slot=birth, death_slot=death,
        ))
        birth = death
        # re-enter from a random edge, heading inward within +-60 degrees of the normal
        edge = int(rng.integers(4))
        along = rng.uniform(0, 1)
        spread = rng.uniform(-math.pi / 3, math.pi / 3)
        if edge == 0:
            pos, normal = (lo[0] + 1e-9, lo[1] + along * (hi[1] - lo[1])), 0.0
        elif edge == 1:
            pos, normal = (hi[0] - 1e-9, lo[1] + along * (hi[1] - lo[1])), math.pi
        elif edge == 2:
            pos, normal = (lo[0] + along * (hi[0] - lo[0]), lo[1] + 1e-9), math.pi / 2
        else:
            pos, normal = (lo[0] + along * (hi[0] - lo[0]), hi[1] - 1e-9), -math.pi / 2
        heading = normal + spread
    return lobes


def make_scenario(
    seed: int,
    mobility: str | float = "urban",
    grid: BeamGrid | None = None,
    peaks_dbm: Sequence[float] = (-70.0, -76.0),
    lobe_width: float = 1.5,
    floor_dbm: float = -110.0,
    measurement_noise_db: float = 0.5,
    horizon_slots: int = 500,
) -> ChannelScenario:
    """Seeded moving-lobe scenario; defaults give the bundled ``urban-2lobe`` case.

    ``mobility`` is a preset name or a drift speed in beam indices per slot.
    """
    grid = grid or BeamGrid()
    speed = mobility_preset(mobility) if isinstance(mobility, str) else float(mobility)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x10BE]))
    lobes: list[Lobe] = []
    for peak in peaks_dbm:
        lobes.extend(_spawn_lobes(rng, grid, float(peak), lobe_width, speed, horizon_slots))
    return ChannelScenario(
        grid=grid,
        lobes=tuple(lobes),
        floor_dbm=floor_dbm,
        measurement_noise_db=measurement_noise_db,
        horizon_slots=horizon_slots,
        seed=int(seed),
    )


def measurement_rng(scenario: ChannelScenario) -> np.random.Generator:
    """Measurement-noise generator for ``scenario``, independent of the lobe draw."""
    return np.random.default_rng(np.random.SeedSequence([scenario.seed, 0x5EED]))

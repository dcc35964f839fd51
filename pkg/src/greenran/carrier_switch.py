"""Carrier switch-off with a learned load threshold.

A sector steps carriers down one at a time while the load stays below
``rho_min`` and back up while it exceeds ``rho_max``.  ``rho_min`` is chosen
by Bayesian root finding: the probability of meeting QoS when switching off
below a threshold ``rho`` is modelled as a decreasing logistic

    p(rho) = 1 / (1 + exp((rho - loc) / scale)),

a discrete belief over ``(loc, scale)`` is updated with one pass/fail QoS
outcome per decision period, and the chosen threshold is the largest ``rho``
whose predicted satisfaction probability is still at least ``delta``.  Each
period the belief is blurred with a zero-mean Gaussian random walk so that
old evidence fades and the threshold can follow traffic changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import DegenerateLikelihood, GapOverflow

MIN_POSTERIOR_MASS = 1e-300
BISECTION_TOL = 1e-4


@dataclass(frozen=True)
class CarrierConfig:
    freq_mhz: float
    capacity_units: float = 25.0
    coverage_locked: bool = False
    switch_order: int = 0  # lower is switched off later

    def __post_init__(self) -> None:
        if self.freq_mhz <= 0 or self.capacity_units <= 0:
            raise ValueError("carrier frequency and capacity must be positive")
        if self.switch_order < 0:
            raise ValueError("switch_order must be non-negative")


def default_carriers() -> tuple[CarrierConfig, ...]:
    """Four-layer sector with the two low bands kept on for coverage."""
    return (
        CarrierConfig(800.0, coverage_locked=True, switch_order=0),
        CarrierConfig(1800.0, coverage_locked=True, switch_order=0),
        CarrierConfig(2100.0, switch_order=1),
        CarrierConfig(2600.0, switch_order=2),
    )


@dataclass(frozen=True)
class SwitchState:
    carriers: tuple[CarrierConfig, ...]
    active: tuple[bool, ...]
    rho_min: float
    rho_max: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "carriers", tuple(self.carriers))
        object.__setattr__(self, "active", tuple(bool(a) for a in self.active))
        if len(self.carriers) != len(self.active):
            raise ValueError("one activity flag per carrier is required")
        if not (0.0 <= self.rho_min < self.rho_max <= 1.0):
            raise ValueError(f"need 0 <= rho_min < rho_max <= 1, got ({self.rho_min}, {self.rho_max})")
        for carrier, on in zip(self.carriers, self.active):
            if carrier.coverage_locked and not on:
                raise ValueError(f"coverage-locked carrier {carrier.freq_mhz} MHz must stay active")

    @classmethod
    def all_on(cls, carriers: Sequence[CarrierConfig], rho_min: float, rho_max: float) -> "SwitchState":
        return cls(tuple(carriers), (True,) * len(carriers), rho_min, rho_max)

    @property
    def active_count(self) -> int:
        return sum(self.active)

    def with_thresholds(self, rho_min: float, rho_max: float) -> "SwitchState":
        return replace(self, rho_min=rho_min, rho_max=rho_max)


def hysteresis_step(state: SwitchState, load: float) -> SwitchState:
    """Switch at most one carrier according to the deadband ``(rho_min, rho_max)``.

    Off: the active unlocked carrier with the highest ``switch_order``.
    On: the inactive carrier with the lowest ``switch_order``.
    Equal orders resolve to the carrier listed first.
    """
    active = list(state.active)
    if load < state.rho_min:
        candidates = [i for i, (c, on) in enumerate(zip(state.carriers, active)) if on and not c.coverage_locked]
        if candidates:
            off = max(candidates, key=lambda i: (state.carriers[i].switch_order, -i))
            active[off] = False
            return replace(state, active=tuple(active))
    elif load > state.rho_max:
        candidates = [i for i, on in enumerate(active) if not on]
        if candidates:
            on = min(candidates, key=lambda i: (state.carriers[i].switch_order, i))
            active[on] = True
            return replace(state, active=tuple(active))
    return state


def derive_upper(rho_min: float, gap: float) -> float:
    if gap <= 0:
        raise ValueError("gap must be positive")
    if rho_min + gap > 1.0:
        raise GapOverflow(f"rho_min {rho_min} + gap {gap} exceeds 1")
    return rho_min + gap


def qos_probability(theta: tuple[float, float], rho):
    """Probability of meeting QoS when switching off below ``rho``."""
    loc, scale = theta
    if np.any(np.asarray(scale) <= 0):
        raise ValueError("scale must be positive")
    return expit((np.asarray(loc) - np.asarray(rho)) / np.asarray(scale))


@dataclass(frozen=True)
class QosObservation:
    rho_used: float
    satisfied: bool


@dataclass(frozen=True, eq=False)
class ThresholdBelief:
    """Discrete density over logistic ``(loc, scale)``; ``density[i, j]`` pairs loc i with scale j."""

    loc_grid: np.ndarray
    scale_grid: np.ndarray
    density: np.ndarray
    _theta_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        loc = np.asarray(self.loc_grid, dtype=float)
        scale = np.asarray(self.scale_grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if loc.ndim != 1 or scale.ndim != 1 or dens.shape != (loc.size, scale.size):
            raise ValueError("density must have shape (len(loc_grid), len(scale_grid))")
        if np.any(np.diff(loc) <= 0) or np.any(np.diff(scale) <= 0):
            raise ValueError("grids must be strictly increasing")
        if np.any(scale <= 0):
            raise ValueError("scale grid must be positive")
        if np.any(dens < 0) or abs(dens.sum() - 1.0) > 1e-9:
            raise ValueError("density must be non-negative and sum to 1")
        for name, arr in (("loc_grid", loc), ("scale_grid", scale), ("density", dens)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, region: tuple[float, float] = (0.02, 0.8), n_loc: int = 61,
                scale_range: tuple[float, float] = (0.01, 0.3), n_scale: int = 15) -> "ThresholdBelief":
        loc = np.linspace(region[0], region[1], n_loc)
        scale = np.linspace(scale_range[0], scale_range[1], n_scale)
        dens = np.full((n_loc, n_scale), 1.0 / (n_loc * n_scale))
        return cls(loc, scale, dens)

    @property
    def region(self) -> tuple[float, float]:
        return float(self.loc_grid[0]), float(self.loc_grid[-1])

    def _with_density(self, density: np.ndarray) -> "ThresholdBelief":
        out = ThresholdBelief(self.loc_grid, self.scale_grid, density)
        out._theta_cache.update(self._theta_cache)
        return out

    def qos_grid(self, rho: float) -> np.ndarray:
        """``qos_probability`` at every grid cell for one ``rho``."""
        return expit((self.loc_grid[:, None] - rho) / self.scale_grid[None, :])


def belief_update(belief: ThresholdBelief, obs: QosObservation) -> ThresholdBelief:
    p = belief.qos_grid(obs.rho_used)
    likelihood = p if obs.satisfied else 1.0 - p
    post = belief.density * likelihood
    mass = post.sum()
    if not mass >= MIN_POSTERIOR_MASS:
        raise DegenerateLikelihood(f"posterior mass {mass:.3g} after observing {obs}")
    return belief._with_density(post / mass)


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    # half-sample symmetric reflection: -1 -> 0, n -> n - 1
    m = np.mod(idx, 2 * n)
    return np.where(m >= n, 2 * n - 1 - m, m)


def transition_matrix(n: int, sigma: float) -> np.ndarray:
    """Column-stochastic matrix spreading each cell by a sampled Gaussian, reflected at the edges.

    ``T[i, j]`` is the mass moved from cell ``j`` to cell ``i``.  The
    reflection keeps the matrix symmetric, hence doubly stochastic.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return np.eye(n)
    radius = max(1, int(math.ceil(4.0 * sigma)))
    offsets = np.arange(-radius, radius + 1)
    with np.errstate(over="ignore"):  # tiny sigma: off-centre weights underflow to 0
        weights = np.exp(-0.5 * (offsets / sigma) ** 2)
    weights /= weights.sum()
    cols = np.arange(n)
    rows = _reflect(cols[None, :] + offsets[:, None], n)
    mat = np.zeros((n, n))
    np.add.at(mat, (rows, np.broadcast_to(cols, rows.shape)), weights[:, None])
    return mat


def belief_transition(belief: ThresholdBelief, sigma_loc: float, sigma_scale: float) -> ThresholdBelief:
    """Convolve the density with a separable zero-mean Gaussian (std devs in grid cells)."""
    if sigma_loc == 0 and sigma_scale == 0:
        return belief
    key = (sigma_loc, sigma_scale)
    mats = belief._theta_cache.get(key)
    if mats is None:
        mats = (transition_matrix(belief.loc_grid.size, sigma_loc),
                transition_matrix(belief.scale_grid.size, sigma_scale))
        belief._theta_cache[key] = mats
    t_loc, t_scale = mats
    dens = t_loc @ belief.density @ t_scale.T
    return belief._with_density(dens / dens.sum())


def predicted_satisfaction(belief: ThresholdBelief, rho: float) -> float:
    return float(np.sum(belief.density * belief.qos_grid(rho)))


def select_threshold(belief: ThresholdBelief, delta: float,
                     region: tuple[float, float] | None = None) -> float | None:
    """Largest ``rho`` in ``region`` with predicted satisfaction >= ``delta``.

    Returns ``None`` when even the lower end of the region misses ``delta``
    (no safe threshold).  The root is bracketed by bisection to 1e-4 and the
    safe side of the bracket is returned.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    lo, hi = region if region is not None else belief.region
    if predicted_satisfaction(belief, lo) < delta:
        return None
    if predicted_satisfaction(belief, hi) >= delta:
        return float(hi)
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if predicted_satisfaction(belief, mid) >= delta:
            lo = mid
        else:
            hi = mid
    return float(lo)


def belief_entropy(belief: ThresholdBelief) -> float:
    p = belief.density[belief.density > 0]
    return float(-np.sum(p * np.log(p)))


def warm_start(belief: ThresholdBelief, observations: Sequence[QosObservation]) -> ThresholdBelief:
    """Fold historical outcomes into the prior, without forgetting in between."""
    for obs in observations:
        belief = belief_update(belief, obs)
    return belief

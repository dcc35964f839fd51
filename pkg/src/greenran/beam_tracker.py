"""Bayesian-optimisation beam tracking.

Each slot the tracker measures ``budget_per_slot`` beams.  With no history it
falls back to a greedy max-min space-filling design; otherwise it picks beams
one at a time by expected improvement under the GP posterior at the current
slot, refreshing the posterior after every measurement.  The predicted beam
is the argmax of the posterior mean over the whole grid.

The incumbent for expected improvement is slot-local: it starts at the
largest posterior mean over the grid at this slot and then tracks the best
reading taken in the slot.  Stale readings are discounted by the temporal
kernel, not by the acquisition function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from . import gp_surrogate as gp
from .errors import CountExceedsGrid, DuplicateMeasurement, EmptyHistory, SlotMismatch
from .gp_surrogate import BeamPoint, KernelSpec, RsrpSample
from .radio_env import BeamGrid

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TrackerConfig:
    grid: BeamGrid = field(default_factory=BeamGrid)
    budget_per_slot: int = 24
    window_slots: int = 4
    kernel: KernelSpec = field(default_factory=KernelSpec)
    prior_mean: float = -100.0
    n_max: int = gp.DEFAULT_N_MAX

    def __post_init__(self) -> None:
        if not 1 <= self.budget_per_slot <= self.grid.size:
            raise ValueError(f"budget_per_slot must be in [1, {self.grid.size}], got {self.budget_per_slot}")
        if self.window_slots < 1:
            raise ValueError("window_slots must be positive")
        # the window holds W past slots plus the slot being measured
        if (self.window_slots + 1) * self.budget_per_slot > self.n_max:
            raise ValueError(
                f"(window_slots + 1) * budget_per_slot = {(self.window_slots + 1) * self.budget_per_slot} "
                f"exceeds n_max = {self.n_max}"
            )

    @property
    def overhead_ratio(self) -> float:
        return self.budget_per_slot / self.grid.size


@dataclass(frozen=True)
class TrackerState:
    config: TrackerConfig
    history: tuple[RsrpSample, ...] = ()
    current_slot: int = 0
    incumbent: float | None = None


@dataclass(frozen=True)
class SlotDecision:
    slot: int
    measured: tuple[tuple[BeamPoint, float], ...]
    predicted_beam: tuple[int, int]
    predicted_rsrp: float
    overhead_ratio: float


def init_design(grid: BeamGrid, count: int) -> list[tuple[int, int]]:
    """Greedy max-min design starting at the grid centre.

    Ties on the max-min distance go to the smallest linearised index.
    """
    if count < 0 or count > grid.size:
        raise CountExceedsGrid(f"cannot place {count} points on a {grid.size}-beam grid")
    if count == 0:
        return []
    beams = grid.beams().astype(float)
    first = (grid.n_az // 2, grid.n_el // 2)
    chosen = [first]
    min_d2 = np.sum((beams - np.array(first, float)) ** 2, axis=1)
    while len(chosen) < count:
        idx = int(np.argmax(min_d2))  # first max == smallest linear index
        pick = (int(beams[idx, 0]), int(beams[idx, 1]))
        chosen.append(pick)
        min_d2 = np.minimum(min_d2, np.sum((beams - beams[idx]) ** 2, axis=1))
    return chosen


def expected_improvement(mean, variance, incumbent):
    """EI of a Gaussian ``N(mean, variance)`` over ``incumbent``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(variance, dtype=float)
    if np.any(var < 0):
        raise ValueError("variance must be non-negative")
    improvement = mean - incumbent
    sigma = np.sqrt(var)
    positive = sigma > 0
    safe_sigma = np.where(positive, sigma, 1.0)
    z = improvement / safe_sigma
    ei = improvement * ndtr(z) + safe_sigma * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    out = np.where(positive, np.maximum(ei, 0.0), np.maximum(improvement, 0.0))
    return float(out) if out.ndim == 0 else out


class _SlotPosterior:
    """Joint posterior over every beam of one slot, updated by rank-one conditioning.

    Conditioning the grid posterior on a within-slot reading is the same GP
    conditional as refitting on history plus that reading, at O(grid^2) cost.
    """

    def __init__(self, state: TrackerState, slot: int) -> None:
        cfg = state.config
        self.grid = cfg.grid
        self.noise = cfg.kernel.noise_variance
        past = [s for s in state.history if s.point.slot != slot]
        model = gp.fit(cfg.kernel, cfg.prior_mean, past, n_max=cfg.n_max)
        beams = cfg.grid.beams()
        queries = np.column_stack([beams, np.full(len(beams), slot)])
        self.mean, self.cov = gp.posterior_cov(model, queries)
        self.variance = np.clip(np.diag(self.cov), 0.0, None)
        self.measured = np.zeros(cfg.grid.size, dtype=bool)
        for s in state.history:
            if s.point.slot == slot:
                self.condition(cfg.grid.index(s.point.az, s.point.el), s.rsrp)

    def condition(self, idx: int, value: float) -> None:
        c = self.cov[:, idx].copy()
        denom = c[idx] + self.noise
        if denom <= 0:
            # noiseless repeat of an exactly known beam; nothing left to learn
            self.measured[idx] = True
            return
        gain = c / denom
        self.mean = self.mean + gain * (value - self.mean[idx])
        self.cov -= np.multiply.outer(gain, c)
        self.variance = np.clip(self.variance - gain * c, 0.0, None)
        self.measured[idx] = True


def _argmax_first(values: np.ndarray) -> int:
    return int(np.argmax(values))


def _current_slot_tail(history: tuple[RsrpSample, ...], slot: int) -> list[RsrpSample]:
    tail = []
    for s in reversed(history):
        if s.point.slot != slot:
            break
        tail.append(s)
    return tail


def ingest_measurement(state: TrackerState, point: BeamPoint, rsrp: float) -> TrackerState:
    point = BeamPoint(*point)
    if point.slot != state.current_slot:
        raise SlotMismatch(f"measurement for slot {point.slot} but tracker is at slot {state.current_slot}")
    # only the current slot can hold a duplicate; it sits at the tail of history
    if any(s.point == point for s in _current_slot_tail(state.history, point.slot)):
        raise DuplicateMeasurement(f"beam ({point.az}, {point.el}) already measured in slot {point.slot}")
    if not state.config.grid.contains(point.az, point.el):
        raise ValueError(f"beam ({point.az}, {point.el}) outside the grid")
    rsrp = float(rsrp)
    if not math.isfinite(rsrp):
        raise ValueError("rsrp must be finite")
    incumbent = rsrp if state.incumbent is None else max(state.incumbent, rsrp)
    return replace(state, history=state.history + (RsrpSample(point, rsrp),), incumbent=incumbent)


def advance_slot(state: TrackerState) -> TrackerState:
    """Move to the next slot and drop readings older than the window."""
    nxt = state.current_slot + 1
    oldest = nxt - state.config.window_slots
    kept = tuple(s for s in state.history if s.point.slot >= oldest)
    return replace(state, history=kept, current_slot=nxt, incumbent=None)


def select_measurements(
    state: TrackerState,
    slot: int,
    measure: Callable[[BeamPoint], float],
) -> tuple[list[BeamPoint], TrackerState]:
    """Choose, measure and ingest this slot's beams.

    ``measure`` returns the RSRP reading for a beam; it is called once per
    chosen beam, in order.  Returns the chosen beams and the updated state.
    """
    chosen, state, _ = _acquire(state, slot, measure)
    return chosen, state


def _acquire(state, slot, measure):
    if slot != state.current_slot:
        raise SlotMismatch(f"selecting for slot {slot} but tracker is at slot {state.current_slot}")
    cfg = state.config
    budget = min(cfg.budget_per_slot, cfg.grid.size)
    chosen: list[BeamPoint] = []

    if not state.history:
        for az, el in init_design(cfg.grid, budget):
            point = BeamPoint(az, el, slot)
            state = ingest_measurement(state, point, measure(point))
            chosen.append(point)
        return chosen, state, None

    post = _SlotPosterior(state, slot)
    incumbent = float(np.max(post.mean)) if state.incumbent is None else state.incumbent
    beams = cfg.grid.beams().tolist()
    new: list[RsrpSample] = []
    while len(chosen) < budget and not post.measured.all():
        ei = expected_improvement(post.mean, post.variance, incumbent)
        ei[post.measured] = -np.inf
        idx = _argmax_first(ei)
        point = BeamPoint(beams[idx][0], beams[idx][1], slot)
        value = float(measure(point))
        if not math.isfinite(value):
            raise ValueError("rsrp must be finite")
        # same bookkeeping as ingest_measurement; EI never repeats a measured beam
        incumbent = max(incumbent, value)
        new.append(RsrpSample(point, value))
        post.condition(idx, value)
        chosen.append(point)
    state = replace(state, history=state.history + tuple(new), incumbent=incumbent)
    return chosen, state, post


def slot_posterior(state: TrackerState, slot: int) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of every beam at ``slot`` given the full history."""
    cfg = state.config
    model = gp.fit(cfg.kernel, cfg.prior_mean, state.history, n_max=cfg.n_max)
    beams = cfg.grid.beams()
    return gp.posterior(model, np.column_stack([beams, np.full(len(beams), slot)]))


def predict_best(state: TrackerState, slot: int) -> tuple[tuple[int, int], float]:
    """Beam with the largest posterior mean at ``slot`` (smallest index on ties)."""
    if not state.history:
        raise EmptyHistory("cannot predict a beam before any measurement")
    mean, _ = slot_posterior(state, slot)
    idx = _argmax_first(mean)
    az, el = divmod(idx, state.config.grid.n_el)
    return (az, el), float(mean[idx])


def track_slot(state: TrackerState, measure: Callable[[BeamPoint], float]) -> tuple[SlotDecision, TrackerState]:
    """Run one full slot: select and measure, then predict. Does not advance the slot."""
    slot = state.current_slot
    chosen, state, post = _acquire(state, slot, measure)
    measured = tuple((s.point, s.rsrp) for s in state.history if s.point.slot == slot)
    if post is None:
        beam, value = predict_best(state, slot)
    else:
        # the rank-one updated slot posterior already equals the refit posterior
        idx = _argmax_first(post.mean)
        beam, value = divmod(idx, state.config.grid.n_el), float(post.mean[idx])
    decision = SlotDecision(
        slot=slot,
        measured=measured,
        predicted_beam=beam,
        predicted_rsrp=value,
        overhead_ratio=len(chosen) / state.config.grid.size,
    )
    return decision, state


def run_tracker(config: TrackerConfig, horizon: int,
                measure: Callable[[BeamPoint], float]) -> list[SlotDecision]:
    state = TrackerState(config)
    decisions = []
    for _ in range(horizon):
        decision, state = track_slot(state, measure)
        decisions.append(decision)
        state = advance_slot(state)
    return decisions


def initial_state(config: TrackerConfig, samples: Sequence[RsrpSample] = (), current_slot: int = 0) -> TrackerState:
    """State seeded with pre-existing samples (used by tests and replays)."""
    state = TrackerState(config, current_slot=current_slot)
    return replace(state, history=tuple(RsrpSample(BeamPoint(*s.point), float(s.rsrp)) for s in samples))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenran import carrier_switch as cs
from greenran.carrier_switch import CarrierConfig, QosObservation, SwitchState, ThresholdBelief
from greenran.errors import DegenerateLikelihood, GapOverflow

from oracles import direct_convolution, logistic

CARRIERS = cs.default_carriers()


def _state(active=(True, True, True, True), lo=0.3, hi=0.5):
    return SwitchState(CARRIERS, active, lo, hi)


def _point_mass(loc_grid, scale_grid, i, j):
    dens = np.zeros((len(loc_grid), len(scale_grid)))
    dens[i, j] = 1.0
    return ThresholdBelief(np.asarray(loc_grid, float), np.asarray(scale_grid, float), dens)


# -- hysteresis ----------------------------------------------------------------

def test_low_load_switches_off_highest_order_first():
    s = cs.hysteresis_step(_state(), 0.2)
    assert s.active == (True, True, True, False)
    s = cs.hysteresis_step(s, 0.2)
    assert s.active == (True, True, False, False)


def test_locked_carriers_never_switch_off():
    s = _state((True, True, False, False))
    assert cs.hysteresis_step(s, 0.0) is s


def test_high_load_switches_on_lowest_order_first():
    s = cs.hysteresis_step(_state((True, True, False, False)), 0.6)
    assert s.active == (True, True, True, False)


def test_load_inside_deadband_holds():
    s = _state((True, True, True, False))
    for load in (0.3, 0.4, 0.5):
        assert cs.hysteresis_step(s, load).active == s.active


def test_all_on_at_high_load_holds():
    s = _state()
    assert cs.hysteresis_step(s, 0.99).active == s.active


def test_equal_order_ties_resolve_by_list_position():
    carriers = (CarrierConfig(800.0, coverage_locked=True), CarrierConfig(2100.0, switch_order=1),
                CarrierConfig(2600.0, switch_order=1))
    s = SwitchState.all_on(carriers, 0.3, 0.5)
    assert cs.hysteresis_step(s, 0.1).active == (True, False, True)
    s = SwitchState(carriers, (True, False, False), 0.3, 0.5)
    assert cs.hysteresis_step(s, 0.9).active == (True, True, False)


def test_state_validation():
    with pytest.raises(ValueError):
        _state(lo=0.5, hi=0.5)
    with pytest.raises(ValueError):
        _state(active=(False, True, True, True))


def test_derive_upper():
    assert cs.derive_upper(0.3, 0.2) == pytest.approx(0.5)
    with pytest.raises(GapOverflow):
        cs.derive_upper(0.9, 0.2)


# -- QoS model and belief --------------------------------------------------------

def test_qos_probability_values():
    assert float(cs.qos_probability((0.5, 0.1), 0.5)) == pytest.approx(0.5)
    assert float(cs.qos_probability((0.5, 0.1), 0.6)) == pytest.approx(0.26894, abs=1e-5)
    assert float(cs.qos_probability((0.5, 0.1), 0.6)) == pytest.approx(logistic(0.5, 0.1, 0.6), abs=1e-12)


def test_qos_probability_extremes_are_finite():
    assert float(cs.qos_probability((0.0, 0.01), 1.0)) == pytest.approx(0.0, abs=1e-40)
    assert float(cs.qos_probability((1.0, 0.01), 0.0)) == pytest.approx(1.0)


def test_two_point_update_by_hand():
    # cells chosen so p = 0.4 and 0.8 at rho = 0.5; a success moves (1/2, 1/2) to (1/3, 2/3)
    scale = 0.1
    locs = [0.5 + scale * math.log(0.4 / 0.6), 0.5 + scale * math.log(0.8 / 0.2)]
    belief = ThresholdBelief(np.array(locs), np.array([scale]), np.array([[0.5], [0.5]]))
    post = cs.belief_update(belief, QosObservation(0.5, True))
    np.testing.assert_allclose(post.density[:, 0], [1 / 3, 2 / 3], atol=1e-12)
    post = cs.belief_update(belief, QosObservation(0.5, False))
    np.testing.assert_allclose(post.density[:, 0], [0.75, 0.25], atol=1e-12)


def test_update_is_order_independent():
    b = ThresholdBelief.uniform(n_loc=21, n_scale=5)
    o1, o2 = QosObservation(0.3, True), QosObservation(0.6, False)
    a = cs.belief_update(cs.belief_update(b, o1), o2)
    c = cs.belief_update(cs.belief_update(b, o2), o1)
    np.testing.assert_allclose(a.density, c.density, atol=1e-14)


def test_degenerate_update_raises():
    belief = _point_mass([0.1, 0.2], [1e-4], 0, 0)
    with pytest.raises(DegenerateLikelihood):
        cs.belief_update(belief, QosObservation(0.95, True))


def test_belief_arrays_are_read_only():
    b = ThresholdBelief.uniform()
    with pytest.raises(ValueError):
        b.density[0, 0] = 1.0


# -- forgetting ------------------------------------------------------------------

def test_zero_sigma_transition_is_identity():
    b = cs.belief_update(ThresholdBelief.uniform(n_loc=11, n_scale=4), QosObservation(0.4, True))
    out = cs.belief_transition(b, 0.0, 0.0)
    np.testing.assert_array_equal(out.density, b.density)


@pytest.mark.parametrize("sigmas", [(0.5, 0.25), (1.3, 0.0), (2.0, 1.0)])
def test_transition_matches_direct_convolution(sigmas):
    rng = np.random.default_rng(1)
    dens = rng.random((13, 6))
    dens /= dens.sum()
    b = ThresholdBelief(np.linspace(0, 1, 13), np.linspace(0.05, 0.3, 6), dens)
    out = cs.belief_transition(b, *sigmas)
    np.testing.assert_allclose(out.density, direct_convolution(dens, *sigmas), atol=1e-12)


def _loc_variance(b):
    marg = b.density.sum(axis=1)
    idx = np.arange(marg.size)
    mean = marg @ idx
    return marg @ (idx - mean) ** 2


@pytest.mark.parametrize("sigma_loc", [0.3, 0.5, 1.0, 2.0])
def test_interior_delta_spreads_into_symmetric_bump(sigma_loc):
    b = _point_mass(np.linspace(0.02, 0.8, 31), np.linspace(0.01, 0.3, 7), 15, 3)
    out = cs.belief_transition(b, sigma_loc, 0.0)
    marg = out.density.sum(axis=1)
    np.testing.assert_allclose(marg, marg[::-1], atol=1e-15)
    assert _loc_variance(out) > _loc_variance(b)
    np.testing.assert_allclose(out.density, direct_convolution(b.density, sigma_loc, 0.0), atol=1e-15)


def test_loc_variance_grows_for_interior_supported_beliefs():
    b = cs.warm_start(ThresholdBelief.uniform(region=(0.0, 1.0), n_loc=61, n_scale=5),
                      [QosObservation(0.35, True), QosObservation(0.55, False)] * 6)
    for _ in range(5):
        nxt = cs.belief_transition(b, 0.5, 0.25)
        assert _loc_variance(nxt) >= _loc_variance(b) - 1e-12
        b = nxt


def test_transition_matrix_is_doubly_stochastic():
    for n, sigma in ((5, 0.5), (9, 3.0), (2, 1.0)):
        t = cs.transition_matrix(n, sigma)
        np.testing.assert_allclose(t.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(t.sum(axis=1), 1.0, atol=1e-12)


def test_transition_preserves_uniform():
    b = ThresholdBelief.uniform(n_loc=17, n_scale=5)
    np.testing.assert_allclose(cs.belief_transition(b, 1.5, 0.7).density, b.density, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.02, 0.8), st.booleans()), min_size=1, max_size=8),
       st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_transition_never_lowers_entropy(history, s_loc, s_scale):
    b = ThresholdBelief.uniform(n_loc=21, n_scale=6)
    for rho, ok in history:
        try:
            b = cs.belief_update(b, QosObservation(rho, ok))
        except DegenerateLikelihood:
            return
    assert cs.belief_entropy(cs.belief_transition(b, s_loc, s_scale)) >= cs.belief_entropy(b) - 1e-12


# -- threshold selection ---------------------------------------------------------

def test_point_mass_threshold_inverts_the_logistic():
    belief = _point_mass(np.linspace(0.1, 0.9, 9), [0.05, 0.1], 4, 1)  # loc 0.5, scale 0.1
    delta = 0.9
    expected = 0.5 - 0.1 * math.log(delta / (1 - delta))
    rho = cs.select_threshold(belief, delta, region=(0.0, 1.0))
    assert rho == pytest.approx(expected, abs=2e-4)
    assert cs.predicted_satisfaction(belief, rho) >= delta


def test_predicted_satisfaction_point_mass_and_uniform():
    belief = _point_mass([0.2, 0.4], [0.1], 1, 0)
    assert cs.predicted_satisfaction(belief, 0.4) == pytest.approx(0.5)
    u = ThresholdBelief(np.array([0.2, 0.6]), np.array([0.1]), np.array([[0.5], [0.5]]))
    expected = 0.5 * logistic(0.2, 0.1, 0.4) + 0.5 * logistic(0.6, 0.1, 0.4)
    assert cs.predicted_satisfaction(u, 0.4) == pytest.approx(expected, abs=1e-12)


def test_no_safe_threshold_returns_none():
    assert cs.select_threshold(ThresholdBelief.uniform(), 0.95) is None


def test_whole_region_safe_returns_upper_end():
    belief = _point_mass(np.linspace(0.1, 0.9, 9), [0.01], 8, 0)
    assert cs.select_threshold(belief, 0.9, region=(0.0, 0.5)) == 0.5


def test_select_rejects_bad_delta():
    with pytest.raises(ValueError):
        cs.select_threshold(ThresholdBelief.uniform(), 1.0)


def test_successes_raise_threshold_failures_lower_it():
    b = ThresholdBelief.uniform()
    b = cs.warm_start(b, [QosObservation(r, True) for r in np.linspace(0.05, 0.4, 30)])
    base = cs.select_threshold(b, 0.9)
    assert base is not None
    up = cs.select_threshold(cs.belief_update(b, QosObservation(0.45, True)), 0.9)
    down = cs.select_threshold(cs.belief_update(b, QosObservation(0.3, False)), 0.9)
    assert up >= base >= down


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 0.99), st.floats(0.5, 0.99))
def test_threshold_non_increasing_in_delta(d1, d2):
    b = cs.warm_start(ThresholdBelief.uniform(n_loc=31, n_scale=8),
                      [QosObservation(r, r < 0.5) for r in np.linspace(0.05, 0.7, 40)])
    lo, hi = sorted((d1, d2))
    r_lo, r_hi = cs.select_threshold(b, lo), cs.select_threshold(b, hi)
    if r_hi is not None:
        assert r_lo is not None and r_lo >= r_hi - 2e-4


@settings(max_examples=60, deadline=None)
@given(st.tuples(*[st.booleans()] * 2), st.floats(0.0, 1.0), st.floats(0.01, 0.49), st.floats(0.01, 0.5))
def test_hysteresis_invariants(unlocked_on, load, lo, gap):
    s = SwitchState(CARRIERS, (True, True) + unlocked_on, lo, lo + gap)
    nxt = cs.hysteresis_step(s, load)
    changed = sum(a != b for a, b in zip(s.active, nxt.active))
    assert changed <= 1
    assert nxt.active[0] and nxt.active[1]
    if lo <= load <= lo + gap:
        assert changed == 0

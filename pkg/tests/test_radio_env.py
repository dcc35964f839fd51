import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenran import radio_env as re_
from greenran.errors import OutOfHorizon, UnknownPreset
from greenran.radio_env import BeamGrid, ChannelScenario, Lobe

from oracles import full_scan_best


def _lobe(peak=-70.0, az=3.0, el=3.0, daz=0.0, deli=0.0, w=1.5, birth=0, death=100):
    return Lobe(peak, az, el, daz, deli, w, w, birth, death)


def _db_sum(*dbm):
    return 10 * math.log10(sum(10 ** (v / 10) for v in dbm))


def test_peak_of_single_lobe_sits_at_its_centre():
    sc = ChannelScenario(BeamGrid(8, 8), (_lobe(),), floor_dbm=-300.0, horizon_slots=10)
    assert re_.rsrp_true(sc, (3, 3), 0) == pytest.approx(-70.0, abs=1e-9)
    assert re_.best_beam_oracle(sc, 0)[0] == (3, 3)


def test_far_from_lobe_approaches_floor():
    sc = ChannelScenario(BeamGrid(64, 1), (_lobe(az=0.0, el=0.0, w=1.0),), horizon_slots=5)
    assert re_.rsrp_true(sc, (63, 0), 0) == pytest.approx(-110.0, abs=1e-6)


def test_two_lobes_sum_in_linear_power():
    lobes = (_lobe(peak=-70.0, az=1.0, el=1.0), _lobe(peak=-76.0, az=5.0, el=4.0))
    sc = ChannelScenario(BeamGrid(8, 8), lobes, horizon_slots=5)
    az, el = 3, 2
    parts = [-110.0]
    for lb in lobes:
        d2 = ((az - lb.center_az0) / lb.width_az) ** 2 + ((el - lb.center_el0) / lb.width_el) ** 2
        parts.append(lb.peak_dbm + 10 * math.log10(math.exp(-0.5 * d2)))
    assert re_.rsrp_true(sc, (az, el), 0) == pytest.approx(_db_sum(*parts), abs=1e-9)


def test_drifting_lobe_moves_the_peak():
    sc = ChannelScenario(BeamGrid(8, 1), (_lobe(az=1.0, el=0.0, daz=0.5),), horizon_slots=20)
    assert re_.best_beam_oracle(sc, 0)[0] == (1, 0)
    assert re_.best_beam_oracle(sc, 6)[0] == (4, 0)


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_oracle_matches_full_scan(seed):
    sc = re_.make_scenario(seed, horizon_slots=60)
    for slot in (0, 17, 59):
        expected = full_scan_best(lambda a, e: re_.rsrp_true(sc, (a, e), slot), 8, 8)
        beam, value = re_.best_beam_oracle(sc, slot)
        assert beam == expected[0]
        assert value == expected[1]


def test_oracle_ties_go_to_smallest_index():
    lobes = (_lobe(az=1.0, el=0.0, w=1.0), _lobe(az=4.0, el=0.0, w=1.0))
    sc = ChannelScenario(BeamGrid(6, 1), lobes, horizon_slots=2)
    assert re_.best_beam_oracle(sc, 0)[0] == (1, 0)


def test_measurement_noise_statistics():
    sc = re_.make_scenario(3, horizon_slots=5)
    rng = np.random.default_rng(123)
    truth = re_.rsrp_true(sc, (2, 5), 1)
    samples = np.array([re_.measure(sc, (2, 5), 1, rng) for _ in range(100_000)])
    resid = samples - truth
    assert abs(resid.mean()) < 0.01
    assert abs(resid.std() - 0.5) < 0.01


def test_zero_noise_measurement_is_exact():
    sc = re_.make_scenario(3, measurement_noise_db=0.0, horizon_slots=5)
    rng = np.random.default_rng(0)
    assert re_.measure(sc, (0, 0), 2, rng) == re_.rsrp_true(sc, (0, 0), 2)


def test_measurement_advances_caller_generator():
    sc = re_.make_scenario(3, horizon_slots=5)
    rng = np.random.default_rng(9)
    a = re_.measure(sc, (1, 1), 0, rng)
    b = re_.measure(sc, (1, 1), 0, rng)
    assert a != b


def test_scenario_is_deterministic_per_seed():
    a, b = re_.make_scenario(21), re_.make_scenario(21)
    assert a.lobes == b.lobes
    assert np.array_equal(a.landscape(250), b.landscape(250))
    ra, rb = re_.measurement_rng(a), re_.measurement_rng(b)
    assert [re_.measure(a, (4, 4), 7, ra) for _ in range(5)] == [re_.measure(b, (4, 4), 7, rb) for _ in range(5)]
    assert re_.make_scenario(22).lobes != a.lobes


@pytest.mark.parametrize("seed", range(5))
def test_some_lobe_is_alive_every_slot(seed):
    sc = re_.make_scenario(seed, mobility="highway")
    for slot in range(sc.horizon_slots):
        assert any(lb.alive(slot) for lb in sc.lobes)


def test_presets_follow_geometry():
    # 90 km/h = 25 m/s tangential at 50 m standoff, 1 degree beams, 20 ms slots
    deg_per_s = math.degrees(25.0 / 50.0)
    assert deg_per_s == pytest.approx(28.65, abs=0.01)
    assert re_.angular_drift(25.0, 50.0) == pytest.approx(deg_per_s * 0.02, rel=1e-12)
    assert re_.angular_drift(25.0, 50.0) == pytest.approx(0.573, abs=1e-3)
    assert round(re_.angular_drift(25.0, 50.0), 1) == re_.mobility_preset("highway")
    assert round(re_.angular_drift(1.0, 100.0), 2) == re_.mobility_preset("pedestrian")
    assert re_.mobility_preset("pedestrian") < re_.mobility_preset("urban") < re_.mobility_preset("highway")


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        re_.make_scenario(0, mobility="bicycle")


def test_out_of_horizon():
    sc = re_.make_scenario(0, horizon_slots=10)
    with pytest.raises(OutOfHorizon):
        re_.rsrp_true(sc, (0, 0), 10)
    with pytest.raises(OutOfHorizon):
        re_.best_beam_oracle(sc, -1)


def test_beam_outside_grid_rejected():
    sc = re_.make_scenario(0, horizon_slots=10)
    with pytest.raises(ValueError):
        re_.rsrp_true(sc, (8, 0), 0)


def test_gap_in_lobe_coverage_rejected():
    with pytest.raises(ValueError):
        ChannelScenario(BeamGrid(4, 4), (_lobe(birth=0, death=5), _lobe(birth=6, death=20)), horizon_slots=20)


def test_linear_order_matches_index():
    g = BeamGrid(3, 4)
    for i, (az, el) in enumerate(g.beams()):
        assert g.index(int(az), int(el)) == i


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 7), st.integers(0, 7), st.integers(0, 49))
def test_removing_a_lobe_never_raises_rsrp(seed, az, el, slot):
    sc = re_.make_scenario(seed, horizon_slots=50)
    live = [lb for lb in sc.lobes if lb.alive(slot)]
    full = re_.rsrp_true(sc, (az, el), slot)
    assert full >= sc.floor_dbm
    if len(live) > 1:
        reduced = ChannelScenario(sc.grid, tuple(lb for lb in sc.lobes if lb is not live[0]),
                                  horizon_slots=slot + 1) if _covers(sc, live[0], slot) else None
        if reduced is not None:
            assert re_.rsrp_true(reduced, (az, el), slot) <= full + 1e-12


def _covers(sc, dropped, slot):
    rest = [lb for lb in sc.lobes if lb is not dropped]
    return all(any(lb.alive(s) for lb in rest) for s in range(slot + 1))

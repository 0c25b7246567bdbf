import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csatml import sim


def test_no_ap_trace_sits_at_noise_floor():
    tr = sim.simulate_trace(sim.ScenarioConfig(0, (), 1.0, sample_rate=192, seed=7))
    assert len(tr) == 192
    assert np.all(tr.values <= -60)


def test_one_ap_range_60s():
    tr = sim.simulate_trace(sim.ScenarioConfig.standard(1, 60.0, seed=1))
    assert -48 <= tr.values.min() and tr.values.max() <= -24


def test_two_ap_range_and_mean_above_one_ap():
    one = sim.simulate_trace(sim.ScenarioConfig.standard(1, 60.0, seed=1))
    two = sim.simulate_trace(sim.ScenarioConfig.standard(2, 60.0, seed=1))
    assert -55 <= two.values.min() and two.values.max() <= -20
    assert two.values.mean() > one.values.mean()


def test_class_means_increase_with_ap_count():
    means = [sim.simulate_trace(sim.ScenarioConfig.standard(n, 300.0, seed=3)).values.mean()
             for n in (0, 1, 2)]
    assert means[0] + 1 <= means[1] and means[1] + 1 <= means[2]


def test_deterministic_in_seed():
    cfg = sim.ScenarioConfig.standard(2, 10.0, seed=42)
    a, b = sim.simulate_trace(cfg), sim.simulate_trace(cfg)
    assert np.array_equal(a.values, b.values)
    c = sim.simulate_trace(sim.ScenarioConfig.standard(2, 10.0, seed=43))
    assert not np.array_equal(a.values, c.values)


@pytest.mark.parametrize("kw", [
    dict(ap_count=1, placements=(sim.Placement(6),), duration=-1),
    dict(ap_count=3, placements=(sim.Placement(6),) * 3, duration=1),
    dict(ap_count=2, placements=(sim.Placement(6),), duration=1),
    dict(ap_count=1, placements=(sim.Placement(6),), duration=1, sample_rate=0),
    dict(ap_count=1, placements=(sim.Placement(6),), duration=1, traffic="Bursty"),
    dict(ap_count=1, placements=(sim.Placement(6),), duration=1, seed=-1),
])
def test_invalid_config_rejected(kw):
    with pytest.raises(ValueError):
        sim.ScenarioConfig(**kw)


def test_bad_placement_rejected():
    with pytest.raises(ValueError, match="sight"):
        sim.Placement(6, "UNDERGROUND")
    with pytest.raises(ValueError):
        sim.Placement(0)


def test_nlos_weaker_than_los():
    assert sim.mean_rx_power_dbm(sim.Placement(6, sim.NLOS)) < sim.mean_rx_power_dbm(
        sim.Placement(6, sim.LOS))
    assert sim.mean_rx_power_dbm(sim.Placement(15)) < sim.mean_rx_power_dbm(sim.Placement(6))


def test_fspl_oracle():
    # free-space loss from the Friis formula, computed independently
    d = 6 * 0.3048
    lam = 299_792_458.0 / 5.825e9
    expected = 23 - (20 * math.log10(4 * math.pi * d / lam) + 1.5)
    assert sim.mean_rx_power_dbm(sim.Placement(6)) == pytest.approx(expected, abs=1e-9)


# -- occupancy chain --------------------------------------------------------------

def test_zero_aps_never_busy():
    params = sim.occupancy_params(0)
    rng = np.random.default_rng(0)
    assert not sim.chain_path(rng.random(10_000), params).any()
    assert sim.stationary_busy_fraction(0) == 0.0


def test_busy_fraction_matches_stationary_value():
    params = sim.occupancy_params(1, beacon_phase_s=0.0)
    params = sim.OccupancyParams(params.p_enter, params.p_leave, beacon_interval_s=None)
    u = np.random.default_rng(5).random(1_000_000)
    # analytic stationary distribution of the two-state chain
    pi_busy = params.p_enter / (params.p_enter + params.p_leave)
    assert abs(sim.chain_path(u, params).mean() - pi_busy) <= 0.02


def test_stationary_busy_fraction_increases():
    fr = [sim.stationary_busy_fraction(n) for n in (0, 1, 2)]
    assert fr[0] < fr[1] < fr[2]


def test_beacon_indices_arithmetic():
    idx = sim.beacon_indices(2000, 192.0)
    k = np.arange(1, len(idx) + 1)
    assert np.array_equal(idx, np.floor(k * 0.1024 * 192).astype(int))
    assert idx[:3].tolist() == [19, 39, 58]


def test_chain_path_matches_stepwise_model():
    params = sim.occupancy_params(2, beacon_phase_s=0.037)
    u = np.random.default_rng(3).random(3000)
    state = sim.OccupancyState(False, 0)
    flags = []
    for ui in u:
        state, flag = sim.occupancy_model(state, float(ui), params)
        flags.append(flag)
    assert np.array_equal(sim.chain_path(u, params), np.array(flags))


def test_beacons_marked_even_when_chain_idle():
    params = sim.OccupancyParams(0.0, 1.0)  # never busy on its own
    out = sim.chain_path(np.zeros(500), params)
    steps = np.flatnonzero(out) + 1
    assert np.array_equal(steps, sim.beacon_indices(501, 192.0))


# -- trace files ---------------------------------------------------------------------

def test_trace_file_round_trip(tmp_path):
    tr = sim.simulate_trace(sim.ScenarioConfig.standard(1, 2.0, seed=9))
    sim.write_trace(tr, tmp_path / "t.csv")
    back = sim.read_trace(tmp_path / "t.csv")
    assert back.label == 1 and back.sample_rate == 192.0 and back.seed == 9
    assert np.array_equal(back.values, sim.quantize(tr).values)


def test_trace_file_errors_name_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# rate=192.0,label=1,seed=0\n-30.0\nabc\n")
    with pytest.raises(ValueError, match=":3:"):
        sim.read_trace(p)
    p.write_text("-30\n")
    with pytest.raises(ValueError, match=":1:"):
        sim.read_trace(p)


@settings(max_examples=25, deadline=None)
@given(ap=st.integers(0, 2), seed=st.integers(0, 2**32), dur=st.floats(0.05, 3.0))
def test_trace_shape_and_bounds(ap, seed, dur):
    cfg = sim.ScenarioConfig.standard(ap, dur, seed=seed)
    tr = sim.simulate_trace(cfg)
    assert len(tr) == cfg.n_samples
    assert np.all(np.isfinite(tr.values))
    assert tr.values.min() >= -100 and tr.values.max() <= 0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aircomp.network import (ChannelRealization, NetworkScenario, PathLoss, draw_realization,
                             effective_interference, pathloss_gain, place_devices, sample_channels,
                             three_cell_scenario, two_cell_scenario)


def test_two_cell_defaults():
    sc = two_cell_scenario()
    assert np.array_equal(sc.ap_positions, [[0, 0], [0, 40]])
    assert sc.cell_radius == 20
    assert sc.pathloss.ref_gain == pytest.approx(1e-6)
    assert sc.pathloss.exponent == 3
    assert sc.noise_power == pytest.approx(1e-15)
    assert sc.num_devices == 40
    assert np.array_equal(np.bincount(sc.cell_of), [20, 20])


def test_three_cell_adds_ap():
    sc = three_cell_scenario(devices_per_cell=4)
    assert sc.num_cells == 3 and sc.num_devices == 12
    assert np.array_equal(sc.ap_positions[2], [20, 40])


@pytest.mark.parametrize("kwargs", [
    dict(devices_per_cell=(0, 2)),
    dict(noise_power=0.0),
    dict(power_budgets=-1.0),
    dict(cell_radius=0.0),
    dict(devices_per_cell=(2,)),
])
def test_scenario_validation(kwargs):
    base = dict(ap_positions=[[0, 0], [0, 40]], devices_per_cell=(2, 2), cell_radius=20.0, power_budgets=1.0,
                noise_power=1e-15)
    base.update(kwargs)
    with pytest.raises(ValueError):
        NetworkScenario(**base)


def test_placement_inside_disk_and_deterministic():
    sc = two_cell_scenario()
    pos = place_devices(sc, seed=3)
    dist = np.linalg.norm(pos - sc.ap_positions[sc.cell_of], axis=1)
    assert np.all(dist <= sc.cell_radius)
    assert np.array_equal(pos, place_devices(sc, seed=3))
    assert not np.array_equal(pos, place_devices(sc, seed=4))


def test_placement_second_moment():
    sc = NetworkScenario([[0, 0]], (100_000,), 20.0, 1.0, 1e-15)
    pos = place_devices(sc, seed=0)
    mean_sq = np.mean(np.sum(pos**2, axis=1))
    assert mean_sq == pytest.approx(20.0**2 / 2, rel=0.01)


def test_pathloss_values():
    assert pathloss_gain(10.0) == pytest.approx(1e-6)
    assert pathloss_gain(20.0, PathLoss(1e-6, 10.0, 3.0)) == pytest.approx(1e-6 / 8)
    d = np.linspace(1, 100, 50)
    assert np.all(np.diff(pathloss_gain(d)) < 0)
    with pytest.raises(ValueError):
        pathloss_gain(0.0)


def test_effective_interference_examples():
    assert effective_interference(1, 1) == pytest.approx(1.0)
    assert effective_interference(1j, 1) == pytest.approx(0.0)
    assert effective_interference(1 + 1j, 3 + 4j) == pytest.approx(1.4)
    with pytest.raises(ValueError):
        effective_interference(1, 0)


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(min_magnitude=1e-6, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_effective_interference_bounded(g, h):
    assert abs(effective_interference(g, h)) <= abs(g) * (1 + 1e-12) + 1e-300


def test_realization_is_bit_reproducible():
    sc = two_cell_scenario()
    a = draw_realization(sc, seed=9, realization=2)
    b = draw_realization(sc, seed=9, realization=2)
    assert a.to_bytes() == b.to_bytes()
    assert a.to_bytes() != draw_realization(sc, seed=9, realization=3).to_bytes()


def test_realization_structure():
    sc = three_cell_scenario()
    real = draw_realization(sc, seed=1)
    rows = np.arange(sc.num_devices)
    assert np.all(real.g[rows, real.cell_of] == 0)
    assert np.all(real.g_eff[rows, real.cell_of] == 0)
    assert np.all(np.abs(real.g_eff) <= np.abs(real.g) * (1 + 1e-12))
    assert np.all(real.h != 0)


def test_fading_statistics():
    sc = NetworkScenario([[0, 0]], (100_000,), 20.0, 1.0, 1e-15, PathLoss(1.0, 1.0, 0.0))
    pos = place_devices(sc, seed=5)
    real = sample_channels(sc, pos, seed=5)
    # with a flat path loss the direct gains are the unit-variance fading draws
    assert np.mean(np.abs(real.h) ** 2) == pytest.approx(1.0, abs=0.01)
    assert 0.49 <= np.var(real.h.real) <= 0.51
    assert 0.49 <= np.var(real.h.imag) <= 0.51


def test_stages_use_independent_streams():
    sc = two_cell_scenario()
    pos = place_devices(sc, seed=2)
    moved = pos + 1.0
    a = sample_channels(sc, pos, seed=2)
    b = sample_channels(sc, moved, seed=2)
    # same fading draws, different path loss: phases agree
    assert np.allclose(np.angle(a.h), np.angle(b.h))


def test_interference_power_and_scaling():
    real = ChannelRealization.from_gains([1.0, 2.0], [[0.0, 0.5], [0.3, 0.0]], [0, 1], 0.1)
    assert real.interference_power([1.0, 4.0], 0) == pytest.approx(4.0 * 0.09)
    assert real.interference_power([1.0, 4.0], 1) == pytest.approx(0.25)
    scaled = real.scaled(10.0)
    assert scaled.noise_power == pytest.approx(10.0)
    assert np.allclose(scaled.h_abs, [10.0, 20.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_placement_stays_in_cells(seed):
    sc = three_cell_scenario(devices_per_cell=5)
    pos = place_devices(sc, seed)
    dist = np.linalg.norm(pos - sc.ap_positions[sc.cell_of], axis=1)
    assert np.all(dist <= sc.cell_radius)

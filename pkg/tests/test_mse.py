import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from aircomp.mse import (MC_BLOCK, Allocation, Normalizer, denoise_factor, empirical_mse, empirical_mse_samples,
                         misalignment_mse, mse_of_cell, mse_tuple, optimal_cell_mse, optimal_denoise)
from aircomp.network import ChannelRealization

from conftest import random_small_realization, unit_realization


def test_mse_examples():
    real = ChannelRealization.from_gains([1.0], [[0.0]], [0], 0.5)
    assert mse_of_cell(real, Allocation([1.0], [1.0]), 0) == pytest.approx(0.5)
    two = ChannelRealization.from_gains([1.0, 1.0], np.zeros((2, 1)), [0, 0], 1.0)
    assert mse_of_cell(two, Allocation([0.0, 0.0], [1.0]), 0) == pytest.approx(3.0)
    # one interferer delivering unit power to AP 0
    cross = ChannelRealization.from_gains([1.0, 1.0], [[0.0, 0.0], [1.0, 0.0]], [0, 1], 1.0)
    assert mse_of_cell(cross, Allocation([1.0, 1.0], [4.0, 1.0]), 0) == pytest.approx(0.75)


def test_nonpositive_eta_rejected():
    real = unit_realization()
    with pytest.raises(ValueError):
        mse_of_cell(real, Allocation([1.0], [0.0]), 0)
    with pytest.raises(ValueError):
        Allocation([1.0], [-1.0]).check([1.0])


def test_allocation_budget_check():
    Allocation([0.5, 1.0], [1.0]).check([1.0, 1.0])
    with pytest.raises(ValueError):
        Allocation([1.5], [1.0]).check([1.0])


def test_optimal_denoise_examples():
    assert optimal_denoise(unit_realization(), [1.0], 0) == pytest.approx(4.0)
    two = ChannelRealization.from_gains([1.0, 1.0], np.zeros((2, 1)), [0, 0], 0.0)
    assert optimal_denoise(two, [1.0, 1.0], 0) == pytest.approx(1.0)
    assert mse_of_cell(two, Allocation([1.0, 1.0], [1.0]), 0) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        optimal_denoise(unit_realization(), [0.0], 0)


def test_optimal_denoise_beats_perturbations(rng):
    for _ in range(100):
        h = rng.uniform(0.1, 3, 4)
        p = rng.uniform(0, 2, 4)
        interference, noise = rng.uniform(0, 1), rng.uniform(0.01, 1)
        eta = denoise_factor(h, p, interference, noise)
        best = misalignment_mse(h, p, eta, interference, noise)
        for u in (1e-3, 1e-1, 1.0):
            for sign in (-1, 1):
                other = eta * (1 + sign * u)
                if other > 0:
                    assert best <= misalignment_mse(h, p, other, interference, noise) + 1e-14


def test_optimal_denoise_matches_numeric_minimum(rng):
    h = rng.uniform(0.1, 3, 5)
    p = rng.uniform(0, 2, 5)
    eta = denoise_factor(h, p, 0.3, 0.2)
    res = minimize_scalar(lambda t: misalignment_mse(h, p, math.exp(t), 0.3, 0.2), bracket=(-3, 3), tol=1e-12)
    assert eta == pytest.approx(math.exp(res.x), rel=1e-5)


def test_closed_form_at_optimal_eta(rng):
    h = rng.uniform(0.1, 3, 6)
    p = rng.uniform(0, 2, 6)
    eta = denoise_factor(h, p, 0.4, 0.1)
    value = optimal_cell_mse(h, p, 0.4, 0.1)
    assert value == pytest.approx(misalignment_mse(h, p, eta, 0.4, 0.1), rel=1e-12)
    assert 0 <= value <= len(h)
    assert optimal_cell_mse(h, np.zeros(6), 0.4, 0.1) == len(h)


def test_mse_tuple_single_device_closed_form():
    real = ChannelRealization.from_gains([1.5, 0.7], [[0.0, 0.4], [0.6, 0.0]], [0, 1], 0.2)
    powers = np.array([1.0, 2.0])
    mse = mse_tuple(real, powers)
    for ell in range(2):
        i = real.interference_power(powers, ell)
        signal = powers[ell] * real.h_abs[ell] ** 2
        assert mse[ell] == pytest.approx((0.2 + i) / (signal + 0.2 + i))


def test_mse_tuple_decoupled_and_monotone(rng):
    real = random_small_realization(rng, (2, 2))
    decoupled = ChannelRealization.from_gains(real.h_abs, np.zeros_like(real.g_eff), real.cell_of, real.noise_power)
    p = np.array([1.0, 0.5, 0.2, 0.9])
    base = mse_tuple(decoupled, p)
    other = p.copy()
    other[2:] = [1.0, 0.1]
    assert mse_tuple(decoupled, other)[0] == pytest.approx(base[0])
    louder = p.copy()
    louder[2] *= 2
    assert mse_tuple(real, louder)[0] >= mse_tuple(real, p)[0]


def test_normalizer_round_trip():
    norm = Normalizer(mean=3.0, std=2.0)
    x = np.array([1.0, 3.0, 7.5])
    assert np.allclose(norm(x), [-1.0, 0.0, 2.25])
    assert np.allclose(norm.inverse(norm(x)), x)


def test_empirical_noiseless_aligned_is_zero():
    real = ChannelRealization.from_gains([1.0, 2.0], np.zeros((2, 1)), [0, 0], 0.0)
    alloc = Allocation([1.0, 0.25], [1.0])
    assert empirical_mse(real, alloc, 0, 1000, seed=1) == 0.0


def test_empirical_scale_invariance():
    real = ChannelRealization.from_gains([1.0, 2.0], np.zeros((2, 1)), [0, 0], 0.0)
    a = empirical_mse(real, Allocation([0.3, 0.4], [0.5]), 0, 5000, seed=4)
    b = empirical_mse(real, Allocation([0.6, 0.8], [1.0]), 0, 5000, seed=4)
    assert a == pytest.approx(b, rel=1e-12)


def test_empirical_blocks_do_not_depend_on_total():
    real = unit_realization(2, cross=0.5)
    alloc = Allocation([1.0, 1.0], [4.0, 4.0])
    long = empirical_mse_samples(real, alloc, 0, 2 * MC_BLOCK, seed=8)
    short = empirical_mse_samples(real, alloc, 0, MC_BLOCK, seed=8)
    assert np.array_equal(long[:MC_BLOCK], short)


def test_empirical_matches_analytic(rng):
    real = random_small_realization(rng, (2, 3))
    alloc = Allocation(rng.uniform(0.1, 1.0, 5), [1.3, 0.8])
    samples = empirical_mse_samples(real, alloc, 1, 100_000, seed=2)
    stderr = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - mse_of_cell(real, alloc, 1)) <= 3 * stderr


def test_empirical_requires_trials():
    with pytest.raises(ValueError):
        empirical_mse(unit_realization(), Allocation([1.0], [1.0]), 0, 0, seed=0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 5.0), min_size=1, max_size=5), st.floats(0.0, 3.0), st.floats(1e-3, 2.0))
def test_optimal_mse_bounded(h, interference, noise):
    h = np.array(h)
    p = np.linspace(0.1, 1.0, len(h))
    value = optimal_cell_mse(h, p, interference, noise)
    assert -1e-12 <= value <= len(h)

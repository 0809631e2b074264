import numpy as np
import pytest

from aircomp.feasibility import SocData, build_instance, solve_phase1
from aircomp.network import draw_realization, two_cell_scenario

from conftest import random_small_realization, unit_realization


def _single(psi):
    real = unit_realization()
    inst = build_instance(real, [1.0], 1.0 - psi, [1.0])
    return inst


@pytest.mark.parametrize("method", ["clarabel", "slsqp"])
def test_single_device_threshold(method):
    ok = solve_phase1(_single(0.4), method=method)
    assert ok.feasible and ok.status == "Feasible"
    assert ok.q == pytest.approx([1.0], abs=1e-6)
    bad = solve_phase1(_single(0.6), method=method)
    assert not bad.feasible and bad.q is None and bad.residual > 0


def test_zero_targets_feasible_at_zero():
    real = unit_realization(2, cross=0.3)
    inst = build_instance(real, [0.5, 0.5], 2.0, [1.0, 1.0])
    assert np.all(inst.psi == 0)
    verdict = solve_phase1(inst)
    assert verdict.feasible and np.all(verdict.q == 0)


def test_build_instance_targets_and_range():
    real = unit_realization(2)
    inst = build_instance(real, [0.5, 0.5], 0.0, [1.0, 1.0])
    assert np.allclose(inst.psi, [1.0, 1.0])
    with pytest.raises(ValueError):
        build_instance(real, [0.5, 0.5], 2.5, [1.0, 1.0])
    with pytest.raises(ValueError):
        build_instance(real, [0.5, 0.5], -0.1, [1.0, 1.0])


def test_sigma_norm_identity(rng):
    real = random_small_realization(rng, (2, 3))
    budgets = rng.uniform(0.5, 2.0, 5)
    data = SocData.from_realization(real, budgets)
    assert np.allclose(data.sigma_norms(np.zeros(5)), np.sqrt(real.noise_power))
    q = rng.uniform(0, 1, 5) * np.sqrt(budgets)
    x = q / data.q_max
    for ell in range(2):
        own = real.cell_of == ell
        direct = (np.sum(q[own] ** 2 * real.h_abs[own] ** 2) + np.sum(q[~own] ** 2 * real.g_eff[~own, ell] ** 2)
                  + real.noise_power)
        assert data.sigma_norms(x)[ell] ** 2 == pytest.approx(direct, rel=1e-12)


def test_witness_soundness_and_monotonicity():
    sc = two_cell_scenario(6)
    real = draw_realization(sc, seed=4)
    data = SocData.from_realization(real, sc.power_budgets)
    beta = np.array([0.4, 0.6])
    verdicts = [solve_phase1(build_instance(real, beta, eps, sc.power_budgets, data))
                for eps in np.linspace(0.5, 10.0, 12)]
    seen_feasible = False
    for v in verdicts:
        seen_feasible |= v.feasible
        if seen_feasible:
            assert v.feasible
        if v.feasible:
            inst = build_instance(real, beta, 1.0, sc.power_budgets, data)
            assert np.all(v.q >= 0) and np.all(v.q <= np.sqrt(sc.power_budgets) * (1 + 1e-12))
    assert seen_feasible and not verdicts[0].feasible


def test_restarts_agree():
    sc = two_cell_scenario(5)
    real = draw_realization(sc, seed=1)
    inst = build_instance(real, [0.5, 0.5], 3.2, sc.power_budgets)
    tol = 1e-6
    reference = solve_phase1(inst, tol=tol).residual
    rng = np.random.default_rng(0)
    for _ in range(5):
        other = solve_phase1(inst, tol=tol, method="slsqp", x0=rng.random(10)).residual
        assert abs(other - reference) <= 10 * tol


def test_unknown_method():
    with pytest.raises(ValueError):
        solve_phase1(_single(0.4), method="newton")

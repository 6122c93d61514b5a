"""Half-disk solver: oracle gate, refinement orders, maximum principle,
energy conservation.

The two separable families are exact solutions; reproducing them certifies
the sign and scaling of the Robin terms (the oracle gate).
"""

import numpy as np
import pytest

from relfrac import halfdisk as hd
from relfrac.angular import solve_sector
from relfrac.params import Params, PotentialSpec
from relfrac.specfun import bessel_I


def power_oracle_two_point():
    """Exact power solution for two-point a, m=0, h=0."""
    params = Params(N=1, s=0.25, m=0.0, potential=PotentialSpec.two_point(0.1, 0.1))
    pair = solve_sector(params, 0, count=1, grid_n=2048)[0]

    def oracle(rho, alpha):
        return np.asarray(rho, dtype=float) ** pair.gamma * pair.profile_at(alpha)

    return params, pair, oracle


def bessel_oracle_closed_form(s=0.25, m=1.0, d=1):
    """Exact modified-Bessel solution with closed-form angular part
    (zero potential, degree-d mode)."""
    params = Params(N=1, s=s, m=m, potential=PotentialSpec.zero())
    mu = d * (d + 1 - 2 * s)
    nu = np.sqrt(((1 - 2 * s) / 2) ** 2 + mu)
    if d == 1:
        def gfn(a):
            return np.sin(np.asarray(a, dtype=float))
    else:
        def gfn(a):
            return np.ones_like(np.asarray(a, dtype=float))

    def oracle(rho, alpha):
        rho = np.asarray(rho, dtype=float)
        return rho ** (-(1 - 2 * s) / 2) * bessel_I(nu, m * rho) * gfn(alpha)

    return params, oracle


def test_oracle_gate_power_two_point():
    params, pair, oracle = power_oracle_two_point()
    grid = hd.PolarGrid.build(params.s, params.m, 1.0, 1e-3, 256, 256)
    sol = hd.solve(params, 1.0, lambda a: oracle(1.0, a), grid,
                   inner=lambda a: oracle(1e-3, a), core_pair=pair)
    exact = oracle(grid.rho_nodes[:, None], grid.alpha_centers[None, :])
    err = np.max(np.abs(sol.values - exact)) / np.max(np.abs(exact))
    assert err <= 5e-3, err   # 0.5% gate
    assert sol.residual_norm <= 1e-10


def test_oracle_gate_bessel():
    params, oracle = bessel_oracle_closed_form()
    grid = hd.PolarGrid.build(params.s, params.m, 1.0, 1e-3, 256, 256)
    sol = hd.solve(params, 1.0, lambda a: oracle(1.0, a), grid,
                   inner=lambda a: oracle(1e-3, a))
    exact = oracle(grid.rho_nodes[:, None], grid.alpha_centers[None, :])
    err = np.max(np.abs(sol.values - exact)) / np.max(np.abs(exact))
    assert err <= 1e-2, err   # 1% gate


def test_refine_study_orders():
    # rho_min chosen so the coarsest grid keeps the geometric ratio <= 1.1
    params, oracle = bessel_oracle_closed_form()
    rep = hd.refine_study(params, 1.0, 3e-3, oracle, sizes=(72, 144, 288))
    assert all(o >= 1.5 for o in rep["orders"]), rep
    params0 = Params(N=1, s=0.25, m=0.0, potential=PotentialSpec.zero())

    def power_oracle(rho, alpha):
        return np.asarray(rho, dtype=float) * np.sin(np.asarray(alpha, dtype=float))

    rep = hd.refine_study(params0, 1.0, 3e-3, power_oracle, sizes=(72, 144, 288))
    assert all(o >= 1.5 for o in rep["orders"]), rep


def test_refine_study_cauchy_mode():
    params = Params(N=1, s=0.25, m=0.5, potential=PotentialSpec.zero())
    rep = hd.refine_study(params, 1.0, 3e-3, None, sizes=(72, 144, 288))
    gaps = rep["cauchy_gaps"]
    assert gaps[1] < gaps[0]


def test_h_perturbation_linear_response():
    """Small power-law h shifts the solution by O(c_h)."""
    base = Params(N=1, s=0.25, m=0.0, potential=PotentialSpec.two_point(0.1, 0.1))
    pair = solve_sector(base, 0, count=1, grid_n=1024)[0]

    def arc(alpha):
        return pair.profile_at(alpha)

    diffs = []
    chs = (0.05, 0.1, 0.2)
    grid0 = hd.PolarGrid.build(base.s, base.m, 1.0, 1e-3, 128, 128)
    ref = hd.solve(base, 1.0, arc, grid0, inner="bootstrap", core_pair=pair)
    for ch in chs:
        pot = PotentialSpec.two_point(0.1, 0.1).with_power_h(ch, 0.5)
        prm = Params(N=1, s=0.25, m=0.0, potential=pot)
        grid = hd.PolarGrid.build(prm.s, prm.m, 1.0, 1e-3, 128, 128)
        sol = hd.solve(prm, 1.0, arc, grid, inner="bootstrap", core_pair=pair)
        diffs.append(np.max(np.abs(sol.values - ref.values)))
    slope = np.polyfit(np.log(chs), np.log(diffs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.2), (diffs, slope)


def test_discrete_maximum_principle():
    # a <= 0, h <= 0, nonnegative boundary data -> nonnegative solution
    pot = PotentialSpec.two_point(-0.3, -0.1).with_power_h(-0.2, 0.5)
    params = Params(N=1, s=0.25, m=0.5, potential=pot)
    grid = hd.PolarGrid.build(params.s, params.m, 1.0, 1e-3, 96, 96)
    sol = hd.solve(params, 1.0, lambda a: 1.0 + 0.5 * np.sin(a), grid,
                   inner="zero_flux", mu1_check=False)
    assert sol.values.min() >= -1e-10


def test_energy_identity():
    params, oracle = bessel_oracle_closed_form()
    grid = hd.PolarGrid.build(params.s, params.m, 1.0, 1e-3, 96, 96)
    sol = hd.solve(params, 1.0, lambda a: oracle(1.0, a), grid,
                   inner=lambda a: oracle(1e-3, a))
    assert hd.energy_identity_gap(params, sol) <= 1e-8


def test_bootstrap_core_matches_oracle_amplitude():
    params, pair, oracle = power_oracle_two_point()
    grid = hd.PolarGrid.build(params.s, params.m, 1.0, 1e-3, 128, 128)
    sol = hd.solve(params, 1.0, lambda a: oracle(1.0, a), grid,
                   inner="bootstrap", core_pair=pair)
    # the oracle is c = 1 times rho^gamma psi
    assert sol.core_amplitude == pytest.approx(1.0, abs=5e-3)
    exact = oracle(grid.rho_nodes[:, None], grid.alpha_centers[None, :])
    err = np.max(np.abs(sol.values - exact)) / np.max(np.abs(exact))
    assert err <= 1e-2


def test_inadmissible_potential_rejected():
    pot = PotentialSpec.two_point(3.0, 3.0)
    params = Params(N=1, s=0.25, m=0.0, potential=pot)
    grid = hd.PolarGrid.build(params.s, params.m, 1.0, 1e-3, 80, 80)
    with pytest.raises(ValueError):
        hd.solve(params, 1.0, lambda a: np.ones_like(a), grid, inner="zero_flux")


def test_grid_validation():
    with pytest.raises(ValueError):
        hd.PolarGrid.build(0.25, 0.0, 1.0, 1e-3, 32, 64)   # ratio > 1.1
    with pytest.raises(ValueError):
        hd.PolarGrid.build(0.25, 0.0, 1.0, 2.0, 64, 64)    # rho_min >= R


def test_core_integrability_guard():
    # admissible pairs always satisfy 2 gamma - 2s + chi > -1 (since
    # 2 gamma > -(N-2s)); the guard still protects against out-of-range
    # inputs, exercised here with a synthetic pair
    import dataclasses

    pot = PotentialSpec.two_point(0.1, 0.1).with_power_h(0.1, 0.05)
    params = Params(N=1, s=0.25, m=0.0, potential=pot)
    pair = solve_sector(params, 0, count=1, grid_n=256)[0]
    assert 2 * pair.gamma - 2 * params.s + 0.05 > -1.0
    fake = dataclasses.replace(pair, gamma=-0.6)
    grid = hd.PolarGrid.build(params.s, params.m, 1.0, 1e-3, 80, 80)
    with pytest.raises(ValueError):
        hd.solve(params, 1.0, lambda a: np.ones_like(a), grid,
                 inner="bootstrap", core_pair=fake)

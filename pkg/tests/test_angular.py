"""Half-sphere eigenproblem: polynomial oracles, sharp constants, Hardy best
constant, variational properties.

Oracle: homogeneous polynomial solutions of the weighted Laplace equation
with zero weighted flux give the exact zero-potential eigenvalues
(l+2j)(l+2j+N-2s); the sharp-constant root must land on the closed-form
Hardy constant.
"""

import math

import numpy as np
import pytest

from relfrac import specfun as sf
from relfrac.angular import (
    hardy_constant,
    mu1,
    quadrature_grid,
    rayleigh_quotient,
    sharp_constant_root,
    solve_sector,
    write_eigentable,
)
from relfrac.params import Params, PotentialSpec


def P(N, s, m=0.0, pot=None):
    return Params(N=N, s=s, m=m, potential=pot or PotentialSpec.zero())


def test_zero_potential_ground_state_is_constant():
    val, pair = mu1(P(2, 0.5), grid_n=256)
    assert abs(val) <= 1e-10
    spread = np.ptp(pair.profile) / np.max(np.abs(pair.profile))
    assert spread <= 1e-6


@pytest.mark.parametrize("N,s", [(2, 0.5), (3, 0.75)])
def test_polynomial_oracle_low_sectors(N, s):
    # sector-lowest mu = l(l+N-2s): degree-l harmonic polynomial in x only
    for l in (1, 2):
        pair = solve_sector(P(N, s), l, count=1, grid_n=512)[0]
        exact = l * (l + N - 2 * s)
        assert pair.mu == pytest.approx(exact, rel=2e-6), (N, s, l)


def test_second_eigenvalue_in_sector():
    # degree l+2 polynomial solutions give (l+2)(l+2+N-2s)
    N, s, l = 2, 0.25, 1
    pairs = solve_sector(P(N, s), l, count=2, grid_n=512)
    assert pairs[1].mu == pytest.approx((l + 2) * (l + 2 + N - 2 * s), rel=2e-5)


def test_n1_spectrum_and_closed_profiles():
    # N=1 eigenvalues d(d+1-2s); profiles of degrees 0..3 are closed-form
    N, s = 1, 0.25
    pairs = solve_sector(P(N, s), 0, count=4, grid_n=1024)
    for d, pair in enumerate(pairs):
        assert pair.mu == pytest.approx(d * (d + 1 - 2 * s), rel=1e-6, abs=1e-8)
        assert pair.profile_fn is not None
        # discrete eigenvector matches the closed form after sign alignment
        exact = pair.profile_fn(pair.alpha_nodes)
        sign = 1.0 if np.dot(exact, pair.profile) >= 0 else -1.0
        err = np.max(np.abs(sign * exact - pair.profile)) / np.max(np.abs(exact))
        assert err <= 5e-4, d


def test_sigma_consistency_and_orthonormality():
    p = P(2, 0.75)
    pairs = solve_sector(p, 1, count=3, grid_n=256)
    from relfrac.angular import _m_inner, quadrature_grid as qg

    grid = None
    for pair in pairs:
        # sigma+ (sigma+ + N - 2s) = mu
        assert pair.sigma_plus * (pair.sigma_plus + p.N - 2 * p.s) == pytest.approx(
            pair.mu, abs=1e-10 * max(1, abs(pair.mu)))
        assert pair.norm_certificate == pytest.approx(1.0, abs=1e-8)
    grid = qg(p, 512, l=1)  # profiles live on the fine (2 x grid_n) nodes
    gram = np.array([[_m_inner(grid, a.profile, b.profile) for a in pairs] for b in pairs])
    assert np.max(np.abs(gram - np.eye(3))) <= 1e-8


def test_eigenvalues_ordered_and_k_indexing():
    pairs = solve_sector(P(3, 0.5), 0, count=4, grid_n=256)
    mus = [p.mu for p in pairs]
    assert mus == sorted(mus)
    assert [p.k for p in pairs] == [1, 2, 3, 4]


def test_mu1_decreases_with_a0():
    # Rayleigh quotient loses the boundary term when a0 grows
    vals = []
    for a0 in (0.0, 0.1, 0.2):
        v, _ = mu1(P(2, 0.5, pot=PotentialSpec.constant(a0)), grid_n=256)
        vals.append(v)
    assert vals[1] < vals[0]
    assert vals[2] < vals[1]


def test_mu1_continuity_in_a0():
    # adjacent differences of one sign and shrinking with the step
    base = P(2, 0.5)
    import dataclasses

    a_grid = np.linspace(0.0, 0.4, 9)
    vals = [mu1(dataclasses.replace(base, potential=PotentialSpec.constant(a)), grid_n=128)[0]
            for a in a_grid]
    diffs = np.diff(vals)
    assert np.all(diffs < 0)
    # crude continuity bound: |mu1(a+d)-mu1(a)| <= K d with finite fitted K
    K = np.max(np.abs(diffs)) / (a_grid[1] - a_grid[0])
    assert np.isfinite(K) and K < 50


def test_mu1_at_sharp_amplitude_hits_threshold():
    # a0 = Lambda_{3,1/2} = 2/pi gives mu1 = -((N-2s)/2)^2 = -1
    lam = 2 / math.pi
    val, _ = mu1(P(3, 0.5, pot=PotentialSpec.constant(lam)), grid_n=1024)
    assert val == pytest.approx(-1.0, rel=5e-3)


def test_rayleigh_quotient_consistency():
    p = P(2, 0.5)
    # psi = const, a = 0 -> 0 (up to assembly roundoff)
    grid = quadrature_grid(p, 256)
    ones = np.ones_like(grid.nodes)
    assert abs(rayleigh_quotient(p, ones, grid_n=256)) <= 1e-10
    # psi = eigenfunction -> the discrete eigenvalue of its own grid to 1e-8
    pair = solve_sector(p, 0, count=2, grid_n=256)[1]
    q = rayleigh_quotient(p, pair.profile, grid_n=512)
    mu_fine = solve_sector(p, 0, count=2, grid_n=256, extrapolate=False)[1].mu
    assert q == pytest.approx(mu_fine, rel=1e-8)


def test_rayleigh_quotient_second_order_in_perturbation():
    p = P(2, 0.5)
    grid = quadrature_grid(p, 256)
    g = np.sin(grid.nodes) ** 2
    vals = []
    for eps in (1e-1, 1e-2, 1e-3):
        q = rayleigh_quotient(p, 1.0 + eps * g, grid_n=256)
        vals.append(q)
    # fitted slope of log q vs log eps close to 2
    slope = np.polyfit(np.log([1e-1, 1e-2, 1e-3]), np.log(vals), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)


def test_rayleigh_quotient_zero_denominator():
    p = P(2, 0.5)
    grid = quadrature_grid(p, 128)
    with pytest.raises(ValueError):
        rayleigh_quotient(p, np.zeros_like(grid.nodes), grid_n=128)


def test_sharp_constant_root_matches_formula():
    # N=3, s=0.5 -> 2/pi
    root = sharp_constant_root(P(3, 0.5), bracket=(0.05, 2.0), grid_n=512)
    assert root == pytest.approx(2 / math.pi, rel=5e-3)


def test_sharp_constant_root_no_sign_change():
    with pytest.raises(ValueError):
        sharp_constant_root(P(2, 0.5), bracket=(-1.0, -0.5), grid_n=128)


def test_inadmissible_pairs_flagged_not_hidden():
    # beyond the sharp amplitude mu1 < -((N-2s)/2)^2: pair flagged
    p = P(3, 0.5, pot=PotentialSpec.constant(5.0))
    pair = solve_sector(p, 0, count=1, grid_n=256)[0]
    assert pair.mu < -1.0
    assert not pair.admissible
    assert math.isnan(pair.gamma)


def test_hardy_constant_zero_potential_is_one():
    assert hardy_constant(P(2, 0.5), grid_n=256) == pytest.approx(1.0, abs=1e-12)


def test_hardy_constant_tends_to_zero_at_sharp_amplitude():
    lam = 2 / math.pi
    c = hardy_constant(P(3, 0.5, pot=PotentialSpec.constant(0.999 * lam)), grid_n=1024)
    assert 0.0 <= c <= 2e-2


def test_hardy_constant_continuity():
    base = 0.3
    c0 = hardy_constant(P(3, 0.5, pot=PotentialSpec.constant(base)), grid_n=256)
    for delta in (1e-2, 1e-3):
        c1 = hardy_constant(P(3, 0.5, pot=PotentialSpec.constant(base + delta)), grid_n=256)
        assert abs(c1 - c0) <= 5.0 * delta


def test_hardy_constant_inadmissible_raises():
    with pytest.raises(ValueError):
        hardy_constant(P(3, 0.5, pot=PotentialSpec.constant(5.0)), grid_n=256)


def test_two_point_potential_n1():
    p = P(1, 0.25, pot=PotentialSpec.two_point(0.1, 0.1))
    val, pair = mu1(p, grid_n=512)
    # admissible: above -((1-0.5)/2)^2 = -0.0625
    assert -0.0625 < val < 0.0
    assert pair.admissible
    # asymmetric data -> asymmetric profile
    p2 = P(1, 0.25, pot=PotentialSpec.two_point(0.0, 0.2))
    _, pair2 = mu1(p2, grid_n=512)
    assert pair2.boundary_plus > abs(pair2.boundary_minus)


def test_two_point_rejected_for_higher_dim():
    with pytest.raises(ValueError):
        Params(N=2, s=0.5, potential=PotentialSpec.two_point(0.1, 0.1))


def test_grid_too_coarse_error():
    with pytest.raises(ValueError):
        solve_sector(P(2, 0.5), 0, count=40, grid_n=64)
    with pytest.raises(ValueError):
        solve_sector(P(2, 0.5), 0, count=1, grid_n=16)


def test_eigentable_csv(tmp_path):
    pairs = solve_sector(P(2, 0.5), 1, count=2, grid_n=128)
    path = tmp_path / "eigentable.csv"
    write_eigentable(path, pairs)
    rows = path.read_text().strip().splitlines()
    assert rows[0].split(",") == ["k", "l", "mu", "sigma_plus", "sigma_minus",
                                  "nu", "grid_n", "extrapolated"]
    assert len(rows) == 3
    assert rows[1].split(",")[1] == "1"

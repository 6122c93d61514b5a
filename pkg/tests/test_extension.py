"""Extension module: symbol vs kernel backends, Bessel kernel normalization,
per-mode trace limits, Dirichlet-form identity, Hardy margins.

The Fourier symbol is the reference backend; the kernel quadrature and the
finite-height flux extrapolation must reproduce it within stated
 tolerances.
"""

import math

import numpy as np
import pytest

from relfrac import extension as ext
from relfrac import specfun as sf


def gauss_field(L=40.0, n=512, sigma=1.0, half_shift=False):
    return ext.SpectralField.from_function(
        lambda x: np.exp(-x ** 2 / (2 * sigma ** 2)), L, n, half_shift=half_shift)


def mode_field(k=3, L=40.0, n=512):
    xi = 2 * np.pi * k / L
    return ext.SpectralField.from_function(lambda x: np.cos(xi * x), L, n), xi


def test_field_sync_invariants():
    u = gauss_field()
    assert u.hermitian_defect() <= 1e-12
    assert u.parseval_gap() <= 1e-10
    um, _ = mode_field()
    assert um.hermitian_defect() <= 1e-12


def test_apply_symbol_single_mode():
    u, xi = mode_field(k=3)
    out = ext.apply_symbol(u, 0.5, 1.0)
    expected = (xi ** 2 + 1.0) ** 0.5 * u.values
    assert np.max(np.abs(out.values - expected)) <= 1e-12 * np.max(np.abs(expected))


def test_apply_symbol_constant_zero_mode():
    u = ext.SpectralField(np.ones(64), 10.0)
    out = ext.apply_symbol(u, 0.5, 2.0)
    assert np.allclose(out.values, 2.0, rtol=1e-13)


def test_symbol_energy_parseval_two_ways():
    rng = np.random.default_rng(7)
    vals = rng.standard_normal(128)
    u = ext.SpectralField(vals, 10.0)
    e1 = ext.symbol_energy(u, 0.5, 1.0)
    # second way: energy of the half-power applied field
    v = ext.apply_symbol(u, 0.25, 1.0)
    e2 = v.l2_norm_sq()
    assert e1 == pytest.approx(e2, rel=1e-10)


def test_apply_kernel_pv_constant():
    u = ext.SpectralField(np.full(256, 1.7), 40.0)
    out = ext.apply_kernel_pv(u, 0.5, 1.0)
    assert np.allclose(out.values, 1.0 * 1.7, rtol=1e-12)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_backend_equivalence(s, m):
    u, _ = mode_field(k=3, n=1024)
    ref = ext.apply_symbol(u, s, m)
    got = ext.apply_kernel_pv(u, s, m)
    rel = np.max(np.abs(got.values - ref.values)) / np.max(np.abs(ref.values))
    assert rel <= 1e-3, (s, m, rel)


def test_kernel_part_parity():
    # kernel is even, so the integral part maps odd fields to odd fields
    L, n = 40.0, 512
    u = ext.SpectralField.from_function(lambda x: x * np.exp(-x ** 2 / 2), L, n)
    out = ext.apply_kernel_pv(u, 0.25, 1.0)
    kern_part = out.values - 1.0 ** 0.5 * u.values
    asym = kern_part + kern_part[::-1][np.arange(n) - 1]  # x -> -x on this grid
    # x_j = -L/2 + j h: reflection index of j is n - j (mod n)
    refl = np.roll(kern_part[::-1], 1)
    assert np.max(np.abs(kern_part + refl)) <= 1e-10 * np.max(np.abs(kern_part))


def test_pv_cutoff_validation():
    u, _ = mode_field()
    with pytest.raises(ValueError):
        ext.apply_kernel_pv(u, 0.5, 1.0, cutoff=u.spacing * 20)
    with pytest.raises(ValueError):
        ext.apply_kernel_pv(u, 0.5, 1.0, cutoff=-1.0)


@pytest.mark.parametrize("N,s,m,t", [
    (1, 0.25, 0.5, 0.1), (1, 0.5, 1.0, 0.5), (2, 0.75, 0.5, 1.0), (2, 0.5, 1.0, 0.1),
])
def test_kernel_normalization_identity(N, s, m, t):
    # int P_m(t, x) dx = theta(m t)
    mass = ext.kernel_mass_quadrature(N, s, m, t, ext.kernel_normalization(N, s))
    assert mass == pytest.approx(sf.theta_profile(s, m * t), rel=1e-6)


def test_kernel_normalization_matches_poisson_limit():
    # m -> 0: P_m approaches the fractional Poisson kernel
    # p t^{2s} (t^2+x^2)^{-(1+2s)/2},  p = Gamma((1+2s)/2)/(sqrt(pi) Gamma(s))
    s = 0.25
    p = sf.gamma((1 + 2 * s) / 2) / (math.sqrt(math.pi) * sf.gamma(s))

    class Prm:
        N, s_, m = 1, s, 1e-3

    prm = ext.OperatorParams(1, s, 1e-3)
    xs = np.linspace(-5, 5, 41)
    sample = ext.kernel_eval(prm, 1.0, xs)
    poisson = p * 1.0 / (1.0 + xs ** 2) ** ((1 + 2 * s) / 2)
    assert np.max(np.abs(sample.values - poisson) / poisson) <= 1e-2


def test_kernel_symmetry_and_positivity():
    prm = ext.OperatorParams(1, 0.4, 1.0)
    xs = np.linspace(-6, 6, 25)
    sample = ext.kernel_eval(prm, 0.7, xs)
    assert np.all(sample.values > 0)
    assert np.allclose(sample.values, sample.values[::-1], rtol=0, atol=0)
    with pytest.raises(ValueError):
        ext.kernel_eval(prm, -0.1, xs)


def test_conjugate_kernel():
    xs = np.linspace(-4, 4, 17)
    # self-conjugate at s = 1/2
    prm = ext.OperatorParams(1, 0.5, 1.0)
    a = ext.kernel_eval(prm, 0.5, xs)
    b = ext.conjugate_kernel_eval(prm, 0.5, xs)
    assert np.allclose(a.values, b.values, rtol=1e-12)
    # normalization analog: int conj-kernel = theta_{1-s}(m t)
    s = 0.3
    prm = ext.OperatorParams(1, s, 1.0)
    nu = (1 + 2 * (1 - s)) / 2

    from scipy.integrate import quad

    def radial(r):
        z = math.hypot(0.5, r)
        return z ** (-nu) * sf.bessel_K(nu, z)

    raw = 2 * quad(radial, 0, 60, limit=300)[0]
    mass = ext.kernel_normalization(1, 1 - s) * 0.5 ** (2 * (1 - s)) * raw
    assert mass == pytest.approx(sf.theta_profile(1 - s, 0.5), rel=1e-6)
    assert np.all(ext.conjugate_kernel_eval(prm, 0.5, xs).values > 0)


def test_extend_single_mode_profile():
    u, xi = mode_field(k=2)
    q = math.hypot(xi, 1.0)
    levels = ext.extend(u, 0.5, 1.0, [0.0, 0.3, 1.0])
    assert np.max(np.abs(levels[0].values - u.values)) <= 1e-12
    for t, w in zip([0.3, 1.0], levels[1:]):
        expected = sf.theta_profile(0.5, q * t) * u.values
        assert np.max(np.abs(w.values - expected)) <= 1e-12


def test_extend_constant_gives_theta():
    u = ext.SpectralField(np.ones(64), 10.0)
    w = ext.extend(u, 0.3, 1.0, [0.7])[0]
    assert np.allclose(w.values, sf.theta_profile(0.3, 0.7), rtol=1e-12)


def test_extend_agrees_with_kernel_convolution():
    # two independent routes to the same extension slice
    L, n, s, m, t = 40.0, 512, 0.5, 1.0, 0.5
    u = gauss_field(L, n)
    w = ext.extend(u, s, m, [t])[0]
    prm = ext.OperatorParams(1, s, m)
    offs = (np.arange(n) - n // 2) * u.spacing
    kern = ext.kernel_eval(prm, t, offs).values
    # w_i = sum_j u_j kern_{i-j+n/2} = full-convolution index i + n/2
    conv = np.convolve(u.values, kern)[n // 2: n // 2 + n] * u.spacing
    assert np.max(np.abs(conv - w.values)) <= 1e-4 * np.max(np.abs(w.values))


def test_neumann_trace_modal_formula():
    u, xi = mode_field(k=2)
    out = ext.neumann_trace(u, 0.5, 1.0)
    expected = (xi ** 2 + 1.0) ** 0.5 * u.values   # kappa_{1/2} = 1
    assert np.max(np.abs(out.values - expected)) <= 1e-12 * np.max(np.abs(expected))
    const = ext.SpectralField(np.ones(32), 5.0)
    out = ext.neumann_trace(const, 0.3, 2.0)
    assert np.allclose(out.values, sf.kappa_constant(0.3) * 2.0 ** 0.6, rtol=1e-12)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_trace_extrapolation_per_mode(s):
    u = gauss_field(n=256)
    worst, rows = ext.trace_extrapolation_report(u, s, 1.0)
    assert worst <= 1e-6, (s, worst)


def test_dirichlet_form_identity_zero():
    u = ext.SpectralField(np.zeros(128), 40.0)
    lhs, rhs, gap = ext.dirichlet_form_identity(u, 0.5, 1.0)
    assert lhs == 0 and rhs == 0 and gap == 0


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_dirichlet_form_identity_gaussian(s):
    u = gauss_field(n=512)
    lhs, rhs, gap = ext.dirichlet_form_identity(u, s, 1.0)
    assert gap <= 1e-3, (s, lhs, rhs)


def test_dirichlet_form_scaling():
    u = gauss_field(n=256)
    l1, r1, _ = ext.dirichlet_form_identity(u, 0.5, 1.0)
    u3 = ext.SpectralField(3.0 * u.values, u.box_length)
    l2, r2, _ = ext.dirichlet_form_identity(u3, 0.5, 1.0)
    assert l2 == pytest.approx(9 * l1, rel=1e-12)
    assert r2 == pytest.approx(9 * r1, rel=1e-12)


def test_dirichlet_form_rejects_nondecaying():
    u, _ = mode_field()
    with pytest.raises(ValueError):
        ext.dirichlet_form_identity(u, 0.5, 1.0)


def test_pointwise_kernel_limit_constant():
    prm = ext.OperatorParams(1, 0.5, 1.0)
    rep = ext.pointwise_kernel_limit(lambda x: 1.0, prm, [0.3, 0.1, 0.03],
                                     x_probe=np.array([0.0]))
    # for u = 1 the error is exactly 1 - theta(m t)
    for t, e in zip(rep["t"], rep["sup_error"]):
        assert e == pytest.approx(1.0 - sf.theta_profile(0.5, t), rel=1e-6)
    assert rep["decreasing"]


def test_pointwise_kernel_limit_gaussian():
    prm = ext.OperatorParams(1, 0.5, 1.0)
    rep = ext.pointwise_kernel_limit(lambda x: math.exp(-x * x / 2), prm,
                                     [1e-1, 1e-2, 1e-3], x_probe=np.linspace(-2, 2, 9))
    assert rep["decreasing"]
    assert rep["sup_error"][-1] <= 1e-2


def test_pointwise_kernel_limit_kink():
    prm = ext.OperatorParams(1, 0.4, 1.0)
    rep = ext.pointwise_kernel_limit(lambda x: math.exp(-abs(x)), prm,
                                     [1e-1, 1e-2, 1e-3], x_probe=np.linspace(-1, 1, 9))
    assert rep["decreasing"]


def test_hardy_margin_random_mixtures():
    rng = np.random.default_rng(2024)
    L, n, N, s = 60.0, 512, 1, 0.25
    for _ in range(20):
        k = rng.integers(1, 4)
        cs = rng.uniform(-4, 4, size=k)
        sig = rng.uniform(0.5, 2.0, size=k)
        amp = rng.uniform(-1, 1, size=k) + 0.2

        def f(x):
            return sum(a * np.exp(-(x - c) ** 2 / (2 * s2 ** 2))
                       for a, c, s2 in zip(amp, cs, sig))

        u = ext.SpectralField.from_function(f, L, n, half_shift=True)
        margin, energy, pot = ext.hardy_margin(u, N, s)
        assert margin > 0, (margin, energy, pot)


def test_hardy_near_optimizer_ratio():
    s = 0.25
    lam = sf.hardy_sharp_constant(1, s)
    ratios = [ext.hardy_near_optimizer_ratio(s, e) for e in (0.02, 0.01, 0.005)]
    # approaches the sharp constant from above as eps decreases
    assert ratios[0] > ratios[1] > ratios[2] > lam
    assert (ratios[2] - lam) / lam < 0.05


def test_csv_dumps(tmp_path):
    u = gauss_field(n=64)
    ext.write_field_csv(tmp_path / "f.csv", u)
    lines = (tmp_path / "f.csv").read_text().strip().splitlines()
    assert lines[0] == "x,value" and len(lines) == 65
    prm = ext.OperatorParams(1, 0.4, 1.0)
    sample = ext.kernel_eval(prm, 0.5, np.linspace(-2, 2, 9))
    ext.write_kernel_csv(tmp_path / "k.csv", sample)
    assert (tmp_path / "k.csv").read_text().splitlines()[0] == "t,x,P"

"""Weighted eigenvalue problem on the upper half-sphere.

The eigenproblem for -div(theta_1^{1-2s} grad psi) = mu theta_1^{1-2s} psi
on S^N_+ with the weighted boundary flux kappa_s a psi separates over
spherical-harmonic sectors.  In the colatitude alpha measured from the pole
(theta_1 = cos alpha) each sector l solves

    -(sin^{N-1}a cos^{1-2s}a g')' + l(l+N-2) sin^{N-3}a cos^{1-2s}a g
        = mu sin^{N-1}a cos^{1-2s}a g     on (0, pi/2),
    lim_{a->pi/2} cos^{1-2s}a g'(a) = kappa_s a0 g(pi/2).

For N = 1 the domain is the full half-circle (-pi/2, pi/2), there is no
sector index, and the two endpoints carry independent Robin data
(the flux sign flips at the left endpoint).

Discretization: P1 finite elements on a uniform alpha grid.  Elements
touching the weight degeneracy at alpha = +-pi/2 are integrated with
Gauss-Jacobi rules matching the local power cos^{1-2s}; everything else
uses Gauss-Legendre.  With exact integration the scheme is variational, so
computed eigenvalues are real, upper bounds, and converge at second order
even for s > 1/2 (verified in the refinement tests).  Eigenvalues come from
bisection on Sturm counts of the tridiagonal pencil; eigenvectors from
inverse iteration.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import roots_jacobi

from .params import Params, PotentialSpec
from .specfun import kappa_constant

try:  # pragma: no cover - exercised only when numba is present
    import numba

    @numba.njit(cache=True)
    def _sturm_counts_jit(Kd, Ke, Md, Me, shifts):
        out = np.zeros(shifts.shape[0], dtype=np.int64)
        n = Kd.shape[0]
        for j in range(shifts.shape[0]):
            sig = shifts[j]
            d = Kd[0] - sig * Md[0]
            cnt = 1 if d < 0 else 0
            for i in range(1, n):
                e = Ke[i - 1] - sig * Me[i - 1]
                dd = Kd[i] - sig * Md[i]
                if d == 0.0:
                    d = 1e-300
                d = dd - e * e / d
                if d < 0:
                    cnt += 1
            out[j] = cnt
        return out

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
_JACOBI_CACHE = {}


def _jacobi_rule(s):
    if s not in _JACOBI_CACHE:
        _JACOBI_CACHE[s] = roots_jacobi(12, 0.0, 1.0 - 2.0 * s)
    return _JACOBI_CACHE[s]


def _domain(N):
    return (-np.pi / 2, np.pi / 2) if N == 1 else (0.0, np.pi / 2)


@dataclasses.dataclass
class SectorGrid:
    """Uniform P1 grid for one sector, with assembled tridiagonal pencil."""

    N: int
    s: float
    l: int
    n: int
    nodes: np.ndarray
    Kd: np.ndarray       # stiffness diagonal (includes l-term and Robin)
    Ke: np.ndarray       # stiffness off-diagonal
    Md: np.ndarray
    Me: np.ndarray
    node0_dropped: bool  # N=2, l>0: essential condition g(0)=0


def assemble_sector(N, s, l, a_minus, a_plus, n):
    """Build the (K, M) tridiagonal pencil of one sector."""
    lo, hi = _domain(N)
    nodes = np.linspace(lo, hi, n + 1)
    h = nodes[1] - nodes[0]
    nn = n + 1
    Kd = np.zeros(nn)
    Ke = np.zeros(nn - 1)
    Md = np.zeros(nn)
    Me = np.zeros(nn - 1)

    def accumulate(i0, i1, aa, wq):
        """Add one element's contributions; aa/wq shaped (nelem, nq)."""
        lefts = nodes[i0:i1]
        pl = (lefts[:, None] + h - aa) / h
        pr = (aa - lefts[:, None]) / h
        kcell = wq.sum(axis=1) / h ** 2
        np.add.at(Kd, np.arange(i0, i1), kcell)
        np.add.at(Kd, np.arange(i0 + 1, i1 + 1), kcell)
        np.add.at(Ke, np.arange(i0, i1), -kcell)
        np.add.at(Md, np.arange(i0, i1), (wq * pl * pl).sum(axis=1))
        np.add.at(Md, np.arange(i0 + 1, i1 + 1), (wq * pr * pr).sum(axis=1))
        np.add.at(Me, np.arange(i0, i1), (wq * pl * pr).sum(axis=1))
        if l > 0:
            tq = wq * l * (l + N - 2) / np.sin(aa) ** 2
            np.add.at(Kd, np.arange(i0, i1), (tq * pl * pl).sum(axis=1))
            np.add.at(Kd, np.arange(i0 + 1, i1 + 1), (tq * pr * pr).sum(axis=1))
            np.add.at(Ke, np.arange(i0, i1), (tq * pl * pr).sum(axis=1))

    def full_weight(aa):
        return np.abs(np.sin(aa)) ** (N - 1) * np.abs(np.cos(aa)) ** (1.0 - 2.0 * s)

    # interior elements: plain Gauss-Legendre
    first_special = (N == 1)
    ia = 1 if first_special else 0
    ib = n - 1
    if ib > ia:
        lefts = nodes[ia:ib]
        aa = lefts[:, None] + (_GL_X[None, :] + 1.0) * h / 2.0
        wq = _GL_W[None, :] * h / 2.0 * full_weight(aa)
        accumulate(ia, ib, aa, wq)

    # end elements: Gauss-Jacobi against the local power of cos^{1-2s}
    xj, wj = _jacobi_rule(s)
    beta = h * (1.0 + xj) / 2.0
    jac_w = wj * (h / 2.0) ** (2.0 - 2.0 * s)

    aa = (hi - beta)[None, :]
    smooth = np.abs(np.sin(aa)) ** (N - 1) * (np.abs(np.cos(aa)) / beta) ** (1.0 - 2.0 * s)
    accumulate(n - 1, n, aa, jac_w[None, :] * smooth)
    if first_special:
        aa = (lo + beta)[None, :]
        smooth = (np.abs(np.cos(aa)) / beta) ** (1.0 - 2.0 * s)
        accumulate(0, 1, aa, jac_w[None, :] * smooth)

    ks = kappa_constant(s)
    Kd[-1] -= ks * a_plus
    if N == 1:
        Kd[0] -= ks * a_minus

    dropped = False
    if N == 2 and l > 0:
        # the centrifugal weight sin^{-1} is not integrable against hats
        # supported at alpha=0; true eigenfunctions vanish there
        Kd, Ke, Md, Me = Kd[1:], Ke[1:], Md[1:], Me[1:]
        nodes = nodes[1:]
        dropped = True
    return SectorGrid(N=N, s=s, l=l, n=n, nodes=nodes, Kd=Kd, Ke=Ke, Md=Md, Me=Me,
                      node0_dropped=dropped)


def _sturm_counts_py(Kd, Ke, Md, Me, shifts):
    shifts = np.asarray(shifts, dtype=float)
    d = Kd[0] - shifts * Md[0]
    count = (d < 0).astype(np.int64)
    for i in range(1, len(Kd)):
        e = Ke[i - 1] - shifts * Me[i - 1]
        d = (Kd[i] - shifts * Md[i]) - e * e / np.where(np.abs(d) < 1e-300, 1e-300, d)
        count += d < 0
    return count


def _sturm_counts(grid, shifts):
    shifts = np.ascontiguousarray(shifts, dtype=float)
    if _HAVE_NUMBA:
        return _sturm_counts_jit(grid.Kd, grid.Ke, grid.Md, grid.Me, shifts)
    return _sturm_counts_py(grid.Kd, grid.Ke, grid.Md, grid.Me, shifts)


def lowest_eigenvalues(grid, count):
    """`count` smallest pencil eigenvalues by bisection on Sturm counts."""
    if count >= len(grid.Kd) // 4:
        raise ValueError(f"grid too coarse to resolve {count} eigenvalues")
    lob, hib = -1.0, 1.0
    while _sturm_counts(grid, np.array([lob]))[0] > 0:
        lob *= 4.0
        if lob < -1e12:
            raise RuntimeError("failed to bracket spectrum from below")
    while _sturm_counts(grid, np.array([hib]))[0] < count:
        hib *= 4.0
    a = np.full(count, lob)
    b = np.full(count, hib)
    want = np.arange(1, count + 1)
    for _ in range(120):
        mid = 0.5 * (a + b)
        c = _sturm_counts(grid, mid)
        hi_side = c >= want
        b = np.where(hi_side, mid, b)
        a = np.where(hi_side, a, mid)
        if np.all(b - a <= 1e-14 * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (a + b)


def eigenvector(grid, mu):
    """Inverse iteration on (K - shift M) with M-normalization."""
    n = len(grid.Kd)
    shift = mu + 1e-9 * max(1.0, abs(mu))
    ab = np.zeros((3, n))
    ab[0, 1:] = grid.Ke - shift * grid.Me
    ab[1, :] = grid.Kd - shift * grid.Md
    ab[2, :-1] = grid.Ke - shift * grid.Me
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    for _ in range(4):
        v = solve_banded((1, 1), ab, v)
        v /= np.linalg.norm(v)
    mnorm = math.sqrt(_m_inner(grid, v, v))
    v /= mnorm
    # deterministic sign: positive trace at alpha = pi/2, falling back to the
    # largest-magnitude node when the mode vanishes there
    anchor = v[-1] if abs(v[-1]) > 1e-6 * np.max(np.abs(v)) else v[np.argmax(np.abs(v))]
    if anchor < 0:
        v = -v
    return v


def _m_inner(grid, u, v):
    core = np.sum(grid.Md * u * v) + np.sum(grid.Me * (u[:-1] * v[1:] + u[1:] * v[:-1]))
    return core


def _k_inner(grid, u, v):
    return np.sum(grid.Kd * u * v) + np.sum(grid.Ke * (u[:-1] * v[1:] + u[1:] * v[:-1]))


@dataclasses.dataclass
class AngularEigenpair:
    """One eigenpair of the half-sphere problem with derived exponents.

    profile holds g on `alpha_nodes`, normalized so the weighted square
    integral over the half-sphere is one.  For N >= 2 the full eigenfunction
    is g(alpha) times an L^2-normalized degree-l spherical harmonic.
    profile_fn is a closed form when one exists (zero potential,
    lowest-in-sector), used by oracle tests.
    """

    sector_l: int
    k: int
    mu: float
    sigma_plus: float
    sigma_minus: float
    gamma: float
    bessel_nu: float
    alpha_nodes: np.ndarray
    profile: np.ndarray
    norm_certificate: float
    admissible: bool
    grid_n: int
    extrapolated: bool
    params: Params
    profile_fn: object = None

    @property
    def boundary_plus(self):
        """g at alpha = +pi/2 (trace on the x > 0 ray for N = 1)."""
        return float(self.profile[-1])

    @property
    def boundary_minus(self):
        return float(self.profile[0]) if self.params.N == 1 else float("nan")

    def profile_at(self, alpha):
        """Interpolated profile (closed form when available)."""
        if self.profile_fn is not None:
            return self.profile_fn(np.asarray(alpha, dtype=float))
        return np.interp(np.asarray(alpha, dtype=float), self.alpha_nodes, self.profile)


def _derived_exponents(params, mu):
    half = params.half_exponent
    disc = half ** 2 + mu
    if disc >= 0:
        nu = math.sqrt(disc)
        return -half + nu, -half - nu, nu, True
    return math.nan, math.nan, math.nan, False


def _closed_form_profile(params, l, j, norm_grid):
    """Closed-form eigenprofiles of the zero-potential problem, normalized on
    `norm_grid`: restrictions of the homogeneous polynomial solutions of the
    weighted Laplace equation with zero weighted flux.

    N >= 2: lowest of sector l is sin^l (polynomial |x|^l Y_l).
    N = 1: degrees d = 0..3 on the half-circle (w = 1, x, x^2 - t^2/(2-2s),
    x^3 - 3 x t^2 / (2-2s)).
    """
    am, ap = params.potential.boundary_values()
    if am != 0.0 or ap != 0.0:
        return None
    cc = 1.0 / (2.0 - 2.0 * params.s)
    if params.N >= 2:
        if j != 0:
            return None
        base = (lambda a: np.sin(a) ** l) if l > 0 else (lambda a: np.ones_like(a))
    else:
        forms = {
            0: lambda a: np.ones_like(a),
            1: lambda a: np.sin(a),
            2: lambda a: np.sin(a) ** 2 - cc * np.cos(a) ** 2,
            3: lambda a: np.sin(a) ** 3 - 3.0 * cc * np.sin(a) * np.cos(a) ** 2,
        }
        if j not in forms:
            return None
        base = forms[j]
    c = math.sqrt(_weighted_profile_norm_sq(params, l, base))

    def fn(alpha, _base=base, _c=c):
        return _base(np.asarray(alpha, dtype=float)) / _c

    return fn


def _weighted_profile_norm_sq(params, l, base):
    """int base^2 sin^{N-1}|cos|^{1-2s} dalpha by adaptive quadrature (the
    closed-form profiles must be normalized beyond FEM-interpolant accuracy)."""
    from scipy.integrate import quad

    N, s = params.N, params.s
    lo, hi = _domain(N)

    def f(a):
        return (float(base(np.array([a]))[0]) ** 2
                * abs(math.sin(a)) ** (N - 1) * abs(math.cos(a)) ** (1 - 2 * s))

    v1, _ = quad(f, lo, 0.5 * (lo + hi), limit=200)
    v2, _ = quad(f, 0.5 * (lo + hi), hi, limit=200)
    return v1 + v2


def solve_sector(params: Params, l: int, count: int = 3, grid_n: int = 2048,
                 extrapolate: bool = True):
    """`count` lowest eigenpairs of sector l (N >= 2) or of the full
    half-circle problem (N = 1, pass l = 0).

    Eigenvalues are Richardson-extrapolated from (grid_n, 2 grid_n) assuming
    second order; profiles are taken from the fine grid.  Inadmissible pairs
    (mu <= -((N-2s)/2)^2) are returned flagged, not suppressed.
    """
    if grid_n < 64:
        raise ValueError("grid_n >= 64 required")
    pot = params.potential
    if params.N >= 2 and pot.a_kind == "two_point":
        raise ValueError("two_point potential is N = 1 only")
    if params.N == 1 and l != 0:
        raise ValueError("N = 1 has no sector decomposition; use l = 0")
    am, ap = pot.boundary_values()

    coarse = assemble_sector(params.N, params.s, l, am, ap, grid_n)
    mus_c = lowest_eigenvalues(coarse, count)
    fine = assemble_sector(params.N, params.s, l, am, ap, 2 * grid_n)
    mus_f = lowest_eigenvalues(fine, count)
    mus = (4.0 * mus_f - mus_c) / 3.0 if extrapolate else mus_f

    pairs = []
    for j in range(count):
        closed = _closed_form_profile(params, l, j, fine)
        vec = eigenvector(fine, mus_f[j])
        sp, sm, nu, ok = _derived_exponents(params, float(mus[j]))
        pairs.append(AngularEigenpair(
            sector_l=l,
            k=j + 1,
            mu=float(mus[j]),
            sigma_plus=sp,
            sigma_minus=sm,
            gamma=sp,
            bessel_nu=nu,
            alpha_nodes=fine.nodes.copy(),
            profile=vec,
            norm_certificate=float(_m_inner(fine, vec, vec)),
            admissible=ok,
            grid_n=grid_n,
            extrapolated=extrapolate,
            params=params,
            profile_fn=closed,
        ))
    return pairs


def mu1(params: Params, grid_n: int = 2048, sector_scan: int = 5):
    """Lowest eigenvalue over all sectors with its eigenpair.

    For constant a the minimum is expected in the radial sector l=0; this is
    checked against sectors l <= sector_scan-1 rather than assumed.
    """
    if params.N == 1:
        pair = solve_sector(params, 0, count=1, grid_n=grid_n)[0]
        best = pair
    else:
        best = None
        for l in range(sector_scan):
            pair = solve_sector(params, l, count=1, grid_n=grid_n)[0]
            if best is None or pair.mu < best.mu:
                best = pair
        if best.sector_l != 0:
            raise RuntimeError(
                f"sector minimum attained at l={best.sector_l}, not l=0; "
                "constant-a assumption violated")
    g = best.profile
    scale = np.max(np.abs(g))
    signs = np.sign(g[np.abs(g) > 1e-10 * scale])
    if signs.size and (np.any(signs > 0) and np.any(signs < 0)):
        raise RuntimeError("first eigenfunction changes sign; solver failure")
    return best.mu, best


def quadrature_grid(params: Params, grid_n: int = 2048, l: int = 0):
    """The alpha nodes trial functions should be sampled on."""
    am, ap = params.potential.boundary_values()
    return assemble_sector(params.N, params.s, l, am, ap, grid_n)


def rayleigh_quotient(params: Params, psi_samples, grid_n: int = 2048, l: int = 0):
    """Q(psi,psi) / ||psi||^2 for a trial profile sampled on the grid nodes
    of `quadrature_grid(params, grid_n, l)`."""
    grid = quadrature_grid(params, grid_n, l)
    v = np.asarray(psi_samples, dtype=float)
    if v.shape != grid.nodes.shape:
        raise ValueError(f"expected {grid.nodes.shape[0]} samples, got {v.shape[0]}")
    denom = _m_inner(grid, v, v)
    if denom <= 0 or not np.isfinite(denom):
        raise ValueError("trial function has zero (or invalid) weighted norm")
    return _k_inner(grid, v, v) / denom


def sharp_constant_root(params_template: Params, bracket, tol: float = 1e-6,
                        grid_n: int = 1024):
    """Bisection root of f(a0) = mu1(a0) + ((N-2s)/2)^2 over constant
    potentials a = a0 (both endpoints for N = 1).

    The root is the threshold amplitude where the Hardy quadratic form loses
    positivity; it reproduces the closed-form sharp constant.
    """
    half_sq = params_template.half_exponent ** 2

    def f(a0):
        pot = (PotentialSpec.two_point(a0, a0) if params_template.N == 1
               else PotentialSpec.constant(a0))
        p = dataclasses.replace(params_template, potential=pot)
        pair = solve_sector(p, 0, count=1, grid_n=grid_n)[0]
        return pair.mu + half_sq

    a_lo, a_hi = bracket
    f_lo, f_hi = f(a_lo), f(a_hi)
    if f_lo * f_hi > 0:
        raise ValueError(f"no sign change on bracket: f({a_lo})={f_lo}, f({a_hi})={f_hi}")
    for _ in range(200):
        mid = 0.5 * (a_lo + a_hi)
        fm = f(mid)
        if abs(fm) <= tol or (a_hi - a_lo) < 1e-13 * max(1.0, abs(mid)):
            return mid
        if f_lo * fm <= 0:
            a_hi, f_hi = mid, fm
        else:
            a_lo, f_lo = mid, fm
    raise RuntimeError("bisection failed to reach tolerance")


def hardy_constant(params: Params, grid_n: int = 2048, sector_scan: int = 5):
    """Best constant in the potential-vs-energy comparison:

        C = 1 - max_psi  kappa_s int a psi(0,.)^2
                        / (int w |grad psi|^2 + ((N-2s)/2)^2 int w psi^2)

    computed sector by sector; the maximizer is a boundary (Steklov-type)
    mode, so only solved linear systems are needed.  Raises for
    inadmissible a.
    """
    m1, _ = mu1(params, grid_n=min(grid_n, 1024))
    if m1 <= params.admissibility_threshold:
        raise ValueError(
            f"inadmissible potential: mu1={m1} <= {params.admissibility_threshold}")
    ks = kappa_constant(params.s)
    am, ap = params.potential.boundary_values()
    shift = params.half_exponent ** 2
    best = 0.0
    sectors = [0] if params.N == 1 else range(sector_scan)
    for l in sectors:
        grid = assemble_sector(params.N, params.s, l, 0.0, 0.0, grid_n)
        n = len(grid.Kd)
        ab = np.zeros((3, n))
        ab[0, 1:] = grid.Ke + shift * grid.Me
        ab[1, :] = grid.Kd + shift * grid.Md
        ab[2, :-1] = grid.Ke + shift * grid.Me
        if params.N == 1:
            E = np.zeros((n, 2))
            E[0, 0] = 1.0
            E[-1, 1] = 1.0
            W = E.T @ solve_banded((1, 1), ab, E)
            D = ks * np.diag([am, ap])
            lam = np.linalg.eigvals(D @ W)
            best = max(best, float(np.max(lam.real)))
        else:
            e = np.zeros(n)
            e[-1] = 1.0
            w = solve_banded((1, 1), ab, e)[-1]
            best = max(best, ks * ap * w)
    return 1.0 - min(best, 1.0) if best > 0 else 1.0


def write_eigentable(path, pairs):
    """CSV export: one row per eigenpair."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "l", "mu", "sigma_plus", "sigma_minus", "nu",
                         "grid_n", "extrapolated"])
        for p in pairs:
            writer.writerow([p.k, p.sector_l, f"{p.mu:.17g}", f"{p.sigma_plus:.17g}",
                             f"{p.sigma_minus:.17g}", f"{p.bessel_nu:.17g}",
                             p.grid_n, p.extrapolated])

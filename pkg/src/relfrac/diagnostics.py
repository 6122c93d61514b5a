"""Frequency-function diagnostics on exact and computed solutions.

Two solution representations feed the same diagnostics:

* SeparableSolution: closed-form products phi(rho) psi(alpha), where psi is
  a half-sphere eigenprofile and phi is a power (massless) or a scaled
  modified Bessel function I_nu (massive).  These are exact solutions of the
  extended problem and serve as the universal oracle; every quantity below
  reduces to one-dimensional radial quadratures (closed forms in the power
  case).

* GridSolution from the half-disk solver (N = 1).  Quadratures run over the
  grid; the excised core rho < rho_min is continued analytically by the
  fitted leading mode c rho^gamma psi, which carries a non-negligible share
  of the energy integrals when gamma < 0.

Computed objects: the boundary mass H(r), the scaled energy D(r), the
frequency quotient N(r) = D/H with its derivative decomposition nu1 + nu2,
two Pohozaev-type integral identities used as solver-independent residuals,
blow-up rescalings against the homogeneous profile, the vanishing order
gamma extracted from log H, and the expansion coefficients of the solution
over the angular eigenbasis.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_jacobi

from .angular import AngularEigenpair
from .halfdisk import GridSolution
from .params import Params
from .specfun import bessel_I, gamma as gamma_fn, kappa_constant

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_ANGULAR_RULES = {}


def angular_rule(s, N=1, n_nodes=256):
    """Quadrature rule for int f(alpha) sin^{N-1}|cos|^{1-2s} dalpha on the
    half-circle (N = 1) or quarter-circle (N >= 2): graded composite
    Gauss-Legendre with Gauss-Jacobi panels at the weight degeneracy.
    Returned weights include the measure."""
    key = (round(s, 12), N, n_nodes)
    if key in _ANGULAR_RULES:
        return _ANGULAR_RULES[key]
    lo, hi = (-np.pi / 2, np.pi / 2) if N == 1 else (0.0, np.pi / 2)
    n_panels = max(8, n_nodes // 8)
    frac = np.concatenate([np.geomspace(1e-3, 0.5, n_panels // 2),
                           1.0 - np.geomspace(0.5, 1e-3, n_panels // 2)[::-1][1:]])
    edges = np.concatenate([[lo], lo + (hi - lo) * np.unique(frac), [hi]])
    xj, wj = roots_jacobi(8, 0.0, 1.0 - 2.0 * s)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        h = b - a
        touch_hi = np.isclose(b, hi)
        touch_lo = np.isclose(a, lo) and N == 1
        if touch_hi or touch_lo:
            beta = h * (1 + xj) / 2
            aa = (hi - beta) if touch_hi else (lo + beta)
            smooth = np.abs(np.sin(aa)) ** (N - 1) * (np.abs(np.cos(aa)) / beta) ** (1 - 2 * s)
            ww = wj * (h / 2) ** (2 - 2 * s) * smooth
        else:
            aa = 0.5 * (a + b) + 0.5 * h * _GL_X
            ww = _GL_W * h / 2 * np.abs(np.sin(aa)) ** (N - 1) * np.abs(np.cos(aa)) ** (1 - 2 * s)
        nodes.append(aa)
        weights.append(ww)
    rule = (np.concatenate(nodes), np.concatenate(weights))
    _ANGULAR_RULES[key] = rule
    return rule


# ---------------------------------------------------------------------------
# separable solutions
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class SeparableSolution:
    """Exact product solution phi(rho) psi(theta) of the extended problem.

    radial_kind "power": phi = amplitude rho^{sigma+} (exact for m=0, h=0).
    radial_kind "modified_bessel": phi = amplitude rho^{-(N-2s)/2} I_nu(m rho)
    (exact for m > 0, h = 0); near zero phi ~ amplitude (m/2)^nu/Gamma(nu+1)
    rho^{gamma}.
    """

    eigenpair: AngularEigenpair
    radial_kind: str
    amplitude: float = 1.0
    m: float = 0.0

    def __post_init__(self):
        if self.radial_kind not in ("power", "modified_bessel"):
            raise ValueError(f"unknown radial_kind {self.radial_kind!r}")
        if self.radial_kind == "modified_bessel" and self.m <= 0:
            raise ValueError("modified_bessel radial factor requires m > 0")
        if not self.eigenpair.admissible:
            raise ValueError("eigenpair is inadmissible (mu below threshold)")

    @property
    def params(self) -> Params:
        return self.eigenpair.params

    @property
    def gamma(self):
        return self.eigenpair.gamma

    @property
    def _beta(self):
        p = self.params
        return (p.N - 2.0 * p.s) / 2.0

    def phi(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.radial_kind == "power":
            return self.amplitude * rho ** self.gamma
        return self.amplitude * rho ** (-self._beta) * bessel_I(
            self.eigenpair.bessel_nu, self.m * rho)

    def phi_prime(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.radial_kind == "power":
            return self.amplitude * self.gamma * rho ** (self.gamma - 1.0)
        nu, m, b = self.eigenpair.bessel_nu, self.m, self._beta
        iv = bessel_I(nu, m * rho)
        ivp = (nu / (m * rho)) * iv + bessel_I(nu + 1.0, m * rho)
        return self.amplitude * rho ** (-b) * (m * ivp - b * iv / rho)

    def phi_second(self, rho):
        """Second radial derivative through the I recurrences (independent
        of the defining ODE)."""
        rho = np.asarray(rho, dtype=float)
        if self.radial_kind == "power":
            g = self.gamma
            return self.amplitude * g * (g - 1.0) * rho ** (g - 2.0)
        nu, m, b = self.eigenpair.bessel_nu, self.m, self._beta
        z = m * rho
        iv = bessel_I(nu, z)
        iv1 = bessel_I(nu + 1.0, z)
        iv2 = bessel_I(nu + 2.0, z)
        ivp = (nu / z) * iv + iv1
        ivpp = (nu * (nu - 1.0) / z ** 2) * iv + ((2 * nu + 1.0) / z) * iv1 + iv2
        return self.amplitude * rho ** (-b) * (
            m * m * ivpp - 2.0 * b * m * ivp / rho + b * (b + 1.0) * iv / rho ** 2)

    def leading_coefficient(self):
        """lim rho^{-gamma} phi(rho)."""
        if self.radial_kind == "power":
            return self.amplitude
        nu = self.eigenpair.bessel_nu
        return self.amplitude * (self.m / 2.0) ** nu / gamma_fn(nu + 1.0)

    def angular_constants(self):
        """(kappa_s, Sa, Sb, Gang): boundary sums a psi^2 and psi^2 over the
        equator, and the weighted angular gradient energy mu + kappa_s Sa."""
        p = self.params
        pair = self.eigenpair
        ks = kappa_constant(p.s)
        am, ap = p.potential.boundary_values()
        if p.N == 1:
            psi_p, psi_m = pair.boundary_plus, pair.boundary_minus
            Sa = ap * psi_p ** 2 + am * psi_m ** 2
            Sb = psi_p ** 2 + psi_m ** 2
        else:
            Sa = ap * pair.boundary_plus ** 2
            Sb = pair.boundary_plus ** 2
        return ks, Sa, Sb, pair.mu + ks * Sa

    def radial_ode_residual(self, rho):
        """phi'' + (N+1-2s)/rho phi' - mu phi/rho^2 - m^2 phi, relative."""
        p = self.params
        rho = np.asarray(rho, dtype=float)
        res = (self.phi_second(rho) + (p.N + 1.0 - 2.0 * p.s) / rho * self.phi_prime(rho)
               - self.eigenpair.mu / rho ** 2 * self.phi(rho)
               - self.m ** 2 * self.phi(rho))
        scale = (np.abs(self.phi_second(rho)) + np.abs(self.phi(rho)) / rho ** 2
                 * max(1.0, abs(self.eigenpair.mu)) + np.abs(self.phi(rho)))
        return res / scale


def make_separable(eigenpair: AngularEigenpair, radial_kind, amplitude=1.0, m=None,
                   certify=True):
    """Build an exact separable solution, certifying the radial ODE residual
    at random sample radii (and, when the eigenpair carries a closed-form
    profile, nothing else is needed: the angular factor is exact)."""
    if m is None:
        m = eigenpair.params.m
    sol = SeparableSolution(eigenpair=eigenpair, radial_kind=radial_kind,
                            amplitude=amplitude, m=m)
    if certify:
        rng = np.random.default_rng(42)
        rho = rng.uniform(0.05, 2.0, size=100)
        resid = np.max(np.abs(sol.radial_ode_residual(rho)))
        if resid > 1e-8:
            raise RuntimeError(f"radial ODE residual {resid:.2e} exceeds 1e-8")
    return sol


# ---------------------------------------------------------------------------
# cumulative integral engines
# ---------------------------------------------------------------------------

class _SeparableIntegrals:
    """Cumulative radial integrals of a separable solution up to radius r:

    vol_grad = int_B t^{1-2s} |grad w|^2      vol_mass = int_B t^{1-2s} w^2
    hardy    = int_B t^{1-2s} w^2/|z|^2       bdry_a   = int_{B'} a|x|^{-2s} w^2
    bdry_h   = int_{B'} h w^2

    In the power case everything is closed form.
    """

    def __init__(self, sol: SeparableSolution):
        self.sol = sol
        p = sol.params
        self.N, self.s = p.N, p.s
        self.chi = p.potential.chi if p.potential.h_kind == "power" else None
        self.c_h = p.potential.c_h if self.chi else 0.0
        ks, Sa, Sb, Gang = sol.angular_constants()
        self.Sa, self.Sb, self.Gang = Sa, Sb, Gang

    def _base(self, r):
        sol, N, s = self.sol, self.N, self.s
        if sol.radial_kind == "power":
            g = sol.gamma
            A2 = sol.amplitude ** 2
            p = N - 2 * s + 2 * g
            grad = A2 * g * g * r ** p / p
            ang = A2 * r ** p / p
            mass = A2 * r ** (p + 2) / (p + 2)
            hpot = A2 * r ** (p + self.chi) / (p + self.chi) if self.chi else 0.0
            return grad, ang, mass, hpot

        def q(f, power):
            val, _ = quad(lambda u: u ** power * f(u) ** 2, 0.0, r, limit=200)
            return val

        grad = q(sol.phi_prime, N + 1 - 2 * s)
        ang = q(sol.phi, N - 1 - 2 * s)
        mass = q(sol.phi, N + 1 - 2 * s)
        hpot = q(sol.phi, N - 1 - 2 * s + self.chi) if self.chi else 0.0
        return grad, ang, mass, hpot

    def at(self, r):
        grad, ang, mass, hpot = self._base(r)
        return {
            "vol_grad": grad + self.Gang * ang,
            "vol_mass": mass,
            "hardy": ang,
            "bdry_a": self.Sa * ang,
            "bdry_h": self.c_h * self.Sb * hpot,
            "hpot_raw": hpot,
        }

    def sphere(self, r):
        """Surface quantities on |z| = r: (C, E, F, WWnu) = weighted
        integrals of w^2, |grad w|^2, w_nu^2, w w_nu."""
        sol = self.sol
        N, s = self.N, self.s
        ph, dph = float(sol.phi(r)), float(sol.phi_prime(r))
        rn = r ** (N + 1 - 2 * s)
        C = rn * ph * ph
        F = rn * dph * dph
        E = rn * (dph * dph + self.Gang * ph * ph / r ** 2)
        WW = rn * ph * dph
        return C, E, F, WW

    def boundary_point(self, r):
        """(sum_b a_b w_b^2, sum_b w_b^2) at |x| = r on the t=0 rays,
        times r^{N-1} (sphere measure of the boundary trace)."""
        ph = float(self.sol.phi(r))
        return r ** (self.N - 1) * self.Sa * ph * ph, r ** (self.N - 1) * self.Sb * ph * ph


class _GridIntegrals:
    """Same cumulative integrals for a half-disk grid solution (N = 1); the
    excised core is continued by the fitted leading mode."""

    def __init__(self, sol: GridSolution, n_angular=256):
        if sol.core_pair is None or not np.isfinite(sol.core_amplitude):
            raise ValueError("grid diagnostics need the fitted core mode "
                             "(solve with inner='bootstrap')")
        self.sol = sol
        p = sol.params
        self.params = p
        s = p.s
        self.rule_a, self.rule_w = angular_rule(s, N=1, n_nodes=n_angular)
        grid = sol.grid
        rho = grid.rho_nodes
        self.rho = rho
        W = sol.w(rho[:, None], self.rule_a[None, :])
        Wr = sol.w_rho(rho[:, None], self.rule_a[None, :])
        line_w2 = (W ** 2) @ self.rule_w
        wp = sol.boundary_trace(rho, +1)
        wm = sol.boundary_trace(rho, -1)
        am, ap = p.potential.boundary_values()
        h_r = p.h_function(rho)
        # angular gradient energy per radius from the solver's own
        # conductance form (exact for the boundary-layer mode cos^{2s}), with
        # the two half-cells next to the rays closed analytically
        vals = sol.values
        disc = (np.diff(vals, axis=1) ** 2) @ grid.alpha_conductance
        ks = kappa_constant(s)
        bc = grid.dalpha / 2
        layer = (ks ** 2 * (ap + rho ** (2 * s) * h_r) ** 2 * wp ** 2
                 + ks ** 2 * (am + rho ** (2 * s) * h_r) ** 2 * wm ** 2) \
            * bc ** (2 * s) / (2 * s)
        self.line_ang_energy = disc + layer
        line_grad = (Wr ** 2) @ self.rule_w + self.line_ang_energy / rho ** 2
        self.F = {
            "vol_grad": rho ** (2 - 2 * s) * line_grad,
            "vol_mass": rho ** (2 - 2 * s) * line_w2,
            "hardy": rho ** (-2 * s) * line_w2,
            "bdry_a": rho ** (-2 * s) * (ap * wp ** 2 + am * wm ** 2),
            "bdry_h": h_r * (wp ** 2 + wm ** 2),
        }
        self.C = {k: self._cum(v) for k, v in self.F.items()}

        pair = sol.core_pair
        ks = kappa_constant(s)
        Sa = ap * pair.boundary_plus ** 2 + am * pair.boundary_minus ** 2
        Sb = pair.boundary_plus ** 2 + pair.boundary_minus ** 2
        self.core = {"c": sol.core_amplitude, "gamma": pair.gamma, "mu": pair.mu,
                     "Sa": Sa, "Sb": Sb, "Gang": pair.mu + ks * Sa}
        self.chi = p.potential.chi if p.potential.h_kind == "power" else None
        self.c_h = p.potential.c_h if self.chi else 0.0

    def _cum(self, f):
        return np.concatenate([[0.0],
                               np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(self.rho))])

    def _core_int(self, shift=0.0):
        """int_0^{rho_min} rho^{N-1-2s+2gamma+shift} c^2 drho."""
        p = self.params
        core = self.core
        expo = p.N - 2 * p.s + 2 * core["gamma"] + shift
        return core["c"] ** 2 * self.sol.grid.rho_min ** expo / expo

    def at(self, r):
        if r < 3.0 * self.sol.grid.rho_min or r > self.rho[-1] * (1 + 1e-12):
            raise ValueError("radius outside [3 rho_min, R]")
        core = self.core
        out = {k: float(np.interp(r, self.rho, self.C[k])) for k in self.C}
        out["vol_grad"] += (core["gamma"] ** 2 + core["Gang"]) * self._core_int()
        out["vol_mass"] += self._core_int(2.0)
        out["hardy"] += self._core_int()
        out["bdry_a"] += core["Sa"] * self._core_int()
        if self.chi:
            out["bdry_h"] += self.c_h * core["Sb"] * self._core_int(self.chi)
        return out

    def sphere(self, r):
        s = self.params.s
        sol = self.sol
        W = sol.w(r, self.rule_a)
        Wr = sol.w_rho(r, self.rule_a)
        rn = r ** (2 - 2 * s)
        C = rn * float(W ** 2 @ self.rule_w)
        F = rn * float(Wr ** 2 @ self.rule_w)
        E = F + rn * float(np.interp(r, self.rho, self.line_ang_energy)) / r ** 2
        WW = rn * float((W * Wr) @ self.rule_w)
        return C, E, F, WW

    def boundary_point(self, r):
        p = self.params
        am, ap = p.potential.boundary_values()
        wp = float(self.sol.boundary_trace(r, +1))
        wm = float(self.sol.boundary_trace(r, -1))
        return ap * wp ** 2 + am * wm ** 2, wp ** 2 + wm ** 2


def _engine(solution):
    if isinstance(solution, SeparableSolution):
        return _SeparableIntegrals(solution)
    if isinstance(solution, GridSolution):
        return _GridIntegrals(solution)
    raise TypeError(f"unsupported solution type {type(solution)!r}")


# ---------------------------------------------------------------------------
# frequency trace
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class FrequencyTrace:
    """Arrays r -> H, D, N = D/H with the derivative split nu1 + nu2 and the
    residual of the identity H' = 2D/r.  r decreases along the arrays."""

    r_values: np.ndarray
    H: np.ndarray
    D: np.ndarray
    Nfreq: np.ndarray
    Hprime: np.ndarray
    residual_Hprime: np.ndarray
    nu1: np.ndarray
    nu2: np.ndarray
    params: Params
    gamma_fit: float = math.nan
    gamma_ci: float = math.nan
    analytic_Hprime: bool = True

    @property
    def I_energy(self):
        """Unscaled energy r^{N-2s} D(r)."""
        p = self.params
        return self.r_values ** (p.N - 2 * p.s) * self.D


def frequency_trace(solution, params: Params, r_values, n_angular=256):
    """Evaluate H, D, N, nu1, nu2 on the given radii (descending order)."""
    r = np.asarray(r_values, dtype=float)
    if np.any(np.diff(r) >= 0):
        r = np.sort(r)[::-1]
    eng = _engine(solution)
    ks = kappa_constant(params.s)
    n = len(r)
    H = np.empty(n)
    D = np.empty(n)
    Hp = np.empty(n)
    nu1 = np.zeros(n)
    nu2 = np.empty(n)
    sep = isinstance(solution, SeparableSolution)
    for i, rr in enumerate(r):
        cum = eng.at(rr)
        C, E, F, WW = eng.sphere(rr)
        scale = rr ** (params.N + 1 - 2 * params.s)
        H[i] = C / scale
        if H[i] <= 1e-300:
            raise ValueError(f"degenerate boundary mass H({rr}) ~ 0")
        bracket = (cum["vol_grad"] + params.m ** 2 * cum["vol_mass"]
                   - ks * cum["bdry_a"] - ks * cum["bdry_h"])
        D[i] = bracket / rr ** (params.N - 2 * params.s)
        Hp[i] = 2.0 * WW / scale
        # N'(r) = nu1 + nu2
        if not sep:
            nu1[i] = 2.0 * rr * (F * C - WW * WW) / C ** 2
        chi_term = 0.0
        if params.potential.h_kind == "power":
            chi_term = ks * params.potential.chi * cum["bdry_h"]
        nu2[i] = (2.0 * params.m ** 2 * cum["vol_mass"] - chi_term) / C
    Nfreq = D / H
    # residual of H' = 2D/r relative to the larger of the energy and mass
    # scales (2D/r alone degenerates when the frequency is near zero)
    resid = np.abs(Hp - 2.0 * D / r) * r / (2.0 * np.maximum(np.abs(D), np.abs(H)))
    return FrequencyTrace(r_values=r, H=H, D=D, Nfreq=Nfreq, Hprime=Hp,
                          residual_Hprime=resid, nu1=nu1, nu2=nu2, params=params,
                          analytic_Hprime=sep)


def check_Hprime(trace: FrequencyTrace):
    """Residual report of H'(r) = 2 D(r)/r.

    For separable solutions H' = 2 phi phi' is exact, so the residual tests
    the independent quadrature of D; for grid solutions H' comes from the
    surface integral of w w_nu and carries quadrature noise.
    """
    return {
        "max_residual": float(np.max(trace.residual_Hprime)),
        "analytic_Hprime": trace.analytic_Hprime,
        "residuals": trace.residual_Hprime.tolist(),
    }


# ---------------------------------------------------------------------------
# Pohozaev-type identities
# ---------------------------------------------------------------------------

def pohozaev_residual(solution, params: Params, r):
    """Relative residuals (res1, res2) of the two integral identities tying
    the interior energy to surface and boundary terms at radius r.

    res1: the dilation identity
      -(N-2s)/2 A - m^2 (N+2-2s)/2 B + r m^2/2 C + r/2 E
          = r F - kappa_s/2 G + r kappa_s/2 J
    with A, B the volume gradient/mass integrals, C, E, F the surface
    integrals of w^2, |grad w|^2, w_nu^2, G the boundary integral of
    (N V + x . grad V) w^2 and J the boundary-sphere integral of V w^2.

    res2: the testing-with-w identity
      A + m^2 B = int_{S_r} t^{1-2s} w_nu w + kappa_s int_{B'_r} V w^2.
    """
    eng = _engine(solution)
    ks = kappa_constant(params.s)
    N, s = params.N, params.s
    cum = eng.at(r)
    C, E, F, WW = eng.sphere(r)
    A = cum["vol_grad"]
    B = cum["vol_mass"]
    # G: a-part scales by (N-2s), h-part by (N-2s+chi)
    G = (N - 2 * s) * cum["bdry_a"]
    if params.potential.h_kind == "power":
        G += (N - 2 * s + params.potential.chi) * cum["bdry_h"]
    bp_a, bp_h = eng.boundary_point(r)
    J = bp_a * r ** (-2 * s) + params.h_function(r) * bp_h

    lhs1 = (-(N - 2 * s) / 2 * A - params.m ** 2 * (N + 2 - 2 * s) / 2 * B
            + r * params.m ** 2 / 2 * C + r / 2 * E)
    rhs1 = r * F - ks / 2 * G + r * ks / 2 * J
    scale1 = max(abs(x) for x in (
        (N - 2 * s) / 2 * A, params.m ** 2 * (N + 2 - 2 * s) / 2 * B,
        r * params.m ** 2 / 2 * C, r / 2 * E, r * F, ks / 2 * G, r * ks / 2 * J, 1e-300))
    res1 = abs(lhs1 - rhs1) / scale1

    lhs2 = A + params.m ** 2 * B
    rhs2 = WW + ks * (cum["bdry_a"] + cum["bdry_h"])
    scale2 = max(abs(lhs2), abs(rhs2), abs(WW), 1e-300)
    res2 = abs(lhs2 - rhs2) / scale2
    return res1, res2


# ---------------------------------------------------------------------------
# blow-up rescaling
# ---------------------------------------------------------------------------

def rescale_blowup(solution, params: Params, tau_seq, n_angular=256):
    """Weighted L2 distance on the unit half-ball between the rescaled
    solution w(tau z)/sqrt(H(tau)) and the homogeneous profile
    |z|^gamma psi(z/|z|) (sign-aligned), for each tau in the decreasing
    sequence.  Returns distances and the fitted decay rate."""
    tau_seq = np.asarray(tau_seq, dtype=float)
    if np.any(np.diff(tau_seq) >= 0):
        raise ValueError("tau_seq must decrease")
    N, s = params.N, params.s

    if isinstance(solution, SeparableSolution):
        gam = solution.gamma
        dists = []
        for tau in tau_seq:
            Htau = float(solution.phi(tau)) ** 2
            if Htau <= 0:
                raise ValueError("H(tau) vanished")
            sgn = 1.0 if solution.phi(tau) > 0 else -1.0

            def integrand(rho):
                return rho ** (N + 1 - 2 * s) * (
                    float(solution.phi(tau * rho)) / math.sqrt(Htau) - sgn * rho ** gam) ** 2

            val, _ = quad(integrand, 0.0, 1.0, limit=200)
            dists.append(math.sqrt(max(val, 0.0)))
    elif isinstance(solution, GridSolution):
        pair = solution.core_pair
        gam = pair.gamma
        rule_a, rule_w = angular_rule(s, N=1, n_nodes=n_angular)
        psi = pair.profile_at(rule_a)
        eng = _GridIntegrals(solution, n_angular=n_angular)
        dists = []
        for tau in tau_seq:
            C, _, _, _ = eng.sphere(tau)
            Htau = C / tau ** (N + 1 - 2 * s)
            # sign alignment by the overlap at |z| = 1 (i.e. rho = tau)
            overlap = float((solution.w(tau, rule_a) * psi) @ rule_w)
            sgn = 1.0 if overlap >= 0 else -1.0
            rho_lo = solution.grid.rho_min / tau
            rhos = np.geomspace(rho_lo, 1.0, 200)
            vals = np.empty_like(rhos)
            for i, rho in enumerate(rhos):
                diff = solution.w(tau * rho, rule_a) / math.sqrt(Htau) - sgn * rho ** gam * psi
                vals[i] = rho ** (N + 1 - 2 * s) * float(diff ** 2 @ rule_w)
            interior = float(np.trapezoid(vals, rhos))
            # analytic continuation below rho_lo by the fitted core mode
            c_resc = solution.core_amplitude * tau ** gam / math.sqrt(Htau)
            expo = N + 2 - 2 * s + 2 * gam
            core = (c_resc - sgn) ** 2 * rho_lo ** expo / expo
            dists.append(math.sqrt(max(interior + core, 0.0)))
    else:
        raise TypeError(f"unsupported solution type {type(solution)!r}")

    dists = np.asarray(dists)
    nonzero = dists > 1e-14
    if np.count_nonzero(nonzero) >= 2:
        rate = float(np.polyfit(np.log(tau_seq[nonzero]),
                                np.log(dists[nonzero]), 1)[0])
    else:
        rate = math.nan
    return {"tau": tau_seq.tolist(), "distance": dists.tolist(),
            "fitted_rate": rate,
            "decreasing": bool(np.all(np.diff(dists) < 1e-14))}


# ---------------------------------------------------------------------------
# vanishing order
# ---------------------------------------------------------------------------

def gamma_extract(trace: FrequencyTrace, min_points=6, slack=1e-8):
    """Vanishing order from the slope of log H against 2 log r on the
    smallest available decade, with the half-width of the slope confidence
    interval; cross-checked against the last frequency sample.

    `slack` is the absolute floor of the cross-check tolerance; grid traces
    carry systematic quadrature drift the regression ci cannot see, so
    callers on grid data should pass an appropriate slack."""
    r = trace.r_values[::-1]          # ascending
    H = trace.H[::-1]
    r_lo = r[0]
    window = r <= 10.0 * r_lo
    if np.count_nonzero(window) < min_points:
        window = np.zeros_like(r, dtype=bool)
        window[:min_points] = True
    rw, Hw = r[window], H[window]
    if np.any(Hw <= 0):
        raise ValueError("nonpositive H in the fit window")
    mono = np.all(np.diff(Hw) >= 0) or np.all(np.diff(Hw) <= 0)
    if not mono and np.ptp(np.log(Hw)) > 1e-12:
        raise ValueError("H not monotone in the fit window")
    x = 2.0 * np.log(rw)
    y = np.log(Hw)
    n = len(x)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    if n > 2:
        sse = float(res[0]) if len(res) else float(np.sum((A @ coef - y) ** 2))
        var = sse / (n - 2) / float(np.sum((x - x.mean()) ** 2))
        ci = 2.0 * math.sqrt(max(var, 0.0))
    else:
        ci = math.nan
    gamma_val = slope
    ncheck = trace.Nfreq[-1]          # smallest radius (arrays descend)
    if abs(ncheck - gamma_val) > max(3.0 * ci, slack):
        raise ValueError(
            f"frequency cross-check failed: N({r_lo}) = {ncheck} vs fitted "
            f"gamma = {gamma_val} +- {ci}")
    trace.gamma_fit = gamma_val
    trace.gamma_ci = ci
    return gamma_val, ci


# ---------------------------------------------------------------------------
# expansion coefficients over the angular eigenbasis
# ---------------------------------------------------------------------------

def _profile_overlap(params, pair_a, pair_b, n_nodes=512):
    rule_a, rule_w = angular_rule(params.s, N=params.N, n_nodes=n_nodes)
    return float((pair_a.profile_at(rule_a) * pair_b.profile_at(rule_a)) @ rule_w)


def beta_coefficients(solution, params: Params, eigenpairs, R):
    """Coefficients of the leading blow-up mode over the given eigenpairs:

        beta_i = R^{-gamma} phi_i(R)
                 - R^{-2 gamma - N + 2s} int_0^R rho^{gamma+N-1} Z_i /(2 gamma + N - 2s)
                 + int_0^R rho^{2s - gamma - 1} Z_i /(2 gamma + N - 2s)

    with phi_i(rho) the angular overlap of w on the sphere of radius rho,
    Z_i(rho) = kappa_s int h w psi_i dS' - m^2 rho^{2-2s} phi_i(rho), and
    gamma the vanishing order of the solution.
    """
    ks = kappa_constant(params.s)
    N, s = params.N, params.s
    sep = isinstance(solution, SeparableSolution)
    if sep:
        gam = solution.gamma
        base_pair = solution.eigenpair
        if R <= 0:
            raise ValueError("R > 0 required")
    elif isinstance(solution, GridSolution):
        gam = solution.core_pair.gamma
        base_pair = solution.core_pair
        if R > solution.grid.R * (1 + 1e-12) or R < 3 * solution.grid.rho_min:
            raise ValueError("R outside the solution domain")
    else:
        raise TypeError(f"unsupported solution type {type(solution)!r}")
    denom = 2.0 * gam + N - 2.0 * s

    rule_a, rule_w = angular_rule(s, N=N, n_nodes=512)
    if not sep:
        eng_cache = {}

    betas = []
    for pair in eigenpairs:
        psi_i = pair.profile_at(rule_a)
        if sep:
            ov = float((solution.eigenpair.profile_at(rule_a) * psi_i) @ rule_w)

            def phi_i(rho):
                return float(solution.phi(rho)) * ov

            if params.N == 1:
                bsum = (solution.eigenpair.boundary_plus * pair.boundary_plus
                        + solution.eigenpair.boundary_minus * pair.boundary_minus)
            else:
                bsum = solution.eigenpair.boundary_plus * pair.boundary_plus

            def bdry_i(rho):
                return float(params.h_function(rho)) * float(solution.phi(rho)) * bsum
        else:
            grid_sol = solution

            def phi_i(rho, _psi=psi_i):
                return float((grid_sol.w(rho, rule_a) * _psi) @ rule_w)

            if params.N == 1:
                def bdry_i(rho, _pair=pair):
                    wp = float(grid_sol.boundary_trace(rho, +1))
                    wm = float(grid_sol.boundary_trace(rho, -1))
                    return float(params.h_function(rho)) * (
                        wp * _pair.boundary_plus + wm * _pair.boundary_minus)

        def Z(rho):
            return ks * bdry_i(rho) - params.m ** 2 * rho ** (2 - 2 * s) * phi_i(rho)

        lo = 0.0 if sep else 3 * solution.grid.rho_min
        int1, _ = quad(lambda u: u ** (gam + N - 1) * Z(u) / denom, lo, R, limit=200)
        int2, _ = quad(lambda u: u ** (2 * s - gam - 1) * Z(u) / denom, lo, R, limit=200)
        if not sep:
            # continue the integrals below 3 rho_min with the core mode
            c = solution.core_amplitude
            pair_sol = solution.core_pair
            if params.N == 1:
                bsum = (pair_sol.boundary_plus * pair.boundary_plus
                        + pair_sol.boundary_minus * pair.boundary_minus)
            ovc = _profile_overlap(params, pair_sol, pair)
            chi = params.potential.chi if params.potential.h_kind == "power" else None

            def Zc_int(power):
                # int_0^lo u^{power} (ks c_h u^{chi-2s+gam} bsum
                #                     - m^2 u^{2-2s+gam} ovc) c du
                total = 0.0
                if chi:
                    e1 = power + chi - 2 * s + pair_sol.gamma + 1
                    total += ks * params.potential.c_h * bsum * c * lo ** e1 / e1
                e2 = power + 2 - 2 * s + pair_sol.gamma + 1
                total -= params.m ** 2 * ovc * c * lo ** e2 / e2
                return total / denom

            int1 += Zc_int(gam + N - 1)
            int2 += Zc_int(2 * s - gam - 1)
        beta = (R ** (-gam) * phi_i(R)
                - R ** (-2 * gam - N + 2 * s) * int1
                + int2)
        betas.append(beta)
    return np.asarray(betas)


# ---------------------------------------------------------------------------
# boundary Hardy inequality on half-balls
# ---------------------------------------------------------------------------

def hardy_boundary_check(solution, params: Params, r, mu1_value=None):
    """Margin of the half-ball Hardy inequality

      int_B t^{1-2s}|grad w|^2 - kappa_s int_{B'} a|x|^{-2s} w^2
        + (N-2s)/(2r) int_{S_r} t^{1-2s} w^2
        >= (mu1 + ((N-2s)/2)^2) int_B t^{1-2s} w^2/|z|^2.

    Returns the margin (must be >= -1e-10)."""
    if mu1_value is None:
        from .angular import mu1 as mu1_solve

        mu1_value, _ = mu1_solve(params, grid_n=512)
    eng = _engine(solution)
    ks = kappa_constant(params.s)
    cum = eng.at(r)
    C, _, _, _ = eng.sphere(r)
    lhs = (cum["vol_grad"] - ks * cum["bdry_a"]
           + (params.N - 2 * params.s) / (2 * r) * C)
    rhs = (mu1_value + params.half_exponent ** 2) * cum["hardy"]
    return lhs - rhs


def write_trace_csv(path, trace: FrequencyTrace):
    """CSV: columns (r, H, D, N, res_Hprime, nu1, nu2)."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "H", "D", "N", "res_Hprime", "nu1", "nu2"])
        for i in range(len(trace.r_values)):
            w.writerow([f"{v:.17g}" for v in (
                trace.r_values[i], trace.H[i], trace.D[i], trace.Nfreq[i],
                trace.residual_Hprime[i], trace.nu1[i], trace.nu2[i])])

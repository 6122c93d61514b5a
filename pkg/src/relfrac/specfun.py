"""Special functions underlying the relativistic fractional operator.

Everything here is double precision and self-contained (no scipy.special):
the gamma function via a 15-coefficient Lanczos approximation, modified
Bessel functions K_nu and I_nu, the per-mode extension profile theta, and
the weight constant kappa(s) evaluated by three mutually independent routes
(closed form, quadrature of the profile energy, extrapolated boundary flux).

All evaluators accept scalars or numpy arrays.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.integrate import quad


class DomainError(ValueError):
    """Argument outside the mathematical domain (e.g. gamma at a pole)."""


class EvaluationOverflow(ArithmeticError):
    """Result too large for double precision; carries the saturated value."""

    def __init__(self, message, saturated):
        super().__init__(message)
        self.saturated = saturated


class QuadratureError(RuntimeError):
    """A quadrature failed to converge; message carries the diagnostics."""


# Lanczos coefficients, g = 607/128, 15 terms (Godfrey's tableau).
# Relative accuracy ~1e-15 over the right half plane.
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])


def _lanczos_core(x):
    """Gamma for x >= 0.5 (array)."""
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS_C[0])
    for k in range(1, 15):
        acc = acc + _LANCZOS_C[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return np.sqrt(2.0 * np.pi) * t ** (z + 0.5) * np.exp(-t) * acc


def gamma(x):
    """Gamma function for real arguments, poles excluded.

    Negative non-integer arguments go through the reflection formula.
    Raises DomainError at non-positive integers.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    bad = (x <= 0) & (x == np.floor(x))
    if np.any(bad):
        raise DomainError(f"gamma pole at {x[bad][0]}")
    out = np.empty_like(x)
    hi = x >= 0.5
    if np.any(hi):
        out[hi] = _lanczos_core(x[hi])
    lo = ~hi
    if np.any(lo):
        xl = x[lo]
        out[lo] = np.pi / (np.sin(np.pi * xl) * _lanczos_core(1.0 - xl))
    return float(out[0]) if scalar else out


def _bessel_i_series(nu, r, terms=120):
    """Ascending series for I_nu, valid for moderate r (all terms positive)."""
    r = np.asarray(r, dtype=float)
    q = (r / 2.0) ** 2
    term = np.ones_like(r)
    acc = np.ones_like(r)
    for k in range(terms):
        term = term * q / ((k + 1.0) * (nu + k + 1.0))
        acc = acc + term
        if np.all(np.abs(term) <= 1e-18 * np.abs(acc)):
            break
    if nu == 0:
        pref = np.ones_like(r)
    else:
        with np.errstate(divide="ignore"):
            pref = np.where(r > 0, (r / 2.0) ** nu, 0.0)
    return pref / gamma(nu + 1.0) * acc


def bessel_I(nu, r):
    """Modified Bessel function of the first kind, nu >= 0, r >= 0.

    Series evaluation; raises EvaluationOverflow once e^r overflows the
    useful double range (r > 690).
    """
    if nu < 0:
        raise DomainError("bessel_I implemented for nu >= 0")
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r < 0):
        raise DomainError("bessel_I requires r >= 0")
    if np.any(r > 690.0):
        raise EvaluationOverflow("bessel_I overflow for r > 690", math.inf)
    out = _bessel_i_series(nu, r)
    return float(out[0]) if scalar else out


def bessel_I_deriv(nu, r):
    """I_nu'(r) via the downward-free recurrence I' = (nu/r) I_nu + I_{nu+1}."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.empty_like(r)
    pos = r > 0
    out[pos] = (nu / r[pos]) * bessel_I(nu, r[pos]) + bessel_I(nu + 1.0, r[pos])
    if np.any(~pos):
        # limit at 0: zero unless nu == 1 (I_1' (0) = 1/2); nu<1 diverges for nu in (0,1)
        if nu == 0.0:
            out[~pos] = 0.0
        elif nu == 1.0:
            out[~pos] = 0.5
        else:
            raise DomainError("bessel_I_deriv at r=0 only defined for nu in {0, 1}")
    return float(out[0]) if scalar else out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _bessel_k_integral(nu, r):
    """K_nu(r) by quadrature of exp(-r cosh t) cosh(nu t); reliable for r >= 1.

    The integrand is smooth and positive, so composite Gauss-Legendre on a
    truncated interval gives near machine precision.  Evaluated in scaled
    form e^r K_nu to postpone underflow.
    """
    r = np.asarray(r, dtype=float)
    tmax = np.arccosh(1.0 + 48.0 / r)
    acc = np.zeros_like(r)
    npanel = 8
    edges = np.linspace(0.0, 1.0, npanel + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        for xg, wg in zip(_GL_NODES, _GL_WEIGHTS):
            t = (mid + half * xg) * tmax
            acc = acc + (wg * half) * tmax * np.exp(-r * (np.cosh(t) - 1.0)) * np.cosh(nu * t)
    return acc * np.exp(-r)


def _bessel_k_series(nu, r):
    """Series route K_nu = pi/2 (I_{-nu} - I_nu)/sin(nu pi), non-integer nu."""
    return np.pi / (2.0 * np.sin(nu * np.pi)) * (_bessel_i_series(-nu, r) - _bessel_i_series(nu, r))


def bessel_K(nu, r):
    """Modified Bessel function of the second kind, real order, r > 0.

    Series below r = 2, cosh-integral quadrature above; K_{-nu} = K_nu.
    Integer orders are handled by averaging the series at nu +/- 1e-5
    (even second-order perturbation), which keeps ~1e-10 relative accuracy.
    Underflows for very large r saturate through EvaluationOverflow only
    when the result would be a genuine overflow (tiny r with large nu).
    """
    nu = abs(float(nu))
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r <= 0):
        raise DomainError("bessel_K requires r > 0")
    # r^{-nu} overflow guard for the small-argument branch
    tiny = r < 2.0
    if nu > 0 and np.any(tiny):
        if np.any(-nu * np.log(r[tiny]) > 700.0):
            raise EvaluationOverflow("bessel_K overflow: r^-nu out of range", math.inf)
    out = np.empty_like(r)
    if np.any(tiny):
        rs = r[tiny]
        if abs(nu - round(nu)) <= 1e-8:
            n0 = round(nu)
            d = 1e-5
            out[tiny] = 0.5 * (_bessel_k_series(n0 + d, rs) + _bessel_k_series(abs(n0 - d), rs))
        else:
            out[tiny] = _bessel_k_series(nu, rs)
    if np.any(~tiny):
        out[~tiny] = _bessel_k_integral(nu, r[~tiny])
    return float(out[0]) if scalar else out


def bessel_K_deriv(nu, r):
    """K_nu'(r) through K' = (nu/r) K_nu - K_{nu+1}."""
    r = np.asarray(r, dtype=float)
    return (nu / r) * bessel_K(nu, r) - bessel_K(nu + 1.0, r)


def bessel_K_ode_residual(nu, r):
    """Relative residual of r^2 K'' + r K' - (r^2+nu^2) K via central
    differences with an r-proportional step (balances truncation/roundoff)."""
    r = float(r)
    h = 1e-4 * r
    km, k0, kp = (bessel_K(nu, rr) for rr in (r - h, r, r + h))
    d1 = (kp - km) / (2.0 * h)
    d2 = (kp - 2.0 * k0 + km) / h ** 2
    resid = r * r * d2 + r * d1 - (r * r + nu * nu) * k0
    scale = max(abs(r * r * d2), abs((r * r + nu * nu) * k0))
    return resid / scale


def kappa_constant(s):
    """Closed-form boundary-flux constant 2^{1-2s} Gamma(1-s)/Gamma(s)."""
    if not 0.0 < s < 1.0:
        raise DomainError("order s must lie in (0,1)")
    return 2.0 ** (1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s)


def hardy_sharp_constant(N, s):
    """Sharp constant 2^{2s} Gamma^2((N+2s)/4) / Gamma^2((N-2s)/4) of the
    fractional Hardy inequality (requires N > 2s)."""
    if N <= 2 * s:
        raise DomainError("hardy_sharp_constant requires N > 2s")
    return 2.0 ** (2.0 * s) * gamma((N + 2.0 * s) / 4.0) ** 2 / gamma((N - 2.0 * s) / 4.0) ** 2


def singular_integral_constant(N, s):
    """Normalization c of the pointwise singular-integral form of the operator."""
    return (
        2.0 ** (-(N + 2.0 * s) / 2.0 + 1.0)
        * np.pi ** (-N / 2.0)
        * 2.0 ** (2.0 * s)
        * s * (1.0 - s) / gamma(2.0 - s)
    )


def theta_profile(s, r):
    """Radial extension profile: the decaying solution of
    theta'' + (1-2s)/t theta' - theta = 0 with theta(0) = 1.

    Equals (2/Gamma(s)) (r/2)^s K_s(r); theta(0) = 1 by the K_s asymptotics.
    """
    if not 0.0 < s < 1.0:
        raise DomainError("order s must lie in (0,1)")
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r < 0):
        raise DomainError("theta_profile requires r >= 0")
    out = np.ones_like(r)
    pos = r > 0
    if np.any(pos):
        rp = r[pos]
        out[pos] = 2.0 / gamma(s) * (rp / 2.0) ** s * bessel_K(s, rp)
    return float(out[0]) if scalar else out


def theta_profile_deriv(s, r):
    """d theta / dr, analytic: (2/Gamma(s)) (r/2)^s ((2s/r) K_s - K_{s+1})."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r <= 0):
        raise DomainError("theta_profile_deriv requires r > 0")
    out = 2.0 / gamma(s) * (r / 2.0) ** s * ((2.0 * s / r) * bessel_K(s, r) - bessel_K(s + 1.0, r))
    return float(out[0]) if scalar else out


def theta_ode_residual(s, r, h=None):
    """Central-difference residual of theta'' + (1-2s)/t theta' - theta."""
    r = float(r)
    if h is None:
        h = 1e-4 * max(r, 1.0)
    tm, t0, tp = theta_profile(s, np.array([r - h, r, r + h]))
    d1 = (tp - tm) / (2.0 * h)
    d2 = (tp - 2.0 * t0 + tm) / h ** 2
    return d2 + (1.0 - 2.0 * s) / r * d1 - t0


def boundary_flux_limit(s, t_levels=(1e-2, 1e-3, 1e-4)):
    """Extrapolated limit of -t^{1-2s} theta'(t) as t -> 0.

    Fits c0 + c1 t^{2-2s} + c2 t^2 exactly through the three levels; these
    are the first three powers in the small-t expansion of the flux.
    """
    t = np.asarray(t_levels, dtype=float)
    f = -t ** (1.0 - 2.0 * s) * theta_profile_deriv(s, t)
    basis = np.vstack([np.ones_like(t), t ** (2.0 - 2.0 * s), t ** 2]).T
    coef = np.linalg.solve(basis, f)
    return float(coef[0])


@dataclasses.dataclass(frozen=True)
class KappaRoutes:
    """kappa(s) by three routes that must agree."""

    integral: float
    limit: float
    closed_form: float

    @property
    def worst_gap(self):
        ref = self.closed_form
        return max(abs(self.integral - ref), abs(self.limit - ref)) / ref


def kappa_from_ode(s):
    """Evaluate kappa(s) as the profile energy integral and as the boundary
    flux limit, alongside the Gamma closed form.

    integral route:  int_0^inf t^{1-2s} (theta'^2 + theta^2) dt
    limit route:     -lim_{t->0} t^{1-2s} theta'(t)
    """
    if not 0.0 < s < 1.0:
        raise DomainError("order s must lie in (0,1)")

    def integrand(t):
        return t ** (1.0 - 2.0 * s) * (theta_profile_deriv(s, t) ** 2 + theta_profile(s, t) ** 2)

    val1, err1 = quad(integrand, 0.0, 1.0, limit=200)
    val2, err2 = quad(integrand, 1.0, np.inf, limit=200)
    integral = val1 + val2
    if err1 + err2 > 1e-7 * abs(integral):
        raise QuadratureError(
            f"kappa integral did not converge: value={integral}, abs err={err1 + err2}"
        )
    return KappaRoutes(
        integral=integral,
        limit=boundary_flux_limit(s),
        closed_form=kappa_constant(s),
    )


@dataclasses.dataclass(frozen=True)
class Constants:
    """Closed-form constants attached to a (N, s) pair.

    kernel_norm (the normalization of the extension kernel) is fixed
    numerically by the kernel mass identity, not by a quoted formula;
    see relfrac.extension.kernel_normalization.
    """

    N: int
    s: float
    kappa_s: float
    Lambda_Ns: float
    c_Ns: float
    Cprime_Ns: float
    N_s: float

    @staticmethod
    def for_params(N, s, kernel_norm=None):
        if kernel_norm is None:
            from .extension import kernel_normalization

            kernel_norm = kernel_normalization(N, s)
        return Constants(
            N=N,
            s=s,
            kappa_s=kappa_constant(s),
            Lambda_Ns=hardy_sharp_constant(N, s),
            c_Ns=singular_integral_constant(N, s),
            Cprime_Ns=kernel_norm,
            N_s=N + 2.0 - 2.0 * s,
        )

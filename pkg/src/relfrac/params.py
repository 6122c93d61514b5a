"""Shared problem data: dimension, fractional order, mass, potential family.

The potential is a(x/|x|) |x|^{-2s} + h(x) with

* a either zero, a constant on the unit sphere, or (dimension 1 only) an
  independent value on each of the two boundary rays;
* h either zero or the power family h(x) = c_h |x|^{-2s+chi}, chi in (0,1).
"""

from __future__ import annotations

import dataclasses
import math


@dataclasses.dataclass(frozen=True)
class PotentialSpec:
    a_kind: str = "zero"            # zero | constant | two_point
    a0: float = 0.0                 # constant case
    a_minus: float = 0.0            # two_point case, ray x < 0
    a_plus: float = 0.0             # two_point case, ray x > 0
    h_kind: str = "zero"            # zero | power
    c_h: float = 0.0
    chi: float = 0.5

    def __post_init__(self):
        if self.a_kind not in ("zero", "constant", "two_point"):
            raise ValueError(f"unknown a_kind {self.a_kind!r}")
        if self.h_kind not in ("zero", "power"):
            raise ValueError(f"unknown h_kind {self.h_kind!r}")
        if self.h_kind == "power" and not 0.0 < self.chi < 1.0:
            raise ValueError("power-law h requires chi in (0,1)")

    @staticmethod
    def zero():
        return PotentialSpec()

    @staticmethod
    def constant(a0):
        return PotentialSpec(a_kind="constant", a0=float(a0))

    @staticmethod
    def two_point(a_minus, a_plus):
        return PotentialSpec(a_kind="two_point", a_minus=float(a_minus), a_plus=float(a_plus))

    def with_power_h(self, c_h, chi):
        return dataclasses.replace(self, h_kind="power", c_h=float(c_h), chi=float(chi))

    def boundary_values(self):
        """(a at the alpha=-pi/2 ray, a at the alpha=+pi/2 ray); for N >= 2
        both entries equal the constant."""
        if self.a_kind == "zero":
            return 0.0, 0.0
        if self.a_kind == "constant":
            return self.a0, self.a0
        return self.a_minus, self.a_plus

    def h_bound_constant(self, s):
        """C_h with |h| + |x . grad h| <= C_h |x|^{-2s+chi}."""
        if self.h_kind == "zero":
            return 0.0
        return abs(self.c_h) * max(1.0, abs(2.0 * s - self.chi) + 1.0)


@dataclasses.dataclass(frozen=True)
class Params:
    """Problem data; the admissibility constraint N > 2s of the Hardy-type
    analysis is enforced at construction."""

    N: int
    s: float
    m: float = 0.0
    potential: PotentialSpec = dataclasses.field(default_factory=PotentialSpec.zero)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not 0.0 < self.s < 1.0:
            raise ValueError("s must lie in (0,1)")
        if self.N <= 2 * self.s:
            raise ValueError(f"need N > 2s, got N={self.N}, s={self.s}")
        if self.m < 0:
            raise ValueError("mass m must be >= 0")
        if self.potential.a_kind == "two_point" and self.N != 1:
            raise ValueError("two_point potentials only exist for N = 1")

    @property
    def half_exponent(self):
        """(N - 2s)/2, the scaling pivot of the admissibility condition."""
        return (self.N - 2.0 * self.s) / 2.0

    @property
    def admissibility_threshold(self):
        """mu_1 must exceed -((N-2s)/2)^2."""
        return -self.half_exponent ** 2

    def h_function(self, r):
        """Evaluate h on radii r (power family or zero)."""
        import numpy as np

        r = np.asarray(r, dtype=float)
        pot = self.potential
        if pot.h_kind == "zero":
            return np.zeros_like(r)
        return pot.c_h * r ** (-2.0 * self.s + pot.chi)

    def h_radial_derivative_factor(self):
        """x . grad h = factor * h for the power family: factor = chi - 2s."""
        return self.potential.chi - 2.0 * self.s if self.potential.h_kind == "power" else 0.0

    def gamma_from_mu(self, mu):
        """Blow-up exponent -(N-2s)/2 + sqrt(((N-2s)/2)^2 + mu)."""
        disc = self.half_exponent ** 2 + mu
        if disc < 0:
            raise ValueError("inadmissible mu: negative discriminant")
        return -self.half_exponent + math.sqrt(disc)

"""Numerical toolkit for the relativistic fractional operator
(-Delta + m^2)^s with Hardy-type potentials.

Modules: specfun (gamma/Bessel/profile constants), params (problem data),
angular (half-sphere eigenproblem), extension (operator backends and the
Bessel kernel), halfdisk (polar finite-volume solver), diagnostics
(frequency function, Pohozaev identities, blow-up analysis), scenarios/cli
(machine-readable pipelines).
"""

from .params import Params, PotentialSpec

__all__ = ["Params", "PotentialSpec"]
__version__ = "0.1.0"

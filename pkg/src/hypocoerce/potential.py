"""Confining potentials with certified derivative bounds.

The family is V(x) = lam*x^2/2 + beta*cos(omega*x): a harmonic well plus a
bounded cosine ripple.  Every member has bounded derivatives of order two
and higher with closed-form sup bounds, and exp(-V) is integrable, so a
unique global equilibrium exists and all certificate constants downstream
are computable.  The ripple may be strong enough to make V nonconvex,
which is the interesting regime for the decay machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("harmonic", "harmonic_cosine")


@dataclass(frozen=True)
class Potential:
    """V(x) = lam*x^2/2 + beta*cos(omega*x), one-dimensional."""

    kind: str
    lam: float
    beta: float
    omega: float
    dim: int = 1

    def V(self, x):
        return 0.5 * self.lam * x * x + self.beta * np.cos(self.omega * x)

    def V1(self, x):
        """First derivative V'."""
        return self.lam * x - self.beta * self.omega * np.sin(self.omega * x)

    def V2(self, x):
        """Second derivative V''."""
        return self.lam - self.beta * self.omega**2 * np.cos(self.omega * x)

    def V3(self, x):
        """Third derivative V'''."""
        return self.beta * self.omega**3 * np.sin(self.omega * x)


def make_potential(kind, lam, beta=0.0, omega=1.0, dim=1):
    """Validate parameters and build a Potential.

    lam > 0 is required (quadratic growth is what confines); beta >= 0 and
    omega > 0 bound the ripple; the plain harmonic kind must have beta = 0.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown potential kind {kind!r}, expected one of {KINDS}")
    if dim != 1:
        raise ValueError("only dim = 1 is supported")
    lam = float(lam)
    beta = float(beta)
    omega = float(omega)
    if lam <= 0:
        raise ValueError("non-confining: lam must be > 0")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if omega <= 0:
        raise ValueError("omega must be > 0")
    if kind == "harmonic" and beta != 0.0:
        raise ValueError("harmonic potential requires beta = 0")
    return Potential(kind=kind, lam=lam, beta=beta, omega=omega, dim=dim)


def derivative_bounds(p: Potential):
    """Closed-form sup bounds (M2, M3) with M2 >= sup|V''| and M3 >= sup|V'''|."""
    M2 = p.lam + p.beta * p.omega**2
    M3 = p.beta * p.omega**3
    return M2, M3


def confinement_mass(p: Potential, R, n):
    """Trapezoid approximation of the equilibrium mass integral of exp(-V) over [-R, R].

    Diagnostic only: the integrand decays like a Gaussian, so the value is
    stable under refinement once R covers the well.
    """
    if R <= 0:
        raise ValueError("R must be > 0")
    n = int(n)
    if n < 16:
        raise ValueError("n must be >= 16")
    x = np.linspace(-R, R, n)
    y = np.exp(-p.V(x))
    h = x[1] - x[0]
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))

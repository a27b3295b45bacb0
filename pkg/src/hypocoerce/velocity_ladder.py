"""Truncated ladder matrices for the velocity direction.

Velocity space is spanned by the first nv Hermite functions, with mode 0
the square root of the Gaussian equilibrium.  The annihilation matrix B
lowers the mode index with weight sqrt(gamma*k); its transpose raises it.
The flat ladders C, C* carry unit weights and satisfy C*C = Id - Pi1v
exactly, which is the velocity factor of the collision projector.

Truncation policy: a hard cutoff at nv modes.  The only place the algebra
feels the cutoff is the (nv-1, nv-1) entry of [B, B*], which is
-gamma*(nv-1) instead of gamma; everything else is exact, and that defect
is asserted rather than hidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LadderSet:
    """Truncated velocity-space operator matrices, all nv x nv dense."""

    nv: int
    gamma: float
    B: np.ndarray       # annihilation, B[k-1, k] = sqrt(gamma*k)
    Bdag: np.ndarray    # creation, exact transpose of B
    C: np.ndarray       # flat annihilation, unit weights
    Cdag: np.ndarray    # flat creation
    Nop: np.ndarray     # number operator, diag(0, gamma, ..., (nv-1)*gamma)
    Pi1v: np.ndarray    # projector onto mode 0


def build_ladder(nv, gamma):
    """Build the truncated ladder matrices for nv modes and relaxation rate gamma."""
    nv = int(nv)
    if nv < 2:
        raise ValueError("nv must be >= 2: with a single mode the collision projector is the identity")
    gamma = float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    k = np.arange(1, nv)
    B = np.diag(np.sqrt(gamma * k), 1)
    Bdag = B.T.copy()
    C = np.diag(np.ones(nv - 1), 1)
    Cdag = C.T.copy()
    Nop = gamma * np.diag(np.arange(nv, dtype=float))
    Pi1v = np.zeros((nv, nv))
    Pi1v[0, 0] = 1.0
    return LadderSet(nv=nv, gamma=gamma, B=B, Bdag=Bdag, C=C, Cdag=Cdag,
                     Nop=Nop, Pi1v=Pi1v)


def velocity_multiplication(ls: LadderSet):
    """Truncated matrix of multiplication by v: (B + B*)/sqrt(gamma).

    Symmetric and tridiagonal with zero diagonal; the gamma factors cancel.
    """
    return (ls.B + ls.Bdag) / np.sqrt(ls.gamma)

"""Shared assembled systems for the test suite."""

import numpy as np
import pytest

import hypocoerce as hc


class System:
    """Fully assembled operator set for one configuration."""

    def __init__(self, lam=1.0, beta=0.0, omega=1.0, gamma=1.0, nx=32, nv=8,
                 R=8.0, scheme="mimetic"):
        kind = "harmonic" if beta == 0 else "harmonic_cosine"
        self.p = hc.make_potential(kind, lam, beta=beta, omega=omega)
        self.gamma = gamma
        self.ls = hc.build_ladder(nv, gamma)
        self.grid = hc.make_grid(R, nx)
        self.sp = hc.build_spatial_ops(self.grid, self.p, gamma, scheme=scheme)
        self.x0 = hc.assemble_transport(self.sp, self.ls)
        self.K = hc.assemble_K(self.x0, self.ls)
        self.l2 = hc.assemble_lambda2(self.sp, self.ls)
        self.L = hc.assemble_L(self.sp, self.ls, self.l2)
        self.Aop = hc.assemble_A_operator(self.sp, self.ls, self.l2, self.p)
        self.pi0 = hc.projector_pi0(self.sp, self.ls)
        self.pi1 = hc.projector_pi1(self.sp, self.ls)
        self.m0 = self.pi0.m0
        self.n = nx * nv
        self.nx, self.nv = nx, nv


@pytest.fixture(scope="session")
def sys32():
    """Small harmonic system: nx=32, nv=8, gamma=1."""
    return System(nx=32, nv=8)


@pytest.fixture(scope="session")
def sys64():
    """Mid harmonic system: nx=64, nv=8, gamma=1."""
    return System(nx=64, nv=8)


@pytest.fixture(scope="session")
def sys_ripple():
    """Nonconvex rippled potential, gamma=1, nx=32, nv=8."""
    return System(beta=0.5, omega=2.0, nx=32, nv=8)


@pytest.fixture(scope="session")
def sys_default():
    """The reference configuration size: nx=128, nv=16."""
    return System(nx=128, nv=16)


def maxabs(M):
    M = M.toarray() if hasattr(M, "toarray") else np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0

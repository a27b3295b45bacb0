"""Phase-space operator assembly on the tensor grid (position nodes x velocity modes).

Vector layout: a coefficient vector u of length nx*nv stores the velocity
block of node i contiguously, u[i*nv + k] = coefficient of velocity mode k
at node x_i.  Operators acting in a single factor are lifted by Kronecker
products against the identity in the other factor.  This x-major ordering
is part of the contract of every operator built here.

The transport generator is assembled from the ladder identity

    X0 = (a (x) b*  -  a* (x) b) / gamma,

which reproduces the continuum v*d/dx - V'*d/dv and makes antisymmetry,
the exact steady state and the ladder commutation relations structural
properties of the matrices rather than discretization accidents.  A direct
assembly from the centered derivative and the velocity multiplication
matrix is kept as a cross-check.

Solve-based operators (the conjugated correction L = Lam^-2 a* b and the
commutator remainder operator) are provided as composed applies backed by
a cached sparse factorization of Lam^2; they can be materialized densely
below DENSE_CAP unknowns for norm and eigenvalue work.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.special import factorial

from .potential import Potential
from .spatial_ops import SpatialOps
from .velocity_ladder import LadderSet

DENSE_CAP = 4096

ROLES = ("X0", "K", "Lambda2", "Pi1", "Pi0", "L", "Aop", "custom")


class PhaseOperator:
    """Real linear operator on phase space.

    Sparse-backed operators carry ``mat``; composed apply-plus-solve
    operators carry ``matvec``/``rmatvec`` closures instead and may supply
    a ``dense_builder`` for fast materialization.
    """

    def __init__(self, role, n, mat=None, matvec=None, rmatvec=None,
                 dense_builder=None):
        if role not in ROLES:
            raise ValueError(f"unknown operator role {role!r}")
        self.role = role
        self.n = int(n)
        self.mat = mat.tocsr() if mat is not None else None
        self._matT = None
        self._matvec = matvec
        self._rmatvec = rmatvec
        self._dense_builder = dense_builder
        self._dense = None

    def dot(self, u):
        if self.mat is not None:
            return self.mat @ u
        return self._matvec(u)

    def tdot(self, u):
        """Apply the transpose."""
        if self.mat is not None:
            if self._matT is None:
                self._matT = self.mat.T.tocsr()
            return self._matT @ u
        return self._rmatvec(u)

    def materialize(self, cap=DENSE_CAP):
        """Dense matrix of the operator; refused above ``cap`` unknowns."""
        if self.n > cap:
            raise ValueError(
                f"dense materialization refused for n = {self.n} > cap = {cap}")
        if self._dense is None:
            if self.mat is not None:
                self._dense = self.mat.toarray()
            elif self._dense_builder is not None:
                self._dense = self._dense_builder()
            else:
                cols = [self.dot(e) for e in np.eye(self.n)]
                self._dense = np.column_stack(cols)
        return self._dense

    def __repr__(self):
        kind = "sparse" if self.mat is not None else "composed"
        return f"PhaseOperator(role={self.role!r}, n={self.n}, {kind})"


def _check_compatible(sp_ops: SpatialOps, ls: LadderSet):
    if sp_ops.gamma != ls.gamma:
        raise ValueError(
            f"gamma mismatch: spatial operators use {sp_ops.gamma}, ladder uses {ls.gamma}")


def steady_vector(sp_ops: SpatialOps, ls: LadderSet):
    """Unit vector of the discrete global equilibrium square root, phi0 (x) e0."""
    m0 = np.zeros(sp_ops.grid.nx * ls.nv)
    m0[:: ls.nv] = sp_ops.phi0
    return m0


def lift_position(M, nv):
    """Lift an nx x nx operator to phase space (acts on the position factor)."""
    return sparse.kron(sparse.csr_matrix(M), sparse.identity(nv), format="csr")


def lift_velocity(M, nx):
    """Lift an nv x nv operator to phase space (acts on the velocity factor)."""
    return sparse.kron(sparse.identity(nx), sparse.csr_matrix(M), format="csr")


def assemble_transport(sp_ops: SpatialOps, ls: LadderSet):
    """Transport generator X0 from the ladder identity; exactly antisymmetric."""
    _check_compatible(sp_ops, ls)
    n = sp_ops.grid.nx * ls.nv
    Bs = sparse.csr_matrix(ls.B)
    Bds = sparse.csr_matrix(ls.Bdag)
    X0 = (sparse.kron(sp_ops.A, Bds) - sparse.kron(sp_ops.Adag, Bs)) / ls.gamma
    return PhaseOperator("X0", n, mat=X0.tocsr())


def assemble_transport_direct(sp_ops: SpatialOps, ls: LadderSet):
    """Cross-check transport assembly: v*d/dx - V'*d/dv discretized directly.

    Uses the centered spatial derivative with Dirichlet closure, the
    velocity multiplication matrix (B + B*)/sqrt(gamma) and the mode-space
    derivative (B - B*)/(2 sqrt(gamma)).  For the centered scheme this
    coincides with the ladder assembly as an exact matrix identity; for the
    mimetic scheme the two agree to the scheme's first order.
    """
    _check_compatible(sp_ops, ls)
    grid = sp_ops.grid
    n = grid.nx * ls.nv
    e = np.full(grid.nx - 1, 1.0 / (2.0 * grid.h))
    Dc = sparse.diags([-e, e], [-1, 1])
    sg = np.sqrt(ls.gamma)
    vmult = sparse.csr_matrix((ls.B + ls.Bdag) / sg)
    dv = sparse.csr_matrix((ls.B - ls.Bdag) / (2.0 * sg))
    Vp = sparse.diags(sp_ops.potential.V1(grid.nodes))
    X0d = sparse.kron(Dc, vmult) - sparse.kron(Vp, dv)
    return PhaseOperator("custom", n, mat=X0d.tocsr())


def projector_pi1(sp_ops: SpatialOps, ls: LadderSet):
    """Orthogonal projector onto the mode-0 velocity slice (local equilibria)."""
    nx = sp_ops.grid.nx
    pattern = np.zeros(ls.nv)
    pattern[0] = 1.0
    return PhaseOperator("Pi1", nx * ls.nv, mat=sparse.diags(np.tile(pattern, nx)).tocsr())


def assemble_K(x0: PhaseOperator, ls: LadderSet):
    """Evolution generator K = X0 + gamma*(Id - Pi1).

    The symmetric part is exactly gamma*(Id - Pi1); with the mimetic
    spatial scheme both K and its transpose annihilate the steady vector
    exactly.
    """
    nv = ls.nv
    nx = x0.n // nv
    pattern = np.ones(nv)
    pattern[0] = 0.0
    K = x0.mat + ls.gamma * sparse.diags(np.tile(pattern, nx))
    op = PhaseOperator("K", x0.n, mat=K.tocsr())
    op.nv = nv
    return op


def assemble_lambda2(sp_ops: SpatialOps, ls: LadderSet):
    """Modified energy operator Lam^2 = Id + W (x) Id + Id (x) Nop.

    Symmetric positive definite with Lam^2 >= Id; carries a cached sparse
    LU factorization for the solve-based operators. The factorization is
    built eagerly so the operator is immutable afterwards.
    """
    _check_compatible(sp_ops, ls)
    nx = sp_ops.grid.nx
    n = nx * ls.nv
    L2 = (sparse.identity(n) + lift_position(sp_ops.W, ls.nv)
          + lift_velocity(ls.Nop, nx))
    op = PhaseOperator("Lambda2", n, mat=L2.tocsr())
    op.solver = spla.splu(op.mat.tocsc())
    # cheap factorization sanity probe
    probe = np.full(n, 1.0 / np.sqrt(n))
    res = np.linalg.norm(op.mat @ op.solver.solve(probe) - probe)
    if res > 1e-8:
        raise RuntimeError(f"Lam^2 factorization unreliable: probe residual {res:.3e}")
    return op


def apply_inverse_lambda2(l2: PhaseOperator, u, rtol=1e-10):
    """Solve Lam^2 y = u to a relative residual of at most rtol."""
    if not (0.0 < rtol <= 1e-8):
        raise ValueError("rtol must lie in (0, 1e-8]")
    norm_u = np.linalg.norm(u)
    if norm_u == 0.0:
        return np.zeros_like(u)
    y = l2.solver.solve(u)
    for _ in range(5):
        r = u - l2.mat @ y
        res = np.linalg.norm(r)
        if res <= rtol * norm_u:
            return y
        y = y + l2.solver.solve(r)
    raise RuntimeError(
        f"Lam^-2 apply stalled at relative residual {res / norm_u:.3e} (rtol {rtol:.1e})")


def assemble_L(sp_ops: SpatialOps, ls: LadderSet, l2: PhaseOperator):
    """Conjugated correction operator L: u -> Lam^-2 (a* (x) b) u.

    Provided as a composed apply; materialization below DENSE_CAP unknowns
    solves Lam^2 against the dense columns of a* (x) b in one pass.
    """
    _check_compatible(sp_ops, ls)
    n = l2.n
    G = sparse.kron(sp_ops.Adag, sparse.csr_matrix(ls.B)).tocsr()
    Gt = G.T.tocsr()
    solve = l2.solver.solve
    return PhaseOperator(
        "L", n,
        matvec=lambda u: solve(G @ u),
        rmatvec=lambda u: Gt @ solve(u),
        dense_builder=lambda: solve(G.toarray()),
    )


def assemble_A_operator(sp_ops: SpatialOps, ls: LadderSet, l2: PhaseOperator,
                        p: Potential):
    """Commutator remainder operator of the modified-product computation.

    Three terms, all sharing Lam^-2 solves:

        Lam^-2 b*(V''-1)a Lam^-2 a*b  +  Lam^-2 a*(V''-1)b Lam^-2 a*b
        -  Lam^-2 b* V'' b

    with V'' acting as the diagonal matrix of grid samples.  Every term
    ends in b or a*b on the right, so the whole operator kills the mode-0
    velocity slice.
    """
    _check_compatible(sp_ops, ls)
    n = l2.n
    x = sp_ops.grid.nodes
    V2d = p.V2(x) * np.ones_like(x)
    Mh = sparse.diags(V2d - 1.0)
    Bs = sparse.csr_matrix(ls.B)
    Bds = sparse.csr_matrix(ls.Bdag)
    G = sparse.kron(sp_ops.Adag, Bs).tocsr()
    G12 = (sparse.kron(Mh @ sp_ops.A, Bds) + sparse.kron(sp_ops.Adag @ Mh, Bs)).tocsr()
    G3 = sparse.kron(sparse.diags(V2d), sparse.csr_matrix(ls.Nop)).tocsr()
    Gt, G12t, G3t = G.T.tocsr(), G12.T.tocsr(), G3.T.tocsr()
    solve = l2.solver.solve

    def matvec(u):
        w = solve(G @ u)
        return solve(G12 @ w - G3 @ u)

    def rmatvec(u):
        y = solve(u)
        return Gt @ solve(G12t @ y) - G3t @ y

    def dense_builder():
        Y = solve(G.toarray())
        return solve(G12 @ Y - G3.toarray())

    return PhaseOperator("Aop", n, matvec=matvec, rmatvec=rmatvec,
                         dense_builder=dense_builder)


def projector_pi0(sp_ops: SpatialOps, ls: LadderSet):
    """Rank-one orthogonal projector onto the discrete equilibrium direction."""
    m0 = steady_vector(sp_ops, ls)

    def matvec(u):
        return (m0 @ u) * m0

    op = PhaseOperator("Pi0", m0.size, matvec=matvec, rmatvec=matvec,
                       dense_builder=lambda: np.outer(m0, m0))
    op.m0 = m0
    return op


def _default_test_vector(sp_ops: SpatialOps, ls: LadderSet):
    """Smooth decaying phase-space profile for consistency residuals.

    Commutation identities that hold only in the consistency sense need a
    smooth test function; rough vectors see the O(1/h) difference between
    stencils and would hide the convergence order.
    """
    x = sp_ops.grid.nodes
    prof = np.exp(-x * x / 6.0) * (1.0 + 0.5 * np.sin(1.3 * x))
    k = np.arange(ls.nv)
    modes = 0.7**k / np.sqrt(factorial(k))
    u = np.outer(prof, modes).ravel()
    return u / np.linalg.norm(u)


def commutator_residuals(sp_ops: SpatialOps, ls: LadderSet, p: Potential,
                         test_vector=None):
    """Residual norms of the discrete ladder commutation identities.

    Residuals are measured on a smooth test profile and restricted to
    interior spatial nodes and velocity modes below the truncation row,
    where the identities are meant to hold.  The two velocity-only
    identities and the b-transport one are exact there; the identities
    involving [A, A*] converge at the spatial scheme's order.

    Returns a dict mapping identity name to relative residual.
    """
    _check_compatible(sp_ops, ls)
    nx, nv = sp_ops.grid.nx, ls.nv
    n = nx * nv
    gamma = ls.gamma
    u = _default_test_vector(sp_ops, ls) if test_vector is None else test_vector

    Bs = sparse.csr_matrix(ls.B)
    Bds = sparse.csr_matrix(ls.Bdag)
    ax = lift_position(sp_ops.A, nv)
    bv = lift_velocity(ls.B, nx)
    bdv = lift_velocity(ls.Bdag, nx)
    X0 = assemble_transport(sp_ops, ls).mat
    L2 = (sparse.identity(n) + lift_position(sp_ops.W, nv)
          + lift_velocity(ls.Nop, nx)).tocsr()

    x = sp_ops.grid.nodes
    V2d = p.V2(x) * np.ones_like(x)
    Mh = sparse.diags(V2d - 1.0)
    hess_b = sparse.kron(sparse.diags(V2d), Bs).tocsr()
    lam2_x0_rhs = (sparse.kron(Mh @ sp_ops.A, Bds) + sparse.kron(sp_ops.Adag @ Mh, Bs)).tocsr()

    keep = np.ones((nx, nv), dtype=bool)
    keep[0, :] = keep[-1, :] = False
    keep[:, nv - 1] = False
    keep = keep.ravel()

    def res(E):
        w = E @ u
        w[~keep] = 0.0
        return float(np.linalg.norm(w) / np.linalg.norm(u))

    eye = sparse.identity(n)
    return {
        "b_transport": res(bv @ X0 - X0 @ bv - ax),
        "a_transport_hess": res(ax @ X0 - X0 @ ax + hess_b),
        "lambda2_transport": res(L2 @ X0 - X0 @ L2 + lam2_x0_rhs),
        "lambda2_ladder": res(L2 @ bv - bv @ L2 + gamma * bv),
        "ccr_velocity": res(bv @ bdv - bdv @ bv - gamma * eye),
    }


def export_matrix_market(op: PhaseOperator, path, cap=DENSE_CAP):
    """Write the operator in Matrix Market coordinate form (17 significant digits)."""
    if op.mat is not None:
        m = op.mat.tocoo()
    else:
        m = sparse.coo_matrix(op.materialize(cap=cap))
    scipy.io.mmwrite(str(path), m, precision=16)

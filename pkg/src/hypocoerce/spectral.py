"""Eigenvalue and operator-norm computations.

Two gaps drive the certified decay rate: tau, the gap of the spatial
Schroedinger-type operator W, and gamma, the gap of the velocity number
operator.  Because the discrete Lam^2 - Id is the commuting sum of the two
lifts, its spectrum is exactly the sumset of the factor spectra and its
gap alpha equals min(tau, gamma); the direct phase-space eigensolve is
cross-checkable against that structure to near machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .phase_assembly import PhaseOperator
from .spatial_ops import SpatialOps, witten_eigs
from .velocity_ladder import LadderSet

# dense eigensolves below this many unknowns, shift-invert Lanczos above
_DENSE_N = 1024


@dataclass
class SpectralReport:
    tau: float                      # gap of W
    alpha: float                    # gap of Lam^2 - Id
    gamma: float                    # relaxation rate (velocity gap)
    lambda0: float                  # smallest eigenvalue of W
    spec_abscissa_K: float | None = None   # smallest nonzero Re of spec(K), diagnostic


def spectral_gaps(l2: PhaseOperator, sp_ops: SpatialOps, ls: LadderSet):
    """Compute tau from W and alpha from the phase-space operator Lam^2 - Id.

    alpha is the distance from the bottom eigenvalue to the next one.  The
    structural identity alpha = min(tau, gamma) holds for the discrete
    operators up to eigensolver accuracy and is asserted by the test and
    selftest suites rather than here.
    """
    vals, _ = witten_eigs(sp_ops, k=2)
    lambda0, tau = float(vals[0]), float(vals[1] - vals[0])
    L2mI = (l2.mat - sparse.identity(l2.n)).tocsc()
    if l2.n <= _DENSE_N:
        e = scipy.linalg.eigh(L2mI.toarray(), eigvals_only=True, subset_by_index=[0, 1])
    else:
        v0 = np.random.default_rng(2024).standard_normal(l2.n)
        try:
            e = np.sort(spla.eigsh(L2mI, k=2, sigma=-0.5 * ls.gamma, which="LM",
                                   v0=v0, return_eigenvectors=False))
        except spla.ArpackNoConvergence as exc:  # pragma: no cover - rare
            raise RuntimeError(f"eigensolver did not converge: {exc}") from exc
    alpha = float(e[1] - e[0])
    return SpectralReport(tau=tau, alpha=alpha, gamma=ls.gamma, lambda0=lambda0)


class NormEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int
    degenerate: bool


def operator_norm(op, tol=1e-6, max_iter=2000, seed=42, return_info=False):
    """Operator norm by power iteration on op^T op from a fixed-seed start.

    Deterministic given the seed.  Returns the norm estimate; with
    return_info=True also a NormEstimate carrying the convergence flag (the
    iteration cap returns the best estimate, flagged), the iteration count
    and a degeneracy flag raised when successive estimates oscillate above
    tol, which signals a near-degenerate top singular space.
    """
    if not (0.0 < tol <= 1e-4):
        raise ValueError("tol must lie in (0, 1e-4]")
    if isinstance(op, np.ndarray) or sparse.issparse(op):
        op = PhaseOperator("custom", op.shape[0], mat=sparse.csr_matrix(op))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.n)
    v /= np.linalg.norm(v)
    est_prev = 0.0
    est = 0.0
    converged = False
    degenerate = False
    iterations = 0
    for iterations in range(1, int(max_iter) + 1):
        z = op.tdot(op.dot(v))
        lam = float(v @ z)
        est = np.sqrt(max(lam, 0.0))
        nz = np.linalg.norm(z)
        if nz == 0.0:
            est, converged = 0.0, True
            break
        # Rayleigh quotient plus residual bound: lam is within ||z - lam v||
        # of an eigenvalue of the (symmetric PSD) normal operator, so this
        # stop delivers the requested relative tolerance even when the top
        # singular values cluster.
        if np.linalg.norm(z - lam * v) <= tol * max(lam, 1e-300):
            converged = True
            break
        if est < est_prev - tol * max(est, 1e-300):
            degenerate = True  # Rayleigh quotients should be nondecreasing here
        est_prev = est
        v = z / nz
    info = NormEstimate(value=float(est), converged=converged,
                        iterations=iterations, degenerate=degenerate)
    return (info.value, info) if return_info else info.value


class KSpectrum(NamedTuple):
    values: np.ndarray          # all eigenvalues, sorted by real part
    zero: complex               # the (unique) near-zero eigenvalue
    spec_abscissa: float        # smallest real part among the others


def spectrum_K(k_op: PhaseOperator, dense_cap=4096, zero_tol=1e-8):
    """Full spectrum of K by a dense nonsymmetric eigensolve (diagnostic).

    Asserts that the spectrum lies in the closed right half-plane (K
    generates a contraction semigroup) and that exactly one eigenvalue is
    near zero (the steady state is simple); reports the smallest real part
    among the rest, which bounds every achievable decay rate from above.
    """
    if k_op.n > dense_cap:
        raise ValueError(f"dense spectrum refused for n = {k_op.n} > cap = {dense_cap}")
    vals = scipy.linalg.eig(k_op.materialize(cap=dense_cap), right=False)
    vals = vals[np.argsort(vals.real)]
    min_re = float(vals.real.min())
    if min_re < -1e-10:
        raise RuntimeError(f"spectrum of K leaks into the left half-plane: min Re = {min_re:.3e}")
    near_zero = np.abs(vals) < zero_tol
    if near_zero.sum() != 1:
        raise RuntimeError(
            f"expected exactly one near-zero eigenvalue of K, found {int(near_zero.sum())}")
    zero = complex(vals[near_zero][0])
    rest = vals[~near_zero]
    return KSpectrum(values=vals, zero=zero, spec_abscissa=float(rest.real.min()))


def generalized_max_eig(S, M):
    """Largest lam with S v = lam M v for symmetric S and SPD M (dense path)."""
    Sd = S.toarray() if sparse.issparse(S) else np.asarray(S)
    Md = M.toarray() if sparse.issparse(M) else np.asarray(M)
    n = Sd.shape[0]
    vals = scipy.linalg.eigh(Sd, Md, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return float(vals[0])


def kernel_vector(k_op: PhaseOperator, guess):
    """Unit eigenvector of K for its (near-)zero eigenvalue.

    The decay observable for schemes without an exact steady vector is
    measured against this vector.  Shift-invert iteration near zero with
    the equilibrium guess as the start; the sign follows the guess.
    """
    v0 = guess / np.linalg.norm(guess)
    shifted = (k_op.mat + 1e-8 * sparse.identity(k_op.n)).tocsc()
    try:
        _, vec = spla.eigs(shifted, k=1, sigma=0.0, which="LM", v0=v0)
    except spla.ArpackNoConvergence as exc:  # pragma: no cover - rare
        raise RuntimeError(f"kernel eigensolve did not converge: {exc}") from exc
    v = np.real(vec[:, 0])
    v /= np.linalg.norm(v)
    return v if float(v @ guess) >= 0 else -v

"""The machine-checked decay certificate.

The certificate packages everything needed to assert exponential decay at
an explicit rate: the gaps (alpha, tau, gamma), the measured and
analytically bounded norms of the correction operator L and the remainder
operator, the weight epsilon of the modified inner product, the coercivity
constant delta, and the directly verified smallest eigenvalue of the
projected symmetrized modified form.

epsilon is the maximizer of the quadratic

    eps * alpha/(1+gamma) - eps^2 * (||A||^2/gamma + gamma*||L||^2)

subject to eps <= gamma/8 and eps*||L|| <= 1, which keeps the modified
inner product norm-equivalent with constant 3 and makes delta strictly
positive whenever alpha is.  The decay envelope is then

    3 * ||u0|| * exp(-delta * t / (3 * C_L)),   C_L = max(1, eps*||L||).

Two certificates come out of a run: the primary one from numerically
measured operator norms (tighter) and an analytic one from the closed-form
norm bounds, which depends only on gamma and the derivative sup-bounds of
the potential.  The bounds must dominate the measured norms; that is an
asserted invariant, not an assumption.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import scipy.linalg

from .phase_assembly import PhaseOperator, DENSE_CAP


@dataclass
class Certificate:
    alpha: float
    tau: float
    gamma: float
    normL_num: float
    normA_num: float
    boundL: float
    boundA: float
    epsilon: float
    C: float
    delta: float
    A_const: float
    prefactor: int
    decay_rate: float
    lambda_min_verified: float | None
    verified: bool

    def to_dict(self):
        return asdict(self)


def analytic_norm_bounds(gamma, M2, M3):
    """Closed-form norm bounds (boundL, boundA) from the derivative sup-bounds.

    boundL = sqrt(1 + gamma*(M2 + 2)) covers the correction operator and
    its mirror; boundA composes the same ladder estimates over the three
    terms of the remainder operator:

        B1 = (M2 + 1 + sqrt(gamma)*M3) * (sqrt(gamma*(M2+2)) + 1) * boundL
        B2 = (M2 + 1) * boundL^2
        B3 = M2

    Dominance over the measured norms is enforced by the invariant suite.
    """
    gamma = float(gamma)
    M2 = float(M2)
    M3 = float(M3)
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if M2 < 0 or M3 < 0:
        raise ValueError("derivative bounds must be nonnegative")
    boundL = np.sqrt(1.0 + gamma * (M2 + 2.0))
    B1 = (M2 + 1.0 + np.sqrt(gamma) * M3) * (np.sqrt(gamma * (M2 + 2.0)) + 1.0) * boundL
    B2 = (M2 + 1.0) * boundL**2
    B3 = M2
    return float(boundL), float(B1 + B2 + B3)


def choose_epsilon(alpha, gamma, normL, normA):
    """Pick the modified-product weight; returns (epsilon, delta, A_const).

    epsilon = min(gamma/8, 1/||L||, alpha/(2*(1+gamma)*C)) with
    C = ||A||^2/gamma + gamma*||L||^2.  The third branch forces
    delta = eps*alpha/(1+gamma) - eps^2*C >= eps*alpha/(2*(1+gamma)) > 0.
    """
    alpha = float(alpha)
    gamma = float(gamma)
    normL = float(normL)
    normA = float(normA)
    if alpha <= 0:
        raise ValueError("no spectral gap (alpha <= 0): cannot certify decay")
    if gamma <= 0 or normL <= 0 or normA < 0:
        raise ValueError("gamma and normL must be > 0, normA >= 0")
    C = normA**2 / gamma + gamma * normL**2
    epsilon = min(gamma / 8.0, 1.0 / normL, alpha / (2.0 * (1.0 + gamma) * C))
    delta = epsilon * alpha / (1.0 + gamma) - epsilon**2 * C
    if delta <= 0:  # unreachable by construction; guard against roundoff
        raise RuntimeError(f"nonpositive coercivity constant delta = {delta:.3e}")
    return float(epsilon), float(delta), float(alpha**2 / delta)


def verify_coercivity(K: PhaseOperator, L: PhaseOperator, epsilon,
                      Pi0: PhaseOperator, dense_cap=DENSE_CAP, resolved_only=True):
    """Directly verify the coercivity of the modified form on the mean-free space.

    Forms M = Id + eps*(L + L^T), symmetrizes S = (M^T K + K^T M)/2, and
    returns the smallest eigenvalue of P S P + mu*Pi0, the minimum of the
    modified quadratic form (Ku, Mu) over unit vectors orthogonal to the
    steady direction (the shift mu removes that trivial direction).

    With resolved_only (the default) P also projects out the top velocity
    mode and the two wall nodes of the grid, the same resolved subspace on
    which the ladder commutation identities hold (see
    commutator_residuals).  The continuum statement quantifies over smooth
    functions on the whole line; the truncation row misses the ladder
    raise and the wall rows carry the one-sided stencil closure, so on
    those rows the modified form is indefinite by an O(eps) amount at any
    eps, a pure discretization artifact with no continuum counterpart.
    Pass resolved_only=False for the unrestricted literal minimum, which
    turns negative for that reason once the defect outweighs the collision
    term (it does at realistic resolutions) and is useful only as a
    truncation diagnostic.
    """
    epsilon = float(epsilon)
    if K.n > dense_cap:
        raise ValueError(f"coercivity verification refused for n = {K.n} > cap = {dense_cap}")
    n = K.n
    Ld = L.materialize(cap=dense_cap)
    M = epsilon * (Ld + Ld.T)
    M[np.diag_indices(n)] += 1.0
    KtM = K.mat.T @ M
    S = 0.5 * (KtM + KtM.T)
    del KtM, M
    m0 = Pi0.m0
    nv = getattr(K, "nv", None)
    if resolved_only:
        if nv is None:
            raise ValueError("resolved_only verification needs the velocity mode "
                             "count; assemble K through assemble_K or pass "
                             "resolved_only=False")
        nx = n // nv
        keep = np.ones((nx, nv), dtype=bool)
        keep[:, nv - 1] = False
        keep[0, :] = keep[-1, :] = False
        keep = keep.ravel()
        S = S[np.ix_(keep, keep)]
        m0 = m0[keep]                     # steady vector lives in mode 0
        m0 = m0 / np.linalg.norm(m0)      # renormalize after the wall cut
    mu = 10.0 * max(1.0, float(np.abs(S).sum(axis=1).max()))
    s_m = S @ m0
    msm = float(m0 @ s_m)
    # P S P + mu Pi0 = S - m0 (S m0)^T - (S m0) m0^T + (m0.S m0 + mu) m0 m0^T
    S -= np.outer(m0, s_m)
    S -= np.outer(s_m, m0)
    S += (msm + mu) * np.outer(m0, m0)
    lam_min = scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=[0, 0])
    return float(lam_min[0])


def decay_envelope(delta, C_L, norm_u0, t):
    """Certified envelope 3 * norm_u0 * exp(-delta*t/(3*C_L)); t may be an array."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    if C_L < 1.0:
        raise ValueError("C_L must be >= 1")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    out = 3.0 * norm_u0 * np.exp(-delta * t / (3.0 * C_L))
    return float(out) if out.ndim == 0 else out


def make_certificate(spectral_report, normL_num, normA_num, boundL, boundA,
                     K=None, L=None, Pi0=None, dense_cap=DENSE_CAP, verify=True):
    """Assemble a Certificate from gaps, norms and bounds.

    When verify is true and the operators fit under the dense cap, the
    coercivity eigenvalue is computed and checked against 0.9*delta (the
    0.1 slack absorbs the discretization residuals of the commutation
    identities; it tightens toward 1 under refinement).
    """
    sr = spectral_report
    epsilon, delta, A_const = choose_epsilon(sr.alpha, sr.gamma, normL_num, normA_num)
    C = normA_num**2 / sr.gamma + sr.gamma * normL_num**2
    C_L = max(1.0, epsilon * normL_num)
    lam_min = None
    if verify and K is not None and K.n <= dense_cap:
        lam_min = verify_coercivity(K, L, epsilon, Pi0, dense_cap=dense_cap)
    return Certificate(
        alpha=sr.alpha, tau=sr.tau, gamma=sr.gamma,
        normL_num=float(normL_num), normA_num=float(normA_num),
        boundL=float(boundL), boundA=float(boundA),
        epsilon=epsilon, C=float(C), delta=delta, A_const=A_const,
        prefactor=3, decay_rate=delta / (3.0 * C_L),
        lambda_min_verified=lam_min,
        verified=bool(lam_min is not None and lam_min >= 0.9 * delta),
    )

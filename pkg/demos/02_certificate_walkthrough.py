"""The decay certificate, step by step, for a nonconvex potential.

Assembles the phase-space operators, inspects the commutation residuals
that power the theory, measures the norms of the correction and remainder
operators against their closed-form bounds, picks the modified-product
weight, and verifies the resulting coercivity directly as a matrix
eigenvalue, including the truncation-row diagnostic.

Run from the repository root:  python3 demos/02_certificate_walkthrough.py
"""

import numpy as np

import hypocoerce as hc

# A relaxation rate of 1 and a rippled (nonconvex) well: the interesting
# regime where convexity arguments fail but the certificate still works.
p = hc.make_potential("harmonic_cosine", 1.0, beta=0.5, omega=2.0)
gamma = 1.0
ls = hc.build_ladder(12, gamma)
sp = hc.build_spatial_ops(hc.make_grid(8.0, 96), p, gamma)
x0 = hc.assemble_transport(sp, ls)
K = hc.assemble_K(x0, ls)
l2 = hc.assemble_lambda2(sp, ls)
L = hc.assemble_L(sp, ls, l2)
Aop = hc.assemble_A_operator(sp, ls, l2, p)
pi0 = hc.projector_pi0(sp, ls)
print(f"phase space: {sp.grid.nx} nodes x {ls.nv} modes = {K.n} unknowns\n")

# ---------------------------------------------------------------------------
# The ladder commutation identities, measured.  The velocity-side ones are
# exact on retained modes; the ones involving [A, A*] converge at the
# scheme's order.

print("commutation residuals (interior nodes, retained modes):")
for name, value in hc.commutator_residuals(sp, ls, p).items():
    print(f"  {name:20s} {value:.3e}")

# ---------------------------------------------------------------------------
# Gaps and norms.  alpha = min(tau, gamma) is structural for the discrete
# operators; the closed-form bounds must dominate the measured norms.

sr = hc.spectral_gaps(l2, sp, ls)
print(f"\ngaps: tau = {sr.tau:.6f}  gamma = {sr.gamma}  alpha = {sr.alpha:.6f}"
      f"  (min check: {abs(sr.alpha - min(sr.tau, sr.gamma)):.1e})")

normL = hc.operator_norm(L, tol=1e-8, max_iter=50000)
normA = hc.operator_norm(Aop, tol=1e-8, max_iter=50000)
boundL, boundA = hc.analytic_norm_bounds(gamma, *hc.derivative_bounds(p))
print(f"correction operator:  measured {normL:.4f}  <=  bound {boundL:.4f}")
print(f"remainder operator:   measured {normA:.4f}  <=  bound {boundA:.4f}")

# ---------------------------------------------------------------------------
# Pick the weight and verify coercivity.  At eps = 0 the plain form is
# degenerate on the local equilibria; the correction buys a strictly
# positive bound, which the direct eigenvalue confirms with margin.

eps, delta, A_const = hc.choose_epsilon(sr.alpha, gamma, normL, normA)
print(f"\nweight eps = {eps:.6f}  rate constant delta = {delta:.6f}"
      f"  (A = {A_const:.2f})")

lam_plain = hc.verify_coercivity(K, L, 0.0, pi0)
lam_cert = hc.verify_coercivity(K, L, eps, pi0)
lam_literal = hc.verify_coercivity(K, L, eps, pi0, resolved_only=False)
print(f"smallest eigenvalue of the plain form:     {lam_plain:+.3e}   (degenerate)")
print(f"smallest eigenvalue of the modified form:  {lam_cert:+.6f}   "
      f"(>= delta: {lam_cert >= delta})")
print(f"including the truncation/wall rows:        {lam_literal:+.6f}")
if lam_literal < 0:
    print("  (negative: the cutoff rows sit outside the resolved subspace;")
    print("   a pure discretization artifact, see verify_coercivity's docstring)")

cert = hc.make_certificate(sr, normL, normA, boundL, boundA, K=K, L=L, Pi0=pi0)
print(f"\ncertificate: decay rate {cert.decay_rate:.6f} with prefactor "
      f"{cert.prefactor}, verified = {cert.verified}")

eps_a, delta_a, _ = hc.choose_epsilon(sr.alpha, gamma, boundL, boundA)
print(f"analytic-bound route (resolution independent): eps = {eps_a:.2e}, "
      f"delta = {delta_a:.2e}  (weaker but a priori)")

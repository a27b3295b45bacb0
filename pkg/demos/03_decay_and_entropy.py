"""Certified decay in action: time integration, envelopes, entropy.

Integrates a shifted Maxwellian toward equilibrium, checks the measured
deviation against the certified exponential envelope at every recorded
time, tracks the relative entropy and its own envelope, and compares the
fitted decay rate with the certified one and the true spectral abscissa.

Run from the repository root:  python3 demos/03_decay_and_entropy.py
"""

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

import hypocoerce as hc

p = hc.make_potential("harmonic", 1.0)
gamma = 1.0
ls = hc.build_ladder(12, gamma)
sp = hc.build_spatial_ops(hc.make_grid(8.0, 96), p, gamma)
x0 = hc.assemble_transport(sp, ls)
K = hc.assemble_K(x0, ls)
l2 = hc.assemble_lambda2(sp, ls)
L = hc.assemble_L(sp, ls, l2)
Aop = hc.assemble_A_operator(sp, ls, l2, p)
pi0 = hc.projector_pi0(sp, ls)

sr = hc.spectral_gaps(l2, sp, ls)
normL = hc.operator_norm(L, tol=1e-8, max_iter=50000)
normA = hc.operator_norm(Aop, tol=1e-8, max_iter=50000)
boundL, boundA = hc.analytic_norm_bounds(gamma, *hc.derivative_bounds(p))
cert = hc.make_certificate(sr, normL, normA, boundL, boundA, K=K, L=L, Pi0=pi0)
print(f"certified rate delta/3 = {cert.decay_rate:.5f} "
      f"(delta = {cert.delta:.5f}, verified = {cert.verified})")

# A displaced bump in both position and velocity, normalized to unit mass.
s0 = hc.make_initial("shifted_maxwellian", {"x0": 1.0, "v0": 0.5, "sigma": 1.0},
                     sp, ls)
trace = hc.evolve(K, s0, dt=0.01, T=40.0, m0=pi0.m0, delta=cert.delta,
                  c_l=max(1.0, cert.epsilon * cert.normL_num),
                  entropy_fn=hc.entropy_function(sp, ls))
trace.write_csv("demos/03_trace.csv")

rate, window = hc.fit_decay_rate(trace)
abscissa = hc.spectrum_K(K).spec_abscissa
print(f"fitted decay rate  = {rate:.5f}  over t in [{window[0]:.1f}, {window[1]:.1f}]")
print(f"spectral abscissa  = {abscissa:.5f}  (asymptotic reference; a finite-window "
      "fit may sit a few percent above)")
print(f"envelope respected at every recorded time: "
      f"{bool(np.all(trace.dev <= trace.envelope + 1e-12))}")
print(f"mass drift over the whole run: {np.abs(trace.mass - 1.0).max():.2e}")
print(f"entropy stays nonnegative: {bool(np.all(trace.entropy >= -1e-10))}")

norms = np.sqrt(1.0 + trace.dev**2)
print(f"pointwise entropy bound H <= |u| dev holds: "
      f"{bool(np.all(trace.entropy <= norms * trace.dev + 1e-8))}")

fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
axes[0].semilogy(trace.t, trace.dev, label="deviation from equilibrium")
axes[0].semilogy(trace.t, trace.envelope, "--", label="certified envelope")
axes[0].semilogy(trace.t, trace.dev[0] * np.exp(-rate * trace.t), ":",
                 label=f"fit rate {rate:.3f}")
axes[0].set_xlabel("t")
axes[0].set_ylim(bottom=1e-8)
axes[0].legend()
axes[0].set_title("certified exponential relaxation")
axes[1].semilogy(trace.t, np.maximum(trace.entropy, 1e-16),
                 label="relative entropy")
axes[1].semilogy(trace.t, 3 * norms[0] * trace.dev[0]
                 * np.exp(-cert.delta * trace.t / 3.0), "--",
                 label="entropy envelope")
axes[1].set_xlabel("t")
axes[1].set_ylim(bottom=1e-10)
axes[1].legend()
axes[1].set_title("relative entropy decay")
fig.tight_layout()
fig.savefig("demos/03_decay_and_entropy.png", dpi=130)
print("wrote demos/03_trace.csv and demos/03_decay_and_entropy.png")

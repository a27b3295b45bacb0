"""Built-in invariant suite over small fixed configurations.

Each check returns (name, passed, measured value).  The suite covers the
structural identities of the ladder and spatial operators, the phase-space
assembly exactness properties, the gap structure, the certificate
inequalities and the integrator guarantees, so a clean build passes 100%.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sparse

from .certificate import (analytic_norm_bounds, choose_epsilon, make_certificate,
                          verify_coercivity)
from .evolution import entropy_function, evolve, make_initial
from .phase_assembly import (PhaseOperator, apply_inverse_lambda2,
                             assemble_A_operator, assemble_K, assemble_L,
                             assemble_lambda2, assemble_transport,
                             commutator_residuals, lift_position, lift_velocity,
                             projector_pi0, projector_pi1, steady_vector)
from .potential import derivative_bounds, make_potential
from .spatial_ops import build_spatial_ops, make_grid, witten_eigs
from .spectral import operator_norm, spectral_gaps, spectrum_K
from .velocity_ladder import build_ladder, velocity_multiplication


def _system(lam=1.0, beta=0.0, omega=1.0, gamma=1.0, nx=48, nv=8, scheme="mimetic"):
    kind = "harmonic" if beta == 0 else "harmonic_cosine"
    p = make_potential(kind, lam, beta=beta, omega=omega)
    ls = build_ladder(nv, gamma)
    sp = build_spatial_ops(make_grid(8.0, nx), p, gamma, scheme=scheme)
    x0 = assemble_transport(sp, ls)
    K = assemble_K(x0, ls)
    l2 = assemble_lambda2(sp, ls)
    return dict(p=p, ls=ls, sp=sp, x0=x0, K=K, l2=l2,
                L=assemble_L(sp, ls, l2), Aop=assemble_A_operator(sp, ls, l2, p),
                pi0=projector_pi0(sp, ls), pi1=projector_pi1(sp, ls),
                m0=steady_vector(sp, ls))


def _maxabs(M):
    M = M.toarray() if hasattr(M, "toarray") else np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def run_selftest():
    """Run every invariant check; returns a list of (name, passed, value)."""
    results = []

    def check(name, ok, value):
        results.append((name, bool(ok), float(value)))

    sys_h = _system()                                    # harmonic, gamma = 1
    sys_c = _system(beta=0.5, omega=2.0, gamma=4.0)      # rippled, strong relaxation
    rng = np.random.default_rng(7)

    # ladder algebra
    for tag, s in (("harmonic", sys_h), ("rippled", sys_c)):
        ls = s["ls"]
        comm = ls.B @ ls.Bdag - ls.Bdag @ ls.B
        defect = _maxabs(comm[:-1, :-1] - ls.gamma * np.eye(ls.nv - 1))
        check(f"ladder_ccr_retained_modes[{tag}]", defect <= 1e-12, defect)
        trunc = abs(comm[-1, -1] + ls.gamma * (ls.nv - 1))
        check(f"ladder_ccr_truncation_entry[{tag}]", trunc <= 1e-12, trunc)
        e0 = np.zeros(ls.nv)
        e0[0] = 1.0
        check(f"ladder_kills_mode0[{tag}]", _maxabs(ls.B @ e0) == 0.0, _maxabs(ls.B @ e0))
        nerr = _maxabs(ls.Bdag @ ls.B - ls.Nop)
        check(f"number_operator_product[{tag}]", nerr <= 1e-12, nerr)
        flat = _maxabs(ls.Cdag @ ls.C - (np.eye(ls.nv) - ls.Pi1v))
        check(f"flat_ladder_projector[{tag}]", flat == 0.0, flat)
        vm = velocity_multiplication(ls)
        check(f"velocity_mult_symmetric[{tag}]", _maxabs(vm - vm.T) == 0.0,
              _maxabs(vm - vm.T))

    # spatial operators
    for tag, s in (("harmonic", sys_h), ("rippled", sys_c)):
        sp = s["sp"]
        check(f"adjoint_exact[{tag}]", _maxabs(sp.A.T - sp.Adag) == 0.0,
              _maxabs(sp.A.T - sp.Adag))
        ker = _maxabs(sp.A @ sp.phi0)
        check(f"mimetic_kernel_exact[{tag}]", ker <= 1e-12, ker)
        wmin = scipy.linalg.eigh(sp.W.toarray(), eigvals_only=True,
                                 subset_by_index=[0, 0])[0]
        check(f"witten_psd[{tag}]", wmin >= -1e-12, wmin)
    lan = witten_eigs(sys_h["sp"], k=2, method="lanczos")[0]
    den = witten_eigs(sys_h["sp"], k=2, method="dense")[0]
    rel = float(np.max(np.abs(lan - den) / np.maximum(np.abs(den), 1.0)))
    check("witten_eig_paths_agree", rel <= 1e-8, rel)

    # spatial commutator consistency orders (interior, smooth profile)
    for scheme, lo, hi in (("mimetic", 1.5, 2.6), ("centered", 3.2, 4.8)):
        res = []
        for nx in (96, 192):
            s = _system(nx=nx, scheme=scheme)
            res.append(commutator_residuals(s["sp"], s["ls"], s["p"])["a_transport_hess"])
        ratio = res[0] / res[1]
        check(f"commutator_order[{scheme}]", lo <= ratio <= hi, ratio)

    # phase assembly
    for tag, s in (("harmonic", sys_h), ("rippled", sys_c)):
        x0, K, l2, m0, ls, sp = (s["x0"], s["K"], s["l2"], s["m0"], s["ls"], s["sp"])
        n = x0.n
        anti = _maxabs(x0.mat + x0.mat.T)
        check(f"transport_antisymmetric[{tag}]", anti == 0.0, anti)
        sym = _maxabs(0.5 * (K.mat + K.mat.T)
                      - ls.gamma * (sparse.identity(n) - s["pi1"].mat))
        check(f"collision_symmetric_part[{tag}]", sym <= 1e-14, sym)
        km = _maxabs(K.mat @ m0)
        ktm = _maxabs(K.mat.T @ m0)
        check(f"steady_state_right[{tag}]", km <= 1e-12, km)
        check(f"steady_state_left[{tag}]", ktm <= 1e-12, ktm)
        lm = np.linalg.norm(s["L"].dot(m0))
        check(f"L_kills_equilibrium[{tag}]", lm <= 1e-12, lm)
        am = np.linalg.norm(s["Aop"].dot(m0))
        check(f"remainder_kills_equilibrium[{tag}]", am <= 1e-12, am)
        flat_lift = _maxabs(lift_velocity(ls.Cdag @ ls.C, sp.grid.nx)
                            - (sparse.identity(n) - s["pi1"].mat))
        check(f"flat_ladder_lift[{tag}]", flat_lift == 0.0, flat_lift)
        r = commutator_residuals(sp, ls, s["p"])
        check(f"ccr_velocity_exact[{tag}]", r["ccr_velocity"] <= 1e-12, r["ccr_velocity"])
        check(f"lambda2_ladder_exact[{tag}]", r["lambda2_ladder"] <= 1e-12,
              r["lambda2_ladder"])
        check(f"b_transport_exact[{tag}]", r["b_transport"] <= 1e-12, r["b_transport"])
        Wl = lift_position(sp.W, ls.nv)
        Nl = lift_velocity(ls.Nop, sp.grid.nx)
        scale = _maxabs(l2.mat)  # commutators vanish exactly; measure roundoff per unit scale
        cw = _maxabs(l2.mat @ Wl - Wl @ l2.mat) / (scale * max(_maxabs(Wl), 1.0))
        cn = _maxabs(l2.mat @ Nl - Nl @ l2.mat) / (scale * max(_maxabs(Nl), 1.0))
        cp = _maxabs(l2.mat @ s["pi1"].mat - s["pi1"].mat @ l2.mat) / scale
        check(f"lambda2_commuting_family[{tag}]", max(cw, cn, cp) <= 1e-12,
              max(cw, cn, cp))
        sl = l2.mat[:: ls.nv, :: ls.nv]
        slice_err = _maxabs(sl - (sparse.identity(sp.grid.nx) + sp.W))
        check(f"lambda2_mode0_slice[{tag}]", slice_err == 0.0, slice_err)
        for nm, Sl in (("a", Wl), ("b", Nl)):
            op = PhaseOperator("custom", n,
                               matvec=lambda u, Sl=Sl: l2.solver.solve(Sl @ u),
                               rmatvec=lambda u, Sl=Sl: Sl @ l2.solver.solve(u))
            val = operator_norm(op, tol=1e-8, seed=11)
            check(f"{nm}_lambda_inv_contraction[{tag}]", val <= 1.0 + 1e-8, val)
        u = rng.standard_normal(n)
        y = apply_inverse_lambda2(l2, u, rtol=1e-10)
        res = np.linalg.norm(l2.mat @ y - u) / np.linalg.norm(u)
        check(f"inverse_apply_residual[{tag}]", res <= 1e-10, res)

    # rank-one projector
    pi0 = sys_h["pi0"]
    P = pi0.materialize()
    check("pi0_idempotent", _maxabs(P @ P - P) <= 1e-12, _maxabs(P @ P - P))
    check("pi0_trace_one", abs(np.trace(P) - 1.0) <= 1e-12, abs(np.trace(P) - 1.0))

    # spectral structure
    for tag, s in (("harmonic", sys_h), ("rippled", sys_c)):
        sr = spectral_gaps(s["l2"], s["sp"], s["ls"])
        dev = abs(sr.alpha - min(sr.tau, sr.gamma))
        check(f"alpha_is_min_gap[{tag}]", dev <= 1e-10, dev)
        check(f"alpha_leq_gamma[{tag}]", sr.alpha <= sr.gamma + 1e-10, sr.alpha)
        chain = (sr.tau / (1 + sr.tau) >= sr.alpha / (1 + sr.alpha) - 1e-12
                 and sr.alpha / (1 + sr.alpha) >= sr.alpha / (1 + sr.gamma) - 1e-12)
        check(f"gap_chain_inequalities[{tag}]", chain, sr.tau / (1 + sr.tau))
    ks = spectrum_K(sys_h["K"])
    check("k_spectrum_right_half_plane", ks.values.real.min() >= -1e-10,
          float(ks.values.real.min()))
    check("k_zero_eigenvalue_simple", abs(ks.zero) <= 1e-12, abs(ks.zero))

    # norms, bounds, certificate
    norms = {}
    for tag, s in (("harmonic", sys_h), ("rippled", sys_c)):
        nl = operator_norm(s["L"], tol=1e-8, seed=42)
        na = operator_norm(s["Aop"], tol=1e-8, seed=42)
        M2, M3 = derivative_bounds(s["p"])
        bl, ba = analytic_norm_bounds(s["ls"].gamma, M2, M3)
        check(f"boundL_dominates[{tag}]", bl >= nl, bl - nl)
        check(f"boundA_dominates[{tag}]", ba >= na, ba - na)
        norms[tag] = (nl, na)
    Lmat = sys_h["L"].materialize()
    Pc = np.eye(Lmat.shape[0]) - np.outer(sys_h["m0"], sys_h["m0"])
    restr = operator_norm(Pc @ Lmat @ Pc, tol=1e-8, seed=42)
    check("restricted_norm_monotone", restr <= norms["harmonic"][0] + 1e-6,
          restr - norms["harmonic"][0])

    sr_h = spectral_gaps(sys_h["l2"], sys_h["sp"], sys_h["ls"])
    eps, delta, _ = choose_epsilon(sr_h.alpha, sr_h.gamma, *norms["harmonic"])
    check("delta_positive", delta > 0, delta)
    lam0 = verify_coercivity(sys_h["K"], sys_h["L"], 0.0, sys_h["pi0"])
    lam1 = verify_coercivity(sys_h["K"], sys_h["L"], eps, sys_h["pi0"])
    check("plain_form_not_coercive", abs(lam0) <= 1e-10, lam0)
    check("modified_form_coercive", lam1 >= 0.9 * delta, lam1 / delta)

    # gap inequality on the local-equilibrium slice, random mean-free vectors
    l2s, m0 = sys_h["l2"], sys_h["m0"]
    n = l2s.n
    Wl = lift_position(sys_h["sp"].W, sys_h["ls"].nv)
    worst = np.inf
    for _ in range(20):
        u = rng.standard_normal(n)
        u -= (u @ m0) * m0
        z = u.reshape(-1, sys_h["ls"].nv).copy()
        z[:, 1:] = 0.0
        z = z.ravel()
        lhs = float(l2s.solver.solve(Wl @ z) @ z)
        worst = min(worst, lhs - sr_h.alpha / (1 + sr_h.gamma) * float(z @ z))
    check("slice_gap_inequality", worst >= -1e-10, worst)

    # evolution guarantees
    s = sys_h
    cert = make_certificate(sr_h, *norms["harmonic"],
                            *analytic_norm_bounds(1.0, *derivative_bounds(s["p"])),
                            K=s["K"], L=s["L"], Pi0=s["pi0"])
    steady = make_initial("mode_perturbation", {"eta": 0.0}, s["sp"], s["ls"])
    tr0 = evolve(s["K"], steady, 0.05, 2.0, m0=s["m0"], delta=cert.delta)
    check("steady_trace_flat", float(tr0.dev.max()) <= 1e-12, float(tr0.dev.max()))
    init = make_initial("shifted_maxwellian", {}, s["sp"], s["ls"])
    tr = evolve(s["K"], init, 0.02, 8.0, m0=s["m0"], delta=cert.delta,
                c_l=max(1.0, cert.epsilon * cert.normL_num),
                entropy_fn=entropy_function(s["sp"], s["ls"]))
    drift = float(np.max(np.abs(tr.mass - 1.0)))
    check("mass_conserved", drift <= 1e-12, drift)
    check("certified_envelope", bool(np.all(tr.dev <= tr.envelope + 1e-12)),
          float(np.max(tr.dev - tr.envelope)))
    check("entropy_nonnegative", bool(np.all(tr.entropy >= -1e-10)),
          float(tr.entropy.min()))
    eq_bound = np.sqrt(1.0 + tr.dev**2) * tr.dev + 1e-8 - tr.entropy
    check("entropy_pointwise_bound", bool(np.all(eq_bound >= 0.0)), float(eq_bound.min()))
    cor = (3.0 * np.sqrt(1.0 + tr.dev[0]**2) * tr.dev[0]
           * np.exp(-cert.delta * tr.t / 3.0) + 1e-8 - tr.entropy)
    check("entropy_envelope", bool(np.all(cor >= 0.0)), float(cor.min()))

    # integrator order against the dense exponential
    s32 = _system(nx=32, nv=6)
    init32 = make_initial("shifted_maxwellian", {}, s32["sp"], s32["ls"])
    exact = scipy.linalg.expm(-2.0 * s32["K"].mat.toarray()) @ init32.u
    errs = []
    for dt in (0.04, 0.02):
        tr = evolve(s32["K"], init32, dt, 2.0, m0=s32["m0"])
        u = tr.final_state.u
        errs.append(np.linalg.norm(u - exact) / np.linalg.norm(exact))
    ratio = errs[0] / errs[1]
    check("cn_second_order", 3.2 <= ratio <= 4.8, ratio)

    return results

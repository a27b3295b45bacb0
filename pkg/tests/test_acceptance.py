"""Acceptance suite: one test per criterion, at the stated sizes and tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass line per
criterion.
"""

import json

import numpy as np
import pytest
import scipy.linalg

import hypocoerce as hc
from hypocoerce.cli_report import run

from conftest import System, maxabs


def _passline(tag):
    print(f"\n[acceptance] {tag}: PASS")


@pytest.fixture(scope="module")
def default_runs(tmp_path_factory):
    """Two independent full runs of the reference configuration."""
    base = tmp_path_factory.mktemp("acceptance")
    cfg = hc.default_config()
    cfg["outputs"]["dir"] = str(base / "run")
    r1, d1 = run(cfg, out=base / "run1")
    r2, d2 = run(cfg, out=base / "run2")
    return (r1, d1), (r2, d2)


def test_c01_ladder_algebra_exactness():
    for nv in (2, 8, 32):
        for gamma in (0.25, 1.0, 4.0):
            ls = hc.build_ladder(nv, gamma)
            assert maxabs(ls.Cdag @ ls.C - (np.eye(nv) - ls.Pi1v)) <= 1e-14
            comm = ls.B @ ls.Bdag - ls.Bdag @ ls.B
            assert maxabs(comm[:-1, :-1] - gamma * np.eye(nv - 1)) <= 1e-12
            e0 = np.zeros(nv)
            e0[0] = 1.0
            assert np.all(ls.B @ e0 == 0.0)
    _passline("C01 ladder-algebra-exactness")


def test_c02_structural_exactness(sys_default):
    s = sys_default
    assert maxabs(s.x0.mat + s.x0.mat.T) <= 1e-12
    sym = 0.5 * (s.K.mat + s.K.mat.T)
    import scipy.sparse as sparse
    assert maxabs(sym - s.gamma * (sparse.identity(s.n) - s.pi1.mat)) <= 1e-12
    assert maxabs(s.K.mat @ s.m0) <= 1e-12
    assert maxabs(s.K.mat.T @ s.m0) <= 1e-12
    P = s.pi0.materialize()
    assert maxabs(P @ P - P) <= 1e-12
    _passline("C02 structural-exactness")


def test_c03_spectral_gap_value():
    alphas = {}
    for nx in (512, 1024):
        s = System(nx=nx, nv=16)
        sr = hc.spectral_gaps(s.l2, s.sp, s.ls)
        assert abs(sr.alpha - min(sr.tau, sr.gamma)) <= 1e-10
        alphas[nx] = sr.alpha
    assert 0.90 <= alphas[512] <= 1.02
    assert abs(alphas[1024] - 1.0) < abs(alphas[512] - 1.0)
    # the gap identity holds on every swept configuration
    for beta, omega in ((0.0, 1.0), (0.5, 2.0)):
        for gamma in (0.25, 1.0, 4.0):
            s = System(beta=beta, omega=omega, gamma=gamma, nx=48, nv=6)
            sr = hc.spectral_gaps(s.l2, s.sp, s.ls)
            assert abs(sr.alpha - min(sr.tau, sr.gamma)) <= 1e-10
    _passline("C03 spectral-gap-value")


def test_c04_norm_oracle(sys32):
    for op in (sys32.L, sys32.Aop):
        sv = np.linalg.svd(op.materialize(), compute_uv=False)[0]
        est = hc.operator_norm(op, tol=1e-9, max_iter=150000)
        assert abs(est - sv) / sv <= 1e-6
    _passline("C04 norm-oracle")


def test_c05_bound_dominance():
    for beta, omega in ((0.0, 1.0), (0.5, 2.0)):
        for gamma in (0.25, 1.0, 4.0):
            s = System(beta=beta, omega=omega, gamma=gamma, nx=64, nv=8)
            nl = hc.operator_norm(s.L, tol=1e-8, max_iter=50000)
            na = hc.operator_norm(s.Aop, tol=1e-8, max_iter=50000)
            boundL, boundA = hc.analytic_norm_bounds(gamma, *hc.derivative_bounds(s.p))
            assert boundL >= nl, (beta, gamma)
            assert boundA >= na, (beta, gamma)
    _passline("C05 bound-dominance")


def _certificate_ratio(nx, nv):
    s = System(nx=nx, nv=nv)
    sr = hc.spectral_gaps(s.l2, s.sp, s.ls)
    nl = hc.operator_norm(s.L, tol=1e-8, max_iter=50000)
    na = hc.operator_norm(s.Aop, tol=1e-8, max_iter=50000)
    eps, delta, _ = hc.choose_epsilon(sr.alpha, sr.gamma, nl, na)
    lam = hc.verify_coercivity(s.K, s.L, eps, s.pi0, dense_cap=8192)
    return s, eps, delta, lam


def test_c06_coercivity_certificate():
    s, eps, delta, lam = _certificate_ratio(128, 16)
    assert lam >= 0.9 * delta
    lam0 = hc.verify_coercivity(s.K, s.L, 0.0, s.pi0)
    assert lam0 <= 1e-10
    _, _, delta_fine, lam_fine = _certificate_ratio(256, 24)
    assert lam_fine / delta_fine >= lam / delta - 1e-9
    _passline("C06 coercivity-certificate")


def test_c07_certified_decay_envelope(default_runs):
    (report, out_dir), _ = default_runs
    cert = report.certificate
    trace = np.genfromtxt(out_dir / "trace.csv", delimiter=",", skip_header=1)
    t, dev = trace[:, 0], trace[:, 1]
    envelope = 3.0 * dev[0] * np.exp(-cert["delta"] * t / 3.0)
    assert np.all(dev <= envelope + 1e-12)
    # dense spectrum oracle at the scaled size
    small = System(nx=64, nv=8)
    abscissa = hc.spectrum_K(small.K).spec_abscissa
    assert cert["delta"] / 3.0 <= report.fitted_rate <= abscissa * 1.05
    _passline("C07 certified-decay-envelope")


def test_c08_entropy_chain(default_runs):
    (report, out_dir), _ = default_runs
    trace = np.genfromtxt(out_dir / "trace.csv", delimiter=",", skip_header=1)
    t, dev, H = trace[:, 0], trace[:, 1], trace[:, 2]
    assert np.all(np.isfinite(H))
    assert np.all(H >= -1e-10)
    norms = np.sqrt(1.0 + dev**2)  # unit mass
    assert np.all(H <= norms * dev + 1e-8)
    delta = report.certificate["delta"]
    assert np.all(H <= 3.0 * norms[0] * dev[0] * np.exp(-delta * t / 3.0) + 1e-8)
    # steady data has zero entropy
    s = System(nx=64, nv=8)
    steady = hc.State(u=s.m0.copy(), t=0.0, mass=1.0)
    assert abs(hc.relative_entropy(steady, s.sp, s.ls)) <= 1e-10
    _passline("C08 entropy-chain")


def test_c09_integrator_oracles(sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    exact = scipy.linalg.expm(-2.0 * sys32.K.mat.toarray()) @ s0.u
    errs = []
    for dt in (0.02, 0.01):
        tr = hc.evolve(sys32.K, s0, dt, 2.0, m0=sys32.m0)
        errs.append(np.linalg.norm(tr.final_state.u - exact) / np.linalg.norm(exact))
    assert 3.5 <= errs[0] / errs[1] <= 4.5
    # 1e4 steps: mass exact, contraction never violated (evolve aborts otherwise)
    tr = hc.evolve(sys32.K, s0, 0.01, 100.0, m0=sys32.m0, record_every=50)
    assert np.max(np.abs(tr.mass - 1.0)) <= 1e-12
    assert np.all(np.diff(tr.dev) <= 1e-10)
    _passline("C09 integrator-oracles")


def test_c10_commutator_convergence():
    p = hc.make_potential("harmonic", 1.0)
    for scheme, lo, hi in (("mimetic", 1.7, 2.3), ("centered", 3.5, 4.5)):
        res = []
        for nx in (128, 256):
            s = System(nx=nx, nv=8, scheme=scheme)
            r = hc.commutator_residuals(s.sp, s.ls, p)
            assert r["b_transport"] <= 1e-12
            res.append(r["a_transport_hess"])
        assert lo <= res[0] / res[1] <= hi, scheme
    _passline("C10 commutator-convergence")


def test_c11_determinism(default_runs):
    (_, d1), (_, d2) = default_runs
    assert (d1 / "certificate.json").read_bytes() == (d2 / "certificate.json").read_bytes()
    assert (d1 / "trace.csv").read_bytes() == (d2 / "trace.csv").read_bytes()
    _passline("C11 determinism")

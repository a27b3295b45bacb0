import numpy as np
import pytest
import scipy.linalg
from scipy.special import factorial

import hypocoerce as hc
from hypocoerce.evolution import _entropy_with_stats

from conftest import System


# --- initial data -----------------------------------------------------------

def test_zero_perturbation_is_steady(sys32):
    s = hc.make_initial("mode_perturbation", {"eta": 0.0}, sys32.sp, sys32.ls)
    assert np.linalg.norm(s.u - sys32.m0) <= 1e-13
    assert s.mass == 1.0


@pytest.mark.parametrize("kind", ["shifted_maxwellian", "mode_perturbation", "random"])
def test_unit_mass_normalization(kind, sys32):
    params = {"x0": 1.0, "v0": 0.5, "sigma": 1.0}
    if kind != "shifted_maxwellian":
        # pick a seed whose raw draw has positive overlap with the steady vector
        seed = next(s for s in range(20)
                    if float(np.random.default_rng(s).standard_normal(sys32.n)
                             @ sys32.m0) > 0.01)
        params = {"eta": 0.5, "seed": seed}
    s = hc.make_initial(kind, params, sys32.sp, sys32.ls)
    assert abs(float(s.u @ sys32.m0) - 1.0) <= 1e-12


def test_shifted_maxwellian_closed_form_coefficients():
    # velocity expansion of the shifted Gaussian: coefficients v0^k/sqrt(k!)
    s = System(nx=64, nv=24)
    v0 = 0.5
    st = hc.make_initial("shifted_maxwellian", {"x0": 1.0, "v0": v0, "sigma": 1.0},
                         s.sp, s.ls)
    U = st.u.reshape(s.nx, s.nv)
    i = int(np.argmax(np.abs(U[:, 0])))
    k = np.arange(s.nv)
    expected = v0**k / np.sqrt(factorial(k))
    assert np.allclose(U[i] / U[i, 0], expected, atol=1e-12)
    # resolution adequacy: top retained coefficient is negligible
    tail = np.linalg.norm(U[:, -1]) / np.linalg.norm(U)
    assert tail < 1e-3


def test_shifted_maxwellian_gaussian_oracles(sys64):
    # closed forms in the harmonic well with sigma = 1: the conjugated
    # initial norm is ||u0||^2 = exp(x0^2 + v0^2), so the initial deviation
    # is sqrt(exp(x0^2 + v0^2) - 1), and the initial relative entropy is
    # (x0^2 + v0^2)/2 (Gaussian cross-entropy)
    for x0, v0 in ((1.0, 0.5), (0.5, 0.0), (0.0, 0.5)):
        st = hc.make_initial("shifted_maxwellian", {"x0": x0, "v0": v0, "sigma": 1.0},
                             sys64.sp, sys64.ls)
        q = x0**2 + v0**2
        assert float(st.u @ st.u) == pytest.approx(np.exp(q), rel=1e-3)
        dev0 = np.linalg.norm(st.u - (st.u @ sys64.m0) * sys64.m0)
        assert dev0 == pytest.approx(np.sqrt(np.exp(q) - 1.0), rel=1e-3, abs=1e-9)
        H0 = hc.relative_entropy(st, sys64.sp, sys64.ls)
        assert H0 == pytest.approx(q / 2.0, rel=1e-6, abs=1e-9)


def test_shifted_maxwellian_rejects_unconfined_bump(sys32):
    with pytest.raises(ValueError, match="sigma too large"):
        hc.make_initial("shifted_maxwellian", {"sigma": 2.0}, sys32.sp, sys32.ls)


def test_gauss_hermite_quadrature_orthonormality():
    # the quadrature must integrate products of retained polynomials exactly
    nv = 12
    nodes, omega = hc.gauss_hermite_weights(2 * nv)
    P = hc.hermite_xpoly_matrix(nv, nodes)
    gram = P.T @ (omega[:, None] * P)
    assert np.max(np.abs(gram - np.eye(nv))) <= 1e-12
    assert np.sum(omega) == pytest.approx(1.0, abs=1e-13)


def test_nonpositive_mass_rejected(sys32):
    # seed chosen so the raw Gaussian draw has negative overlap with m0
    rng_mass = [float(np.random.default_rng(seed).standard_normal(sys32.n) @ sys32.m0)
                for seed in range(20)]
    bad = next(i for i, m in enumerate(rng_mass) if m < 0)
    with pytest.raises(ValueError, match="mass"):
        hc.make_initial("random", {"seed": bad}, sys32.sp, sys32.ls)


def test_unknown_kind_rejected(sys32):
    with pytest.raises(ValueError, match="unknown initial kind"):
        hc.make_initial("plane_wave", {}, sys32.sp, sys32.ls)


# --- integrator -------------------------------------------------------------

def test_steady_state_is_fixed_point(sys32):
    s0 = hc.make_initial("mode_perturbation", {"eta": 0.0}, sys32.sp, sys32.ls)
    tr = hc.evolve(sys32.K, s0, 0.05, 2.0, m0=sys32.m0)
    assert np.max(tr.dev) <= 1e-12
    assert np.max(np.abs(tr.mass - 1.0)) <= 1e-12


@pytest.mark.parametrize("scheme", ["crank_nicolson", "backward_euler", "dense_expm"])
def test_schemes_contract_and_conserve(scheme, sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    tr = hc.evolve(sys32.K, s0, 0.05, 2.0, scheme=scheme, m0=sys32.m0)
    assert np.all(np.diff(tr.dev) <= 1e-10)
    assert np.max(np.abs(tr.mass - 1.0)) <= 1e-11


def test_cn_second_order_against_expm(sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    exact = scipy.linalg.expm(-2.0 * sys32.K.mat.toarray()) @ s0.u
    errs = []
    for dt in (0.02, 0.01):
        tr = hc.evolve(sys32.K, s0, dt, 2.0, m0=sys32.m0)
        errs.append(np.linalg.norm(tr.final_state.u - exact) / np.linalg.norm(exact))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_mass_drift_long_run(sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    tr = hc.evolve(sys32.K, s0, 0.01, 100.0, m0=sys32.m0, record_every=100)
    assert np.max(np.abs(tr.mass - 1.0)) <= 1e-12


def test_envelope_column(sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    tr = hc.evolve(sys32.K, s0, 0.02, 4.0, m0=sys32.m0, delta=0.04, c_l=1.0)
    assert tr.envelope[0] == pytest.approx(3.0 * tr.dev[0])
    assert np.allclose(tr.envelope, 3.0 * tr.dev[0] * np.exp(-0.04 * tr.t / 3.0))
    assert np.all(tr.dev <= tr.envelope + 1e-12)


def test_record_every_default_row_count(sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    tr = hc.evolve(sys32.K, s0, 0.01, 40.0, m0=sys32.m0)
    assert 1900 <= len(tr) <= 2101


def test_evolve_validation(sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    with pytest.raises(ValueError, match="dt"):
        hc.evolve(sys32.K, s0, -0.1, 1.0, m0=sys32.m0)
    with pytest.raises(ValueError, match="T"):
        hc.evolve(sys32.K, s0, 0.1, 0.05, m0=sys32.m0)
    with pytest.raises(ValueError, match="scheme"):
        hc.evolve(sys32.K, s0, 0.1, 1.0, scheme="leapfrog", m0=sys32.m0)
    with pytest.raises(ValueError, match="m0"):
        hc.evolve(sys32.K, s0, 0.1, 1.0)


def test_dense_expm_size_cap():
    s = System(nx=160, nv=16)  # n = 2560, above the dense propagator cap
    s0 = hc.make_initial("shifted_maxwellian", {}, s.sp, s.ls)
    with pytest.raises(ValueError, match="dense_expm"):
        hc.evolve(s.K, s0, 0.1, 1.0, scheme="dense_expm", m0=s.m0)


# --- rate fitting ------------------------------------------------------------

def test_fit_exact_exponential():
    t = np.linspace(0.0, 30.0, 400)
    dev = np.exp(-0.7 * t)
    tr = hc.DecayTrace(t=t, dev=dev, entropy=np.full_like(t, np.nan),
                       envelope=np.full_like(t, np.nan), mass=np.ones_like(t))
    rate, window = hc.fit_decay_rate(tr)
    assert rate == pytest.approx(0.7, abs=1e-6)
    assert window[0] < window[1]


def test_fit_requires_dynamic_range(sys32):
    s0 = hc.make_initial("mode_perturbation", {"eta": 0.0}, sys32.sp, sys32.ls)
    tr = hc.evolve(sys32.K, s0, 0.05, 3.0, m0=sys32.m0)
    with pytest.raises(ValueError, match="insufficient dynamic range"):
        hc.fit_decay_rate(tr)


def test_fit_rate_within_certified_bracket(sys64):
    sr = hc.spectral_gaps(sys64.l2, sys64.sp, sys64.ls)
    nl = hc.operator_norm(sys64.L, tol=1e-8)
    na = hc.operator_norm(sys64.Aop, tol=1e-8)
    _, delta, _ = hc.choose_epsilon(sr.alpha, sr.gamma, nl, na)
    s0 = hc.make_initial("shifted_maxwellian", {}, sys64.sp, sys64.ls)
    tr = hc.evolve(sys64.K, s0, 0.01, 40.0, m0=sys64.m0)
    rate, _ = hc.fit_decay_rate(tr)
    ks = hc.spectrum_K(sys64.K)
    assert delta / 3.0 <= rate <= ks.spec_abscissa * 1.05


# --- relative entropy ---------------------------------------------------------

def test_entropy_of_steady_state_vanishes(sys32):
    s = hc.State(u=sys32.m0.copy(), t=0.0, mass=1.0)
    assert abs(hc.relative_entropy(s, sys32.sp, sys32.ls)) <= 1e-10


def test_entropy_nonnegative_for_positive_data(sys32):
    s = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    assert hc.relative_entropy(s, sys32.sp, sys32.ls) >= -1e-10


def test_entropy_requires_unit_mass(sys32):
    s = hc.State(u=2.0 * sys32.m0, t=0.0, mass=2.0)
    with pytest.raises(ValueError, match="unit mass"):
        hc.relative_entropy(s, sys32.sp, sys32.ls)


def test_entropy_quad_order_validated(sys32):
    s = hc.State(u=sys32.m0.copy(), t=0.0, mass=1.0)
    with pytest.raises(ValueError, match="quad_order"):
        hc.relative_entropy(s, sys32.sp, sys32.ls, quad_order=sys32.nv)


def test_entropy_flags_sign_indefinite_data(sys32):
    s = hc.make_initial("mode_perturbation", {"eta": 3.0, "seed": 12}, sys32.sp, sys32.ls)
    _, frac = _entropy_with_stats(s.u, sys32.sp, sys32.ls, 2 * sys32.nv)
    assert frac > 1e-6  # strongly sign-indefinite by construction
    with pytest.warns(RuntimeWarning, match="sign-indefinite"):
        out = hc.relative_entropy(s, sys32.sp, sys32.ls)
    assert np.isnan(out)


def test_entropy_chain_along_trajectory(sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    tr = hc.evolve(sys32.K, s0, 0.02, 10.0, m0=sys32.m0, delta=0.04,
                   entropy_fn=hc.entropy_function(sys32.sp, sys32.ls))
    assert np.all(np.isfinite(tr.entropy))
    assert np.all(tr.entropy >= -1e-10)
    norms = np.sqrt(1.0 + tr.dev**2)  # unit mass: ||u||^2 = 1 + dev^2
    assert np.all(tr.entropy <= norms * tr.dev + 1e-8)
    # decay of the entropy along the certified envelope
    cor = 3.0 * norms[0] * tr.dev[0] * np.exp(-0.04 * tr.t / 3.0) + 1e-8
    assert np.all(tr.entropy <= cor)


def test_trace_csv_roundtrip(tmp_path, sys32):
    s0 = hc.make_initial("shifted_maxwellian", {}, sys32.sp, sys32.ls)
    tr = hc.evolve(sys32.K, s0, 0.05, 1.0, m0=sys32.m0)
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,dev,entropy,envelope,mass"
    back = np.genfromtxt(path, delimiter=",", skip_header=1)
    assert np.allclose(back[:, 1], tr.dev, rtol=0, atol=0)
    assert np.all(np.isnan(back[:, 2]))  # no entropy callback: sentinel column

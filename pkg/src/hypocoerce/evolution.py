"""Time integration, decay traces, rate fitting and relative entropy.

The conjugated unknown u solves du/dt + K u = 0.  Crank-Nicolson is the
default integrator: it is second order, unconditionally contractive on the
deviation from equilibrium (the symmetric part of K is PSD), and conserves
the discrete mass (u, m0) exactly because m0 is an exact left null vector
of K under the mimetic scheme.  Backward Euler is kept for strongly damped
sanity runs and a dense matrix exponential serves as the convergence
oracle at small sizes.

The decay observable is dev(t) = ||u - (u, m)*m|| against the exact
steady vector m (mimetic) or the numerically computed kernel vector of K
(centered), so the measured decay aligns with the semigroup invariant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.special import factorial

from .phase_assembly import PhaseOperator, steady_vector
from .spatial_ops import SpatialOps
from .velocity_ladder import LadderSet

INIT_KINDS = ("shifted_maxwellian", "mode_perturbation", "random")
EVOLVE_SCHEMES = ("crank_nicolson", "backward_euler", "dense_expm")

_EXPM_CAP = 2048
_CLIP_FLOOR = 1e-14
_CLIP_FRACTION_LIMIT = 1e-6


@dataclass
class State:
    u: np.ndarray
    t: float
    mass: float     # (u, m0), fixed to 1 at construction


@dataclass
class DecayTrace:
    """Columns recorded along an evolution, one row per recording time."""

    t: np.ndarray
    dev: np.ndarray
    entropy: np.ndarray     # nan when the data is sign-indefinite
    envelope: np.ndarray    # 3*dev(0)*exp(-delta*t/(3*C_L)), nan without a certificate
    mass: np.ndarray
    final_state: State | None = None   # carried for convergence studies, not serialized

    def write_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("t,dev,entropy,envelope,mass\n")
            for row in zip(self.t, self.dev, self.entropy, self.envelope, self.mass):
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")

    def __len__(self):
        return self.t.size


def hermite_xpoly_matrix(nv, v):
    """Orthonormal Hermite polynomials p_k(v), k < nv, at the given nodes.

    Probabilists' normalization: orthonormal against the standard Gaussian
    weight.  Three-term recurrence, rows indexed by node.
    """
    v = np.asarray(v, dtype=float)
    P = np.zeros((v.size, nv))
    P[:, 0] = 1.0
    if nv > 1:
        P[:, 1] = v
    for k in range(1, nv - 1):
        P[:, k + 1] = (v * P[:, k] - np.sqrt(k) * P[:, k - 1]) / np.sqrt(k + 1)
    return P


def gauss_hermite_weights(quad_order):
    """Gauss nodes and probability weights for the standard Gaussian measure."""
    nodes, w = np.polynomial.hermite_e.hermegauss(int(quad_order))
    return nodes, w / np.sqrt(2.0 * np.pi)


def make_initial(kind, params, sp_ops: SpatialOps, ls: LadderSet, m0=None):
    """Build an initial state with discrete mass (u0, m0) = 1.

    shifted_maxwellian: a Gaussian bump in both position and velocity,
    expanded in the grid/Hermite basis (the velocity expansion is closed
    form: coefficients proportional to v0^k/sqrt(k!)).  mode_perturbation:
    the steady vector plus eta times a seeded unit perturbation orthogonal
    to it.  random: seeded Gaussian coefficients.  Data whose raw mass is
    nonpositive is rejected since the entropy is then undefined.
    """
    if kind not in INIT_KINDS:
        raise ValueError(f"unknown initial kind {kind!r}, expected one of {INIT_KINDS}")
    params = dict(params or {})
    if m0 is None:
        m0 = steady_vector(sp_ops, ls)
    nx, nv = sp_ops.grid.nx, ls.nv
    n = nx * nv
    if kind == "shifted_maxwellian":
        x0 = float(params.get("x0", 1.0))
        v0 = float(params.get("v0", 0.5))
        sig = float(params.get("sigma", 1.0))
        if sig <= 0:
            raise ValueError("sigma must be > 0")
        x = sp_ops.grid.nodes
        g = np.exp(-((x - x0) ** 2) / (2.0 * sig**2) + sp_ops.potential.V(x) / 2.0)
        # the conjugated profile must decay toward the walls, which fails
        # once the bump is wider than the well (sigma^2 >= 2/curvature)
        if max(g[0], g[-1]) > 1e-3 * g.max():
            raise ValueError("sigma too large for the well: the conjugated "
                             "initial profile does not decay inside the grid")
        k = np.arange(nv)
        coeff = v0**k / np.sqrt(factorial(k))
        u = np.outer(g, coeff).ravel()
    elif kind == "mode_perturbation":
        eta = float(params.get("eta", 0.5))
        rng = np.random.default_rng(int(params.get("seed", 1234)))
        w = rng.standard_normal(n)
        w -= (w @ m0) * m0
        w /= np.linalg.norm(w)
        u = m0 + eta * w
    else:
        rng = np.random.default_rng(int(params.get("seed", 1234)))
        u = rng.standard_normal(n)
    raw_mass = float(u @ m0)
    if raw_mass <= 1e-12 * np.linalg.norm(u):
        raise ValueError("initial data rejected: discrete mass (u0, m0) <= 0, "
                         "relative entropy would be undefined")
    u = u / raw_mass
    return State(u=u, t=0.0, mass=1.0)


def evolve(K: PhaseOperator, s0: State, dt, T, scheme="crank_nicolson",
           m0=None, delta=None, c_l=1.0, record_every=None, entropy_fn=None,
           mass_vector=None):
    """Integrate du/dt + K u = 0 from s0 and record a DecayTrace.

    m0 is the reference direction for the decay observable (the exact
    steady vector, or the computed kernel vector of K for schemes without
    an exact one); mass_vector, defaulting to m0, is the direction whose
    overlap fills the mass column.  delta and c_l (>= 1) fill the certified
    envelope column when given.  entropy_fn(u) -> float fills the entropy
    column; it is evaluated on the initial state first and the whole column
    is nan when that is nan (sign-indefinite data).  record_every counts
    steps; the default keeps about 2000 rows.  A step that increases the
    deviation beyond roundoff slack aborts: the schemes are contractive, so
    that is a hard error.
    """
    dt = float(dt)
    T = float(T)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if T < dt:
        raise ValueError("T must be >= dt")
    if scheme not in EVOLVE_SCHEMES:
        raise ValueError(f"unknown evolve scheme {scheme!r}, expected one of {EVOLVE_SCHEMES}")
    if m0 is None:
        raise ValueError("evolve needs the steady vector m0 for the decay observable")
    if mass_vector is None:
        mass_vector = m0
    n = K.n
    steps = max(1, int(round(T / dt)))
    if record_every is None or record_every <= 0:
        record_every = max(1, int(round(T / 2000.0 / dt)))
    record_every = int(record_every)

    eye = sparse.identity(n)
    if scheme == "crank_nicolson":
        lhs = spla.splu((eye + (dt / 2.0) * K.mat).tocsc())
        rhs = (eye - (dt / 2.0) * K.mat).tocsr()
        def step(u):
            return lhs.solve(rhs @ u)
    elif scheme == "backward_euler":
        lhs = spla.splu((eye + dt * K.mat).tocsc())
        def step(u):
            return lhs.solve(u)
    else:
        if n > _EXPM_CAP:
            raise ValueError(f"dense_expm only for n <= {_EXPM_CAP} (got {n})")
        prop = scipy.linalg.expm(-dt * K.mat.toarray())
        def step(u):
            return prop @ u

    u = s0.u.copy()
    norm_u0 = np.linalg.norm(u)

    def deviation(w):
        return float(np.linalg.norm(w - (w @ m0) * m0))

    dev0 = deviation(u)
    entropy0 = float(entropy_fn(u)) if entropy_fn is not None else np.nan
    entropy_on = entropy_fn is not None and np.isfinite(entropy0)

    rows_t, rows_dev, rows_H, rows_env, rows_mass = [], [], [], [], []

    def record(t, w, dev_val, H=None):
        rows_t.append(t)
        rows_dev.append(dev_val)
        if H is None:
            H = float(entropy_fn(w)) if entropy_on else np.nan
        rows_H.append(H)
        if delta is not None:
            rows_env.append(3.0 * dev0 * np.exp(-delta * t / (3.0 * c_l)))
        else:
            rows_env.append(np.nan)
        rows_mass.append(float(w @ mass_vector))

    record(s0.t, u, dev0, H=entropy0)
    slack = 1e-12 * max(1.0, norm_u0)
    dev_prev = dev0
    for istep in range(1, steps + 1):
        u = step(u)
        dev_now = deviation(u)
        if dev_now > dev_prev * (1.0 + 1e-10) + slack:
            raise RuntimeError(
                f"non-contraction detected at step {istep} (t = {s0.t + istep * dt:.6g}): "
                f"deviation grew from {dev_prev:.6e} to {dev_now:.6e}")
        dev_prev = dev_now
        if istep % record_every == 0 or istep == steps:
            record(s0.t + istep * dt, u, dev_now)

    return DecayTrace(t=np.array(rows_t), dev=np.array(rows_dev),
                      entropy=np.array(rows_H), envelope=np.array(rows_env),
                      mass=np.array(rows_mass),
                      final_state=State(u=u, t=s0.t + steps * dt,
                                        mass=float(u @ mass_vector)))


def fit_decay_rate(trace: DecayTrace):
    """Least-squares exponential rate of the deviation decay.

    Fits ln(dev) against t over the rows where dev/dev(0) lies in
    [1e-6, 1e-1], the window where the dominant mode governs; returns the
    positive rate and the fitted (t_a, t_b) window.
    """
    dev = trace.dev
    usable = dev > 1e-13
    if int(usable.sum()) < 10:
        raise ValueError("insufficient dynamic range: fewer than 10 rows with "
                         "nonvanishing deviation")
    dev0 = dev[0]
    ratio = dev / dev0
    window = usable & (ratio <= 1e-1) & (ratio >= 1e-6)
    if int(window.sum()) < 2:
        raise ValueError("insufficient dynamic range: deviation never fell below "
                         "0.1 of its initial value")
    t_w = trace.t[window]
    slope, _ = np.polyfit(t_w, np.log(dev[window]), 1)
    return float(-slope), (float(t_w[0]), float(t_w[-1]))


def _entropy_with_stats(u, sp_ops: SpatialOps, ls: LadderSet, quad_order):
    """Relative entropy of the reconstructed density and the clipped-mass fraction."""
    nx, nv = sp_ops.grid.nx, ls.nv
    h = sp_ops.grid.h
    nodes, omega = gauss_hermite_weights(quad_order)
    P = hermite_xpoly_matrix(nv, nodes)              # (Q, nv)
    U = u.reshape(nx, nv)
    S = (U @ P.T) / np.sqrt(h)                        # density ratio f/M on the slice grid
    sr = np.maximum(sp_ops.phi0, 1e-30) / np.sqrt(h)  # sqrt of the spatial equilibrium
    cell_mass = (h * sr)[:, None] * omega[None, :]    # integration weights carrying sqrt(rho)
    clipped = S < _CLIP_FLOOR
    total = float(np.sum(cell_mass * np.abs(S)))
    clipped_mass = float(np.sum(cell_mass[clipped] * np.abs(S[clipped])))
    frac = clipped_mass / total if total > 0 else 0.0
    Sc = np.maximum(S, _CLIP_FLOOR)
    H = float(np.sum(cell_mass * Sc * np.log(Sc / sr[:, None])))
    return H, frac


def relative_entropy(s: State, sp_ops: SpatialOps, ls: LadderSet, quad_order=None):
    """Relative entropy H(f | equilibrium) of the state, by Gauss quadrature.

    The state is reconstructed pointwise on (grid nodes) x (Gauss nodes for
    the Gaussian velocity measure); values below the clip floor 1e-14 are
    clipped.  When the clipped |f|-mass fraction exceeds 1e-6 the density
    is significantly sign-indefinite and nan is returned (flagged result).
    Requires unit discrete mass.
    """
    nv = ls.nv
    if quad_order is None:
        quad_order = 2 * nv
    if quad_order < 2 * nv:
        raise ValueError("quad_order must be >= 2*nv for exact polynomial quadrature")
    m0 = steady_vector(sp_ops, ls)
    mass = float(s.u @ m0)
    if abs(mass - 1.0) > 1e-9:
        raise ValueError(f"relative entropy requires unit mass, got (u, m0) = {mass:.12g}")
    H, frac = _entropy_with_stats(s.u, sp_ops, ls, quad_order)
    if frac > _CLIP_FRACTION_LIMIT:
        warnings.warn(f"clipped-mass fraction {frac:.2e} > {_CLIP_FRACTION_LIMIT:.0e}: "
                      "density is sign-indefinite, entropy unreliable", RuntimeWarning)
        return float("nan")
    return H


def entropy_function(sp_ops: SpatialOps, ls: LadderSet, quad_order=None):
    """Vector-level entropy callback for evolve; nan for sign-indefinite data."""
    nv = ls.nv
    if quad_order is None:
        quad_order = 2 * nv

    def fn(u):
        H, frac = _entropy_with_stats(u, sp_ops, ls, quad_order)
        return float("nan") if frac > _CLIP_FRACTION_LIMIT else H

    return fn

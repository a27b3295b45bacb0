"""Command-line front end: config parsing, pipeline orchestration, reports.

One run executes the full chain

    potential -> spatial/velocity operators -> phase assembly
    -> spectral gaps -> operator norms -> certificate -> coercivity check
    -> time integration -> rate fit -> entropy tracking

and writes certificate.json, trace.csv and report.json into a fresh output
directory (an existing nonempty directory gets a timestamp suffix, runs
are never overwritten).  All reals are serialized with 17 significant
digits and the pipeline is deterministic for a fixed config, including the
seeds, so repeated runs produce byte-identical certificate and trace
files.

Exit codes: 0 all stages and invariant checks pass; 2 config validation
error; 3 a certified inequality check failed (scientific failure); 1 an
unexpected stage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import selftest as selftest_mod
from .certificate import analytic_norm_bounds, choose_epsilon, make_certificate
from .evolution import (entropy_function, evolve, fit_decay_rate, make_initial,
                        EVOLVE_SCHEMES, INIT_KINDS)
from .phase_assembly import (assemble_A_operator, assemble_K, assemble_L,
                             assemble_lambda2, assemble_transport,
                             export_matrix_market, projector_pi0, projector_pi1)
from .potential import KINDS, derivative_bounds, make_potential
from .spatial_ops import SCHEMES, build_spatial_ops, make_grid
from .spectral import kernel_vector, operator_norm, spectral_gaps, spectrum_K
from .velocity_ladder import build_ladder

SUBCOMMANDS = ("gap", "certify", "evolve", "selftest", "sweep")


class ConfigError(ValueError):
    """Configuration validation failure, carrying the offending field path."""

    def __init__(self, fld, reason):
        self.field = fld
        self.reason = reason
        super().__init__(f"{fld}: {reason}")


def default_config():
    """The reference configuration: harmonic well, unit relaxation rate."""
    return {
        "potential": {"kind": "harmonic", "lambda": 1.0, "beta": 0.0, "omega": 1.0},
        "gamma": 1.0,
        "grid": {"R": 8.0, "nx": 128},
        "nv": 16,
        "scheme": "mimetic",
        "solver": {"rtol": 1e-10, "max_iter": 5000, "seed": 42, "spectrum_cap": 600},
        "evolve": {"dt": 0.01, "T": 40.0, "scheme": "crank_nicolson", "record_every": 0},
        "init": {"kind": "shifted_maxwellian",
                 "params": {"x0": 1.0, "v0": 0.5, "sigma": 1.0}},
        "outputs": {"dir": "runs/default", "emit_operators": False},
    }


@dataclass
class RunConfig:
    potential: object
    gamma: float
    R: float
    nx: int
    nv: int
    scheme: str
    rtol: float
    max_iter: int
    seed: int
    spectrum_cap: int
    dt: float
    T: float
    evolve_scheme: str
    record_every: int
    init_kind: str
    init_params: dict
    out_dir: str
    emit_operators: bool
    raw: dict = field(repr=False, default_factory=dict)


def _get(cfg, path, default=None, required=False):
    cur = cfg
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if required:
                raise ConfigError(path, "missing required field")
            return default
        cur = cur[part]
    return cur


def _need_number(cfg, path, default=None, low=None, high=None, integer=False,
                 low_strict=False):
    v = _get(cfg, path, default=default, required=default is None)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if low is not None and (v <= low if low_strict else v < low):
        cmp = ">" if low_strict else ">="
        raise ConfigError(path, f"must be {cmp} {low}, got {v}")
    if high is not None and v > high:
        raise ConfigError(path, f"must be <= {high}, got {v}")
    return int(v) if integer else float(v)


def validate_config(cfg):
    """Validate a raw config dict and build the Potential; raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    kind = _get(cfg, "potential.kind", required=True)
    if kind not in KINDS:
        raise ConfigError("potential.kind", f"expected one of {KINDS}, got {kind!r}")
    lam = _need_number(cfg, "potential.lambda")
    beta = _need_number(cfg, "potential.beta", default=0.0)
    omega = _need_number(cfg, "potential.omega", default=1.0)
    try:
        pot = make_potential(kind, lam, beta=beta, omega=omega)
    except ValueError as exc:
        msg = str(exc)
        fld = ("potential.lambda" if "lam" in msg or "confining" in msg
               else "potential.beta" if "beta" in msg else "potential.omega")
        raise ConfigError(fld, msg) from exc

    gamma = _need_number(cfg, "gamma", low=0, low_strict=True)
    R = _need_number(cfg, "grid.R", low=0, low_strict=True)
    nx = _need_number(cfg, "grid.nx", low=8, integer=True)
    nv = _need_number(cfg, "nv", integer=True)
    if nv < 2:
        raise ConfigError("nv", "must be >= 2: the collision operator is degenerate otherwise")
    scheme = _get(cfg, "scheme", default="mimetic")
    if scheme not in SCHEMES:
        raise ConfigError("scheme", f"expected one of {SCHEMES}, got {scheme!r}")

    rtol = _need_number(cfg, "solver.rtol", default=1e-10, low=0, low_strict=True)
    if rtol > 1e-8:
        raise ConfigError("solver.rtol", f"must be <= 1e-8, got {rtol}")
    max_iter = _need_number(cfg, "solver.max_iter", default=5000, low=1, integer=True)
    seed = _need_number(cfg, "solver.seed", default=42, integer=True)
    spectrum_cap = _need_number(cfg, "solver.spectrum_cap", default=600, low=0, integer=True)

    dt = _need_number(cfg, "evolve.dt", default=0.01, low=0, low_strict=True)
    T = _need_number(cfg, "evolve.T", default=40.0)
    if T < dt:
        raise ConfigError("evolve.T", f"must be >= dt = {dt}, got {T}")
    evolve_scheme = _get(cfg, "evolve.scheme", default="crank_nicolson")
    if evolve_scheme not in EVOLVE_SCHEMES:
        raise ConfigError("evolve.scheme", f"expected one of {EVOLVE_SCHEMES}, got {evolve_scheme!r}")
    record_every = _need_number(cfg, "evolve.record_every", default=0, low=0, integer=True)

    init_kind = _get(cfg, "init.kind", default="shifted_maxwellian")
    if init_kind not in INIT_KINDS:
        raise ConfigError("init.kind", f"expected one of {INIT_KINDS}, got {init_kind!r}")
    init_params = _get(cfg, "init.params", default={})
    if not isinstance(init_params, dict):
        raise ConfigError("init.params", "expected an object")

    out_dir = _get(cfg, "outputs.dir", default="runs/run")
    emit_ops = bool(_get(cfg, "outputs.emit_operators", default=False))

    return RunConfig(potential=pot, gamma=gamma, R=R, nx=nx, nv=nv, scheme=scheme,
                     rtol=rtol, max_iter=max_iter, seed=seed, spectrum_cap=spectrum_cap,
                     dt=dt, T=T, evolve_scheme=evolve_scheme, record_every=record_every,
                     init_kind=init_kind, init_params=dict(init_params),
                     out_dir=out_dir, emit_operators=emit_ops, raw=cfg)


# ---------------------------------------------------------------------------
# deterministic JSON with 17 significant digits

def _json_fmt(obj, indent=0):
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  "{k}": {_json_fmt(v, indent + 2)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_json_fmt(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if np.isnan(obj) or np.isinf(obj):
            return "null"
        return format(float(obj), ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(obj, path):
    Path(path).write_text(_json_fmt(obj) + "\n")


def resolve_out_dir(path):
    """Create a fresh run directory; suffix with a timestamp on collision."""
    def taken(q):
        return q.exists() and (not q.is_dir() or any(q.iterdir()))

    p = Path(path)
    if taken(p):
        stamp = time.strftime("%Y%m%d-%H%M%S")
        candidate = Path(f"{path}-{stamp}")
        k = 1
        while taken(candidate):
            candidate = Path(f"{path}-{stamp}-{k}")
            k += 1
        p = candidate
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# pipeline

@dataclass
class RunReport:
    spectral: dict | None
    certificate: dict | None
    trace_path: str | None
    fitted_rate: float | None
    invariant_suite: list
    stages: list
    analytic_certificate: dict | None = None
    fit_window: tuple | None = None

    def to_dict(self):
        return {
            "spectral": self.spectral,
            "certificate": self.certificate,
            "analytic_certificate": self.analytic_certificate,
            "trace_path": self.trace_path,
            "fitted_rate": self.fitted_rate,
            "fit_window": list(self.fit_window) if self.fit_window else None,
            "invariant_suite": [
                {"name": n, "passed": ok, "value": v} for n, ok, v in self.invariant_suite
            ],
            "stages": self.stages,
        }


def run(config, out=None, stop_after="evolve"):
    """Execute the pipeline for a config (path, or dict) and write reports.

    stop_after selects the subcommand depth: "gap" stops after the spectral
    stage, "certify" after the coercivity verification, "evolve" runs the
    full chain.  Returns (RunReport, out_dir).
    """
    if isinstance(config, (str, os.PathLike)):
        cfg_raw = json.loads(Path(config).read_text())
    else:
        cfg_raw = config
    rc = validate_config(cfg_raw)
    out_dir = resolve_out_dir(out or rc.out_dir)

    stages = []
    checks = []
    report = RunReport(spectral=None, certificate=None, trace_path=None,
                       fitted_rate=None, invariant_suite=checks, stages=stages)

    def stage(name, fn):
        try:
            result = fn()
            stages.append({"name": name, "status": "ok"})
            return result
        except Exception as exc:
            stages.append({"name": name, "status": "failed", "error": str(exc)})
            raise

    try:
        ctx = stage("assemble", lambda: _assemble(rc))
        if rc.emit_operators:
            stage("emit_operators", lambda: _emit_operators(ctx, out_dir))

        sr = stage("spectral", lambda: spectral_gaps(ctx["l2"], ctx["sp"], ctx["ls"]))
        report.spectral = {"tau": sr.tau, "alpha": sr.alpha, "gamma": sr.gamma,
                           "lambda0": sr.lambda0, "spec_abscissa_K": sr.spec_abscissa_K}
        checks.append(("alpha_equals_min_tau_gamma",
                       abs(sr.alpha - min(sr.tau, sr.gamma)) <= 1e-10,
                       abs(sr.alpha - min(sr.tau, sr.gamma))))
        if ctx["n"] <= rc.spectrum_cap:
            ks = stage("spectrum_K", lambda: spectrum_K(ctx["K"]))
            sr.spec_abscissa_K = ks.spec_abscissa
            report.spectral["spec_abscissa_K"] = ks.spec_abscissa
        if stop_after == "gap":
            _finalize(report, out_dir)
            return report, out_dir

        cert = stage("certificate", lambda: _certify(rc, ctx, sr))
        report.certificate = cert.to_dict()
        eps_a, delta_a, A_a = choose_epsilon(sr.alpha, sr.gamma, cert.boundL, cert.boundA)
        report.analytic_certificate = {"epsilon": eps_a, "delta": delta_a, "A_const": A_a}
        write_json(cert.to_dict(), out_dir / "certificate.json")
        checks.append(("delta_positive", cert.delta > 0, cert.delta))
        checks.append(("epsilon_leq_gamma_over_8", cert.epsilon <= sr.gamma / 8 + 1e-15,
                       cert.epsilon))
        checks.append(("epsilon_normL_leq_1", cert.epsilon * cert.normL_num <= 1 + 1e-12,
                       cert.epsilon * cert.normL_num))
        checks.append(("boundL_dominates", cert.boundL >= cert.normL_num,
                       cert.boundL - cert.normL_num))
        checks.append(("boundA_dominates", cert.boundA >= cert.normA_num,
                       cert.boundA - cert.normA_num))
        checks.append(("analytic_delta_weaker_but_valid",
                       0 < delta_a <= cert.delta + 1e-15, delta_a))
        if cert.lambda_min_verified is not None:
            checks.append(("coercivity_ratio_geq_0.9", cert.verified,
                           cert.lambda_min_verified / cert.delta))
        if stop_after == "certify":
            _finalize(report, out_dir)
            return report, out_dir

        trace = stage("evolve", lambda: _evolve(rc, ctx, cert))
        trace.write_csv(out_dir / "trace.csv")
        report.trace_path = str(out_dir / "trace.csv")
        checks.append(("envelope_respected",
                       bool(np.all(trace.dev <= trace.envelope + 1e-12)),
                       float(np.max(trace.dev - trace.envelope))))
        if rc.scheme == "mimetic":
            drift = float(np.max(np.abs(trace.mass - 1.0)))
            checks.append(("mass_conserved", drift <= 1e-12, drift))
        if np.all(np.isfinite(trace.entropy)):
            checks.append(("entropy_nonnegative",
                           bool(np.all(trace.entropy >= -1e-10)),
                           float(trace.entropy.min())))
            norms = np.sqrt(1.0 + trace.dev**2)  # unit mass: ||u||^2 = 1 + dev^2
            bound = norms * trace.dev + 1e-8
            checks.append(("entropy_pointwise_bound",
                           bool(np.all(trace.entropy <= bound)),
                           float(np.max(trace.entropy - bound))))

        try:
            rate, window = fit_decay_rate(trace)
            report.fitted_rate = rate
            report.fit_window = window
            checks.append(("fitted_rate_geq_certified", rate >= cert.decay_rate - 1e-12,
                           rate))
        except ValueError as exc:
            stages.append({"name": "fit_decay_rate", "status": "skipped", "error": str(exc)})
    except Exception:
        _finalize(report, out_dir)
        raise

    _finalize(report, out_dir)
    return report, out_dir


def _finalize(report, out_dir):
    write_json(report.to_dict(), out_dir / "report.json")


def _assemble(rc: RunConfig):
    ls = build_ladder(rc.nv, rc.gamma)
    grid = make_grid(rc.R, rc.nx)
    sp = build_spatial_ops(grid, rc.potential, rc.gamma, scheme=rc.scheme)
    x0 = assemble_transport(sp, ls)
    K = assemble_K(x0, ls)
    l2 = assemble_lambda2(sp, ls)
    L = assemble_L(sp, ls, l2)
    Aop = assemble_A_operator(sp, ls, l2, rc.potential)
    pi0 = projector_pi0(sp, ls)
    return {"ls": ls, "grid": grid, "sp": sp, "x0": x0, "K": K, "l2": l2,
            "L": L, "Aop": Aop, "pi0": pi0, "n": rc.nx * rc.nv}


def _emit_operators(ctx, out_dir):
    for name, op in (("X0", ctx["x0"]), ("K", ctx["K"]), ("Lambda2", ctx["l2"]),
                     ("Pi1", projector_pi1(ctx["sp"], ctx["ls"]))):
        export_matrix_market(op, out_dir / f"{name}.mtx")


def _certify(rc: RunConfig, ctx, sr):
    normL = operator_norm(ctx["L"], tol=min(rc.rtol * 100, 1e-6),
                          max_iter=rc.max_iter, seed=rc.seed)
    normA = operator_norm(ctx["Aop"], tol=min(rc.rtol * 100, 1e-6),
                          max_iter=rc.max_iter, seed=rc.seed)
    M2, M3 = derivative_bounds(rc.potential)
    boundL, boundA = analytic_norm_bounds(rc.gamma, M2, M3)
    return make_certificate(sr, normL, normA, boundL, boundA,
                            K=ctx["K"], L=ctx["L"], Pi0=ctx["pi0"])


def _evolve(rc: RunConfig, ctx, cert):
    s0 = make_initial(rc.init_kind, rc.init_params, ctx["sp"], ctx["ls"],
                      m0=ctx["pi0"].m0)
    # the mimetic steady vector is exact; the centered scheme measures the
    # deviation against the computed kernel eigenvector of K instead
    m_dev = ctx["pi0"].m0
    if rc.scheme == "centered":
        m_dev = kernel_vector(ctx["K"], ctx["pi0"].m0)
    c_l = max(1.0, cert.epsilon * cert.normL_num)
    return evolve(ctx["K"], s0, rc.dt, rc.T, scheme=rc.evolve_scheme,
                  m0=m_dev, delta=cert.delta, c_l=c_l,
                  record_every=rc.record_every or None,
                  entropy_fn=entropy_function(ctx["sp"], ctx["ls"]),
                  mass_vector=ctx["pi0"].m0)


# ---------------------------------------------------------------------------
# sweep

def sweep(config, out=None):
    """Cartesian sweep over the gamma/beta/nx lists in config["sweep"].

    Writes one run directory per point plus summary.csv with columns
    gamma,beta,nx,alpha,delta,fitted_rate.  Points execute concurrently,
    bounded by HYPOCOERCE_THREADS (default: processor count).
    """
    if isinstance(config, (str, os.PathLike)):
        cfg_raw = json.loads(Path(config).read_text())
    else:
        cfg_raw = config
    base = {k: v for k, v in cfg_raw.items() if k != "sweep"}
    rc = validate_config(base)  # validate the base once, loudly
    lists = cfg_raw.get("sweep", {})
    gammas = lists.get("gamma", [rc.gamma])
    betas = lists.get("beta", [rc.potential.beta])
    nxs = lists.get("nx", [rc.nx])
    out_dir = resolve_out_dir(out or rc.out_dir)

    points = [(g, b, int(nx)) for g in gammas for b in betas for nx in nxs]

    def one(point):
        g, b, nx = point
        cfg = json.loads(json.dumps(base))
        cfg["gamma"] = g
        cfg["potential"]["beta"] = b
        if b != 0 and cfg["potential"]["kind"] == "harmonic":
            cfg["potential"]["kind"] = "harmonic_cosine"
        cfg["grid"]["nx"] = nx
        sub = out_dir / f"g{float(g):g}_b{float(b):g}_nx{nx}"
        report, _ = run(cfg, out=sub, stop_after="evolve")
        return (g, b, nx, report.spectral["alpha"], report.certificate["delta"],
                report.fitted_rate)

    workers = int(lists.get("workers", os.cpu_count() or 1))
    env = os.environ.get("HYPOCOERCE_THREADS")
    if env:
        workers = min(workers, int(env))
    workers = max(1, min(workers, len(points)))
    if workers == 1:
        rows = [one(pt) for pt in points]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, points))

    with open(out_dir / "summary.csv", "w", newline="\n") as fh:
        fh.write("gamma,beta,nx,alpha,delta,fitted_rate\n")
        for g, b, nx, alpha, delta, rate in rows:
            fh.write(f"{format(float(g), '.17g')},{format(float(b), '.17g')},{nx},"
                     f"{format(alpha, '.17g')},{format(delta, '.17g')},"
                     f"{format(rate, '.17g') if rate is not None else 'nan'}\n")
    return out_dir


# ---------------------------------------------------------------------------
# CLI

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hypocoerce",
        description="Certified exponential relaxation rates for a kinetic "
                    "transport-relaxation equation in a confining potential.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("gap", "compute spectral gaps and stop"),
            ("certify", "compute and verify the decay certificate"),
            ("evolve", "full pipeline: certificate plus time integration"),
            ("sweep", "cartesian sweep over gamma/beta/nx lists"),
            ("selftest", "run the built-in invariant suite on fixed small configs")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=(name != "selftest"),
                       help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)

    if args.command == "selftest":
        results = selftest_mod.run_selftest()
        failed = [r for r in results if not r[1]]
        for name, ok, value in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  ({value:.3e})")
        print(f"{len(results) - len(failed)}/{len(results)} invariant checks passed")
        return 0 if not failed else 3

    try:
        if args.command == "sweep":
            out_dir = sweep(args.config, out=args.out)
            print(f"sweep complete: {out_dir}")
            return 0
        report, out_dir = run(args.config, out=args.out, stop_after=args.command
                              if args.command in ("gap", "certify") else "evolve")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 1

    failed = [c for c in report.invariant_suite if not c[1]]
    for name, ok, value in report.invariant_suite:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({value:.6g})")
    print(f"outputs: {out_dir}")
    if failed:
        print(f"{len(failed)} certified checks failed", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

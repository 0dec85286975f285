"""Batch driver: every experiment as a subcommand with JSON configs and
CSV/NDJSON outputs plus a reproducibility manifest per run.

Outputs are deterministic for a fixed seed.  Exit codes: 0 success,
2 configuration/schema error, 3 numerical failure (a diagnostics file is
written in that case).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .operators import (GramFlavor, OperatorKind, assemble_linearized,
                        build_discretization, sobolev_gram)
from .profiles import BetaBranch, EquationKind, ProfileParams, profile_eval
from .evolve import (Field2, Nonlinearity, integrate, lyapunov_perron,
                     mode_growth_rates, stable_decay)
from .physical import (detect_blowup_time_cone, family_cauchy_data,
                       fit_modulation, similarity_rate_check, solve_physical)
from .spectrum import (eigen_scan, eigenfunction_identities, mode_stability_sweep,
                       mode_vectors, projections)

DEFAULTS = {"k": 5, "N": 64, "w0": 0.9, "delta": 0.1, "ds": None, "seed": 0}
CSV_FMT = "%.17g"


def _beta_branch(spec: str) -> BetaBranch:
    if spec in ("inf", "infinity"):
        return BetaBranch.infinity()
    if spec in ("0", "zero"):
        return BetaBranch.zero()
    return BetaBranch.finite(float(spec))


def _eq_kind(spec: str) -> EquationKind:
    try:
        return EquationKind(spec)
    except ValueError:
        raise ConfigError(f"unknown equation kind {spec!r}; use nonnull or nullform")


class ConfigError(Exception):
    pass


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}")
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(loaded)
    for key, val in vars(args).items():
        if key in ("config", "command", "func") or val is None:
            continue
        cfg[key] = val
    return cfg


def _write_manifest(outdir: Path, command: str, cfg: dict, files: list) -> None:
    canon = json.dumps({k: cfg[k] for k in sorted(cfg)}, sort_keys=True, default=str)
    manifest = {
        "command": command,
        "config": json.loads(canon),
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "version": __version__,
        "numpy": np.__version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "files": files,
    }
    import scipy
    manifest["scipy"] = scipy.__version__
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _outdir(cfg: dict) -> Path:
    out = Path(cfg.get("outdir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_profile(cfg: dict) -> list:
    out = _outdir(cfg)
    eq = _eq_kind(cfg.get("eq", "nonnull"))
    beta = _beta_branch(str(cfg.get("beta", "inf")))
    alpha = float(cfg.get("alpha", 1.0))
    n = int(cfg.get("emit_grid", 101))
    interior = eq is EquationKind.NON_NULL and beta.kind.value == "finite"
    ys = np.linspace(-1.0, 1.0, n + 2)[1:-1] if interior else np.linspace(-1.0, 1.0, n)
    rows = []
    for y in ys:
        U, Up, Vt, Vs = profile_eval(eq, alpha, beta, float(y))
        rows.append((y, U, Up, Vt, Vs))
    path = out / "profile.csv"
    np.savetxt(path, np.array(rows), delimiter=",", fmt=CSV_FMT,
               header="y,U,Uprime,V_time,V_space", comments="")
    return [path.name]


def cmd_spectrum(cfg: dict) -> list:
    out = _outdir(cfg)
    alpha = float(cfg.get("alpha", 1.0))
    beta = cfg.get("beta")
    if beta is not None:
        kind = OperatorKind.L2_ALPHA_BETA
        beta = float(beta)
    else:
        kind = OperatorKind(cfg.get("kind", "l_alpha"))
    rep = eigen_scan(kind, alpha, beta, N=int(cfg["N"]),
                     filter_tol=float(cfg.get("filter_tol", 1e-5)))
    jpath = out / "spectrum.json"
    rep.to_json(str(jpath))
    files = [jpath.name]
    if cfg.get("emit_vectors"):
        vpath = out / "eigenvectors.csv"
        rep.vectors_to_csv(str(vpath))
        files.append(vpath.name)
    return files


def cmd_modes(cfg: dict) -> list:
    out = _outdir(cfg)
    alpha = float(cfg.get("alpha", 1.0))
    N = int(cfg["N"])
    k = int(cfg["k"])
    ident = eigenfunction_identities(alpha, N=min(N, 48))
    grid = build_discretization(N)
    op = assemble_linearized(OperatorKind.L_ALPHA, grid, alpha)
    gram = sobolev_gram(grid, k, GramFlavor.PAIR_HK)
    basis = projections(op, gram)
    bio = np.empty((3, 3))
    vecs = (basis.f0, basis.f1, basis.g0)
    for i in range(3):
        for j in range(3):
            bio[i, j] = gram.inner(vecs[i], basis.duals[j]).real
    payload = {
        "alpha": alpha, "N": N, "k": k,
        "identities": ident,
        "trace_P0": float(np.trace(basis.P0).real),
        "trace_P1": float(np.trace(basis.P1).real),
        "biorthogonality_error": float(np.max(np.abs(bio - np.eye(3)))),
    }
    path = out / "modes.json"
    path.write_text(json.dumps(payload, indent=2))
    return [path.name]


def cmd_evolve(cfg: dict) -> list:
    out = _outdir(cfg)
    alpha = float(cfg.get("alpha", 1.0))
    N = int(cfg["N"])
    grid = build_discretization(N)
    op = assemble_linearized(OperatorKind.L_ALPHA, grid, alpha)
    rates = mode_growth_rates(op, ds=cfg.get("ds"))
    mode = cfg.get("mode", "f1")
    f0, f1, g0 = mode_vectors(alpha, grid)
    q0 = Field2.from_vec({"f0": f0, "f1": f1, "g0": g0}[mode], grid)
    traj = integrate(op, Nonlinearity(cfg.get("nonlinearity", "none")), q0,
                     s_end=float(cfg.get("s_end", 2.0)), ds=cfg.get("ds"),
                     record_every=20)
    tpath = out / "trajectory.ndjson"
    traj.to_ndjson(str(tpath), full_state=bool(cfg.get("full_state", False)), grid=grid)
    rpath = out / "mode_rates.json"
    rpath.write_text(json.dumps(rates, indent=2))
    return [tpath.name, rpath.name]


def cmd_lyapunov(cfg: dict) -> list:
    out = _outdir(cfg)
    alpha = float(cfg.get("alpha", 1.0))
    N = int(cfg["N"])
    k = int(cfg["k"])
    eps = float(cfg.get("eps", 1e-3))
    grid = build_discretization(N)
    op = assemble_linearized(OperatorKind.L_ALPHA, grid, alpha)
    gram = sobolev_gram(grid, k, GramFlavor.PAIR_HK)
    basis = projections(op, gram)
    rng = np.random.default_rng(int(cfg["seed"]))
    y = grid.nodes
    raw = Field2(np.polyval(rng.standard_normal(4), y),
                 np.polyval(rng.standard_normal(3), y), grid)
    scale = eps / gram.norm(raw.vec())
    f = Field2(raw.q1 * scale, raw.q2 * scale, grid)
    res = lyapunov_perron(op, f, basis, w0=float(cfg["w0"]),
                          s_end=float(cfg.get("s_end", 8.0)))
    tpath = out / "lp_trajectory.ndjson"
    res.trajectory.to_ndjson(str(tpath))
    payload = {
        "alpha": alpha, "eps": eps, "w0": cfg["w0"],
        "contraction_factor": res.contraction_factor,
        "iterations": res.iterations,
        "xnorm": res.xnorm,
        "xnorm_over_f": res.xnorm / eps,
        "resubstitution": res.resubstitution,
    }
    jpath = out / "lyapunov.json"
    jpath.write_text(json.dumps(payload, indent=2))
    return [tpath.name, jpath.name]


def _physical_runs(cfg: dict):
    eq = _eq_kind(cfg.get("eq", "nonnull"))
    T0 = float(cfg.get("T0", 1.0))
    x0 = float(cfg.get("x0", 0.0))
    L = float(cfg.get("L", 1.25 * T0))
    dx = float(cfg.get("dx", 1.25e-4))
    eps = float(cfg.get("perturb", 0.0))
    x = np.arange(x0 - L, x0 + L + dx / 2.0, dx)
    if eq is EquationKind.NON_NULL:
        alpha0 = float(cfg.get("alpha0", 1.0))
        beta = _beta_branch(str(cfg.get("beta0", "inf")))
    else:
        alpha0 = float(cfg.get("alpha0", 1.0))
        beta = BetaBranch.finite(float(cfg.get("beta0", 1.0)))
    f = eps * np.cos(2.3 * (x - x0) + 0.4)
    g = eps * np.sin(1.7 * (x - x0) - 0.3)
    data = family_cauchy_data(eq, alpha0, beta, float(cfg.get("kappa0", 0.0)),
                              T0, x0, x, f=f, g=g)
    return solve_physical(data, cfl=float(cfg.get("cfl", 0.9)),
                          t_end=float(cfg.get("t_end", 0.995 * T0)),
                          n_snaps=int(cfg.get("n_snaps", 140)))


def cmd_physical(cfg: dict) -> list:
    out = _outdir(cfg)
    result = _physical_runs(cfg)
    Tstar = detect_blowup_time_cone(result)
    path = out / "physical.ndjson"
    with open(path, "w") as fh:
        x = result.data.x
        for sn in result.snapshots:
            m = result.valid_mask(sn.t)
            fh.write(json.dumps({
                "t": sn.t,
                "max_ut": float(np.max(np.abs(sn.ut[m]))),
            }) + "\n")
    jpath = out / "detection.json"
    jpath.write_text(json.dumps({
        "stop_reason": result.stop_reason,
        "T_star_detected": Tstar,
    }, indent=2))
    return [path.name, jpath.name]


def cmd_rates(cfg: dict) -> list:
    out = _outdir(cfg)
    result = _physical_runs(cfg)
    Tstar = detect_blowup_time_cone(result)
    if Tstar is None:
        raise RuntimeError("no blow-up detected; rate experiment undefined")
    fit = fit_modulation(result, Tstar)
    slopes = similarity_rate_check(result, fit,
                                   s_levels=tuple(cfg.get("s_levels", (0, 1, 2))))
    fit.rate_exponents = slopes
    jpath = out / "fit.json"
    jpath.write_text(json.dumps({
        "eq": result.data.eq.value,
        "T_star": fit.T_star,
        "alpha_star": fit.alpha_star,
        "beta_star": fit.beta_star,
        "kappa_star": fit.kappa_star,
        "branch": fit.branch,
        "fit_residual": fit.fit_residual,
        "delta": cfg["delta"],
    }, indent=2))
    cpath = out / "rates.csv"
    rows = [(s, slopes[s]) for s in sorted(slopes)]
    np.savetxt(cpath, np.array(rows), delimiter=",", fmt=CSV_FMT,
               header="s,exponent", comments="")
    return [jpath.name, cpath.name]


def cmd_report(cfg: dict) -> list:
    out = _outdir(cfg)
    threads = int(os.environ.get("BLOWUPLAB_THREADS", "0")) or None
    reports = mode_stability_sweep(N=int(cfg["N"]), threads=threads)
    payload = []
    for rep in reports:
        payload.append({
            "kind": rep.kind.value,
            "alpha": rep.alpha,
            "beta": rep.beta,
            "unstable": [[m.value.real, m.value.imag] for m in rep.unstable],
            "unstable_is_zero_one": rep.unstable_is_zero_one(),
            "stable_max_re": max((m.value.real for m in rep.accepted
                                  if m.value.real <= rep.unstable_threshold),
                                 default=None),
        })
    path = out / "report.json"
    path.write_text(json.dumps(payload, indent=2))
    return [path.name]


COMMANDS = {
    "profile": cmd_profile,
    "spectrum": cmd_spectrum,
    "modes": cmd_modes,
    "evolve": cmd_evolve,
    "lyapunov": cmd_lyapunov,
    "physical": cmd_physical,
    "rates": cmd_rates,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowuplab",
                                 description="self-similar blow-up laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    common = dict(config=("--config", str), outdir=("--outdir", str),
                  N=("--N", int), k=("--k", int), seed=("--seed", int),
                  w0=("--w0", float), delta=("--delta", float), ds=("--ds", float))
    specs = {
        "profile": dict(eq=("--eq", str), alpha=("--alpha", float),
                        beta=("--beta", str), emit_grid=("--emit-grid", int)),
        "spectrum": dict(alpha=("--alpha", float), beta=("--beta", float),
                         kind=("--kind", str), filter_tol=("--filter-tol", float),
                         emit_vectors=("--emit-vectors", int)),
        "modes": dict(alpha=("--alpha", float)),
        "evolve": dict(alpha=("--alpha", float), mode=("--mode", str),
                       nonlinearity=("--nonlinearity", str), s_end=("--s-end", float)),
        "lyapunov": dict(alpha=("--alpha", float), eps=("--eps", float),
                         s_end=("--s-end", float)),
        "physical": dict(eq=("--eq", str), alpha0=("--alpha0", float),
                         beta0=("--beta0", str), T0=("--T0", float),
                         perturb=("--perturb", float), dx=("--dx", float),
                         L=("--L", float), cfl=("--cfl", float),
                         t_end=("--t-end", float)),
        "rates": dict(eq=("--eq", str), alpha0=("--alpha0", float),
                      beta0=("--beta0", str), T0=("--T0", float),
                      perturb=("--perturb", float), dx=("--dx", float),
                      L=("--L", float), t_end=("--t-end", float)),
        "report": dict(),
    }
    for name, extra in specs.items():
        p = sub.add_parser(name)
        for dest, (flag, typ) in {**common, **extra}.items():
            p.add_argument(flag, dest=dest, type=typ, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        files = COMMANDS[args.command](cfg)
        _write_manifest(_outdir(cfg), args.command, cfg, files)
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as e:
        out = _outdir(cfg)
        (out / "diagnostics.json").write_text(json.dumps({
            "command": args.command,
            "error": str(e),
            "type": type(e).__name__,
        }, indent=2))
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: solve, recover, certify, particles, sweep, threedelta.

Settings come from an optional flat ``key = value`` config file; command-line
flags override it.  Every command writes its artifacts plus ``summary.json``
into the output directory.  Exit codes: 0 ok, 2 config error, 3 solver
failure, 4 certification inconsistency.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import CertificateInconsistent, DivergentRatio, InternalError, ParameterDomainError, ShapeError, SolverError
from .grid import Grid
from .potential import PotentialSpec, build_potential, load_tabulated
from .spectral import cosine_coefficients, wavenumbers

SCHEMA = 1
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT = 0, 2, 3, 4

log = logging.getLogger("pairrelax")

# key -> (type, default)
KEYS = {
    "family": (str, "morse1d"),
    "tabulated": (str, None),
    "sigma": (float, None),
    "L": (float, None),
    "G": (float, None),
    "lc": (float, None),
    "eps": (float, None),
    "coef": (float, None),
    "width": (float, None),
    "amplitude": (float, None),
    "n": (int, 800),
    "lp_tol": (float, 1e-8),
    "max_iter": (int, 200),
    "tol1": (float, 1e-10),
    "tol2": (float, 1e-8),
    "max_iters": (int, 100_000),
    "seeds": (str, "0,1,2"),
    "out": (str, "out"),
    "N": (int, 400),
    "dt": (float, 8.0),
    "t_end": (float, 4000.0),
    "snapshot_every": (int, 50),
    "bins": (int, 50),
    "seed": (int, 0),
    "L_min": (float, 0.1),
    "L_max": (float, 2.0),
    "G_min": (float, 0.1),
    "G_max": (float, 2.0),
    "L_steps": (int, 10),
    "G_steps": (int, 10),
    "steps": (int, None),
    "recover": (str, "false"),
    "workers": (int, 1),
    "k_max": (int, 10_000),
    "p_max": (int, 64),
    "s_points": (int, 200),
}

FAMILY_PARAMS = {
    "morse1d": ("sigma", "L", "G"),
    "morse2d": ("L", "G"),
    "local": ("lc",),
    "powerlaw": ("eps", "coef"),
    "multiscale": ("width", "amplitude"),
}


class ConfigError(Exception):
    pass


def parse_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def resolve_config(command: str, file_cfg: dict, flags: dict) -> dict:
    merged = {k: d for k, (_, d) in KEYS.items()}
    for source in (file_cfg, {k: v for k, v in flags.items() if v is not None}):
        for key, value in source.items():
            if key not in KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            typ = KEYS[key][0]
            try:
                merged[key] = typ(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if merged["steps"] is not None:
        merged["L_steps"] = merged["G_steps"] = merged["steps"]
    merged["command"] = command
    return merged


def _seeds(cfg) -> tuple:
    try:
        return tuple(int(s) for s in str(cfg["seeds"]).split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"seeds must be comma-separated integers, got {cfg['seeds']!r}") from exc


def _flag(value) -> bool:
    return str(value).lower() in ("1", "true", "yes", "on")


def make_potential(cfg):
    if cfg["tabulated"] or cfg["family"] == "tabulated":
        if not cfg["tabulated"]:
            raise ConfigError("family 'tabulated' needs a tabulated = <path> entry")
        return load_tabulated(cfg["tabulated"])
    fam = cfg["family"]
    spec0 = PotentialSpec(fam)
    params = {k: cfg[k] for k in FAMILY_PARAMS.get(spec0.family, ()) if cfg.get(k) is not None}
    spec = PotentialSpec(fam, params)
    return build_potential(spec, Grid(spec.dim, cfg["n"]))


# -- artifact helpers ----------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o)}")


def _finish(out: Path, cfg: dict, results: dict, files: list[Path]) -> dict:
    summary = {
        "schema": SCHEMA,
        "command": cfg["command"],
        "config": {k: v for k, v in cfg.items()},
        "results": results,
        "artifacts": {p.name: _sha256(p) for p in files},
    }
    body = json.dumps(summary, sort_keys=True, default=_json_default)
    summary["content_hash"] = hashlib.sha256(body.encode()).hexdigest()
    _write_json(out / "summary.json", summary)
    return summary


def _grid_coords(grid: Grid):
    coords = grid.coordinates()
    return [c.ravel() for c in coords]


def _write_decomposition_csv(path, relax):
    grid = relax.grid
    coords = _grid_coords(grid)
    names = ["x"] if grid.dim == 1 else ["x", "y"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["W", "Wplus", "K", "F_R"])
        cols = coords + [relax.W.values.ravel(), relax.decomp.Wplus.ravel(), relax.decomp.K.ravel(),
                         relax.F_R.values.ravel()]
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def _write_coefficients_csv(path, relax):
    grid = relax.grid
    ks = wavenumbers(grid)
    Fhat = cosine_coefficients(relax.F_R.values, grid)
    names = ["k"] if grid.dim == 1 else ["k1", "k2"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["K_hat", "F_hat_R"])
        for k, kh, fh_ in zip(ks, relax.decomp.K_hat, Fhat):
            w.writerow([int(v) for v in k] + [repr(float(kh)), repr(float(fh_))])


def _write_density_csv(path, density, name="rho"):
    grid = density.grid
    coords = _grid_coords(grid)
    names = ["x"] if grid.dim == 1 else ["x", "y"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + [name])
        for row in zip(*(coords + [density.values.ravel()])):
            w.writerow([repr(float(v)) for v in row])


def _write_atoms_csv(path, kind):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["position", "mass"])
        for a in kind.atoms:
            w.writerow([" ".join(repr(float(p)) for p in a.position), repr(a.mass)])


def _relax_results(relax) -> dict:
    return {
        "E_R": relax.E_R,
        "E_D": relax.decomp.E_D,
        "kind": relax.kind.tag,
        "n_atoms": relax.kind.n_atoms,
        "spacing": relax.kind.spacing,
        "identity_residual": relax.decomp.residual,
        "degenerate": relax.stats["degenerate"],
        "iterations": relax.stats["iterations"],
    }


# -- commands --------------------------------------------------------------------


def _solve(cfg):
    from .relaxation import solve_relaxation

    W = make_potential(cfg)
    return W, solve_relaxation(W, cfg["lp_tol"], cfg["max_iter"])


def cmd_solve(cfg, out: Path) -> dict:
    W, relax = _solve(cfg)
    files = [out / "relaxation.json", out / "decomposition.csv", out / "coefficients.csv"]
    _write_json(files[0], relax.to_dict())
    _write_decomposition_csv(files[1], relax)
    _write_coefficients_csv(files[2], relax)
    if relax.kind.atomic:
        files.append(out / "atoms.csv")
        _write_atoms_csv(files[-1], relax.kind)
    return _finish(out, cfg, _relax_results(relax), files)


def _pipeline_opts(cfg):
    from .pipeline import PipelineOptions

    return PipelineOptions(tol=cfg["lp_tol"], max_iter=cfg["max_iter"], seeds=_seeds(cfg), tol1=cfg["tol1"],
                           tol2=cfg["tol2"], max_iters=cfg["max_iters"])


def cmd_recover(cfg, out: Path) -> dict:
    from .pipeline import run_pipeline

    W, relax = _solve(cfg)
    res = run_pipeline(W, _pipeline_opts(cfg), relax)
    files = [out / "rho.csv"]
    _write_density_csv(files[0], res.rho)
    results = {**_relax_results(relax), "kl": res.kl, "alpha": res.alpha}
    if res.recovery is not None:
        files.append(out / "trace.csv")
        res.recovery.write_trace(files[-1])
        results.update(iterations=res.recovery.iterations, converged=res.recovery.converged,
                       per_seed_kl=res.recovery.per_seed)
    return _finish(out, cfg, results, files)


def cmd_certify(cfg, out: Path) -> dict:
    from .pipeline import run_pipeline

    W, relax = _solve(cfg)
    res = run_pipeline(W, _pipeline_opts(cfg), relax)
    files = [out / "certificate.json", out / "rho.csv", out / "relaxation.json"]
    _write_json(files[0], res.certificate.to_dict())
    _write_density_csv(files[1], res.rho)
    _write_json(files[2], relax.to_dict())
    return _finish(out, cfg, {**_relax_results(relax), **res.summary()}, files)


def cmd_particles(cfg, out: Path) -> dict:
    from .particles import cluster_width, energy, histogram, simulate, write_histogram_csv

    W = make_potential(cfg)
    traj = simulate(W, cfg["N"], cfg["seed"], cfg["dt"], cfg["t_end"], cfg["snapshot_every"])
    hist = histogram(traj.final, cfg["bins"])
    files = [out / "trajectory.csv", out / "histogram.csv"]
    traj.write_csv(files[0])
    write_histogram_csv(hist, files[1])
    results = {"energy": energy(traj.final, W), "max_force": traj.max_force, "steps": traj.steps,
               "time": traj.final.time}
    if W.grid.dim == 1:
        results["width"] = cluster_width(traj.final.positions)
    return _finish(out, cfg, results, files)


def cmd_sweep(cfg, out: Path) -> dict:
    from .sweep import SweepConfig, classify_regions, phase_sweep, write_table

    scfg = SweepConfig(
        family=cfg["family"],
        sigma=cfg["sigma"] if cfg["sigma"] is not None else 0.1,
        L_range=(cfg["L_min"], cfg["L_max"]),
        G_range=(cfg["G_min"], cfg["G_max"]),
        resolution=(cfg["L_steps"], cfg["G_steps"]),
        n=cfg["n"],
        tol=cfg["lp_tol"],
        recover=_flag(cfg["recover"]),
        seeds=_seeds(cfg),
        max_iters=cfg["max_iters"],
    )
    table = phase_sweep(scfg, out / "checkpoint.jsonl", workers=cfg["workers"])
    files = [out / "table.jsonl", out / "regions.csv"]
    write_table(table, files[0])
    regions = classify_regions(table)
    regions.write_csv(files[1])
    counts = {}
    for r in table:
        counts[r["kind"]] = counts.get(r["kind"], 0) + 1
    return _finish(out, cfg, {"points": len(table), "kinds": counts, "regions": regions.n_regions}, files)


def cmd_threedelta(cfg, out: Path) -> dict:
    from .threedelta import minimize_three_delta, write_csv

    W = make_potential(cfg)
    s_grid = np.linspace(0.5 / cfg["s_points"], 0.5, cfg["s_points"])
    res = minimize_three_delta(W, s_grid, cfg["p_max"], cfg["k_max"])
    files = [out / "threedelta.csv"]
    write_csv(W, s_grid, files[0], cfg["k_max"])
    return _finish(out, cfg, res.to_dict(), files)


COMMANDS = {
    "solve": cmd_solve,
    "recover": cmd_recover,
    "certify": cmd_certify,
    "particles": cmd_particles,
    "sweep": cmd_sweep,
    "threedelta": cmd_threedelta,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pairrelax", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        for key, (typ, _) in KEYS.items():
            sp.add_argument(f"--{key}", dest=key, type=str, default=None)
        sp.add_argument("tabulated_path", nargs="?", help="tabulated potential file (same as --tabulated)")
    return p


def _error(out: Path | None, kind: str, exc: Exception, code: int) -> int:
    payload = {"schema": SCHEMA, "error": kind, "message": str(exc), "exit_code": code}
    if getattr(exc, "residual", None) is not None:
        payload["residual"] = exc.residual
    text = json.dumps(payload, sort_keys=True, default=_json_default)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    flags = {k: getattr(args, k) for k in KEYS}
    if args.tabulated_path:
        flags["tabulated"] = args.tabulated_path
    out = None
    try:
        file_cfg = parse_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.command, file_cfg, flags)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](cfg, out)
    except (ConfigError, ParameterDomainError, ShapeError) as exc:
        return _error(out, "config", exc, EXIT_CONFIG)
    except (SolverError, DivergentRatio, InternalError) as exc:
        return _error(out, "solver", exc, EXIT_SOLVER)
    except CertificateInconsistent as exc:
        return _error(out, "certificate", exc, EXIT_CERT)
    print(json.dumps(summary["results"], sort_keys=True, default=_json_default))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

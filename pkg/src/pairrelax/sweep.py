"""Phase-diagram sweeps over (L, G) with a resumable JSON-lines checkpoint."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PairRelaxError
from .grid import Grid
from .pipeline import PipelineOptions, run_pipeline
from .potential import PotentialSpec, build_potential
from .relaxation import solve_relaxation

log = logging.getLogger(__name__)

# fields excluded from the final table so resumed runs reproduce it byte for byte
VOLATILE = ("wall_time",)


@dataclass
class SweepConfig:
    family: str = "morse1d"
    sigma: float = 0.1
    L_range: tuple = (0.1, 2.0)
    G_range: tuple = (0.1, 2.0)
    resolution: tuple = (10, 10)  # (L steps, G steps)
    n: int = 200
    tol: float = 1e-8
    recover: bool = False
    seeds: tuple = (0,)
    max_iters: int = 20_000
    extra: dict = field(default_factory=dict)

    def axes(self):
        nL, nG = self.resolution
        return np.linspace(*self.L_range, nL), np.linspace(*self.G_range, nG)

    def points(self):
        Ls, Gs = self.axes()
        return [(i, j, float(L), float(G)) for i, L in enumerate(Ls) for j, G in enumerate(Gs)]


def run_point(cfg: SweepConfig, i: int, j: int, L: float, G: float) -> dict:
    """Solve one parameter point; failures are recorded instead of raised."""
    t0 = time.perf_counter()
    rec = {"i": i, "j": j, "L": L, "G": G, "family": cfg.family, "sigma": cfg.sigma, "n": cfg.n,
           "tol": cfg.tol, "seeds": list(cfg.seeds), "recover": cfg.recover}
    try:
        params = {"L": L, "G": G, **cfg.extra}
        if cfg.family == "morse1d":
            params["sigma"] = cfg.sigma
        spec = PotentialSpec(cfg.family, params)
        dim = spec.dim or 1
        W = build_potential(spec, Grid(dim, cfg.n))
        relax = solve_relaxation(W, cfg.tol)
        rec.update(kind=relax.kind.tag, n_atoms=relax.kind.n_atoms, spacing=relax.kind.spacing,
                   E_R=relax.E_R, alpha=None, error=None)
        if cfg.recover:
            res = run_pipeline(W, PipelineOptions(tol=cfg.tol, seeds=tuple(cfg.seeds), max_iters=cfg.max_iters), relax)
            rec.update(alpha=res.alpha, kl=res.kl)
    except (PairRelaxError, ValueError, FloatingPointError) as exc:
        rec.update(kind="Failed", n_atoms=0, spacing=[], E_R=None, alpha=None, error=f"{type(exc).__name__}: {exc}")
    rec["wall_time"] = time.perf_counter() - t0
    return rec


def _run_star(args):
    return run_point(*args)


def load_checkpoint(path) -> dict:
    done = {}
    p = Path(path)
    if not p.exists():
        return done
    with p.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                # a crash mid-write leaves at most one torn trailing line
                continue
            done[(rec["i"], rec["j"])] = rec
    return done


def _drop_torn_tail(path):
    """Cut a partial trailing line so the next append starts on a fresh line."""
    p = Path(path)
    if not p.exists() or p.stat().st_size == 0:
        return
    data = p.read_bytes()
    if data.endswith(b"\n"):
        return
    with p.open("r+b") as fh:
        fh.truncate(data.rfind(b"\n") + 1)


def _append(fh, rec):
    fh.write(json.dumps(rec, sort_keys=True) + "\n")
    fh.flush()
    os.fsync(fh.fileno())


def phase_sweep(cfg: SweepConfig, checkpoint, workers: int = 1, max_points: int | None = None) -> list[dict]:
    """Run every missing point, appending each to ``checkpoint``; return the sorted table.

    ``max_points`` stops after that many new points (used to exercise resume).
    """
    done = load_checkpoint(checkpoint)
    todo = [pt for pt in cfg.points() if (pt[0], pt[1]) not in done]
    if max_points is not None:
        todo = todo[:max_points]
    Path(checkpoint).parent.mkdir(parents=True, exist_ok=True)
    _drop_torn_tail(checkpoint)
    with open(checkpoint, "a") as fh:
        if workers > 1 and len(todo) > 1:
            from multiprocessing import get_context

            with get_context("spawn").Pool(workers) as pool:
                for rec in pool.imap_unordered(_run_star, [(cfg, *pt) for pt in todo]):
                    _append(fh, rec)
        else:
            for pt in todo:
                _append(fh, run_point(cfg, *pt))
    return final_table(checkpoint)


def final_table(checkpoint) -> list[dict]:
    rows = load_checkpoint(checkpoint)
    out = []
    for key in sorted(rows):
        rec = {k: v for k, v in rows[key].items() if k not in VOLATILE}
        out.append(rec)
    return out


def write_table(table, path):
    with open(path, "w") as fh:
        for rec in table:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# -- regions -----------------------------------------------------------------


def point_label(rec: dict, split_lattices: bool = True) -> str:
    kind = rec.get("kind", "Failed")
    if split_lattices and kind == "DiracLattice":
        return f"DiracLattice{rec.get('n_atoms', 0)}"
    return kind


@dataclass
class RegionMap:
    L: np.ndarray
    G: np.ndarray
    labels: np.ndarray  # (nL, nG) string labels
    region: np.ndarray  # (nL, nG) component ids
    regions: list  # [{"id", "label", "size"}]
    boundaries: list  # [((L0, G0), (L1, G1)), ...] segments between regions

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "L", "G", "label", "region"])
            for i in range(self.labels.shape[0]):
                for j in range(self.labels.shape[1]):
                    w.writerow([i, j, repr(float(self.L[i])), repr(float(self.G[j])), self.labels[i, j],
                                int(self.region[i, j])])


def classify_regions(table: list[dict], split_lattices: bool = True) -> RegionMap:
    """Label 4-connected components of equal kind over the parameter grid."""
    nL = max(r["i"] for r in table) + 1
    nG = max(r["j"] for r in table) + 1
    labels = np.full((nL, nG), "Missing", dtype=object)
    L = np.zeros(nL)
    G = np.zeros(nG)
    for r in table:
        labels[r["i"], r["j"]] = point_label(r, split_lattices)
        L[r["i"]] = r["L"]
        G[r["j"]] = r["G"]
    region = np.full((nL, nG), -1, dtype=int)
    regions = []
    for i in range(nL):
        for j in range(nG):
            if region[i, j] >= 0:
                continue
            rid = len(regions)
            stack = [(i, j)]
            region[i, j] = rid
            size = 0
            while stack:
                a, b = stack.pop()
                size += 1
                for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    c, d = a + da, b + db
                    if 0 <= c < nL and 0 <= d < nG and region[c, d] < 0 and labels[c, d] == labels[i, j]:
                        region[c, d] = rid
                        stack.append((c, d))
            regions.append({"id": rid, "label": labels[i, j], "size": size})
    boundaries = []
    dL = np.diff(L).mean() if nL > 1 else 1.0
    dG = np.diff(G).mean() if nG > 1 else 1.0
    for i in range(nL):
        for j in range(nG):
            if i + 1 < nL and region[i, j] != region[i + 1, j]:
                x = 0.5 * (L[i] + L[i + 1])
                boundaries.append(((x, G[j] - dG / 2), (x, G[j] + dG / 2)))
            if j + 1 < nG and region[i, j] != region[i, j + 1]:
                y = 0.5 * (G[j] + G[j + 1])
                boundaries.append(((L[i] - dL / 2, y), (L[i] + dL / 2, y)))
    return RegionMap(L, G, labels, region, regions, boundaries)

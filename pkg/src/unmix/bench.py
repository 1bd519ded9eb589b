"""Monte Carlo benchmark harness over SNR, pixel count, purity and conditioning.

Each trial draws one scene and runs every requested algorithm on it, so
algorithms are compared on identical data. Trial seeds are derived from the
base seed, the cell coordinates and the trial index through SHA-256, which
makes any single trial reproducible on its own.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .deca import DecaConfig
from .errors import InvalidParameterError
from .evaluation import match_endmembers
from .pipeline import ALGORITHMS, unmix
from .scene import SceneConfig, generate_scene, random_endmembers
from .sisal import SisalConfig

CSV_COLUMNS = (
    "algorithm", "snr_db", "n_pixels", "max_purity", "condition", "trial", "seed",
    "mean_sam", "normalized_mse", "wall_time_ms", "error",
)


@dataclass(frozen=True)
class BenchConfig:
    algorithms: tuple = ("sisal",)
    snr_db: tuple = (math.inf,)
    n_pixels: tuple = (1000,)
    max_purity: tuple = (0.8,)
    condition: tuple = (None,)
    trials: int = 10
    base_seed: int = 0
    n_endmembers: int = 3
    n_bands: int = 50
    pure_pixels: bool = False
    # sisal weight per pixel; the solver gets lam = sisal_lam_total / T
    sisal_lam_total: float = 500.0
    sisal_outer_iters: int = 80
    deca_k: int = 1
    deca_uniform_prior: bool = False
    record_timing: bool = False

    def __post_init__(self):
        for name in ("algorithms", "snr_db", "n_pixels", "max_purity", "condition"):
            value = tuple(getattr(self, name))
            if not value:
                raise InvalidParameterError(f"sweep list {name!r} is empty")
            object.__setattr__(self, name, value)
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise InvalidParameterError(f"unknown algorithms {bad}")
        if self.trials < 1:
            raise InvalidParameterError("trials must be positive")
        if self.sisal_lam_total <= 0:
            raise InvalidParameterError("sisal_lam_total must be positive")

    def cells(self):
        return list(product(self.snr_db, self.n_pixels, self.max_purity, self.condition))


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return repr(v) if isinstance(v, float) else str(v)


def trial_seed(base_seed: int, cell, trial: int) -> int:
    """First 8 bytes (little-endian) of SHA-256 over ``base|snr|T|purity|cond|trial``."""
    key = "|".join([str(int(base_seed))] + [_fmt(c) for c in cell] + [str(int(trial))])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


def conditioned_endmembers(n_bands, n_endmembers, condition, rng) -> np.ndarray:
    """Random endmembers whose singular values are log-spaced to hit ``condition``."""
    A = random_endmembers(n_bands, n_endmembers, rng)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    s_new = s[0] * np.geomspace(1.0, 1.0 / condition, n_endmembers)
    return (U * s_new) @ Vt


def run_trial(cfg: BenchConfig, cell, trial: int) -> list:
    snr, T, purity, cond = cell
    seed = trial_seed(cfg.base_seed, cell, trial)
    base = {"snr_db": snr, "n_pixels": T, "max_purity": purity, "condition": cond,
            "trial": trial, "seed": seed}
    try:
        rng = np.random.default_rng(seed)
        A0 = None
        if cond is not None:
            A0 = conditioned_endmembers(cfg.n_bands, cfg.n_endmembers, cond, rng)
        scene_cfg = SceneConfig(cfg.n_endmembers, cfg.n_bands, T, snr_db=snr, max_purity=purity,
                                include_pure_pixels=cfg.pure_pixels, seed=seed, endmembers=A0)
        image, truth = generate_scene(scene_cfg, rng)
    except Exception as exc:  # a failed scene fails every algorithm in the trial
        return [dict(base, algorithm=a, error=f"{type(exc).__name__}: {exc}") for a in cfg.algorithms]

    rows = []
    for algorithm in cfg.algorithms:
        row = dict(base, algorithm=algorithm)
        start = time.perf_counter()
        try:
            result = unmix(
                image.data, cfg.n_endmembers, algorithm, seed=seed,
                sisal_config=SisalConfig(lam=cfg.sisal_lam_total / T, outer_iters=cfg.sisal_outer_iters),
                deca_config=DecaConfig(uniform_prior=cfg.deca_uniform_prior),
                k=cfg.deca_k,
            )
            rep = match_endmembers(result.endmembers, truth.mixing)
            row.update(mean_sam=rep.mean_sam, normalized_mse=rep.normalized_mse)
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        if cfg.record_timing:
            row["wall_time_ms"] = 1000.0 * (time.perf_counter() - start)
        rows.append(row)
    return rows


def _worker_count() -> int:
    raw = os.environ.get("UNMIX_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise InvalidParameterError("UNMIX_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _cell_key(cfg: BenchConfig, row):
    cell = (row["snr_db"], row["n_pixels"], row["max_purity"], row["condition"])
    return (cfg.cells().index(cell), row["seed"], cfg.algorithms.index(row["algorithm"]))


def run_bench(cfg: BenchConfig, workers: Optional[int] = None) -> list:
    """Run every (cell, trial) and return rows sorted by cell, then seed."""
    tasks = [(cell, t) for cell in cfg.cells() for t in range(cfg.trials)]
    workers = _worker_count() if workers is None else workers
    workers = max(1, min(workers, len(tasks)))
    if workers == 1:
        batches = [run_trial(cfg, cell, t) for cell, t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_trial, cfg, cell, t) for cell, t in tasks]
            batches = [f.result() for f in futures]
    rows = [row for batch in batches for row in batch]
    rows.sort(key=lambda r: _cell_key(cfg, r))
    return rows


def format_rows(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) if c != "error" else row.get(c, "") for c in CSV_COLUMNS])
    return buf.getvalue()


def _stats(values) -> dict:
    if not values:
        return {"median": None, "q25": None, "q75": None, "iqr": None}
    q25, med, q75 = np.percentile(values, [25, 50, 75])
    return {"median": float(med), "q25": float(q25), "q75": float(q75), "iqr": float(q75 - q25)}


def summarize(cfg: BenchConfig, rows) -> dict:
    cells = []
    for cell in cfg.cells():
        snr, T, purity, cond = cell
        for algorithm in cfg.algorithms:
            sel = [r for r in rows if r["algorithm"] == algorithm
                   and (r["snr_db"], r["n_pixels"], r["max_purity"], r["condition"]) == cell]
            ok = [r for r in sel if not r.get("error")]
            cells.append({
                "algorithm": algorithm,
                "snr_db": None if math.isinf(snr) else snr,
                "n_pixels": T,
                "max_purity": purity,
                "condition": cond,
                "trials": len(sel),
                "failed": len(sel) - len(ok),
                "mean_sam": _stats([r["mean_sam"] for r in ok]),
                "normalized_mse": _stats([r["normalized_mse"] for r in ok]),
            })
    return {"base_seed": cfg.base_seed, "n_endmembers": cfg.n_endmembers, "n_bands": cfg.n_bands,
            "pure_pixels": cfg.pure_pixels, "sisal_lam_total": cfg.sisal_lam_total,
            "deca_k": cfg.deca_k, "deca_uniform_prior": cfg.deca_uniform_prior, "cells": cells}


def median_by(summary: dict, algorithm: str, **cell) -> Optional[float]:
    """Median mean_sam for the first summary cell matching ``algorithm`` and ``cell``."""
    for c in summary["cells"]:
        if c["algorithm"] == algorithm and all(c[k] == v for k, v in cell.items()):
            return c["mean_sam"]["median"]
    raise KeyError((algorithm, cell))

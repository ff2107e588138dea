"""Replica scheduling and aggregation."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..semicircle import C_SC
from ..stats import pairwise_moments
from .config import ExperimentConfig
from .experiments import DESCRIPTIONS, KERNELS

__all__ = ["ResultRow", "RunManifest", "run_experiment", "aggregate", "COLUMNS"]

COLUMNS = ("experiment", "N", "stream", "statistic", "value", "status", "aux")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    N: int
    stream: int
    statistic: str
    value: float
    status: str = "ok"
    aux: str = ""

    def as_tuple(self):
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass
class RunManifest:
    seed: int
    config: dict
    version: str
    wall_time: float
    calibration: dict = field(default_factory=dict)
    statistics: str = ""

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config,
            "version": self.version,
            "wall_time": self.wall_time,
            "calibration": self.calibration,
            "statistics": self.statistics,
        }


CALIBRATION = {"c_sc": C_SC}


def _task(args):
    cfg, N, stream = args
    try:
        out = KERNELS[cfg.experiment](cfg, N, stream)
        return [ResultRow(cfg.experiment, N, stream, s, float(v), "ok", aux) for s, v, aux in out]
    except Exception as exc:  # recorded, never silently dropped
        msg = f"error:{type(exc).__name__}:{exc}".replace("\n", " ")
        return [ResultRow(cfg.experiment, N, stream, "error", float("nan"), msg, "")]


def run_experiment(cfg: ExperimentConfig):
    """Run every (N, replica) task and return ``(manifest, rows)`` in canonical order."""
    cfg.validate()
    t0 = time.perf_counter()
    tasks = [(cfg, N, s) for N in cfg.N for s in range(cfg.replicas)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    else:
        chunks = [_task(t) for t in tasks]
    rows = [r for ch in chunks for r in ch]
    order = {(t[1], t[2]): i for i, t in enumerate(tasks)}
    rows.sort(key=lambda r: order[(r.N, r.stream)])  # stable: keeps per-task order
    manifest = RunManifest(
        seed=cfg.seed,
        config=cfg.echo(),
        version=__version__,
        wall_time=time.perf_counter() - t0,
        calibration=dict(CALIBRATION),
        statistics=DESCRIPTIONS[cfg.experiment],
    )
    return manifest, rows


def aggregate(rows) -> dict:
    """Per (N, statistic): count, mean, stderr and quantiles, merged by stream id."""
    groups: dict = {}
    for r in rows:
        if r.status != "ok":
            continue
        groups.setdefault((r.N, r.statistic), []).append(r)
    out = {}
    for (N, stat), rs in sorted(groups.items()):
        vals = [r.value for r in rs]
        m = pairwise_moments([r.stream for r in rs], vals)
        q = np.quantile(vals, [0.05, 0.5, 0.95])
        out[f"{N}/{stat}"] = {
            "N": N,
            "statistic": stat,
            "n": m.n,
            "mean": m.mean,
            "stderr": m.stderr,
            "q05": float(q[0]),
            "q50": float(q[1]),
            "q95": float(q[2]),
        }
    return out

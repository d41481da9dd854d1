"""Parameter grids: many independent (config, seed) runs, merged afterwards.

Sweep block of a config:
    {"m": [50, 100], "beta": [0.25], "strategy": ["honest_null"],
     "seeds": 100 | [1, 2, 3], "seed_base": 0, "workers": 4}
Axes left out take the base config's value; an axis given as [] is an error.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..adversary import StrategySpec
from .config import ConfigError, SimConfig
from .report import PASS

AXES = ("m", "beta", "strategy")


@dataclass
class CellSummary:
    m: int
    beta: float
    strategy: str
    runs: int = 0
    errors: int = 0
    verdicts: dict = field(default_factory=dict)
    latency_mean: Optional[float] = None
    latency_p95: Optional[float] = None
    latency_samples: int = 0
    censored: int = 0
    consistency_violations: int = 0
    vote_floor_violations: int = 0
    invariant_violations: int = 0
    counting_failures: int = 0
    violating_runs: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SweepResult:
    rows: list
    cells: list

    @property
    def violated(self) -> bool:
        return any(c.violating_runs or c.errors for c in self.cells)


def expand(config: SimConfig) -> list[SimConfig]:
    """One config per (m, beta, strategy, seed) grid point."""
    sw = config.sweep or {}
    probs = []
    axes = {}
    base = {"m": config.params.m, "beta": config.params.beta, "strategy": config.strategy.name}
    for ax in AXES:
        vals = sw.get(ax, [base[ax]])
        if not isinstance(vals, list) or not vals:
            probs.append(f"sweep.{ax}: non-empty list required")
        axes[ax] = vals
    seeds = sw.get("seeds", 1)
    if isinstance(seeds, int):
        seeds = list(range(int(sw.get("seed_base", config.seed)), int(sw.get("seed_base", config.seed)) + seeds))
    if not isinstance(seeds, list) or not seeds:
        probs.append("sweep.seeds: positive count or non-empty list required")
    if probs:
        raise ConfigError(probs)
    out = []
    for m, beta, strat in itertools.product(axes["m"], axes["beta"], axes["strategy"]):
        params = dataclasses.replace(config.params, m=m, beta=beta)
        spec = config.strategy if strat == config.strategy.name else StrategySpec(strat)
        for s in seeds:
            out.append(dataclasses.replace(config, params=params, strategy=spec, seed=int(s), sweep=None))
    for c in out[:: len(seeds)]:
        c.validate()
    return out


def _one(cfg: SimConfig) -> dict:
    from . import run

    try:
        _, rep = run(cfg)
    except Exception as e:  # recorded per cell, never fatal to the sweep
        return {"config": cfg.to_dict(), "error": f"{type(e).__name__}: {e}"}
    row = rep.row()
    row["latency_samples"] = list(rep.latency_samples)
    return row


def run_sweep(config: SimConfig, workers: Optional[int] = None,
              progress: Optional[Callable[[int, int], None]] = None) -> SweepResult:
    cfgs = expand(config)
    workers = workers or int((config.sweep or {}).get("workers", 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = []
            for i, row in enumerate(ex.map(_one, cfgs, chunksize=8)):
                rows.append(row)
                if progress:
                    progress(i + 1, len(cfgs))
    else:
        rows = []
        for i, c in enumerate(cfgs):
            rows.append(_one(c))
            if progress:
                progress(i + 1, len(cfgs))
    return SweepResult(rows=[_flat(r, c) for r, c in zip(rows, cfgs)], cells=summarize(rows, cfgs))


def _flat(row: dict, cfg: SimConfig) -> dict:
    if "error" in row:
        return {"seed": cfg.seed, "strategy": cfg.strategy.name, "m": cfg.params.m,
                "beta": cfg.params.beta, "verdict": "ERROR", "error": row["error"]}
    return {k: v for k, v in row.items() if k != "latency_samples"}


def summarize(rows: list[dict], cfgs: list[SimConfig]) -> list[CellSummary]:
    cells: dict[tuple, CellSummary] = {}
    samples: dict[tuple, list] = {}
    for row, cfg in zip(rows, cfgs):
        key = (cfg.params.m, cfg.params.beta, cfg.strategy.name)
        cell = cells.get(key)
        if cell is None:
            cell = cells[key] = CellSummary(*key)
            samples[key] = []
        cell.runs += 1
        if "error" in row:
            cell.errors += 1
            continue
        cell.verdicts[row["verdict"]] = cell.verdicts.get(row["verdict"], 0) + 1
        samples[key].extend(row["latency_samples"])
        cell.censored += row["latency_censored"]
        cell.consistency_violations += row["consistency_violations"]
        cell.vote_floor_violations += row["vote_floor_violations"]
        cell.invariant_violations += row["invariant_violations"]
        cell.counting_failures += row["counting_failures"]
        if row["verdict"] != PASS:
            cell.violating_runs += 1
    for key, cell in cells.items():
        xs = samples[key]
        cell.latency_samples = len(xs)
        if xs:
            cell.latency_mean = float(np.mean(xs))
            cell.latency_p95 = float(np.percentile(xs, 95))
    return list(cells.values())


def m_spread(cells: list[CellSummary]) -> float:
    """Relative spread (max - min) / min of mean latency across cells."""
    means = [c.latency_mean for c in cells if c.latency_mean is not None]
    if len(means) < 2:
        return 0.0
    lo = min(means)
    return (max(means) - lo) / lo if lo > 0 else math.inf

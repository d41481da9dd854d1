"""Run reports: verdict plus the analyzer summaries, in JSON and CSV form."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from .analyzers import (
    TraceIndex,
    classify_honest_blocks,
    consistency_conflicts,
    counting_check,
    duplicate_tx_flags,
    honest_on_notarized_chain,
    late_depth_notarized,
    late_level_notarized,
    measure_latency,
    one_per_level,
    vote_floor_flags,
)
from .trace import Trace

PASS, FAIL, FLAGGED = "PASS", "FAIL", "FLAGGED"


@dataclass
class RunReport:
    config: dict
    constants: dict
    verdict: str
    mode: str  # "full" or "consistency-only"
    rounds: int
    proposer_blocks: dict
    latency: dict
    latency_samples: list
    consistency_violations: int
    conflicts: list
    invariant_violations: list
    vote_floor_violations: int
    genesis_intervals: list
    counting_failures: int
    partition_histogram: dict
    partition_non_loners: int
    partition_review: list
    pairing_failures: list
    duplicate_txs: int
    warnings: list = field(default_factory=list)
    strategy: Optional[dict] = None

    @property
    def flagged(self) -> bool:
        return self.vote_floor_violations > 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=str)

    def row(self) -> dict:
        """Flat record for tabular export."""
        p = self.config.get("params", {})
        lat = self.latency
        row = {
            "seed": self.config.get("seed"),
            "strategy": self.config.get("strategy", {}).get("name"),
            "m": p.get("m"),
            "beta": p.get("beta"),
            "r_max": p.get("r_max"),
            "verdict": self.verdict,
            "mode": self.mode,
            "honest_proposers": self.proposer_blocks.get("honest", 0),
            "adversary_proposers": self.proposer_blocks.get("adversary", 0),
            "latency_mean": lat.get("mean"),
            "latency_p95": lat.get("p95"),
            "latency_count": lat.get("count"),
            "latency_censored": lat.get("censored"),
            "consistency_violations": self.consistency_violations,
            "vote_floor_violations": self.vote_floor_violations,
            "invariant_violations": len(self.invariant_violations),
            "genesis_intervals": len(self.genesis_intervals),
            "counting_failures": self.counting_failures,
        }
        for k, v in sorted(self.partition_histogram.items()):
            row[f"class_{k}"] = v
        return row


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    for r in rows[1:]:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def build_report(trace: Trace, strategy_summary: Optional[dict] = None) -> RunReport:
    ix = TraceIndex(trace)
    cfg = trace.header.get("config", {})
    consts = trace.header.get("constants", {})
    beta = cfg.get("params", {}).get("beta", 0.0)
    live = beta < 0.5
    warnings = []
    if not live:
        warnings.append("beta >= 0.5: liveness is not expected; verdict covers consistency only")
    conflicts = consistency_conflicts(ix)
    l1 = vote_floor_flags(ix)
    others = one_per_level(ix) + late_level_notarized(ix) + late_depth_notarized(ix)
    intervals = counting_check(trace, ix) if live else []
    counting_failures = sum(1 for x in intervals if not x[4])
    dr = consts.get("delta_r")
    part = classify_honest_blocks(trace, dr, ix) if (live and dr) else None
    lat = measure_latency(trace, ix)
    pairing_bad = [list(x) for x in (part.pairs if part else []) if not x[2]]

    if conflicts:
        verdict = FAIL
    elif l1:
        verdict = FLAGGED
    elif others or counting_failures or pairing_bad:
        verdict = FAIL
    else:
        verdict = PASS
    if part and part.review:
        warnings.append(f"{len(part.review)} honest loner block(s) matched no class; listed for review")

    kinds = {"honest": 0, "adversary": 0}
    for p in ix.props.values():
        kinds[p.miner] = kinds.get(p.miner, 0) + 1
    return RunReport(
        config=cfg,
        constants=consts,
        verdict=verdict,
        mode="full" if live else "consistency-only",
        rounds=ix.r_max,
        proposer_blocks=kinds,
        latency=lat.summary(),
        latency_samples=lat.samples,
        consistency_violations=len(conflicts),
        conflicts=conflicts,
        invariant_violations=l1 + others,
        vote_floor_violations=len(l1),
        genesis_intervals=[list(x) for x in intervals],
        counting_failures=counting_failures,
        partition_histogram=part.histogram if part else {},
        partition_non_loners=part.non_loners if part else 0,
        partition_review=part.review if part else [],
        pairing_failures=pairing_bad,
        duplicate_txs=len(duplicate_tx_flags(ix)),
        warnings=warnings,
        strategy=strategy_summary,
    )


def pattern_report(trace: Trace, positions: list) -> dict:
    """Genesis state after each scripted proposer arrival, and where honest
    blocks ended up. `positions` holds (round, repetition, letter) triples."""
    ix = TraceIndex(trace)
    honest_notarized = sorted(b for b in ix.first_notarized if ix.props[b].miner == "honest")
    return {
        "positions": [
            {"round": r, "rep": i, "letter": ch, "genesis": ix.genesis_at(r)} for r, i, ch in positions
        ],
        "genesis_string": "".join("G" if ix.genesis_at(r) else "." for r, _, _ in positions),
        "honest_notarized": honest_notarized,
        "honest_on_notarized_chain": honest_on_notarized_chain(ix),
        "intervals": [list(x) for x in counting_check(trace, ix)],
    }

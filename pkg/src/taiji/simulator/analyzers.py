"""Trace analyzers. Everything here reads only trace events, so a stored
trace can be re-checked without the run that produced it."""

from __future__ import annotations

import bisect
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from ..blockdag import ADVERSARY, HONEST
from .trace import Trace

PARTITION_CLASSES = (
    "notarize",
    "private_level",
    "balance",
    "public_h",
    "public_a",
    "private_depth_small",
    "private_depth_large",
)


class Unclassifiable(RuntimeError):
    def __init__(self, block: int, detail: str = ""):
        self.block = block
        super().__init__(f"honest block {block} matches no class {detail}".strip())


@dataclass
class Prop:
    id: int
    level: int
    depth: int
    depth_parent: int
    miner: str
    round: int
    published: Optional[int]
    txs: tuple = ()


class TraceIndex:
    """Proposer blocks, notarization and publication timelines of a trace."""

    def __init__(self, trace: Trace):
        self.trace = trace
        cfg = trace.header.get("config", {})
        self.r_max = cfg.get("params", {}).get("r_max", trace.end_round or 0)
        self.nodes = trace.header.get("nodes", 1)
        self.props: dict[int, Prop] = {}
        self.first_notarized: dict[int, int] = {}
        self.notarized_by_node: dict[int, dict[int, int]] = defaultdict(dict)
        self.confirmed: dict[int, list[tuple[int, int]]] = defaultdict(list)
        self.genesis_events: list[tuple[int, bool]] = []
        self.tx_arrival: dict[int, int] = {}
        self.tx_confirmed: dict[int, int] = {}
        self.flags: list[dict] = []
        for e in trace.events:
            k = e["k"]
            if k == "Mined":
                b = e["b"]
                if b["t"] == "P":
                    self.props[b["id"]] = Prop(b["id"], b["level"], b["depth"], b["dp"], b["miner"], b["r"],
                                               e["r"] if e.get("public") else None, tuple(b["txs"]))
            elif k == "Published":
                p = self.props.get(e["id"])
                if p is not None and p.published is None:
                    p.published = e["r"]
            elif k == "Notarized":
                bid = e["id"]
                self.notarized_by_node[e["node"]].setdefault(bid, e["r"])
                if bid not in self.first_notarized or e["r"] < self.first_notarized[bid]:
                    self.first_notarized[bid] = e["r"]
            elif k == "Confirmed":
                self.confirmed[e["node"]].append((e["r"], e["id"]))
            elif k in ("GenesisEnter", "GenesisExit"):
                self.genesis_events.append((e["r"], k == "GenesisEnter"))
            elif k == "TxArrived":
                for t in e["txs"]:
                    self.tx_arrival[t] = e["r"]
            elif k == "TxConfirmed":
                for t in e["txs"]:
                    self.tx_confirmed.setdefault(t, e["r"])
            elif k == "Flag":
                self.flags.append(e)
        # notarization timeline, by first round at any node
        order = sorted((r, bid) for bid, r in self.first_notarized.items())
        self._n_rounds = [r for r, _ in order]
        lv, dp = [], []
        ml = md = 0
        for _, bid in order:
            p = self.props.get(bid)
            if p is not None:
                ml = max(ml, p.level)
                md = max(md, p.depth)
            lv.append(ml)
            dp.append(md)
        self._max_level = lv
        self._max_depth = dp

    def max_notarized_level(self, r: int) -> int:
        """Highest level notarized at any node by the end of round r."""
        i = bisect.bisect_right(self._n_rounds, r)
        return self._max_level[i - 1] if i else 0

    def max_notarized_depth(self, r: int) -> int:
        i = bisect.bisect_right(self._n_rounds, r)
        return self._max_depth[i - 1] if i else 0

    def genesis_at(self, r: int) -> bool:
        state = True
        for rr, g in self.genesis_events:
            if rr > r:
                break
            state = g
        return state

    def honest(self) -> list[Prop]:
        return sorted((p for p in self.props.values() if p.miner == HONEST), key=lambda p: (p.round, p.id))


# -- Genesis intervals and the counting inequality ----------------------


def non_genesis_intervals(ix: TraceIndex) -> list[tuple[int, int, bool]]:
    """(R0, R, closed) for every maximal non-Genesis stretch."""
    out = []
    start = None
    for r, g in ix.genesis_events:
        if not g and start is None:
            start = r
        elif g and start is not None:
            out.append((start, r - 1, True))
            start = None
    if start is not None:
        out.append((start, ix.r_max, False))
    return out


def counting_check(trace: Trace, ix: Optional[TraceIndex] = None) -> list[tuple]:
    ix = ix or TraceIndex(trace)
    rounds_a = sorted(p.round for p in ix.props.values() if p.miner == ADVERSARY)
    rounds_h = sorted(p.round for p in ix.props.values() if p.miner == HONEST)
    out = []
    for r0, r1, _ in non_genesis_intervals(ix):
        ma = bisect.bisect_right(rounds_a, r1) - bisect.bisect_left(rounds_a, r0)
        mh = bisect.bisect_right(rounds_h, r1) - bisect.bisect_left(rounds_h, r0)
        out.append((r0, r1, ma, mh, ma >= mh - 1))
    return out


# -- honest-block partition ---------------------------------------------


@dataclass
class Partition:
    histogram: dict
    classes: dict  # block id -> class
    non_loners: int
    review: list = field(default_factory=list)
    pairs: list = field(default_factory=list)  # (H, paired H', ok)


def _loners(honest: list[Prop], dr: int) -> set[int]:
    rounds = [p.round for p in honest]
    out = set()
    for i, p in enumerate(honest):
        lo = bisect.bisect_left(rounds, p.round - dr)
        hi = bisect.bisect_right(rounds, p.round + dr)
        if hi - lo == 1:
            out.add(p.id)
    return out


def classify_honest_blocks(trace: Trace, delta_r: int, ix: Optional[TraceIndex] = None,
                           strict: bool = False, loners_only: bool = True) -> Partition:
    """Assign honest proposer blocks to the seven classes.

    The decision order: notarized within delta_r; an adversary block on the
    same level published and notarized within the window; one published but
    not notarized; otherwise the block notarized one deeper than the
    notarized tip at r(H) during the window decides between the public and
    the two depth-private classes.
    """
    ix = ix or TraceIndex(trace)
    dr = int(delta_r)
    honest = ix.honest()
    loners = _loners(honest, dr) if loners_only else {p.id for p in honest}
    by_level: dict[int, list[Prop]] = defaultdict(list)
    by_depth: dict[int, list[Prop]] = defaultdict(list)
    for p in ix.props.values():
        by_level[p.level].append(p)
        by_depth[p.depth].append(p)
    fn = ix.first_notarized
    classes: dict[int, str] = {}
    balancer: dict[int, int] = {}  # adversary block -> honest block it balanced
    review = []
    pairs = []
    hist = Counter({c: 0 for c in PARTITION_CLASSES})
    for h in honest:
        if h.id not in loners:
            continue
        end = h.round + dr
        nr = fn.get(h.id)
        if nr is not None and nr < end:
            cls = "notarize"
        else:
            rivals = [a for a in by_level[h.level]
                      if a.miner == ADVERSARY and a.published is not None and a.published < end]
            if any(fn.get(a.id) is not None and fn[a.id] < end for a in rivals):
                cls = "private_level"
            elif rivals:
                cls = "balance"
                for a in rivals:
                    balancer.setdefault(a.id, h.id)
            else:
                d = ix.max_notarized_depth(h.round) + 1
                cands = sorted((fn[b.id], b.id) for b in by_depth[d]
                               if b.id != h.id and b.id in fn and h.round <= fn[b.id] < end)
                cls = None
                if cands:
                    b = ix.props[cands[0][1]]
                    pub = b.published if b.published is not None else b.round
                    if pub < h.round - dr:
                        paired = None
                        if classes.get(b.id) == "balance":
                            paired = b.id
                        elif b.id in balancer:
                            paired = balancer[b.id]
                        cls = "public_h" if paired is not None else "public_a"
                        if paired is not None:
                            pairs.append((h.id, paired, h.depth == ix.props[paired].depth))
                    elif b.level < h.level:
                        cls = "private_depth_small"
                    elif b.level > h.level:
                        cls = "private_depth_large"
                if cls is None:
                    if strict:
                        raise Unclassifiable(h.id)
                    review.append(h.id)
                    continue
        classes[h.id] = cls
        hist[cls] += 1
    return Partition(dict(hist), classes, len(honest) - len(loners), review, pairs)


# -- latency --------------------------------------------------------------


@dataclass
class Latency:
    samples: list
    censored: int
    total: int

    def summary(self) -> dict:
        s = sorted(self.samples)
        n = len(s)

        def pct(q):
            if not n:
                return None
            return s[min(n - 1, int(q * (n - 1) + 0.5))]

        return {
            "count": n,
            "censored": self.censored,
            "total": self.total,
            "censored_fraction": (self.censored / self.total) if self.total else 0.0,
            "mean": (sum(s) / n) if n else None,
            "p50": pct(0.5),
            "p95": pct(0.95),
            "max": s[-1] if n else None,
        }


def measure_latency(trace: Trace, ix: Optional[TraceIndex] = None) -> Latency:
    ix = ix or TraceIndex(trace)
    samples = []
    censored = 0
    for tx in sorted(ix.tx_arrival):
        c = ix.tx_confirmed.get(tx)
        if c is None:
            censored += 1
        else:
            samples.append(c - ix.tx_arrival[tx])
    return Latency(samples, censored, len(ix.tx_arrival))


# -- consistency and invariant checks-------------------------------------


def consistency_conflicts(ix: TraceIndex) -> list[dict]:
    """Depths at which confirmed blocks disagree, across nodes or over time,
    plus confirmation problems flagged inline."""
    out = []
    at_depth: dict[int, dict[int, int]] = defaultdict(dict)
    for node, items in sorted(ix.confirmed.items()):
        for r, bid in items:
            p = ix.props.get(bid)
            d = p.depth if p is not None else None
            prev = at_depth[d].get(node)
            if prev is not None and prev != bid:
                out.append({"kind": "rollback", "node": node, "depth": d, "round": r})
            at_depth[d][node] = bid
    for d, per in sorted(at_depth.items(), key=lambda x: (x[0] is None, x[0])):
        if len(set(per.values())) > 1:
            out.append({"kind": "cross_node", "depth": d, "blocks": sorted(set(per.values()))})
    for f in ix.flags:
        if f.get("check") == "confirmation":
            out.append({"kind": "confirmation", "node": f.get("node"), "detail": f.get("detail")})
    return out


def one_per_level(ix: TraceIndex) -> list[dict]:
    levels: dict[int, set] = defaultdict(set)
    for bid in ix.first_notarized:
        p = ix.props.get(bid)
        if p is not None:
            levels[p.level].add(bid)
    return [{"check": "one_per_level", "level": lvl, "blocks": sorted(s)} for lvl, s in sorted(levels.items()) if len(s) > 1]


def late_level_notarized(ix: TraceIndex) -> list[dict]:
    out = []
    for bid, nr in sorted(ix.first_notarized.items()):
        p = ix.props.get(bid)
        if p is None or p.published is None or p.published <= p.round:
            continue
        top = ix.max_notarized_level(p.published - 1)
        if p.level <= top:
            out.append({"check": "late_level", "block": bid, "level": p.level, "notarized_level": top,
                        "published": p.published})
    return out


def late_depth_notarized(ix: TraceIndex) -> list[dict]:
    out = []
    for bid, nr in sorted(ix.first_notarized.items()):
        p = ix.props.get(bid)
        if p is None or p.published is None:
            continue
        tip = ix.max_notarized_depth(p.published - 1)
        if p.depth < tip:
            out.append({"check": "late_depth", "block": bid, "depth": p.depth, "tip_depth": tip,
                        "published": p.published})
    return out


def vote_floor_flags(ix: TraceIndex) -> list[dict]:
    return [dict(f["detail"], check="vote_floor") for f in ix.flags if f.get("check") == "vote_floor"]


def duplicate_tx_flags(ix: TraceIndex) -> list[dict]:
    return [f for f in ix.flags if f.get("check") == "duplicate_tx"]


def honest_on_notarized_chain(ix: TraceIndex, r: Optional[int] = None) -> dict[int, list[int]]:
    """Honest blocks on each node's longest notarized chain at the end of round r."""
    out = {}
    for node, items in ix.notarized_by_node.items():
        best = None
        for bid, nr in items.items():
            if r is not None and nr > r:
                continue
            p = ix.props.get(bid)
            if p is None:
                continue
            if best is None or (p.depth, -p.id) > (best.depth, -best.id):
                best = p
        chain = []
        while best is not None:
            if best.miner == HONEST:
                chain.append(best.id)
            best = ix.props.get(best.depth_parent)
        out[node] = sorted(chain)
    return out


@dataclass
class InclusionBound:
    checked: int
    failures: list
    unobservable: int


def inclusion_bound_check(ix: TraceIndex, delta_r: int, gaps: int = 4, slack: int = 2) -> InclusionBound:
    """Every transaction must be confirmed by the `gaps`-th proposer arrival
    after its first inclusion, plus slack * delta_r rounds. Transactions whose
    bound falls beyond the horizon cannot be judged and are counted apart."""
    arrivals = sorted({p.round for p in ix.props.values()})
    first: dict[int, int] = {}
    for p in sorted(ix.props.values(), key=lambda p: (p.round, p.id)):
        for t in p.txs:
            first.setdefault(t, p.round)
    checked, unobservable, failures = 0, 0, []
    for tx in sorted(ix.tx_arrival):
        inc = first.get(tx)
        if inc is None:
            unobservable += 1
            continue
        i = bisect.bisect_right(arrivals, inc) + gaps - 1
        if i >= len(arrivals) or arrivals[i] + slack * delta_r > ix.r_max:
            unobservable += 1
            continue
        bound = arrivals[i] + slack * delta_r
        checked += 1
        c = ix.tx_confirmed.get(tx)
        if c is None or c > bound:
            failures.append({"tx": tx, "included": inc, "bound": bound, "confirmed": c})
    return InclusionBound(checked, failures, unobservable)

"""Block arrivals, sortition typing, and honest block assembly."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .blockdag import HONEST, ADVERSARY, NodeView, ProposerBlock, VoterBlock
from .params import ProtocolParams


class RangeOverflow(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class ArrivalEvent:
    round: int
    chain: Optional[int]  # None for a proposer block
    miner: str
    node: int = -1  # winning honest node, -1 for the adversary
    block_id: int = 0

    @property
    def is_proposer(self) -> bool:
        return self.chain is None

    @property
    def block_type(self) -> str:
        return "proposer" if self.chain is None else f"voter({self.chain})"


# -- sortition -------------------------------------------------------------


def sortition(hash_value: int, m: int, f_v: int, f_p: int, kappa: int = 64):
    """Map a header hash to a block type.

    Returns ("voter", i), ("proposer", None) or ("none", None). The voter
    interval is closed on the right, so the single value m*f_v lands on the
    last chain.
    """
    top = m * f_v + f_p
    if top > (1 << kappa) - 1:
        raise RangeOverflow(f"m*f_v + f_p = {top} exceeds the {kappa}-bit hash range")
    if hash_value <= m * f_v:
        return ("voter", min(hash_value // f_v, m - 1))
    if hash_value <= top:
        return ("proposer", None)
    return ("none", None)


# -- arrivals --------------------------------------------------------------


def _count(rng: np.random.Generator, mode: str, rate: float, size=None):
    if mode == "poisson":
        return rng.poisson(rate, size)
    return np.asarray(rng.random(size) < rate, dtype=np.int64)


def draw_arrivals(round: int, p: ProtocolParams, rng: np.random.Generator) -> list[ArrivalEvent]:
    """One round of arrivals (reference implementation; runs use ArrivalSchedule)."""
    out = []
    for _ in range(int(_count(rng, p.arrival_mode, p.fp_bar))):
        out.append(None)
    voters = _count(rng, p.arrival_mode, p.fv_bar, p.m)
    for c in range(p.m):
        out.extend([c] * int(voters[c]))
    events = []
    for chain in out:
        adv = rng.random() < p.beta
        node = -1 if adv else int(rng.integers(p.honest_node_count))
        events.append(ArrivalEvent(round, chain, ADVERSARY if adv else HONEST, node))
    return events


class IdPool:
    """Unique block ids drawn from the run's generator.

    With favor_adversary set, adversary ids come from the lower half of the
    range so they win smallest-id tie-breaks (used by scripted attacks).
    """

    def __init__(self, rng: np.random.Generator, kappa: int, reserved: int, favor_adversary: bool = False):
        self.rng = rng
        self.kappa = kappa
        self.lo = reserved + 1
        self.used: set[int] = set()
        self.favor = favor_adversary

    def _range(self, adversary: bool) -> tuple[int, int]:
        top = 1 << self.kappa
        if not self.favor:
            return self.lo, top
        half = top >> 1
        return (self.lo, half) if adversary else (half, top)

    def draw(self, adversary: np.ndarray) -> np.ndarray:
        n = len(adversary)
        out = np.empty(n, dtype=np.uint64)
        for flag in (False, True):
            idx = np.nonzero(adversary == flag)[0]
            if len(idx) == 0:
                continue
            lo, hi = self._range(flag)
            vals = self.rng.integers(lo, hi, size=len(idx), dtype=np.uint64, endpoint=False)
            out[idx] = vals
        # resolve collisions deterministically by redrawing in index order
        seen = self.used
        res = out.tolist()
        for i, v in enumerate(res):
            while v in seen:
                lo, hi = self._range(bool(adversary[i]))
                v = int(self.rng.integers(lo, hi, dtype=np.uint64))
            seen.add(v)
            res[i] = v
        return np.array(res, dtype=np.uint64) if res else out

    def one(self, adversary: bool) -> int:
        return int(self.draw(np.array([adversary]))[0])


class ArrivalSchedule:
    """All arrivals of a run, sorted by round; voters before proposers
    within a round, chains in index order."""

    def __init__(self, rounds, chains, adversary, nodes, ids, m: int):
        order = np.lexsort((chains, rounds))
        self.rounds = np.asarray(rounds)[order].tolist()
        self.chains = np.asarray(chains)[order].tolist()
        self.adversary = np.asarray(adversary, dtype=bool)[order].tolist()
        self.nodes = np.asarray(nodes)[order].tolist()
        self.ids = np.asarray(ids, dtype=np.uint64)[order].tolist()
        self.m = m

    def __len__(self) -> int:
        return len(self.rounds)

    def event(self, i: int) -> ArrivalEvent:
        ch = self.chains[i]
        adv = self.adversary[i]
        return ArrivalEvent(
            self.rounds[i],
            None if ch == self.m else ch,
            ADVERSARY if adv else HONEST,
            -1 if adv else self.nodes[i],
            self.ids[i],
        )

    def by_round(self) -> Iterator[tuple[int, list[ArrivalEvent]]]:
        i, n = 0, len(self.rounds)
        while i < n:
            r = self.rounds[i]
            batch = []
            while i < n and self.rounds[i] == r:
                batch.append(self.event(i))
                i += 1
            yield r, batch

    def round_set(self) -> set[int]:
        return set(self.rounds)

    @classmethod
    def from_events(cls, events: Iterable[ArrivalEvent], m: int, ids: IdPool) -> "ArrivalSchedule":
        ev = list(events)
        adv = np.array([e.miner == ADVERSARY for e in ev], dtype=bool)
        given = [e.block_id for e in ev]
        drawn = ids.draw(adv) if ev else np.zeros(0, dtype=np.uint64)
        final = [g if g else int(d) for g, d in zip(given, drawn.tolist())]
        return cls(
            np.array([e.round for e in ev], dtype=np.int64),
            np.array([m if e.chain is None else e.chain for e in ev], dtype=np.int64),
            adv,
            np.array([max(e.node, 0) for e in ev], dtype=np.int64),
            np.array(final, dtype=np.uint64),
            m,
        )

    @classmethod
    def generate(cls, p: ProtocolParams, rng: np.random.Generator, ids: IdPool) -> "ArrivalSchedule":
        T = p.r_max
        rounds = []
        chains = []
        streams = [(p.m, p.fp_bar)] + [(c, p.fv_bar) for c in range(p.m)]
        for key, rate in streams:
            if T <= 0:
                break
            if p.arrival_mode == "poisson":
                k = int(rng.poisson(rate * T))
                rr = rng.integers(1, T + 1, size=k)
            else:
                k = int(rng.binomial(T, min(rate, 1.0)))
                rr = rng.choice(T, size=k, replace=False) + 1
            rounds.append(rr.astype(np.int64))
            chains.append(np.full(k, key, dtype=np.int64))
        r_all = np.concatenate(rounds) if rounds else np.zeros(0, dtype=np.int64)
        c_all = np.concatenate(chains) if chains else np.zeros(0, dtype=np.int64)
        order = np.lexsort((c_all, r_all))
        r_all, c_all = r_all[order], c_all[order]
        n = len(r_all)
        adv = rng.random(n) < p.beta
        nodes = rng.integers(0, p.honest_node_count, size=n)
        return cls(r_all, c_all, adv, nodes, ids.draw(adv), p.m)


# -- honest assembly -------------------------------------------------------


def assemble_honest_proposer(
    view: NodeView, mempool: Iterable[int], block_id: int, round: int, miner: str = HONEST
) -> ProposerBlock:
    lp = view.dag.blocks[view.level_tip]
    dp = view.dag.blocks[view.notarized_tip]
    return ProposerBlock(
        block_id, lp.level + 1, dp.depth + 1, lp.id, dp.id, miner, round, tuple(mempool)
    )


def honest_votes(view: NodeView, parent: int) -> tuple:
    """Votes an honest voter block extending `parent` would carry."""
    dag = view.dag
    cands = view.by_depth.get(view.tip_depth + 1)
    if not cands:
        return ()
    floor_level = dag.vote_level[parent]
    floor_depth = dag.vote_depth[parent]
    if view.tip_depth + 1 < floor_depth:
        return ()
    chosen: dict[int, int] = {}
    stamp = view.stamp
    blocks = dag.blocks
    for pid in cands:
        lvl = blocks[pid].level
        if lvl <= floor_level:
            continue
        cur = chosen.get(lvl)
        if cur is None or stamp[pid] < stamp[cur]:
            chosen[lvl] = pid
    return tuple(sorted(chosen.items()))


def assemble_honest_voter(
    view: NodeView, chain_index: int, block_id: int, round: int, miner: str = HONEST
) -> VoterBlock:
    parent = view.main[chain_index][-1]
    height = len(view.main[chain_index])
    return VoterBlock(
        block_id, chain_index, parent, honest_votes(view, parent), miner, round, height
    )


def mempool_for(view: NodeView, arrived: list[int]) -> list[int]:
    """Arrived transactions not yet carried by the depth-parent chain."""
    if not arrived:
        return []
    dag = view.dag
    on_chain: set[int] = set()
    for pid in dag.depth_chain(view.notarized_tip):
        on_chain.update(dag.blocks[pid].txs)
    return [t for t in arrived if t not in on_chain]

"""Block records, the global DAG, and per-node views.

Voter chains are indexed 0..m-1. Genesis ids are reserved: the proposer
genesis is 0 and the voter genesis of chain c is c + 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from .notarization import discounted_votes
from .params import DerivedConstants

HONEST = "honest"
ADVERSARY = "adversary"
GENESIS = 0


def voter_genesis(chain: int) -> int:
    return chain + 1


@dataclass(frozen=True, slots=True)
class ProposerBlock:
    id: int
    level: int
    depth: int
    level_parent: int
    depth_parent: int
    miner: str
    round_mined: int
    txs: tuple = ()


@dataclass(frozen=True, slots=True)
class VoterBlock:
    id: int
    chain: int
    parent: int
    votes: tuple  # ((level, proposer_id), ...)
    miner: str
    round_mined: int
    height: int


Block = Union[ProposerBlock, VoterBlock]


class Reject(str, Enum):
    MISSING_PARENT = "MissingParent"
    DEPTH_PARENT_NOT_NOTARIZED = "DepthParentNotNotarized"
    VOTE_LEVEL = "VoteLevelViolation"
    VOTE_DEPTH = "VoteDepthViolation"


class InvalidBlock(ValueError):
    pass


def vote_rule_violation(dag: "GlobalDag", b: VoterBlock) -> Optional[Reject]:
    """Check the vote monotonicity rules against the block's chain ancestors."""
    floor_level = dag.vote_level[b.parent]
    floor_depth = dag.vote_depth[b.parent]
    prev = floor_level
    for level, pid in b.votes:
        p = dag.blocks.get(pid)
        if p is None or not isinstance(p, ProposerBlock) or p.level != level:
            return Reject.VOTE_LEVEL
        if level <= prev:
            return Reject.VOTE_LEVEL
        prev = level
        if p.depth < floor_depth:
            return Reject.VOTE_DEPTH
    return None


class GlobalDag:
    """Every block ever mined, public or private, plus publication rounds."""

    def __init__(self, m: int):
        self.m = m
        self.blocks: dict[int, Block] = {}
        self.round_public: dict[int, int] = {}
        # per voter block: highest level / depth voted by it or its ancestors
        self.vote_level: dict[int, int] = {}
        self.vote_depth: dict[int, int] = {}
        self.honest_max_level = 0
        self.private_proposers: dict[int, None] = {}
        # longest chain over all blocks held by anyone (the adversary's view)
        self.chain_tip: list[tuple[int, int]] = []
        g = ProposerBlock(GENESIS, 0, 0, GENESIS, GENESIS, HONEST, 0)
        self.blocks[GENESIS] = g
        self.round_public[GENESIS] = 0
        for c in range(m):
            gid = voter_genesis(c)
            self.blocks[gid] = VoterBlock(gid, c, gid, (), HONEST, 0, 0)
            self.round_public[gid] = 0
            self.vote_level[gid] = 0
            self.vote_depth[gid] = 0
            self.chain_tip.append((0, gid))

    def add(self, b: Block, public_round: Optional[int]) -> None:
        if b.id in self.blocks:
            raise InvalidBlock(f"duplicate block id {b.id}")
        if isinstance(b, ProposerBlock):
            lp = self.blocks.get(b.level_parent)
            dp = self.blocks.get(b.depth_parent)
            if not isinstance(lp, ProposerBlock) or not isinstance(dp, ProposerBlock):
                raise InvalidBlock(f"proposer {b.id}: unknown parent")
            if b.level != lp.level + 1 or b.depth != dp.depth + 1:
                raise InvalidBlock(f"proposer {b.id}: level/depth mismatch")
            if b.miner == HONEST and b.level > self.honest_max_level:
                self.honest_max_level = b.level
        else:
            par = self.blocks.get(b.parent)
            if not isinstance(par, VoterBlock) or par.chain != b.chain:
                raise InvalidBlock(f"voter {b.id}: unknown parent")
            if b.height != par.height + 1:
                raise InvalidBlock(f"voter {b.id}: height mismatch")
            lv, dv = self.vote_level[b.parent], self.vote_depth[b.parent]
            for level, pid in b.votes:
                p = self.blocks.get(pid)
                if not isinstance(p, ProposerBlock):
                    raise InvalidBlock(f"voter {b.id}: votes unknown block {pid}")
                lv = max(lv, level)
                dv = max(dv, p.depth)
            self.vote_level[b.id] = lv
            self.vote_depth[b.id] = dv
            h, t = self.chain_tip[b.chain]
            if b.height > h or (b.height == h and b.id < t):
                self.chain_tip[b.chain] = (b.height, b.id)
        self.blocks[b.id] = b
        if public_round is None:
            if isinstance(b, ProposerBlock):
                self.private_proposers[b.id] = None
        else:
            self.round_public[b.id] = public_round

    def publish(self, bid: int, r: int) -> None:
        if bid in self.round_public:
            return
        self.round_public[bid] = r
        self.private_proposers.pop(bid, None)

    def is_public(self, bid: int) -> bool:
        return bid in self.round_public

    def depth_chain(self, pid: int) -> list[int]:
        """Proposer ids from depth 1 up to pid along depth-parent links."""
        out = []
        b = self.blocks[pid]
        while b.id != GENESIS:
            out.append(b.id)
            b = self.blocks[b.depth_parent]
        out.reverse()
        return out


class NodeView:
    """One honest node's received-block state.

    Besides the longest chains, the view keeps, per proposer block, the
    height of the vote it holds on each chain and how many of those votes
    are at least k_min deep. Notarization only needs an exact discounted
    count once that deep count reaches the threshold.
    """

    def __init__(self, node_id: int, dag: GlobalDag, consts: DerivedConstants):
        m = dag.m
        self.node_id = node_id
        self.dag = dag
        self.consts = consts
        self.m = m
        self.k_min = consts.k_min
        self.threshold = consts.threshold
        self.floor_m = consts.delta_k_floor * m
        self.need = self.threshold + self.floor_m
        self.known: set[int] = {GENESIS}
        self.stamp: dict[int, tuple[int, int]] = {GENESIS: (0, 0)}
        self.main: list[list[int]] = []
        for c in range(m):
            gid = voter_genesis(c)
            self.known.add(gid)
            self.stamp[gid] = (0, 0)
            self.main.append([gid])
        self.votes_on: dict[int, dict[int, int]] = {}
        self.deep: dict[int, int] = {}
        self._deep_set: set[tuple[int, int]] = set()
        self._watch: list[dict[int, list]] = [dict() for _ in range(m)]
        # per chain: level -> (proposer, height) for votes on the longest chain
        self.level_vote: list[dict[int, tuple[int, int]]] = [dict() for _ in range(m)]
        self.by_level: dict[int, list[int]] = {0: [GENESIS]}
        self.by_depth: dict[int, list[int]] = {0: [GENESIS]}
        self.max_level = 0
        self.level_tip = GENESIS
        self.notarized: set[int] = {GENESIS}
        self.notarized_info: dict[int, tuple[int, int, float]] = {GENESIS: (0, 0, 0.0)}
        self.notarized_tip = GENESIS
        self.tip_depth = 0
        self.max_notarized_level = 0
        self.confirmed: list[int] = []
        self.ledger_txs: set[int] = set()
        self.pending: list[int] = []
        self.hot: set[int] = set()
        self.dirty = False
        self.round = 0
        self.seq = 0
        # vote lower-bound bookkeeping
        self.vmax: dict[int, float] = {}
        self._touched: dict[int, int] = {}
        self._removed: set[int] = set()
        self._h_start: dict[int, int] = {}
        self.floor_flags: list[dict] = []

    # -- round bookkeeping -------------------------------------------------

    def begin_round(self, r: int) -> None:
        self.round = r
        self.seq = 0
        self._removed.clear()
        self._h_start.clear()

    def end_round(self) -> None:
        for pid in sorted(self._removed):
            v = len(self.votes_on.get(pid, ()))
            best = self.vmax.get(pid, 0.0)
            if v + 1e-9 < best:
                self.floor_flags.append(
                    {"node": self.node_id, "round": self.round, "block": pid, "V": v, "Vu_max": best}
                )

    def next_stamp(self) -> tuple[int, int]:
        s = (self.round, self.seq)
        self.seq += 1
        return s

    # -- queries -----------------------------------------------------------

    def tip(self, c: int) -> int:
        return self.main[c][-1]

    def chain_height(self, c: int) -> int:
        return len(self.main[c]) - 1

    def on_main(self, vid: int) -> bool:
        b = self.dag.blocks[vid]
        main = self.main[b.chain]
        return b.height < len(main) and main[b.height] == vid

    # -- insertion ---------------------------------------------------------

    def insert(self, b: Block, stamp: Optional[tuple[int, int]] = None) -> Optional[Reject]:
        if b.id in self.known:
            return None
        if isinstance(b, ProposerBlock):
            for par in (b.level_parent, b.depth_parent):
                if par not in self.known:
                    why = self._fetch(par)
                    if why is not None:
                        return why
            if b.depth_parent not in self.notarized:
                return Reject.DEPTH_PARENT_NOT_NOTARIZED
            self._add_proposer(b, stamp or self.next_stamp())
            return None
        if b.parent not in self.known:
            why = self._fetch(b.parent)
            if why is not None:
                return why
        for _, pid in b.votes:
            if pid not in self.known:
                why = self._fetch(pid)
                if why is not None:
                    return why
        why = vote_rule_violation(self.dag, b)
        if why is not None:
            return why
        self._add_voter(b, stamp or self.next_stamp())
        return None

    def receive(self, bid: int) -> Optional[Reject]:
        """Insert a delivered block; blocks that may become valid later wait."""
        why = self.insert(self.dag.blocks[bid])
        if why in (Reject.DEPTH_PARENT_NOT_NOTARIZED, Reject.MISSING_PARENT):
            self.pending.append(bid)
        return why

    def retry_pending(self) -> int:
        done = 0
        progress = True
        while progress and self.pending:
            progress = False
            keep = []
            for bid in self.pending:
                if bid in self.known:
                    continue
                why = self.insert(self.dag.blocks[bid])
                if why is None:
                    progress = True
                    done += 1
                elif why in (Reject.DEPTH_PARENT_NOT_NOTARIZED, Reject.MISSING_PARENT):
                    keep.append(bid)
            self.pending = keep
        return done

    def _fetch(self, bid: int) -> Optional[Reject]:
        if not self.dag.is_public(bid):
            return Reject.MISSING_PARENT
        return self.insert(self.dag.blocks[bid])

    def _add_proposer(self, b: ProposerBlock, stamp) -> None:
        self.known.add(b.id)
        self.stamp[b.id] = stamp
        self.by_level.setdefault(b.level, []).append(b.id)
        self.by_depth.setdefault(b.depth, []).append(b.id)
        if b.level > self.max_level:
            self.max_level = b.level
            self.level_tip = b.id

    def _add_voter(self, b: VoterBlock, stamp) -> None:
        self.known.add(b.id)
        self.stamp[b.id] = stamp
        c = b.chain
        main = self.main[c]
        top = len(main) - 1
        if b.height > top or (b.height == top and b.id < main[-1]):
            if b.parent == main[-1]:
                self._extend(c, b)
            else:
                self._reorg(c, b)

    # -- longest-chain maintenance ----------------------------------------

    def _touch_chain(self, c: int) -> None:
        if c not in self._h_start:
            self._h_start[c] = len(self.main[c]) - 1
        self.dirty = True

    def _extend(self, c: int, b: VoterBlock) -> None:
        self._touch_chain(c)
        main = self.main[c]
        main.append(b.id)
        self._fire(c, b.height - 1, b.height)
        for level, pid in b.votes:
            self._add_vote(pid, c, b.height, level)

    def _reorg(self, c: int, b: VoterBlock) -> None:
        self._touch_chain(c)
        blocks = self.dag.blocks
        main = self.main[c]
        branch = []
        x = b
        while not (x.height < len(main) and main[x.height] == x.id):
            branch.append(x)
            x = blocks[x.parent]
        fork_h = x.height
        old_h = len(main) - 1
        for hh in range(old_h, fork_h, -1):
            for level, pid in blocks[main[hh]].votes:
                self._remove_vote(pid, c, hh, level)
        del main[fork_h + 1:]
        branch.reverse()
        for x in branch:
            main.append(x.id)
        self._fire(c, old_h, len(main) - 1)
        for x in branch:
            for level, pid in x.votes:
                self._add_vote(pid, c, x.height, level)

    def _fire(self, c: int, lo: int, hi: int) -> None:
        w = self._watch[c]
        if not w:
            return
        for t in range(lo + 1, hi + 1):
            lst = w.pop(t, None)
            if lst:
                for pid, h in lst:
                    vs = self.votes_on.get(pid)
                    if vs is not None and vs.get(c) == h and (pid, c) not in self._deep_set:
                        self._deep_inc(pid, c)

    def _deep_inc(self, pid: int, c: int) -> None:
        self._deep_set.add((pid, c))
        n = self.deep.get(pid, 0) + 1
        self.deep[pid] = n
        if n >= self.need and pid not in self.notarized:
            self.hot.add(pid)

    def _add_vote(self, pid: int, c: int, h: int, level: int) -> None:
        self._snapshot(pid)
        vs = self.votes_on.get(pid)
        if vs is None:
            vs = self.votes_on[pid] = {}
        vs[c] = h
        self.level_vote[c][level] = (pid, h)
        if len(self.main[c]) - h >= self.k_min:
            self._deep_inc(pid, c)
        else:
            self._watch[c].setdefault(h + self.k_min - 1, []).append((pid, h))

    def _remove_vote(self, pid: int, c: int, h: int, level: int) -> None:
        self._snapshot(pid)
        del self.votes_on[pid][c]
        key = (pid, c)
        if key in self._deep_set:
            self._deep_set.remove(key)
            n = self.deep[pid] - 1
            self.deep[pid] = n
            if n < self.need:
                self.hot.discard(pid)
        lv = self.level_vote[c]
        if lv.get(level) == (pid, h):
            del lv[level]
        self._removed.add(pid)

    def _snapshot(self, pid: int) -> None:
        """Record the discounted count as of the previous round's end, once
        per round, before the block's vote set changes."""
        if self._touched.get(pid) == self.round:
            return
        self._touched[pid] = self.round
        if self.deep.get(pid, 0) - self.floor_m <= self.vmax.get(pid, 0.0):
            return
        hs = self._h_start
        main = self.main
        depths = [
            (hs[c] if c in hs else len(main[c]) - 1) - h + 1
            for c, h in self.votes_on[pid].items()
        ]
        v = discounted_votes(depths, self.consts)
        if v > self.vmax.get(pid, 0.0):
            self.vmax[pid] = v

    # -- notarization hooks -----------------------------------------------

    def vote_depths(self, pid: int) -> list[int]:
        main = self.main
        return [len(main[c]) - h for c, h in self.votes_on.get(pid, {}).items()]

    def mark_notarized(self, pid: int, v: int, vu: float) -> None:
        self.notarized.add(pid)
        self.notarized_info[pid] = (self.round, v, vu)
        self.hot.discard(pid)
        if vu > self.vmax.get(pid, 0.0):
            self.vmax[pid] = vu
        b = self.dag.blocks[pid]
        if b.level > self.max_notarized_level:
            self.max_notarized_level = b.level
        d = b.depth
        if d > self.tip_depth or (d == self.tip_depth and pid < self.notarized_tip):
            self.tip_depth = d
            self.notarized_tip = pid


def insert_block(view: NodeView, b: Block, stamp=None) -> Optional[Reject]:
    return view.insert(b, stamp)


def longest_chain(view: NodeView, chain_index: int) -> list[int]:
    return list(view.main[chain_index])


def descendants_on_chain(view: NodeView, voter_block: int) -> int:
    b = view.dag.blocks[voter_block]
    main = view.main[b.chain]
    if b.height < len(main) and main[b.height] == voter_block:
        return len(main) - 1 - b.height
    return 0

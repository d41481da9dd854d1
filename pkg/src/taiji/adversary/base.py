"""Strategy interface, the per-round context handed to strategies, and
vote steering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..blockdag import GENESIS, GlobalDag, NodeView, ProposerBlock
from ..mining import ArrivalEvent, ArrivalSchedule, IdPool, mempool_for
from ..params import DerivedConstants, ProtocolParams
from .actions import AssembleAndWithhold, InsufficientBudget, Publish, VoterSpec


@dataclass
class StrategySpec:
    name: str = "honest_null"
    script: Optional[dict] = None
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "script": self.script, "options": dict(self.options)}

    @classmethod
    def from_dict(cls, d) -> "StrategySpec":
        if isinstance(d, str):
            return cls(name=d)
        unknown = set(d) - {"name", "script", "options"}
        if unknown:
            raise ValueError(f"unknown strategy fields: {sorted(unknown)}")
        return cls(d.get("name", "honest_null"), d.get("script"), dict(d.get("options") or {}))


class AdversaryContext:
    """Omniscient, read-only access for a strategy during one round."""

    def __init__(self, dag: GlobalDag, views: list[NodeView], consts: DerivedConstants,
                 params: ProtocolParams, arrived_txs: list[int]):
        self.dag = dag
        self.views = views
        self.consts = consts
        self.params = params
        self.arrived_txs = arrived_txs
        self.round = 0
        self.new_honest: list[int] = []
        self.bank: list[ArrivalEvent] = []
        self._reserved: set[int] = set()

    def begin(self, r: int, new_honest: list[int], fresh: list[ArrivalEvent]) -> None:
        self.round = r
        self.new_honest = new_honest
        self.bank.extend(fresh)
        self._reserved.clear()

    def consume(self, opp: ArrivalEvent) -> None:
        self.bank.remove(opp)

    def free(self, chain: Optional[int]) -> list[ArrivalEvent]:
        """Unreserved banked wins of one type, newest first."""
        out = [o for o in self.bank if o.chain == chain and o.block_id not in self._reserved]
        out.sort(key=lambda o: (-o.round, o.block_id))
        return out

    def reserve(self, opp: ArrivalEvent) -> None:
        self._reserved.add(opp.block_id)

    def deepest_notarized(self) -> int:
        best = GENESIS
        blocks = self.dag.blocks
        for v in self.views:
            t = v.notarized_tip
            bd, td = blocks[best].depth, blocks[t].depth
            if td > bd or (td == bd and t < best):
                best = t
        return best

    def mempool(self, view: NodeView) -> list[int]:
        return mempool_for(view, self.arrived_txs)


class Strategy:
    name = "base"
    favor_adversary_ids = False

    def __init__(self, params: ProtocolParams, consts: DerivedConstants, options: Optional[dict] = None):
        self.params = params
        self.consts = consts
        self.options = dict(options or {})
        self.log: list[dict] = []

    def schedule(self, rng, ids: IdPool) -> Optional[ArrivalSchedule]:
        """Deterministic arrivals for scripted strategies; None means stochastic."""
        return None

    def on_round(self, ctx: AdversaryContext, opportunities: list[ArrivalEvent]) -> list:
        raise NotImplementedError

    def summary(self) -> dict:
        return {"name": self.name, "options": self.options, "log": self.log}


def _find_vote(dag: GlobalDag, head: int, target: ProposerBlock) -> Optional[int]:
    """Height of the block on head's chain that votes for target, if any."""
    x = dag.blocks[head]
    while dag.vote_level[x.id] >= target.level and x.height > 0:
        for _, pid in x.votes:
            if pid == target.id:
                return x.height
        x = dag.blocks[x.parent]
    return None


def _fork_point(dag: GlobalDag, head: int, target: ProposerBlock) -> int:
    """Highest block on head's chain that a vote for target may extend."""
    x = dag.blocks[head]
    while x.height > 0 and (
        dag.vote_level[x.id] >= target.level or dag.vote_depth[x.id] > target.depth
    ):
        x = dag.blocks[x.parent]
    return x.id


def steer_plan(dag: GlobalDag, chain: int, target: int, min_depth: int = 1) -> tuple[int, int, bool]:
    """(parent, blocks needed, first block votes) to make the chain's longest
    chain hold a vote for target at least min_depth deep."""
    head_h, head = dag.chain_tip[chain]
    t = dag.blocks[target]
    h = _find_vote(dag, head, t)
    if h is not None:
        return head, max(0, min_depth - (head_h - h + 1)), False
    fork = _fork_point(dag, head, t)
    if fork == head:
        return head, min_depth, True
    # strictly longer than the current head so no tie-break is involved
    return fork, max(min_depth, head_h - dag.blocks[fork].height + 1), True


def steer_votes(ctx: AdversaryContext, chains, target: int, min_depth: int = 1) -> list:
    """Voter blocks (assembled and published) that point the listed chains'
    longest-chain vote at target's level to target."""
    dag = ctx.dag
    t = dag.blocks[target]
    plans = []
    for c in chains:
        parent, n, votes_first = steer_plan(dag, c, target, min_depth)
        if n == 0:
            continue
        opps = [o for o in ctx.free(c) if o.round >= t.round_mined][:n]
        if len(opps) < n:
            raise InsufficientBudget(f"chain {c}: need {n} wins, hold {len(opps)}")
        plans.append((c, parent, votes_first, opps))
    actions = []
    for c, parent, votes_first, opps in plans:
        prev = parent
        # oldest wins first so every block references only earlier blocks
        for i, o in enumerate(sorted(opps, key=lambda o: (o.round, o.block_id))):
            ctx.reserve(o)
            votes = ((t.level, target),) if (i == 0 and votes_first) else ()
            actions.append(AssembleAndWithhold(o, VoterSpec(prev, votes)))
            actions.append(Publish(o.block_id))
            prev = o.block_id
    return actions

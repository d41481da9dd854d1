"""The round loop.

Each processed round: deliveries, per-node notarization and confirmation,
arrivals (honest blocks assembled from the winner's view; adversary wins
handed to the strategy, which already sees this round's honest blocks),
then the inline analyzers. Rounds with nothing scheduled change no state
and are skipped.
"""

from __future__ import annotations

import hashlib
import heapq
import sys
from typing import Optional

import numpy as np

from ..adversary import (
    AdversaryContext,
    AssembleAndWithhold,
    ExtendPrivateChain,
    InvalidAction,
    ProposerSpec,
    Publish,
    ReorderDeliveries,
    VoterSpec,
    make_strategy,
)
from ..blockdag import ADVERSARY, GlobalDag, NodeView, ProposerBlock, VoterBlock, vote_rule_violation
from ..confirmation import update_confirmed
from ..mining import (
    ArrivalSchedule,
    IdPool,
    assemble_honest_proposer,
    assemble_honest_voter,
    mempool_for,
)
from ..notarization import refresh_notarized_set
from ..params import constants_for_run, constants_report
from .config import SimConfig
from .genesis import is_genesis_state
from .trace import Trace, encode_block


class ModelViolation(RuntimeError):
    """An invariant check fired during a strict run."""


def tx_arrivals(rng: np.random.Generator, rate: float, until: int) -> list[int]:
    """Arrival round of each transaction; the list index is the tx id."""
    if rate <= 0 or until <= 0:
        return []
    n = int(rng.poisson(rate * until))
    return sorted(rng.integers(1, until + 1, size=n).tolist())


def state_hash(views: list[NodeView]) -> str:
    h = hashlib.sha256()
    for v in views:
        h.update(repr((v.node_id, [c[-1] for c in v.main], sorted(v.notarized),
                       v.notarized_tip, v.confirmed)).encode())
    return h.hexdigest()[:16]


class Engine:
    def __init__(self, config: SimConfig):
        self.config = config
        p = self.params = config.params
        self.consts = constants_for_run(p)
        self.rng = np.random.default_rng(config.seed)
        self.dag = GlobalDag(p.m)
        self.views = [NodeView(i, self.dag, self.consts) for i in range(p.honest_node_count)]
        self.strategy = make_strategy(config.strategy, p, self.consts)
        ids = IdPool(self.rng, p.kappa, p.m, favor_adversary=self.strategy.favor_adversary_ids)
        self.schedule = self.strategy.schedule(self.rng, ids) or ArrivalSchedule.generate(p, self.rng, ids)
        until = p.r_max if config.tx_until is None else min(config.tx_until, p.r_max)
        self.tx_round = tx_arrivals(self.rng, config.tx_rate, until)
        self.arrived: list[int] = []
        self.ctx = AdversaryContext(self.dag, self.views, self.consts, p, self.arrived)
        self.level = config.trace_level
        header = {
            "config": config.to_dict(),
            "constants": constants_report(self.consts),
            "nodes": p.honest_node_count,
        }
        self.trace = Trace(header, level=self.level)
        self.outbox: dict[int, list[tuple[int, int, Optional[frozenset]]]] = {}
        self.order: dict[tuple[int, int], tuple] = {}
        self.genesis = True
        self.tx_seen = [0] * len(self.tx_round)
        self._rounds: list[int] = []
        self._queued: set[int] = set()

    # -- scheduling -------------------------------------------------------

    def _wake(self, r: int) -> None:
        if r <= self.params.r_max and r not in self._queued:
            self._queued.add(r)
            heapq.heappush(self._rounds, r)

    def _send(self, r: int, bid: int, skip: int = -1, only: Optional[frozenset] = None) -> None:
        self.outbox.setdefault(r, []).append((bid, skip, only))
        self._wake(r)

    def _deliveries(self, node: int, r: int) -> list[int]:
        batch = [bid for bid, skip, only in self.outbox.get(r, ()) if skip != node and (only is None or node in only)]
        first = self.order.pop((r, node), None)
        if first and batch:
            front = [x for x in first if x in batch]
            fs = set(front)
            batch = front + [x for x in batch if x not in fs]
        return batch

    # -- main loop --------------------------------------------------------

    def execute(self) -> Trace:
        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, 20000))
        try:
            self._loop()
        finally:
            sys.setrecursionlimit(old_limit)
        self.trace.end_round = self.params.r_max
        return self.trace

    def _loop(self) -> None:
        arrivals = self.schedule.by_round()
        nxt = next(arrivals, None)
        for r in sorted(set(self.tx_round)):
            self._wake(r)
        if nxt is not None:
            self._wake(nxt[0])
        ti = 0
        while self._rounds:
            r = heapq.heappop(self._rounds)
            self._queued.discard(r)
            batch = []
            if nxt is not None and nxt[0] == r:
                batch = nxt[1]
                nxt = next(arrivals, None)
                if nxt is not None:
                    self._wake(nxt[0])
            new_tx = []
            while ti < len(self.tx_round) and self.tx_round[ti] == r:
                new_tx.append(ti)
                ti += 1
            self._round(r, batch, new_tx)

    def _round(self, r: int, batch, new_tx: list[int]) -> None:
        tr = self.trace
        views = self.views
        full = self.level != "summary"
        for v in views:
            v.begin_round(r)
        if new_tx:
            self.arrived.extend(new_tx)
            tr.emit("TxArrived", r, txs=new_tx)
        conf_changed = False
        confirmed_tx: list[int] = []
        for v in views:
            ids = self._deliveries(v.node_id, r)
            if ids and full:
                tr.emit("Delivered", r, node=v.node_id, ids=ids)
            for bid in ids:
                v.receive(bid)
            newly = refresh_notarized_set(v, self.consts)
            if v.pending:
                v.retry_pending()
            for pid in newly:
                _, nv, vu = v.notarized_info[pid]
                tr.emit("Notarized", r, node=v.node_id, id=pid, V=nv, Vu=round(vu, 9))
            if newly:
                added, problems = update_confirmed(v, newly)
                for msg in problems:
                    tr.emit("Flag", r, check="confirmation", node=v.node_id, detail=msg)
                for pid in added:
                    conf_changed = True
                    tr.emit("Confirmed", r, node=v.node_id, id=pid)
                    confirmed_tx.extend(self._ledger_add(v, pid))
        self.outbox.pop(r, None)
        if confirmed_tx:
            tr.emit("TxConfirmed", r, txs=sorted(confirmed_tx))
        self._arrivals(r, batch, full)
        for v in views:
            v.end_round()
            while v.floor_flags:
                f = v.floor_flags.pop(0)
                tr.emit("Flag", r, check="vote_floor", node=f["node"], detail=f)
        g = is_genesis_state(self.dag, views, self.consts)
        if g != self.genesis:
            tr.emit("GenesisEnter" if g else "GenesisExit", r)
            self.genesis = g
        if self.level == "full-state-hash":
            tr.emit("StateHash", r, h=state_hash(views))

    def _ledger_add(self, v: NodeView, pid: int) -> list[int]:
        done = []
        n = len(self.views)
        for tx in self.dag.blocks[pid].txs:
            if tx in v.ledger_txs:
                self.trace.emit("Flag", v.round, check="duplicate_tx", node=v.node_id, detail={"tx": tx})
                continue
            v.ledger_txs.add(tx)
            self.tx_seen[tx] += 1
            if self.tx_seen[tx] == n:
                done.append(tx)
        return done

    def _arrivals(self, r: int, batch, full: bool) -> None:
        tr = self.trace
        dag = self.dag
        new_honest = []
        opps = []
        for ev in batch:
            if ev.miner == ADVERSARY:
                opps.append(ev)
                continue
            view = self.views[ev.node]
            if ev.chain is None:
                b = assemble_honest_proposer(view, mempool_for(view, self.arrived), ev.block_id, r)
                new_honest.append(b.id)
            else:
                b = assemble_honest_voter(view, ev.chain, ev.block_id, r)
            dag.add(b, r)
            if full or ev.chain is None:
                tr.emit("Mined", r, node=ev.node, b=encode_block(b), public=True)
            view.insert(b)
            self._send(r + 1, b.id, skip=ev.node)
        self.ctx.begin(r, new_honest, opps)
        for act in self.strategy.on_round(self.ctx, opps):
            self._apply(r, act, full)

    # -- adversary actions -------------------------------------------------

    def _apply(self, r: int, act, full: bool) -> None:
        dag = self.dag
        tr = self.trace
        if isinstance(act, ExtendPrivateChain):
            act = AssembleAndWithhold(act.opportunity, VoterSpec(dag.chain_tip[act.opportunity.chain][1], act.votes))
        if isinstance(act, AssembleAndWithhold):
            o = act.opportunity
            if o not in self.ctx.bank:
                raise InvalidAction(f"round {r}: opportunity {o.block_id} not held")
            b = self._build(o, act.spec)
            dag.add(b, None)
            self.ctx.consume(o)
            if full or isinstance(b, ProposerBlock):
                tr.emit("Mined", r, node=None, b=encode_block(b), public=False)
        elif isinstance(act, Publish):
            b = dag.blocks.get(act.block_id)
            if b is None or b.miner != ADVERSARY:
                raise InvalidAction(f"round {r}: cannot publish {act.block_id}")
            if dag.is_public(b.id):
                return
            dag.publish(b.id, r)
            if full or isinstance(b, ProposerBlock):
                tr.emit("Published", r, id=b.id)
            late = frozenset(act.late_nodes)
            if late:
                on_time = frozenset(v.node_id for v in self.views) - late
                self._send(r + 1, b.id, only=on_time)
                self._send(r + 2, b.id, only=late)
            else:
                self._send(r + 1, b.id)
        elif isinstance(act, ReorderDeliveries):
            if not 0 <= act.node < len(self.views):
                raise InvalidAction(f"round {r}: no node {act.node}")
            key = (r + 1, act.node)
            self.order[key] = self.order.get(key, ()) + tuple(act.first)
        else:
            raise InvalidAction(f"round {r}: unknown action {act!r}")

    def _build(self, o, spec):
        dag = self.dag
        blocks = dag.blocks

        def ref(bid, kind):
            x = blocks.get(bid)
            if not isinstance(x, kind):
                raise InvalidAction(f"block {o.block_id}: reference {bid} is not a known {kind.__name__}")
            if x.round_mined > o.round:
                raise InvalidAction(f"block {o.block_id}: references block {bid} mined after the win")
            return x

        if o.chain is None:
            if not isinstance(spec, ProposerSpec):
                raise InvalidAction(f"proposer win {o.block_id} given a voter spec")
            lp = ref(spec.level_parent, ProposerBlock)
            dp = ref(spec.depth_parent, ProposerBlock)
            n = len(self.arrived)
            if any(not (isinstance(t, int) and 0 <= t < n) for t in spec.txs):
                raise InvalidAction(f"block {o.block_id}: unknown transactions")
            return ProposerBlock(o.block_id, lp.level + 1, dp.depth + 1, lp.id, dp.id, ADVERSARY,
                                 o.round, tuple(spec.txs))
        if not isinstance(spec, VoterSpec):
            raise InvalidAction(f"voter win {o.block_id} given a proposer spec")
        par = ref(spec.parent, VoterBlock)
        if par.chain != o.chain:
            raise InvalidAction(f"block {o.block_id}: parent on chain {par.chain}, win on {o.chain}")
        for _, pid in spec.votes:
            ref(pid, ProposerBlock)
        b = VoterBlock(o.block_id, o.chain, par.id, tuple(tuple(v) for v in spec.votes), ADVERSARY,
                       o.round, par.height + 1)
        why = vote_rule_violation(dag, b)
        if why is not None:
            raise InvalidAction(f"block {o.block_id}: {why.value}")
        return b


def simulate(config: SimConfig) -> Engine:
    eng = Engine(config)
    eng.execute()
    return eng

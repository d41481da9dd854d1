"""Stochastic adversary strategies."""

from __future__ import annotations

from ..blockdag import ProposerBlock
from ..mining import honest_votes
from .actions import AssembleAndWithhold, ProposerSpec, Publish, ReorderDeliveries, VoterSpec
from .base import AdversaryContext, Strategy


class _ChainedVoting:
    """Voter-block parents that follow the adversary's own blocks of this round."""

    def __init__(self):
        self._last: dict[int, tuple[int, int]] = {}

    def parent(self, ctx: AdversaryContext, c: int) -> int:
        last = self._last.get(c)
        if last is not None and last[0] == ctx.round:
            return last[1]
        return ctx.views[0].tip(c)

    def mined(self, ctx: AdversaryContext, c: int, bid: int) -> None:
        self._last[c] = (ctx.round, bid)


class HonestNull(Strategy):
    """Mines and publishes exactly as an honest node would (using node 0's view)."""

    name = "honest_null"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self._chain = _ChainedVoting()

    def on_round(self, ctx, opportunities):
        view = ctx.views[0]
        out = []
        for o in opportunities:
            if o.is_proposer:
                spec = ProposerSpec(view.level_tip, view.notarized_tip, tuple(ctx.mempool(view)))
            else:
                parent = self._chain.parent(ctx, o.chain)
                spec = VoterSpec(parent, honest_votes(view, parent))
                self._chain.mined(ctx, o.chain, o.block_id)
            out.append(AssembleAndWithhold(o, spec))
            out.append(Publish(o.block_id))
        return out


class _Withholding(Strategy):
    """Shared machinery: proposer wins become private blocks one level above
    everything the adversary knows; each is released once an honest block
    reaches its level."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.private: list[int] = []
        self._chain = _ChainedVoting()

    def _top(self, ctx) -> int:
        dag = ctx.dag
        best = ctx.views[0].level_tip
        for bid in list(ctx.new_honest) + self.private:
            b = dag.blocks[bid]
            if isinstance(b, ProposerBlock) and b.level > dag.blocks[best].level:
                best = bid
        return best

    def first_nodes(self, ctx, bid: int) -> list[int]:
        raise NotImplementedError

    def pick_votes(self, ctx, parent: int) -> tuple:
        return honest_votes(ctx.views[0], parent)

    def on_round(self, ctx, opportunities):
        dag = ctx.dag
        out = []
        for o in opportunities:
            if not o.is_proposer:
                continue
            spec = ProposerSpec(self._top(ctx), ctx.deepest_notarized(), ())
            out.append(AssembleAndWithhold(o, spec))
            self.private.append(o.block_id)
        keep = []
        for bid in self.private:
            level = dag.blocks[bid].level if bid in dag.blocks else None
            if level is not None and dag.honest_max_level >= level:
                out.append(Publish(bid))
                for n in self.first_nodes(ctx, bid):
                    out.append(ReorderDeliveries(n, (bid,)))
            else:
                keep.append(bid)
        # blocks assembled above are not in the DAG yet, so they stay private
        self.private = keep
        for o in opportunities:
            if o.is_proposer:
                continue
            parent = self._chain.parent(ctx, o.chain)
            out.append(AssembleAndWithhold(o, VoterSpec(parent, self.pick_votes(ctx, parent))))
            out.append(Publish(o.block_id))
            self._chain.mined(ctx, o.chain, o.block_id)
        return out


class PrivateLevels(_Withholding):
    """Withhold proposer blocks one level ahead and release them ahead of the
    competing honest block at every node; adversary votes favour its own
    released blocks."""

    name = "private_levels"

    def first_nodes(self, ctx, bid):
        return [v.node_id for v in ctx.views]

    def pick_votes(self, ctx, parent):
        view = ctx.views[0]
        votes = dict(honest_votes(view, parent))
        if not votes:
            return ()
        blocks = ctx.dag.blocks
        for pid in view.by_depth.get(view.tip_depth + 1, ()):
            b = blocks[pid]
            if b.miner != "honest" and b.level in votes:
                votes[b.level] = pid
        return tuple(sorted(votes.items()))


class VoteSplit(_Withholding):
    """Release a withheld block at the honest block's level to half of the
    nodes first, then spend voter wins on whichever side is behind."""

    name = "vote_split"

    def first_nodes(self, ctx, bid):
        return [v.node_id for v in ctx.views if v.node_id % 2 == 1]

    def pick_votes(self, ctx, parent):
        view = ctx.views[0]
        votes = dict(honest_votes(view, parent))
        if not votes:
            return ()
        blocks = ctx.dag.blocks
        floor = ctx.dag.vote_level[parent]
        by_level: dict[int, list[int]] = {}
        for pid in view.by_depth.get(view.tip_depth + 1, ()):
            lvl = blocks[pid].level
            if lvl > floor and lvl in votes:
                by_level.setdefault(lvl, []).append(pid)
        for lvl, pids in by_level.items():
            if len(pids) > 1:
                votes[lvl] = min(pids, key=lambda p: (len(view.votes_on.get(p, ())), p))
        return tuple(sorted(votes.items()))

"""Deterministic attack schedules: the HAH displacement and AHH balancing
patterns, and declarative custom scripts."""

from __future__ import annotations

import math
from typing import Optional

from ..blockdag import ADVERSARY, HONEST
from ..mining import ArrivalEvent, ArrivalSchedule, IdPool
from .actions import AssembleAndWithhold, InsufficientBudget, InvalidAction, ProposerSpec, Publish, ReorderDeliveries
from .base import AdversaryContext, Strategy, steer_votes


class ScriptError(ValueError):
    """A custom script is malformed."""


def steer_count(consts) -> int:
    """Chains a steered block needs so that k_min-deep votes notarize it."""
    return consts.threshold + math.ceil(consts.discount(consts.k_min) - 1e-12)


class _Pattern(Strategy):
    """Three proposer arrivals per repetition, `gap` rounds apart, with one
    honest voter block per chain per round.

    Options: reps, gap, start, vote_budget (adversary voter wins granted per
    steered level; default is exactly what the pattern needs).
    """

    favor_adversary_ids = True
    letters = "HAH"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        o = self.options
        self.reps = int(o.get("reps", 6))
        self.gap = int(o.get("gap", 30))
        self.start = int(o.get("start", self.gap))
        self.budget = o.get("vote_budget")
        self.withheld: Optional[int] = None
        self.queued: list = []
        self.spent = 0

    def positions(self) -> list[tuple[int, int, str]]:
        """(round, repetition, letter) for every proposer arrival."""
        out = []
        for i in range(self.reps):
            base = self.start + 3 * self.gap * i
            for j, ch in enumerate(self.letters):
                out.append((base + j * self.gap, i, ch))
        return out

    def horizon(self) -> int:
        return self.start + 3 * self.gap * self.reps + self.gap

    def steer_rounds(self) -> list[int]:
        return [r for r, _, _ in self.positions()][2::3]

    def paused(self) -> tuple[list[int], list[tuple[int, int]]]:
        return [], []

    def steer_need(self) -> dict[int, int]:
        raise NotImplementedError

    def proposer_node(self) -> int:
        return 1 % self.params.honest_node_count

    def schedule(self, rng, ids: IdPool) -> ArrivalSchedule:
        p = self.params
        n = p.honest_node_count
        T = p.r_max
        pause_chains, windows = self.paused()
        events = []
        for r, _, ch in self.positions():
            if r <= T:
                miner = ADVERSARY if ch == "A" else HONEST
                events.append(ArrivalEvent(r, None, miner, self.proposer_node() if miner == HONEST else -1))
        for r in range(1, T + 1):
            off = any(lo < r <= hi for lo, hi in windows)
            for c in range(p.m):
                if off and c in pause_chains:
                    continue
                events.append(ArrivalEvent(r, c, HONEST, c % n))
        need = self.steer_need()
        for r in self.steer_rounds():
            if r > T:
                continue
            left = sum(need.values()) if self.budget is None else int(self.budget)
            for c, k in need.items():
                grant = min(k, left)
                left -= grant
                events.extend(ArrivalEvent(r, c, ADVERSARY) for _ in range(grant))
        return ArrivalSchedule.from_events(events, p.m, ids)

    def summary(self):
        s = super().summary()
        s.update(
            reps=self.reps, gap=self.gap, start=self.start,
            wins_per_level=self.steer_need(), vote_budget=self.budget,
            adversary_voter_wins_spent=self.spent, positions=self.positions(),
        )
        return s

    def _steer(self, ctx, target: int, chains, depth: int) -> list:
        try:
            acts = steer_votes(ctx, chains, target, depth)
        except InsufficientBudget as e:
            self.log.append({"round": ctx.round, "event": "insufficient_budget", "detail": str(e)})
            self.queued.append((target, tuple(chains), depth))
            return []
        self.spent += sum(1 for a in acts if isinstance(a, AssembleAndWithhold))
        return acts

    def _retry_queued(self, ctx) -> list:
        out, queued, self.queued = [], self.queued, []
        for target, chains, depth in queued:
            out.extend(self._steer(ctx, target, chains, depth))
        return out


class HahDisplace(_Pattern):
    """H A H: the adversary block sits one level above the first honest
    block at the same depth, is withheld until the next honest block arrives
    on its level, and is then steered into notarization."""

    name = "hah_displace"
    letters = "HAH"

    def steer_need(self):
        return {c: 1 for c in range(steer_count(self.consts))}

    def on_round(self, ctx: AdversaryContext, opportunities):
        dag = ctx.dag
        out = self._retry_queued(ctx)
        for o in opportunities:
            if o.is_proposer:
                top = ctx.views[0].level_tip
                dp = dag.blocks[top].depth_parent
                out.append(AssembleAndWithhold(o, ProposerSpec(top, dp)))
                self.withheld = o.block_id
        a = self.withheld
        if a is not None and a in dag.blocks:
            lvl = dag.blocks[a].level
            if any(dag.blocks[h].level == lvl for h in ctx.new_honest):
                out.append(Publish(a))
                out.extend(self._steer(ctx, a, sorted(self.steer_need()), 1))
                self.withheld = None
        return out


class AhhBalance(_Pattern):
    """A H H: a withheld block released alongside the honest block on its
    level splits the votes; at the next honest arrival a few paused chains
    are steered so the adversary block notarizes before anyone votes for
    the new honest block."""

    name = "ahh_balance"
    letters = "AHH"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        if self.params.honest_node_count < 2:
            raise ValueError("ahh_balance needs at least two honest nodes")
        self.released: Optional[int] = None

    def proposer_node(self) -> int:
        return 1

    def pause_chains(self) -> list[int]:
        m = self.params.m
        n = self.params.honest_node_count
        first = [c for c in range(m) if c % n == 0]
        k = steer_count(self.consts) - len(first)
        others = [c for c in range(m) if c % n != 0]
        if k < 1 or k > len(others):
            raise ValueError(f"ahh_balance cannot be arranged for m={m}")
        return others[:k]

    def paused(self):
        rr = [r for r, _, _ in self.positions()]
        wins = [(rr[i + 1], rr[i + 2]) for i in range(0, len(rr), 3)]
        return self.pause_chains(), wins

    def steer_need(self):
        return {c: self.consts.k_min for c in self.pause_chains()}

    def on_round(self, ctx: AdversaryContext, opportunities):
        dag = ctx.dag
        out = self._retry_queued(ctx)
        for o in opportunities:
            if o.is_proposer:
                v = ctx.views[0]
                out.append(AssembleAndWithhold(o, ProposerSpec(v.level_tip, v.notarized_tip)))
                self.withheld = o.block_id
                self.released = None
        a = self.withheld
        if a is not None and a in dag.blocks:
            lvl = dag.blocks[a].level
            hs = [h for h in ctx.new_honest if dag.blocks[h].level == lvl]
            if hs:
                out.append(Publish(a))
                for v in ctx.views:
                    if v.node_id != self.proposer_node():
                        out.append(ReorderDeliveries(v.node_id, (a,)))
                self.withheld = None
                self.released = a
            return out
        rel = self.released
        if rel is not None and ctx.new_honest:
            out.extend(self._steer(ctx, rel, self.pause_chains(), self.consts.k_min))
            self.released = None
        return out


class CustomScript(Strategy):
    """Declarative schedule from the config file.

    script = {
      "arrivals": [{"round": r | "rounds": [a, b], "type": "proposer" | "voter",
                    "miner": "honest" | "adversary", "node": n, "chains": [..] | "all",
                    "count": k}],
      "actions":  [{"round": r, "do": "withhold", "label": name,
                    "level_parent": "max_level" | name, "depth_parent": "notarized_tip" | name},
                   {"round": r, "do": "publish", "label": name, "first_at": [nodes]},
                   {"round": r, "do": "steer", "label": name, "chains": [..], "depth": d}]
    }
    """

    name = "custom_script"

    def __init__(self, params, consts, options=None, script=None):
        super().__init__(params, consts, options)
        self.script = script or {}
        self.favor_adversary_ids = bool(self.options.get("favor_adversary_ids", False))
        self.labels: dict[str, int] = {}
        self.actions_by_round: dict[int, list[dict]] = {}
        self._validate()

    def _validate(self) -> None:
        s = self.script
        if not isinstance(s, dict) or not isinstance(s.get("arrivals", []), list):
            raise ScriptError("script must be an object with an 'arrivals' list")
        for a in s.get("arrivals", []):
            if a.get("type") not in ("proposer", "voter"):
                raise ScriptError(f"arrival type must be proposer or voter: {a}")
            if a.get("miner", "honest") not in (HONEST, ADVERSARY):
                raise ScriptError(f"bad miner: {a}")
            if "round" not in a and "rounds" not in a:
                raise ScriptError(f"arrival without round: {a}")
        seen = set()
        for act in s.get("actions", []):
            do = act.get("do")
            if do not in ("withhold", "publish", "steer"):
                raise ScriptError(f"unknown action: {act}")
            if not isinstance(act.get("round"), int) or "label" not in act:
                raise ScriptError(f"action needs an integer round and a label: {act}")
            if do == "withhold":
                seen.add(act["label"])
            elif act["label"] not in seen:
                raise ScriptError(f"action refers to unknown label: {act}")
            self.actions_by_round.setdefault(act["round"], []).append(act)

    def schedule(self, rng, ids):
        p = self.params
        events = []
        for a in self.script.get("arrivals", []):
            if "rounds" in a:
                lo, hi = a["rounds"]
                rounds = range(int(lo), int(hi) + 1)
            else:
                rounds = [int(a["round"])]
            miner = a.get("miner", HONEST)
            node = int(a.get("node", 0)) if miner == HONEST else -1
            if node >= p.honest_node_count:
                raise ScriptError(f"node {node} out of range")
            count = int(a.get("count", 1))
            if a["type"] == "proposer":
                chains = [None]
            else:
                chains = list(range(p.m)) if a.get("chains", "all") == "all" else list(a["chains"])
                if any(not (0 <= c < p.m) for c in chains):
                    raise ScriptError(f"chain out of range: {a}")
            for r in rounds:
                if r > p.r_max:
                    continue
                for c in chains:
                    nd = node if (miner == ADVERSARY or "node" in a or c is None) else c % p.honest_node_count
                    events.extend(ArrivalEvent(r, c, miner, nd) for _ in range(count))
        return ArrivalSchedule.from_events(events, p.m, ids)

    def _resolve(self, ctx, ref, default: str) -> int:
        ref = ref or default
        if ref == "max_level":
            return ctx.views[0].level_tip
        if ref == "notarized_tip":
            return ctx.views[0].notarized_tip
        if ref in self.labels:
            return self.labels[ref]
        raise InvalidAction(f"unknown reference {ref!r}")

    def on_round(self, ctx, opportunities):
        out = []
        props = [o for o in opportunities if o.is_proposer]
        for act in self.actions_by_round.get(ctx.round, []):
            do = act["do"]
            if do == "withhold":
                if not props:
                    raise InvalidAction(f"round {ctx.round}: no adversary proposer win to assemble")
                o = props.pop(0)
                spec = ProposerSpec(
                    self._resolve(ctx, act.get("level_parent"), "max_level"),
                    self._resolve(ctx, act.get("depth_parent"), "notarized_tip"),
                )
                out.append(AssembleAndWithhold(o, spec))
                self.labels[act["label"]] = o.block_id
            elif do == "publish":
                bid = self._resolve(ctx, act["label"], "")
                out.append(Publish(bid))
                for n in act.get("first_at", []):
                    out.append(ReorderDeliveries(int(n), (bid,)))
            else:
                bid = self._resolve(ctx, act["label"], "")
                try:
                    out.extend(steer_votes(ctx, act.get("chains", []), bid, int(act.get("depth", 1))))
                except InsufficientBudget as e:
                    raise InvalidAction(str(e)) from e
        return out

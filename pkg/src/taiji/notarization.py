"""Depth-discounted vote counting and the notarization predicate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from .params import DerivedConstants, notarization_threshold

if TYPE_CHECKING:
    from .blockdag import NodeView


def discounted_votes(depths, c: DerivedConstants) -> float:
    """max over k >= k_min of (V_k - delta_k * m), floored at zero.

    V_k only changes at the observed depths, and delta_k falls with k, so
    the maximum sits at one of them.
    """
    if not c.live:
        return 0.0
    k_min = c.k_min
    ds = sorted((d for d in depths if d >= k_min), reverse=True)
    best = 0.0
    j = 0
    for d in ds:
        j += 1
        v = j - c.discount(d)
        if v > best:
            best = v
    return best


@dataclass(frozen=True)
class VoteTally:
    proposer: int
    per_chain_vote: tuple  # per chain: None or (voter_block, depth)
    V: int
    V_underbar: float

    def V_k(self, k: int) -> int:
        return sum(1 for x in self.per_chain_vote if x is not None and x[1] >= k)


def tally_votes(view: "NodeView", proposer: int, c: DerivedConstants) -> VoteTally:
    per_chain: list[Optional[tuple[int, int]]] = [None] * view.m
    for chain, h in view.votes_on.get(proposer, {}).items():
        main = view.main[chain]
        per_chain[chain] = (main[h], len(main) - h)
    depths = [x[1] for x in per_chain if x is not None]
    return VoteTally(proposer, tuple(per_chain), len(depths), discounted_votes(depths, c))


def is_notarized(tally: VoteTally, m: int) -> bool:
    return tally.V_underbar >= notarization_threshold(m)


def refresh_notarized_set(view: "NodeView", c: DerivedConstants) -> list[int]:
    """Notarize every block whose discounted count reached the threshold.

    Only blocks with enough k_min-deep votes are re-tallied; the rest cannot
    qualify. Returns the newly notarized ids in id order.
    """
    if not view.dirty:
        return []
    view.dirty = False
    if not view.hot:
        return []
    thr = view.threshold
    new = []
    for pid in sorted(view.hot):
        depths = view.vote_depths(pid)
        vu = discounted_votes(depths, c)
        if vu >= thr:
            new.append((pid, len(depths), vu))
    for pid, v, vu in new:
        view.mark_notarized(pid, v, vu)
    return [x[0] for x in new]

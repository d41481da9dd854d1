"""Omniscient analyzer predicates: notarizability and the Genesis state.

These read private adversary blocks and are never visible to protocol
logic.
"""

from __future__ import annotations

from ..blockdag import GlobalDag, NodeView
from ..params import DerivedConstants


def is_notarizable(dag: GlobalDag, views: list[NodeView], bid: int, consts: DerivedConstants) -> bool:
    """Operational test for whether a block could still be notarized.

    (a) nothing at its level or above is notarized in any view;
    (b) its depth is not below the deepest notarized tip, and a block more
        than one deeper needs a notarizable depth parent;
    (c) fewer than a quorum of chains (read from the first view) hold a
        k_min-deep vote that conflicts with it.
    """
    if not consts.live:
        return False
    b = dag.blocks[bid]
    if any(bid in v.notarized for v in views):
        return False
    if max(v.max_notarized_level for v in views) >= b.level:
        return False
    top = max(v.tip_depth for v in views)
    if b.depth < top:
        return False
    if b.depth > top + 1 and not is_notarizable(dag, views, b.depth_parent, consts):
        return False
    v = views[0]
    k = consts.k_min
    level = b.level
    conflicts = 0
    vote_level = dag.vote_level
    for c in range(dag.m):
        main = v.main[c]
        hd = len(main) - k
        if hd < 1:
            continue
        if vote_level[main[hd]] > level:
            conflicts += 1
            continue
        lv = v.level_vote[c].get(level)
        if lv is not None and lv[0] != bid and lv[1] <= hd:
            conflicts += 1
    return conflicts < consts.threshold


def is_genesis_state(dag: GlobalDag, views: list[NodeView], consts: DerivedConstants) -> bool:
    if not dag.private_proposers:
        return True
    top = dag.honest_max_level
    for bid in dag.private_proposers:
        if dag.blocks[bid].level > top:
            return False
    for bid in dag.private_proposers:
        if is_notarizable(dag, views, bid, consts):
            return False
    return True

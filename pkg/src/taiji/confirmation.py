"""Confirmation rule and ledger construction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional

from .blockdag import GENESIS, GlobalDag

if TYPE_CHECKING:
    from .blockdag import NodeView


@dataclass(frozen=True)
class Ledger:
    confirmed_chain: tuple
    txs: tuple


def triple_middle(dag: GlobalDag, notarized, b3: int) -> Optional[int]:
    """Middle block of the triple ending at b3, if b3 closes one."""
    blocks = dag.blocks
    x3 = blocks[b3]
    if x3.id == GENESIS or x3.depth < 3:
        return None
    x2 = blocks[x3.depth_parent]
    x1 = blocks[x2.depth_parent]
    if x2.id not in notarized or x1.id not in notarized or b3 not in notarized:
        return None
    if x2.level == x1.level + 1 and x3.level == x2.level + 1:
        return x2.id
    return None


def confirmed_prefix(view: "NodeView") -> list[int]:
    """Full recomputation: the deepest qualifying middle block and its prefix."""
    dag = view.dag
    best = None
    for b3 in sorted(view.notarized):
        mid = triple_middle(dag, view.notarized, b3)
        if mid is None:
            continue
        d = dag.blocks[mid].depth
        if best is None or d > dag.blocks[best].depth or (
            d == dag.blocks[best].depth and mid < best
        ):
            best = mid
    return [] if best is None else dag.depth_chain(best)


def build_ledger(view: "NodeView") -> Ledger:
    chain = confirmed_prefix(view)
    txs = []
    for pid in chain:
        txs.extend(view.dag.blocks[pid].txs)
    return Ledger(tuple(chain), tuple(txs))


def is_tx_confirmed(tx: int, view: "NodeView") -> bool:
    return tx in build_ledger(view).txs


def update_confirmed(view: "NodeView", newly: Iterable[int]) -> tuple[list[int], list[str]]:
    """Advance view.confirmed after a batch of notarizations.

    Returns (blocks newly confirmed, problems). A qualifying triple whose
    middle block is off the current confirmed chain and not deeper than it
    is reported instead of being tie-broken.
    """
    dag = view.dag
    added: list[int] = []
    problems: list[str] = []
    for b3 in sorted(newly, key=lambda x: (dag.blocks[x].depth, x)):
        mid = triple_middle(dag, view.notarized, b3)
        if mid is None:
            continue
        conf = view.confirmed
        d = dag.blocks[mid].depth
        if d <= len(conf):
            if conf[d - 1] != mid:
                problems.append(f"disjoint qualifying triples at depth {d}: {conf[d - 1]} vs {mid}")
            continue
        chain = dag.depth_chain(mid)
        if chain[: len(conf)] != conf:
            problems.append(f"confirmed chain rollback at depth {len(conf)}")
        added.extend(chain[len(conf):])
        view.confirmed = chain
    return added, problems

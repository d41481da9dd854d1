"""Adversary actions and the errors strategies can raise."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..mining import ArrivalEvent


class InvalidAction(RuntimeError):
    """A strategy asked for something the model does not allow."""


class InsufficientBudget(RuntimeError):
    """Not enough banked adversary wins for the requested steering."""


@dataclass(frozen=True)
class ProposerSpec:
    level_parent: int
    depth_parent: int
    txs: tuple = ()


@dataclass(frozen=True)
class VoterSpec:
    parent: int
    votes: tuple = ()  # ((level, proposer_id), ...)


@dataclass(frozen=True)
class AssembleAndWithhold:
    opportunity: ArrivalEvent
    spec: Union[ProposerSpec, VoterSpec]


@dataclass(frozen=True)
class ExtendPrivateChain:
    """Voter block on the adversary's current head of a chain."""

    opportunity: ArrivalEvent
    votes: tuple = ()


@dataclass(frozen=True)
class Publish:
    block_id: int
    # nodes that receive the block one round late (after an honest relay)
    late_nodes: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class ReorderDeliveries:
    """Put the listed blocks first in a node's next delivery batch."""

    node: int
    first: tuple


AdversaryAction = Union[AssembleAndWithhold, ExtendPrivateChain, Publish, ReorderDeliveries]

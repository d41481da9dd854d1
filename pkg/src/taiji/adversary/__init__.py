"""Adversary strategies and the actions they may take."""

from .actions import (
    AdversaryAction,
    AssembleAndWithhold,
    ExtendPrivateChain,
    InsufficientBudget,
    InvalidAction,
    ProposerSpec,
    Publish,
    ReorderDeliveries,
    VoterSpec,
)
from .base import AdversaryContext, Strategy, StrategySpec, steer_plan, steer_votes
from .scripted import AhhBalance, CustomScript, HahDisplace, ScriptError, steer_count
from .strategies import HonestNull, PrivateLevels, VoteSplit

STRATEGIES = {
    cls.name: cls
    for cls in (HonestNull, PrivateLevels, VoteSplit, HahDisplace, AhhBalance, CustomScript)
}

SCRIPTED = ("hah_displace", "ahh_balance", "custom_script")


def make_strategy(spec: StrategySpec, params, consts) -> Strategy:
    cls = STRATEGIES.get(spec.name)
    if cls is None:
        raise ValueError(f"unknown strategy {spec.name!r}; choose from {sorted(STRATEGIES)}")
    if cls is CustomScript:
        return CustomScript(params, consts, spec.options, spec.script)
    return cls(params, consts, spec.options)


__all__ = [
    "AdversaryAction", "AssembleAndWithhold", "ExtendPrivateChain", "InsufficientBudget",
    "InvalidAction", "ProposerSpec", "Publish", "ReorderDeliveries", "VoterSpec",
    "AdversaryContext", "Strategy", "StrategySpec", "steer_plan", "steer_votes",
    "AhhBalance", "CustomScript", "HahDisplace", "ScriptError", "steer_count",
    "HonestNull", "PrivateLevels", "VoteSplit", "STRATEGIES", "SCRIPTED", "make_strategy",
]

"""Run configuration and its JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..adversary import STRATEGIES, StrategySpec
from ..params import ProtocolParams, validate_params

CONFIG_SCHEMA = "taiji-config/1"
TRACE_LEVELS = ("events", "full-state-hash", "summary")
CONFIG_ENV = "TAIJI_CONFIG"


class ConfigError(ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class SimConfig:
    params: ProtocolParams = field(default_factory=ProtocolParams)
    strategy: StrategySpec = field(default_factory=StrategySpec)
    tx_rate: float = 0.0
    # last round in which transactions arrive (default: the horizon)
    tx_until: Optional[int] = None
    seed: int = 0
    trace_level: str = "events"
    sweep: Optional[dict] = None

    def to_dict(self) -> dict:
        d = {
            "schema": CONFIG_SCHEMA,
            "params": self.params.to_dict(),
            "strategy": self.strategy.to_dict(),
            "tx_rate": self.tx_rate,
            "tx_until": self.tx_until,
            "seed": self.seed,
            "trace_level": self.trace_level,
        }
        if self.sweep is not None:
            d["sweep"] = self.sweep
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        schema = d.get("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ConfigError(f"schema: expected {CONFIG_SCHEMA!r}, got {schema!r}")
        unknown = set(d) - {"schema", "params", "strategy", "tx_rate", "tx_until", "seed",
                            "trace_level", "sweep", "comment"}
        if unknown:
            raise ConfigError([f"{k}: unknown field" for k in sorted(unknown)])
        try:
            params = ProtocolParams.from_dict(d.get("params", {}))
            strategy = StrategySpec.from_dict(d.get("strategy", {}))
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None
        return cls(
            params=params,
            strategy=strategy,
            tx_rate=d.get("tx_rate", 0.0),
            tx_until=d.get("tx_until"),
            seed=d.get("seed", 0),
            trace_level=d.get("trace_level", "events"),
            sweep=d.get("sweep"),
        )

    def problems(self) -> list[str]:
        p = self.params
        out = [f"params.{v}" for v in validate_params(p, liveness=p.beta < 0.5)]
        if self.strategy.name not in STRATEGIES:
            out.append(f"strategy.name: unknown {self.strategy.name!r}")
        if not isinstance(self.tx_rate, (int, float)) or self.tx_rate < 0:
            out.append("tx_rate >= 0")
        if self.tx_until is not None and (not isinstance(self.tx_until, int) or self.tx_until < 0):
            out.append("tx_until >= 0")
        if not isinstance(self.seed, int) or not (0 <= self.seed < 2**64):
            out.append("seed: 64-bit non-negative integer")
        if self.trace_level not in TRACE_LEVELS:
            out.append(f"trace_level in {TRACE_LEVELS}")
        return out

    def validate(self) -> "SimConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self


def load_config(path) -> SimConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return SimConfig.from_dict(data)

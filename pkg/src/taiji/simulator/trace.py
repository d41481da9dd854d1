"""Newline-delimited JSON trace: a header line, one event per line, and an
end marker so truncation is detectable."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

from ..blockdag import ProposerBlock, VoterBlock

TRACE_SCHEMA = "taiji-trace/1"

EVENT_KINDS = (
    "Mined", "Published", "Delivered", "Notarized", "Confirmed",
    "GenesisEnter", "GenesisExit", "TxArrived", "TxConfirmed", "Flag", "StateHash",
)


class TraceError(ValueError):
    pass


def encode_block(b) -> dict:
    if isinstance(b, ProposerBlock):
        return {"t": "P", "id": b.id, "level": b.level, "depth": b.depth, "lp": b.level_parent,
                "dp": b.depth_parent, "miner": b.miner, "r": b.round_mined, "txs": list(b.txs)}
    return {"t": "V", "id": b.id, "chain": b.chain, "parent": b.parent,
            "votes": [list(v) for v in b.votes], "miner": b.miner, "r": b.round_mined, "h": b.height}


def decode_block(d: dict):
    if d["t"] == "P":
        return ProposerBlock(d["id"], d["level"], d["depth"], d["lp"], d["dp"], d["miner"], d["r"],
                             tuple(d["txs"]))
    return VoterBlock(d["id"], d["chain"], d["parent"], tuple(tuple(v) for v in d["votes"]),
                      d["miner"], d["r"], d["h"])


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class Trace:
    def __init__(self, header: dict, events: Optional[list] = None, level: str = "events"):
        self.header = header
        self.events: list[dict] = events if events is not None else []
        self.level = level
        self.end_round: Optional[int] = None

    def emit(self, kind: str, r: int, **payload) -> None:
        payload["k"] = kind
        payload["r"] = r
        self.events.append(payload)

    def of_kind(self, *kinds) -> Iterable[dict]:
        ks = set(kinds)
        return (e for e in self.events if e["k"] in ks)

    def lines(self):
        yield _dump({"schema": TRACE_SCHEMA, "level": self.level, **self.header})
        for e in self.events:
            yield _dump(e)
        yield _dump({"k": "End", "r": self.end_round, "n": len(self.events)})

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        lines = text.splitlines()
        if not lines:
            raise TraceError("empty trace")
        try:
            rows = [json.loads(x) for x in lines]
        except json.JSONDecodeError as e:
            raise TraceError(f"unparseable line ({e}); file truncated or corrupt") from None
        head = rows[0]
        if not isinstance(head, dict) or head.get("schema") != TRACE_SCHEMA:
            raise TraceError(f"schema mismatch: expected {TRACE_SCHEMA!r}")
        tail = rows[-1]
        if len(rows) < 2 or tail.get("k") != "End" or tail.get("n") != len(rows) - 2:
            raise TraceError("missing or inconsistent end marker; file truncated")
        header = {k: v for k, v in head.items() if k not in ("schema", "level")}
        events = rows[1:-1]
        for e in events:
            if e.get("k") not in EVENT_KINDS or not isinstance(e.get("r"), int):
                raise TraceError(f"malformed event: {e}")
        t = cls(header, events, head.get("level", "events"))
        t.end_round = tail.get("r")
        return t

    @classmethod
    def read(cls, path) -> "Trace":
        return cls.loads(Path(path).read_text())

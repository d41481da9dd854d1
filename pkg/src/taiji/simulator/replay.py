"""Re-execute a stored trace's block traffic against fresh node views and
compare the derived notarizations, confirmations, Genesis transitions and
vote lower-bound flags with what the trace recorded.

Only traces that keep every block and delivery (levels "events" and
"full-state-hash") can be replayed.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from ..blockdag import GlobalDag, NodeView
from ..confirmation import update_confirmed
from ..notarization import refresh_notarized_set
from ..params import ProtocolParams, constants_for_run
from .engine import state_hash
from .genesis import is_genesis_state
from .trace import Trace, decode_block

REPLAYABLE = ("events", "full-state-hash")


@dataclass
class ReplayResult:
    replayed: bool
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _recorded(trace: Trace):
    out = defaultdict(list)
    for e in trace.events:
        k = e["k"]
        if k == "Notarized":
            out["notarized"].append((e["r"], e["node"], e["id"]))
        elif k == "Confirmed":
            out["confirmed"].append((e["r"], e["node"], e["id"]))
        elif k in ("GenesisEnter", "GenesisExit"):
            out["genesis"].append((e["r"], k == "GenesisEnter"))
        elif k == "Flag" and e.get("check") == "vote_floor":
            out["vote_floor"].append((e["r"], e["node"], e["detail"]["block"]))
        elif k == "StateHash":
            out["state_hash"].append((e["r"], e["h"]))
    return out


def replay(trace: Trace) -> ReplayResult:
    if trace.level not in REPLAYABLE:
        return ReplayResult(False)
    cfg = trace.header.get("config", {})
    params = ProtocolParams.from_dict(cfg.get("params", {}))
    consts = constants_for_run(params)
    n = trace.header.get("nodes", params.honest_node_count)
    dag = GlobalDag(params.m)
    views = [NodeView(i, dag, consts) for i in range(n)]

    by_round: dict[int, list[dict]] = defaultdict(list)
    for e in trace.events:
        by_round[e["r"]].append(e)

    got = defaultdict(list)
    genesis = True
    for r in sorted(by_round):
        evs = by_round[r]
        delivered = defaultdict(list)
        for e in evs:
            if e["k"] == "Delivered":
                delivered[e["node"]].extend(e["ids"])
        for v in views:
            v.begin_round(r)
        for v in views:
            for bid in delivered.get(v.node_id, ()):
                v.receive(bid)
            newly = refresh_notarized_set(v, consts)
            if v.pending:
                v.retry_pending()
            for pid in newly:
                got["notarized"].append((r, v.node_id, pid))
            if newly:
                added, _ = update_confirmed(v, newly)
                got["confirmed"].extend((r, v.node_id, pid) for pid in added)
        for e in evs:
            if e["k"] == "Mined":
                b = decode_block(e["b"])
                if e.get("public"):
                    dag.add(b, r)
                    views[e["node"]].insert(b)
                else:
                    dag.add(b, None)
            elif e["k"] == "Published":
                dag.publish(e["id"], r)
        for v in views:
            v.end_round()
            for f in v.floor_flags:
                got["vote_floor"].append((r, f["node"], f["block"]))
            v.floor_flags.clear()
        g = is_genesis_state(dag, views, consts)
        if g != genesis:
            got["genesis"].append((r, g))
            genesis = g
        if trace.level == "full-state-hash":
            got["state_hash"].append((r, state_hash(views)))

    want = _recorded(trace)
    res = ReplayResult(True)
    for key in ("notarized", "confirmed", "genesis", "vote_floor", "state_hash"):
        a, b = want.get(key, []), got.get(key, [])
        if key == "state_hash":
            # hashes are only recorded for processed rounds; compare those
            b = [x for x in b if x[0] in {y[0] for y in a}]
        if a != b:
            extra = sorted(set(b) - set(a))[:5]
            missing = sorted(set(a) - set(b))[:5]
            res.mismatches.append({"check": key, "recorded_only": missing, "replayed_only": extra})
    return res

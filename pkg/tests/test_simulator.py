import dataclasses
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taiji.adversary import StrategySpec
from taiji.blockdag import ADVERSARY, HONEST, GlobalDag, ProposerBlock, VoterBlock, vote_rule_violation
from taiji.params import ProtocolParams
from taiji.simulator import (
    PASS,
    SimConfig,
    Trace,
    TraceError,
    TraceIndex,
    classify_honest_blocks,
    counting_check,
    is_notarizable,
    measure_latency,
    run,
    simulate,
)
from taiji.simulator.analyzers import inclusion_bound_check, non_genesis_intervals
from taiji.simulator.replay import replay
from taiji.simulator.trace import decode_block

from conftest import World, scripted


def small(**kw):
    base = dict(m=6, beta=0.3, fp_bar=0.01, fv_bar=0.05, r_max=2500, honest_node_count=2)
    base.update(kw)
    return ProtocolParams(**base)


def test_zero_rounds_is_empty():
    tr, rep = run(SimConfig(params=small(r_max=0)))
    assert tr.events == []
    assert rep.verdict == PASS


def test_same_seed_same_bytes():
    cfg = SimConfig(params=small(), strategy=StrategySpec("private_levels"), seed=5, tx_rate=0.02)
    a, _ = run(cfg)
    b, _ = run(cfg)
    assert a.dumps() == b.dumps()
    c, _ = run(dataclasses.replace(cfg, seed=6))
    assert c.dumps() != a.dumps()


def test_echoed_config_reproduces_bytes():
    cfg = SimConfig(params=small(), strategy=StrategySpec("vote_split"), seed=9, tx_rate=0.01)
    tr, _ = run(cfg)
    again, _ = run(SimConfig.from_dict(json.loads(json.dumps(tr.header["config"]))))
    assert again.dumps() == tr.dumps()


# -- Genesis state and notarizability ------------------------------------


def test_genesis_pattern_hah():
    eng, pos = scripted("hah_displace")
    ix = TraceIndex(eng.trace)
    got = ["G" if ix.genesis_at(r) else "." for r, _, _ in pos[:6]]
    assert "".join(got) == "G.GG.G"


def test_genesis_pattern_ahh():
    eng, pos = scripted("ahh_balance")
    ix = TraceIndex(eng.trace)
    got = ["G" if ix.genesis_at(r) else "." for r, _, _ in pos[:6]]
    assert "".join(got) == ".GG.GG"


def private_adversary(eng):
    return [b.id for b in eng.dag.blocks.values() if isinstance(b, ProposerBlock) and b.miner == ADVERSARY]


def test_hah_withheld_block_is_notarizable():
    eng, pos = scripted("hah_displace", r_max=60)
    (a,) = private_adversary(eng)
    assert a in eng.dag.private_proposers
    assert is_notarizable(eng.dag, eng.views, a, eng.consts)


def test_hah_block_not_notarizable_once_notarized():
    eng, pos = scripted("hah_displace", r_max=120)
    (a,) = private_adversary(eng)
    assert all(a in v.notarized for v in eng.views)
    assert not is_notarizable(eng.dag, eng.views, a, eng.consts)


def test_ahh_block_notarizable_before_second_honest():
    eng, pos = scripted("ahh_balance", r_max=89)
    (a,) = private_adversary(eng)
    assert eng.dag.is_public(a)
    assert not any(a in v.notarized for v in eng.views)
    assert is_notarizable(eng.dag, eng.views, a, eng.consts)


def test_level_at_or_below_notarized_not_notarizable():
    w = World()
    p1 = w.prop(100)
    w.notarize(100)
    w.prop(101, lp=100, dp=100)
    w.notarize(101)
    a = w.prop(102, lp=100, dp=100, miner=ADVERSARY, public=False)
    assert not is_notarizable(w.dag, w.views, a.id, w.consts)
    b = w.prop(103, lp=101, dp=101, miner=ADVERSARY, public=False)
    assert is_notarizable(w.dag, w.views, b.id, w.consts)
    assert p1.level == 1


# -- counting and classification -----------------------------------------


def test_counting_on_scripted_patterns():
    for name in ("hah_displace", "ahh_balance"):
        eng, _ = scripted(name)
        rows = counting_check(eng.trace)
        assert len(rows) == 6
        assert all((ma, mh, ok) == (1, 0, True) for _, _, ma, mh, ok in rows)


def test_all_genesis_trace_has_no_intervals():
    tr, _ = run(SimConfig(params=small(), strategy=StrategySpec("honest_null"), seed=1))
    assert counting_check(tr) == []


def test_classification_hah():
    eng, _ = scripted("hah_displace")
    part = classify_honest_blocks(eng.trace, eng.consts.delta_r, loners_only=False, strict=True)
    assert part.histogram["notarize"] == 6
    assert part.histogram["private_level"] == 6
    assert sum(part.histogram.values()) == 12


def test_classification_ahh_pairs_on_same_depth():
    eng, _ = scripted("ahh_balance")
    part = classify_honest_blocks(eng.trace, eng.consts.delta_r, loners_only=False, strict=True)
    assert part.histogram["balance"] == 6
    assert part.histogram["public_h"] == 6
    assert len(part.pairs) == 6 and all(ok for _, _, ok in part.pairs)


def loner_params(**kw):
    base = dict(m=4, beta=0.0, fv_bar=0.2, fp_bar=0.0008, r_max=20000, honest_node_count=2)
    base.update(kw)
    return ProtocolParams(**base)


def test_honest_only_loners_all_notarize():
    # m=4 is too few chains for the typical event: about one loner in ten
    # notarizes a few rounds after delta_r, so this uses m=20
    p = loner_params(m=20, fv_bar=0.05, fp_bar=0.0005)
    tr, rep = run(SimConfig(params=p, seed=2, trace_level="summary"))
    part = classify_honest_blocks(tr, rep.constants["delta_r"], strict=True)
    assert sum(part.histogram.values()) > 5
    assert part.histogram["notarize"] == sum(part.histogram.values())


# -- latency --------------------------------------------------------------


def test_late_transactions_are_censored():
    p = loner_params(r_max=3000)
    tr, _ = run(SimConfig(params=p, seed=4, tx_rate=0.9))
    ix = TraceIndex(tr)
    lat = measure_latency(tr, ix)
    assert lat.total == len(ix.tx_arrival)
    assert lat.censored + len(lat.samples) == lat.total
    late = [t for t, r in ix.tx_arrival.items() if r >= p.r_max - 20]
    assert late and all(t not in ix.tx_confirmed for t in late)
    assert lat.censored >= len(late)


def test_honest_inclusion_bound():
    p = loner_params(r_max=12000)
    tr, rep = run(SimConfig(params=p, seed=0, tx_rate=0.05, tx_until=8000))
    ib = inclusion_bound_check(TraceIndex(tr), rep.constants["delta_r"])
    assert ib.checked > 100
    assert ib.failures == []


def test_latency_vectors_repeat():
    cfg = SimConfig(params=small(), strategy=StrategySpec("private_levels"), seed=3, tx_rate=0.03)
    a = measure_latency(run(cfg)[0])
    b = measure_latency(run(cfg)[0])
    assert (a.samples, a.censored) == (b.samples, b.censored)


# -- trace file format ------------------------------------------------------


def test_trace_round_trip(tmp_path):
    tr, _ = run(SimConfig(params=small(), seed=1, tx_rate=0.01))
    path = tmp_path / "t.ndjson"
    tr.write(path)
    back = Trace.read(path)
    assert back.dumps() == tr.dumps()
    assert back.events == tr.events


def test_truncated_trace_rejected():
    tr, _ = run(SimConfig(params=small(r_max=500), seed=1))
    lines = tr.dumps().splitlines()
    with pytest.raises(TraceError, match="truncated"):
        Trace.loads("\n".join(lines[:-1]))
    with pytest.raises(TraceError):
        Trace.loads("\n".join(lines[:-1]) + "\n{\"k\": \"Mi")


def test_schema_mismatch_rejected():
    tr, _ = run(SimConfig(params=small(r_max=100), seed=1))
    lines = tr.dumps().splitlines()
    head = json.loads(lines[0])
    head["schema"] = "taiji-trace/0"
    with pytest.raises(TraceError, match="schema"):
        Trace.loads("\n".join([json.dumps(head)] + lines[1:]))


@pytest.mark.parametrize("level", ["events", "full-state-hash"])
@pytest.mark.parametrize("strategy", ["honest_null", "private_levels", "hah_displace"])
def test_replay_agrees(level, strategy):
    if strategy == "hah_displace":
        eng, _ = scripted(strategy)
        cfg = dataclasses.replace(eng.config, trace_level=level)
    else:
        cfg = SimConfig(params=small(), strategy=StrategySpec(strategy), seed=8, tx_rate=0.02, trace_level=level)
    tr, _ = run(cfg)
    res = replay(Trace.loads(tr.dumps()))
    assert res.replayed
    assert res.mismatches == []


def test_replay_detects_tampering():
    cfg = SimConfig(params=small(), seed=8, trace_level="full-state-hash")
    tr, _ = run(cfg)
    ev = next(e for e in tr.events if e["k"] == "StateHash")
    ev["h"] = "0" * len(ev["h"])
    assert not replay(tr).ok


def test_summary_traces_are_not_replayed():
    tr, _ = run(SimConfig(params=small(), seed=8, trace_level="summary"))
    assert not replay(tr).replayed


# -- honest behavior on traces --------------------------------------------


def mined_blocks(trace):
    return [decode_block(e["b"]) for e in trace.of_kind("Mined")]


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["honest_null", "private_levels", "vote_split"]),
       st.floats(0.0, 0.45))
def test_honest_blocks_follow_mining_rules(seed, strategy, beta):
    p = small(beta=beta, r_max=1500)
    tr, _ = run(SimConfig(params=p, strategy=StrategySpec(strategy), seed=seed))
    blocks = mined_blocks(tr)
    dag = GlobalDag(p.m)
    honest_props = []
    for b in blocks:
        if isinstance(b, VoterBlock) and b.miner == HONEST:
            assert vote_rule_violation(dag, b) is None
        dag.add(b, None)
        if isinstance(b, ProposerBlock) and b.miner == HONEST:
            honest_props.append(b)
    for x, y in zip(honest_props, honest_props[1:]):
        if y.round_mined > x.round_mined:
            assert y.level > x.level
            assert y.depth >= x.depth


def test_closed_intervals_satisfy_counting():
    p = small(beta=0.4, r_max=6000)
    for seed in range(5):
        tr, _ = run(SimConfig(params=p, strategy=StrategySpec("private_levels"), seed=seed,
                              trace_level="summary"))
        ix = TraceIndex(tr)
        rows = counting_check(tr, ix)
        assert len(rows) == len(non_genesis_intervals(ix))
        assert all(ok for *_, ok in rows)

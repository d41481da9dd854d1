import dataclasses

import pytest

from taiji.adversary import StrategySpec, make_strategy
from taiji.blockdag import GENESIS, HONEST, GlobalDag, NodeView, ProposerBlock, VoterBlock, voter_genesis
from taiji.params import ProtocolParams, constants_for_run, derive_constants
from taiji.simulator import SimConfig, simulate


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


class World:
    """A hand-built DAG with one or more views, for deterministic scenarios."""

    def __init__(self, m=4, beta=0.25, k_min=1, nodes=1, fv=1.0):
        self.params = ProtocolParams(m=m, beta=beta, k_min_override=k_min, fv_bar=fv)
        self.consts = derive_constants(self.params)
        self.dag = GlobalDag(m)
        self.views = [NodeView(i, self.dag, self.consts) for i in range(nodes)]
        self.r = 1

    @property
    def view(self):
        return self.views[0]

    def prop(self, bid, lp=GENESIS, dp=GENESIS, miner=HONEST, txs=(), public=True, insert=True):
        lpb, dpb = self.dag.blocks[lp], self.dag.blocks[dp]
        b = ProposerBlock(bid, lpb.level + 1, dpb.depth + 1, lp, dp, miner, self.r, tuple(txs))
        self.dag.add(b, self.r if public else None)
        if insert and public:
            for v in self.views:
                v.begin_round(self.r)
                assert v.insert(b) is None
        return b

    def voter(self, bid, chain, parent=None, votes=(), miner=HONEST, insert=True):
        parent = voter_genesis(chain) if parent is None else parent
        par = self.dag.blocks[parent]
        b = VoterBlock(bid, chain, parent, tuple(votes), miner, self.r, par.height + 1)
        self.dag.add(b, self.r)
        if insert:
            for v in self.views:
                v.begin_round(self.r)
                v.insert(b)
        return b

    def notarize(self, *bids):
        for v in self.views:
            for bid in bids:
                v.mark_notarized(bid, 0, 0.0)


@pytest.fixture
def world():
    return World()


def scripted(name, **opts):
    """Executed engine for a scripted attack at the attack test parameters."""
    p = ProtocolParams(m=12, beta=0.25, fp_bar=0.001, fv_bar=1.0, r_max=1, honest_node_count=2)
    strat = make_strategy(StrategySpec(name, options=opts), p, constants_for_run(p))
    r_max = opts.pop("r_max", None) or strat.horizon()
    p = dataclasses.replace(p, r_max=r_max)
    eng = simulate(SimConfig(params=p, strategy=StrategySpec(name, options=opts), seed=0))
    return eng, strat.positions()

"""Return to the Genesis state at beta=0.4, m=50, r_max=50000, over 1000
seeded runs against the level-withholding adversary.

The strong form (every non-Genesis interval closes before the horizon in at
least 99% of runs) does not hold at this beta: the adversary lead behaves
like a random walk with drift -(1 - 2 beta) per proposer arrival, which is
above zero a large share of the time, so the horizon often lands inside an
interval. A 100-seed probe gave 61% of runs ending inside an interval and
58% of rounds spent outside Genesis. That check is kept as a strict xfail.
The counting inequality, which drives the return, is checked on every
interval including the ones still open at the horizon.
"""

import pytest

from taiji.adversary import StrategySpec
from taiji.params import ProtocolParams
from taiji.simulator import SimConfig, TraceIndex, counting_check, run
from taiji.simulator.analyzers import non_genesis_intervals

SEEDS = 1000


@pytest.fixture(scope="module")
def intervals():
    p = ProtocolParams(m=50, beta=0.4, fv_bar=0.01, fp_bar=0.001, r_max=50000, k_min_override=6,
                       honest_node_count=2)
    out = []
    for seed in range(SEEDS):
        tr, _ = run(SimConfig(params=p, strategy=StrategySpec("private_levels"), seed=seed,
                              trace_level="summary"))
        ix = TraceIndex(tr)
        out.append((non_genesis_intervals(ix), counting_check(tr, ix)))
    return out


def test_counting_holds_on_every_interval(intervals):
    total = sum(len(iv) for iv, _ in intervals)
    bad = [(i, row) for i, (_, rows) in enumerate(intervals) for row in rows if not row[-1]]
    closed = sum(1 for iv, _ in intervals for *_, c in iv if c)
    print(f"intervals={total} closed={closed} counting_failures={len(bad)}")
    assert total > 0
    assert bad == []


@pytest.mark.xfail(strict=True, reason="horizon falls inside a non-Genesis interval in most runs at beta=0.4")
def test_all_intervals_close_before_horizon(intervals):
    closed_runs = sum(1 for iv, _ in intervals if all(c for *_, c in iv))
    print(f"runs with every interval closed: {closed_runs}/{SEEDS}")
    assert closed_runs >= 0.99 * SEEDS

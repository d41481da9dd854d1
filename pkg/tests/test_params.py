import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taiji.params import (
    DegenerateBeta,
    ProtocolParams,
    constants_for_run,
    crossover_k,
    delta_k,
    derive_constants,
    epsilon_m_value,
    exact_gamma_c1,
    notarization_threshold,
    validate_params,
)
from taiji.simulator import load_config


def test_gamma_c1_quarter():
    g, c = exact_gamma_c1(0.25)
    assert g == Fraction(1, 144)
    assert c == Fraction(1, 32)
    k = derive_constants(ProtocolParams(m=1000, beta=0.25))
    assert k.gamma == pytest.approx(0.006944444444444444, rel=0, abs=1e-18)
    assert k.c1 == 0.03125


def test_gamma_c1_tenth():
    g, c = exact_gamma_c1(0.1)
    assert g == Fraction(16, 900)
    assert c == Fraction(1, 20)


def test_half_is_degenerate():
    with pytest.raises(DegenerateBeta):
        derive_constants(ProtocolParams(beta=0.5))


def test_beyond_half_never_notarizes():
    c = constants_for_run(ProtocolParams(beta=0.6))
    assert not c.live
    assert math.isinf(delta_k(1, c))


def test_delta_k_large_k_is_floor():
    c = derive_constants(ProtocolParams(m=1000, beta=0.25))
    assert delta_k(10000, c) == pytest.approx(7.04e-5, abs=1e-7)
    assert delta_k(10000, c) == c.delta_k_floor


def test_delta_k_at_one():
    c = derive_constants(ProtocolParams(m=1000, beta=0.25))
    assert delta_k(1, c) == pytest.approx(0.03125 / 3, rel=1e-12)


def test_delta_k_rejects_zero():
    c = derive_constants(ProtocolParams())
    with pytest.raises(ValueError):
        delta_k(0, c)


def test_k_min_formula_and_override():
    c = derive_constants(ProtocolParams(m=1000, beta=0.25, k_min_override=None))
    expected = (4 / (1 / 144)) * math.log(200 / ((1 / 144) * (1 / 32)))
    assert c.k_min_formula == pytest.approx(expected, rel=1e-12)
    assert c.k_min == math.ceil(expected)
    assert derive_constants(ProtocolParams(k_min_override=6)).k_min == 6


def test_delta_r():
    c = derive_constants(ProtocolParams(beta=0.25, fv_bar=0.02, k_min_override=6))
    assert c.delta_r == math.ceil(12 / (0.5 * 0.02))


def test_threshold():
    assert notarization_threshold(10) == 6
    assert notarization_threshold(101) == 51
    assert notarization_threshold(1) == 1


def test_validate_messages():
    assert "m >= 1" in validate_params(ProtocolParams(m=0))
    assert "fp_bar <= 1 in bernoulli mode" in validate_params(ProtocolParams(fp_bar=1.5))
    assert validate_params(ProtocolParams(fp_bar=1.5, arrival_mode="poisson")) == []
    assert validate_params(ProtocolParams(beta=0.7), liveness=False) == []
    assert validate_params(ProtocolParams(beta=0.7))


def test_default_config_validates():
    cfg = load_config("configs/default.json")
    assert cfg.problems() == []
    assert validate_params(ProtocolParams()) == []


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 0.499), st.integers(2, 100000))
def test_constants_finite_positive(beta, m):
    c = derive_constants(ProtocolParams(m=m, beta=beta, k_min_override=None, fv_bar=0.5))
    for x in (c.gamma, c.c1, c.k_min, c.delta_r):
        assert math.isfinite(x) and x > 0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.49), st.integers(3, 5000), st.integers(1, 5000))
def test_epsilon_decreasing_in_m(beta, m1, dm):
    # ln m / m is not monotone below m = 3, so the property starts there
    c1 = (1 - 2 * beta) / 16
    assert epsilon_m_value(beta, c1, m1 + dm, 20000) < epsilon_m_value(beta, c1, m1, 20000)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.49), st.integers(2, 10000), st.integers(1, 3000))
def test_delta_k_monotone_with_floor(beta, m, k):
    c = derive_constants(ProtocolParams(m=m, beta=beta))
    assert delta_k(k + 1, c) <= delta_k(k, c)
    assert delta_k(k, c) >= c.delta_k_floor
    if k > crossover_k(c):
        assert delta_k(k, c) == c.delta_k_floor


def test_params_round_trip():
    p = ProtocolParams(m=7, beta=0.3, arrival_mode="poisson")
    assert ProtocolParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        ProtocolParams.from_dict({"bogus": 1})

"""Protocol parameters and the derived security constants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

ARRIVAL_MODES = ("poisson", "bernoulli")

LOG_BASE = "e"


class DegenerateBeta(ValueError):
    """Raised when beta >= 1/2, where gamma vanishes and k_min is undefined."""


@dataclass(frozen=True)
class ProtocolParams:
    m: int = 50
    beta: float = 0.25
    fp_bar: float = 0.001
    fv_bar: float = 0.02
    r_max: int = 20000
    kappa: int = 64
    k_min_override: Optional[int] = 6
    arrival_mode: str = "bernoulli"
    honest_node_count: int = 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown params fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class DerivedConstants:
    gamma: float
    c1: float
    k_min: int
    delta_k_floor: float
    epsilon_m: float
    delta_r: Optional[int]
    m: int
    beta: float
    k_min_formula: Optional[float] = None
    # False when beta >= 1/2: the discounted count is pinned at zero and
    # nothing is ever notarized.
    live: bool = True
    log_base: str = LOG_BASE
    _table: tuple = field(default=(), repr=False, compare=False)

    @property
    def threshold(self) -> int:
        return notarization_threshold(self.m)

    def discount(self, k: int) -> float:
        """delta_k * m, served from a small cache for shallow depths."""
        if k < len(self._table):
            return self._table[k]
        return delta_k(k, self) * self.m


def notarization_threshold(m: int) -> int:
    return m // 2 + 1


def exact_gamma_c1(beta) -> tuple[Fraction, Fraction]:
    """gamma and c1 as exact rationals (beta is read through its decimal repr)."""
    b = Fraction(str(beta)) if isinstance(beta, float) else Fraction(beta)
    one = 1 - 2 * b
    return one * one / 36, one / 16


def _ln(x: float) -> float:
    return math.log(x)


def k_min_formula(gamma: float, c1: float) -> float:
    return (4.0 / gamma) * _ln(200.0 / (gamma * c1))


def delta_k_floor_value(beta: float, c1: float, m: int) -> float:
    return (1 - 2 * beta) * c1 / (1 + 32 * _ln(m))


def epsilon_m_value(beta: float, c1: float, m: int, r_max: int) -> float:
    return float(r_max) ** 2 * math.exp(-(1 - 2 * beta) * c1 * m / (2 + 64 * _ln(m)))


def delta_k(k: int, c: DerivedConstants) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not c.live:
        return math.inf
    return max(c.c1 / (1 + 2 * k), c.delta_k_floor)


def crossover_k(c: DerivedConstants) -> float:
    """Depth above which delta_k sits on its floor."""
    return (c.c1 / c.delta_k_floor - 1) / 2


def validate_params(p: ProtocolParams, liveness: bool = True) -> list[str]:
    """Every violated parameter invariant, as readable messages (empty if ok)."""
    out = []
    if not isinstance(p.m, int) or p.m < 1:
        out.append("m >= 1")
    hi = 0.5 if liveness else 1.0
    if not (0 <= p.beta <= 1.0):
        out.append("0 <= beta <= 1")
    elif liveness and p.beta >= hi:
        out.append("beta < 0.5 for liveness experiments")
    if not p.fp_bar > 0:
        out.append("fp_bar > 0")
    if not p.fv_bar > 0:
        out.append("fv_bar > 0")
    if not isinstance(p.r_max, int) or p.r_max < 0:
        out.append("r_max >= 0")
    if not isinstance(p.honest_node_count, int) or p.honest_node_count < 1:
        out.append("honest_node_count >= 1")
    if not isinstance(p.kappa, int) or p.kappa < 16 or p.kappa > 64:
        out.append("16 <= kappa <= 64")
    if p.k_min_override is not None and (
        not isinstance(p.k_min_override, int) or p.k_min_override < 1
    ):
        out.append("k_min_override >= 1")
    if p.arrival_mode not in ARRIVAL_MODES:
        out.append(f"arrival_mode in {ARRIVAL_MODES}")
    elif p.arrival_mode == "bernoulli":
        if p.fp_bar > 1:
            out.append("fp_bar <= 1 in bernoulli mode")
        if p.fv_bar > 1:
            out.append("fv_bar <= 1 in bernoulli mode")
    return out


def _with_table(c: DerivedConstants, depth: int = 256) -> DerivedConstants:
    table = (math.inf,) + tuple(delta_k(k, c) * c.m for k in range(1, depth))
    object.__setattr__(c, "_table", table)
    return c


def derive_constants(p: ProtocolParams) -> DerivedConstants:
    if p.beta >= 0.5:
        raise DegenerateBeta(f"beta={p.beta} >= 1/2 leaves gamma = 0")
    g, c = exact_gamma_c1(p.beta)
    gamma, c1 = float(g), float(c)
    kf = k_min_formula(gamma, c1)
    k_min = p.k_min_override if p.k_min_override is not None else math.ceil(kf)
    c_out = DerivedConstants(
        gamma=gamma,
        c1=c1,
        k_min=k_min,
        delta_k_floor=delta_k_floor_value(p.beta, c1, p.m),
        epsilon_m=epsilon_m_value(p.beta, c1, p.m, p.r_max),
        delta_r=math.ceil(2 * k_min / ((1 - 2 * p.beta) * p.fv_bar)),
        m=p.m,
        beta=p.beta,
        k_min_formula=kf,
    )
    return _with_table(c_out)


def constants_for_run(p: ProtocolParams) -> DerivedConstants:
    """derive_constants, except beta >= 1/2 yields a never-notarizing set."""
    if p.beta < 0.5:
        return derive_constants(p)
    g, c = exact_gamma_c1(p.beta)
    k_min = p.k_min_override if p.k_min_override is not None else 1
    return _with_table(
        DerivedConstants(
            gamma=float(g),
            c1=float(c),
            k_min=k_min,
            delta_k_floor=math.inf,
            epsilon_m=math.inf,
            delta_r=None,
            m=p.m,
            beta=p.beta,
            live=False,
        )
    )


def constants_report(c: DerivedConstants) -> dict:
    return {
        "gamma": c.gamma,
        "c1": c.c1,
        "k_min": c.k_min,
        "k_min_formula": c.k_min_formula,
        "delta_k_floor": c.delta_k_floor,
        "epsilon_m": c.epsilon_m,
        "delta_r": c.delta_r,
        "threshold": c.threshold,
        "log_base": c.log_base,
    }

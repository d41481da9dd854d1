"""Round-based simulation engine and trace analyzers."""

from __future__ import annotations

from .analyzers import (
    PARTITION_CLASSES,
    TraceIndex,
    Unclassifiable,
    classify_honest_blocks,
    counting_check,
    measure_latency,
)
from .config import CONFIG_ENV, CONFIG_SCHEMA, ConfigError, SimConfig, load_config
from .engine import Engine, ModelViolation, simulate
from .genesis import is_genesis_state, is_notarizable
from .report import FAIL, FLAGGED, PASS, RunReport, build_report, rows_to_csv
from .trace import TRACE_SCHEMA, Trace, TraceError


def run(config: SimConfig, strict: bool = False) -> tuple[Trace, RunReport]:
    """Execute one run and analyze its trace.

    In strict mode any non-PASS verdict raises ModelViolation.
    """
    config.validate()
    eng = simulate(config)
    report = build_report(eng.trace, eng.strategy.summary())
    if strict and report.verdict != PASS:
        raise ModelViolation(f"verdict {report.verdict}: {report.invariant_violations[:3]} {report.conflicts[:3]}")
    return eng.trace, report


__all__ = [
    "PARTITION_CLASSES", "TraceIndex", "Unclassifiable", "classify_honest_blocks", "counting_check",
    "measure_latency", "CONFIG_ENV", "CONFIG_SCHEMA", "ConfigError", "SimConfig", "load_config",
    "Engine", "ModelViolation", "simulate", "is_genesis_state", "is_notarizable", "FAIL", "FLAGGED",
    "PASS", "RunReport", "build_report", "rows_to_csv", "TRACE_SCHEMA", "Trace", "TraceError", "run",
]

"""Deterministic message-passing simulation."""

from .config import FaultPlan, Partition, SimConfig, ConfigError, parse_config, format_config
from .kernel import Kernel, Trace, TraceEvent, parse_trace, run

__all__ = [
    "FaultPlan", "Partition", "SimConfig", "ConfigError", "parse_config", "format_config",
    "Kernel", "Trace", "TraceEvent", "parse_trace", "run",
]

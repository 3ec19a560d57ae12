"""Automated repair of timed statecharts by mutation search guided by
spectrum-based fault localization."""

from .dsl import ParseError, parse, parse_file, serialize
from .engine import RepairResult, RunConfig, repair, repair_baseline
from .localization import localize
from .model import Chart, Edit, OperatorKind, Patch, apply_patch, validate
from .oracle import load_suite, run_suite
from .simulator import simulate

__version__ = "0.1.0"

__all__ = [
    "Chart", "Edit", "OperatorKind", "ParseError", "Patch", "RepairResult", "RunConfig",
    "apply_patch", "load_suite", "localize", "parse", "parse_file", "repair",
    "repair_baseline", "run_suite", "serialize", "simulate", "validate",
]

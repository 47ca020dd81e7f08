"""Experiment runner: configuration, signals, metrics and result files."""

from .config import ExperimentConfig, SignalSpec, load_config, parse_config
from .experiment import (Artifacts, CoverageResult, build_system,
                         load_artifacts, run_coverage, run_offline, run_online)
from .metrics import MetricsTable, compute_metrics
from .results import emit_results
from .signals import signal_library

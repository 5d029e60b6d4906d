"""Experiment harness: datasets, metrics, configs, runners and report writers."""

from .config import PRESETS, load_config, preset, validate_config
from .datasets import Dataset, ParseError, gen_synthetic, load_csv, load_motorcycle
from .experiments import ExperimentError, ExperimentReport, run_experiment
from .metrics import MetricsReport, aggregate, compute_metrics, mae, rr_std
from .models import FittedModel, fit_model
from .report import emit_report, render

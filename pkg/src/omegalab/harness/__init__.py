"""Experiment specifications, drivers, reports, figures and the command line."""

from .experiments import RUNNERS, RunOptions, run_experiment, sample_starts
from .report import CSV_HEADER, SCHEMA_VERSION, ExperimentReport, SampleRecord
from .spec import KINDS, ExperimentSpec, load_spec, parse_spec, spec_from_mapping

__all__ = [
    "RUNNERS", "RunOptions", "run_experiment", "sample_starts",
    "CSV_HEADER", "SCHEMA_VERSION", "ExperimentReport", "SampleRecord",
    "KINDS", "ExperimentSpec", "load_spec", "parse_spec", "spec_from_mapping",
]

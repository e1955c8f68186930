"""Experiment driver: run configs, results tables and the command line."""

from .config import RunConfig, load
from .tables import METRIC_COLUMNS, ResultsTable

__all__ = ["METRIC_COLUMNS", "ResultsTable", "RunConfig", "load"]

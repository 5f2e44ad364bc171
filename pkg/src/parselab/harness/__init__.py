from .config import ExperimentConfig, load_config
from .experiment import run_experiment, run_grid_search
from .report import LanguageInfo, emit_report
from .store import ResultsStore, ingest_external_scores

__all__ = [
    "ExperimentConfig",
    "LanguageInfo",
    "ResultsStore",
    "emit_report",
    "ingest_external_scores",
    "load_config",
    "run_experiment",
    "run_grid_search",
]

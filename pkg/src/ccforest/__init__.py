"""Coincidental-correctness detection with partitioned random-forest ensembles."""
from importlib.resources import files

from .detector import CCDetector, DetectionParams, DetectionReport, detect, detect_fixed_chunks
from .features import ComboVectorizer, PrincipalComponents, build_features, fit_pca
from .forest import DecisionTree, RandomForest, train_forest
from .localization import CostReport, apply_strategy, cost, suspiciousness
from .simulator import SimParams, score, simulate
from .spectra import CoverageRun, ExecutionTrace, Verdict, load_run, save_run, summarize

__version__ = "0.1.0"


def example_dir():
    """Directory of the bundled ``Math`` example (8 passing, 2 failing tests)."""
    return files(__name__) / "data" / "example_math"


__all__ = [
    "CCDetector", "DetectionParams", "DetectionReport", "detect", "detect_fixed_chunks",
    "ComboVectorizer", "PrincipalComponents", "build_features", "fit_pca",
    "DecisionTree", "RandomForest", "train_forest",
    "CostReport", "apply_strategy", "cost", "suspiciousness",
    "SimParams", "score", "simulate",
    "CoverageRun", "ExecutionTrace", "Verdict", "load_run", "save_run", "summarize",
    "example_dir", "__version__",
]

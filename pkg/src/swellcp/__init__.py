"""Log-transformed split conformal prediction intervals on a from-scratch random forest."""

__version__ = "0.1.0"

from .conformal import (
    ConformalCalibrator,
    PredictionInterval,
    calibrate,
    calibrate_model,
    interval_log,
    interval_physical,
    predict_interval,
    score,
)
from .config import PipelineConfig
from .data import Dataset, FeatureSchema, SplitIndices, encode, filter_nonnegative, load_csv, split
from .forest import ForestModel, Hyperparams, fit_forest, fit_tree, predict_mean, predict_std
from .synth import GeneratorConfig, coverage_trial, generate
from .transform import TargetTransform

__all__ = [
    "ConformalCalibrator",
    "Dataset",
    "FeatureSchema",
    "ForestModel",
    "GeneratorConfig",
    "Hyperparams",
    "PipelineConfig",
    "PredictionInterval",
    "SplitIndices",
    "TargetTransform",
    "calibrate",
    "calibrate_model",
    "coverage_trial",
    "encode",
    "filter_nonnegative",
    "fit_forest",
    "fit_tree",
    "generate",
    "interval_log",
    "interval_physical",
    "load_csv",
    "predict_interval",
    "predict_mean",
    "predict_std",
    "score",
    "split",
]

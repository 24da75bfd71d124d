"""Cascaded random forests trained on successively harder examples."""
__version__ = "0.1.0"

from .cascade import (CascadeModel, TrainConfig, TrainReport, class_balance_trace,
                      predict_cascade, train_cascade)
from .data import Dataset, DataError, FeatureSchema, SplitSpec, load_csv, train_test_split
from .forest import Forest, fit_forest
from .metrics import accuracy, auc_roc
from .persist import ModelFormatError, load_model, save_model

__all__ = [
    "CascadeModel", "TrainConfig", "TrainReport", "class_balance_trace", "predict_cascade",
    "train_cascade", "Dataset", "DataError", "FeatureSchema", "SplitSpec", "load_csv",
    "train_test_split", "Forest", "fit_forest", "accuracy", "auc_roc", "ModelFormatError",
    "load_model", "save_model",
]

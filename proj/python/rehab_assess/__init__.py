"""Personalized rehabilitation assessment pipeline (C++ core).

Kinematic feature extraction from joint trajectories, per-instance feature
selection via double Q-learning, a grid-searched MLP quality predictor, an
RFE baseline, corrective feedback against a normal-motion profile, and
leave-one-subject-out evaluation.
"""

import json as _json

from ._core import (
    Dataset,
    Error,
    FeatureTable,
    Predictor,
    Selector,
    __version__,
    base_series_names,
    double_q_target,
    extract_features,
    f1_score,
    feature_names,
    feedback_report,
    min_jerk_scalar,
    rfe_select,
    synth_dataset,
    train_predictor,
    train_selector,
)
from ._core import loso_evaluate as _loso_evaluate


def loso_evaluate(dataset, **kwargs):
    """Leave-one-subject-out evaluation.

    Returns (results, table_text) where results is the parsed results
    document and table_text the formatted per-exercise table.
    """
    raw, table = _loso_evaluate(dataset, **kwargs)
    return _json.loads(raw), table


__all__ = [
    "Dataset",
    "Error",
    "FeatureTable",
    "Predictor",
    "Selector",
    "__version__",
    "base_series_names",
    "double_q_target",
    "extract_features",
    "f1_score",
    "feature_names",
    "feedback_report",
    "loso_evaluate",
    "min_jerk_scalar",
    "rfe_select",
    "synth_dataset",
    "train_predictor",
    "train_selector",
]

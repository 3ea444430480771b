"""Weak-supervision toolkit: disaggregates response-level labels into
sentence-level scores via differentiable bag losses, prior regularization
and maximum-likelihood pseudo-labeling."""

import json as _json

from ._core import (
    Dataset,
    ScorerModel,
    aggregate,
    auc_pr,
    auc_roc,
    corr_prior,
    cos_prior,
    exact_aggregate,
    generate_synthetic,
    load_dataset,
    pslab,
    pslab_bag,
    sample_preferences,
    save_dataset,
    split_dataset,
    validate_consistency,
)
from ._core import evaluate as _evaluate_raw
from ._core import evaluate_cosine as _evaluate_cosine_raw
from ._core import train as _train_raw


def train(dataset, config):
    """Trains a fresh scorer. `config` is a dict using the CLI schema,
    e.g. {"mode": "bag", "epochs": 10, "weights": {"bag": 0.8, "cosine": 0.2}}."""
    return _train_raw(dataset, _json.dumps(config))


def evaluate(dataset, model):
    """Instance, bag and preference metrics as a dict."""
    return _json.loads(_evaluate_raw(dataset, model))


def evaluate_cosine(dataset):
    """Metrics for the cosine-prior baseline as a dict."""
    return _json.loads(_evaluate_cosine_raw(dataset))


__all__ = [
    "Dataset",
    "ScorerModel",
    "aggregate",
    "auc_pr",
    "auc_roc",
    "corr_prior",
    "cos_prior",
    "evaluate",
    "evaluate_cosine",
    "exact_aggregate",
    "generate_synthetic",
    "load_dataset",
    "pslab",
    "pslab_bag",
    "sample_preferences",
    "save_dataset",
    "split_dataset",
    "train",
    "validate_consistency",
]

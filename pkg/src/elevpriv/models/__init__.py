"""Classifiers: linear one-vs-rest SVM, random forest and MLP."""
from ._base import TrainedModel, fingerprint, load_model, model_from_dict
from .forest import DecisionTree, ForestConfig, RandomForest, build_tree, train_forest
from .mlp import (MLP, MlpConfig, DEEP_HIDDEN_LAYERS, RoundSchedule, fine_tune,
                  inverse_frequency_weights, loss_and_grad, make_rounds, train_mlp)
from .svm import LinearSVM, SvmConfig, train_svm


def predict_proba(model, X):
    return model.predict_proba(X)


MODEL_KINDS = ("svm", "rf", "mlp")


def make_config(kind, **overrides):
    """Default config for a model kind with field overrides applied."""
    cls = {"svm": SvmConfig, "rf": ForestConfig, "forest": ForestConfig, "mlp": MlpConfig}[kind]
    return cls(**overrides)


def train(kind, X, y, config=None, preprocessing=""):
    fn = {"svm": train_svm, "rf": train_forest, "forest": train_forest, "mlp": train_mlp}[kind]
    return fn(X, y, config, preprocessing)


def grid_search(kind, X_train, y_train, X_val, y_val, grid):
    """Evaluate every config in ``grid`` (a list of override dicts) on a validation split.

    Returns ``(best_overrides, [(overrides, accuracy), ...])``; ties keep the
    earliest entry.
    """
    import numpy as np

    results = []
    for overrides in grid:
        model = train(kind, X_train, y_train, make_config(kind, **overrides))
        acc = float(np.mean(model.predict(X_val) == np.asarray(y_val, dtype=object)))
        results.append((overrides, acc))
    best = max(range(len(results)), key=lambda i: (results[i][1], -i))
    return results[best][0], results

from __future__ import annotations

import hashlib
import json

import numpy as np
import scipy.sparse as sp

from ..errors import DegenerateLabelsError, WidthMismatchError

FORMAT_VERSION = 1


def check_training_data(X, y, min_per_class=2):
    """Validate shapes and labels; returns ``(labels, y_index)``."""
    y = np.asarray(y)
    if X.shape[0] != len(y):
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)} labels")
    labels, y_idx, counts = np.unique(y, return_inverse=True, return_counts=True)
    if len(labels) < 2:
        raise DegenerateLabelsError("need at least two classes")
    small = [str(lab) for lab, c in zip(labels, counts) if c < min_per_class]
    if small:
        raise DegenerateLabelsError(f"classes with fewer than {min_per_class} samples: {small}")
    return [lab.item() if hasattr(lab, "item") else lab for lab in labels], y_idx


def as_matrix(X):
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=float)
    return np.atleast_2d(np.asarray(X, dtype=float))


def softmax(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fingerprint(obj) -> str:
    """Stable short hash of any JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


class TrainedModel:
    """Common prediction surface for all classifiers.

    Subclasses implement ``_proba`` on a validated matrix and the
    ``_params_dict``/``_from_params`` pair used by save/load.
    """

    kind = "base"

    def __init__(self, labels, n_features, config, preprocessing=""):
        self.labels = list(labels)
        self.n_features = int(n_features)
        self.config = config
        self.preprocessing = preprocessing
        self.info = {}

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise WidthMismatchError(f"model expects {self.n_features} features, got {X.shape[1]}")
        p = self._proba(X)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        # argmax returns the first maximum, i.e. the lowest label index on ties
        idx = np.argmax(self.predict_proba(X), axis=1)
        return np.array([self.labels[i] for i in idx], dtype=object)

    def to_dict(self):
        return {"format_version": FORMAT_VERSION, "kind": self.kind, "labels": self.labels,
                "n_features": self.n_features, "config": self.config.to_dict(),
                "preprocessing": self.preprocessing, "params": self._params_dict()}

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return model_from_dict(d)


def model_from_dict(d) -> TrainedModel:
    from .forest import RandomForest
    from .mlp import MLP
    from .svm import LinearSVM

    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
    cls = {"svm": LinearSVM, "forest": RandomForest, "mlp": MLP}[d["kind"]]
    return cls._from_dict(d)

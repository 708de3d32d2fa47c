"""Linear one-vs-rest SVM with squared hinge loss and L2 penalty."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from ._base import TrainedModel, as_matrix, check_training_data, softmax


@dataclass
class SvmConfig:
    """``penalty`` multiplies ``0.5 * ||w||^2`` in each binary objective.

    ``learning_rate=None`` picks the step ``1/L`` from the Lipschitz constant
    of the gradient, which makes full-batch descent monotone.
    """

    penalty: float = 1e-3
    max_epochs: int = 1000
    learning_rate: float | None = None
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")

    def to_dict(self):
        return asdict(self)


def _top_singular_value_sq(X, iters=100):
    # power iteration from a fixed start vector keeps this deterministic
    v = np.ones(X.shape[1]) / np.sqrt(X.shape[1])
    s = 0.0
    for _ in range(iters):
        u = X @ v
        v = X.T @ u
        s_new = np.linalg.norm(v)
        if s_new == 0:
            return 0.0
        v /= s_new
        if abs(s_new - s) <= 1e-10 * s_new:
            break
        s = s_new
    return s_new


def svm_objective(W, b, X, Ysign, penalty):
    """Sum over classes of the binary objectives."""
    margin = np.maximum(0.0, 1.0 - Ysign * (np.asarray(X @ W) + b))
    return float((margin ** 2).sum() / X.shape[0] + 0.5 * penalty * (W ** 2).sum())


class LinearSVM(TrainedModel):
    kind = "svm"

    def __init__(self, labels, W, b, config, preprocessing=""):
        super().__init__(labels, W.shape[0], config, preprocessing)
        self.W = W
        self.b = b

    def decision_function(self, X):
        return np.asarray(as_matrix(X) @ self.W) + self.b

    def _proba(self, X):
        return softmax(np.asarray(X @ self.W) + self.b)

    def _params_dict(self):
        return {"W": self.W.tolist(), "b": self.b.tolist()}

    @classmethod
    def _from_dict(cls, d):
        return cls(d["labels"], np.asarray(d["params"]["W"], dtype=float).reshape(d["n_features"], -1),
                   np.asarray(d["params"]["b"], dtype=float), SvmConfig(**d["config"]), d["preprocessing"])


def train_svm(X, y, config: SvmConfig | None = None, preprocessing="") -> LinearSVM:
    """Fit one binary squared-hinge model per class by full-batch gradient descent.

    Each class ``k`` minimizes
    ``mean_i max(0, 1 - y_ik (w_k . x_i + b_k))**2 + penalty/2 * ||w_k||**2``
    with ``y_ik = +1`` for members of ``k`` and ``-1`` otherwise. Class
    probabilities, used only for soft voting, are a softmax over margins.
    """
    config = config or SvmConfig()
    X = as_matrix(X)
    labels, y_idx = check_training_data(X, y)
    n, d = X.shape
    K = len(labels)
    Ysign = -np.ones((n, K))
    Ysign[np.arange(n), y_idx] = 1.0

    if config.learning_rate is None:
        lip = 2.0 * (_top_singular_value_sq(X) + n) / n + config.penalty
        lr = 1.0 / lip
    else:
        lr = config.learning_rate

    W = np.zeros((d, K))
    b = np.zeros(K)
    history = []
    prev = np.inf
    for _ in range(config.max_epochs):
        scores = np.asarray(X @ W) + b
        margin = np.maximum(0.0, 1.0 - Ysign * scores)
        obj = (margin ** 2).sum() / n + 0.5 * config.penalty * (W ** 2).sum()
        history.append(float(obj))
        if prev - obj <= config.tol * max(abs(obj), 1.0) and prev < np.inf:
            break
        prev = obj
        dscores = -2.0 * Ysign * margin / n
        gW = (X.T @ dscores if not sp.issparse(X) else np.asarray(X.T @ dscores)) + config.penalty * W
        gb = dscores.sum(axis=0)
        W -= lr * gW
        b -= lr * gb
    model = LinearSVM(labels, W, b, config, preprocessing)
    model.info["objective"] = history
    return model

"""Fully-connected ReLU network trained with Adam, plus round-based fine-tuning."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .._seeding import derive_seed
from ..errors import NonFiniteLossError, ScheduleViolationError
from ._base import TrainedModel, as_matrix, check_training_data, softmax

DEEP_HIDDEN_LAYERS = (20,) * 20


@dataclass
class MlpConfig:
    """MLP hyper-parameters.

    ``l2_penalty`` follows the common convention
    ``0.5 * l2 * sum(W**2) / batch_size`` (weights only, not biases).
    ``class_weights`` maps label -> positive weight, or is ``"inverse"`` to
    derive inverse-frequency weights from whatever labels training sees;
    per-sample losses are averaged with these weights.
    """

    hidden_layers: tuple = DEEP_HIDDEN_LAYERS
    learning_rate: float = 1e-3
    epochs: int = 200
    l2_penalty: float = 1e-4
    batch_size: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    class_weights: dict | str | None = None
    seed: int = 0

    def __post_init__(self):
        self.hidden_layers = tuple(int(h) for h in self.hidden_layers)
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("hidden layer widths must be positive")
        if isinstance(self.class_weights, str):
            if self.class_weights != "inverse":
                raise ValueError("class_weights must be a mapping or 'inverse'")
        elif self.class_weights is not None:
            if any(w <= 0 for w in self.class_weights.values()):
                raise ValueError("class weights must be positive")

    def to_dict(self):
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        if isinstance(self.class_weights, dict):
            d["class_weights"] = {str(k): float(v) for k, v in self.class_weights.items()}
        return d


def inverse_frequency_weights(y) -> dict:
    """Class weights proportional to ``1 / class count`` (largest class gets 1)."""
    labels, counts = np.unique(np.asarray(y), return_counts=True)
    return {lab.item() if hasattr(lab, "item") else lab: float(counts.max() / c)
            for lab, c in zip(labels, counts)}


def glorot_layer(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out)


def init_params(sizes, rng):
    params = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        params.extend(glorot_layer(rng, a, b))
    return params


def forward(params, X):
    """Return the list of layer activations; the last entry is class probabilities."""
    acts = [X]
    h = X
    n_layers = len(params) // 2
    for i in range(n_layers):
        W, b = params[2 * i], params[2 * i + 1]
        z = np.asarray(h @ W) + b
        h = np.maximum(z, 0.0) if i < n_layers - 1 else softmax(z)
        acts.append(h)
    return acts


def loss_and_grad(params, X, Y, sample_weight, l2):
    """Weighted cross-entropy plus L2 penalty and its gradient.

    ``Y`` is one-hot ``(n, K)``; ``sample_weight`` has one entry per row.
    """
    n = X.shape[0]
    acts = forward(params, X)
    p = acts[-1]
    wsum = sample_weight.sum()
    ce = -np.log(np.clip((p * Y).sum(axis=1), 1e-300, None))
    weights_sq = sum((params[i] ** 2).sum() for i in range(0, len(params), 2))
    loss = float((sample_weight * ce).sum() / wsum + 0.5 * l2 * weights_sq / n)
    grads = [None] * len(params)
    delta = (p - Y) * (sample_weight / wsum)[:, None]
    for i in range(len(params) // 2 - 1, -1, -1):
        W = params[2 * i]
        a = acts[i]
        gW = a.T @ delta
        grads[2 * i] = np.asarray(gW) + l2 * W / n
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ W.T) * (acts[i] > 0)
    return loss, grads


class MLP(TrainedModel):
    kind = "mlp"

    def __init__(self, labels, n_features, params, config, preprocessing=""):
        super().__init__(labels, n_features, config, preprocessing)
        self.params = params

    def _proba(self, X):
        return forward(self.params, X)[-1]

    def _params_dict(self):
        return {"params": [p.tolist() for p in self.params]}

    @classmethod
    def _from_dict(cls, d):
        cfg = dict(d["config"])
        cfg["hidden_layers"] = tuple(cfg["hidden_layers"])
        params = [np.asarray(p, dtype=float) for p in d["params"]["params"]]
        return cls(d["labels"], d["n_features"], params, MlpConfig(**cfg), d["preprocessing"])


def _adam_fit(params, X, y_idx, n_classes, sample_weight, config, rng, history):
    n = X.shape[0]
    Y = np.eye(n_classes)[y_idx]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    scratch = [(np.empty_like(p), np.empty_like(p)) for p in params]
    t = 0
    bs = min(config.batch_size, n)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = loss_and_grad(params, X[idx], Y[idx], sample_weight[idx], config.l2_penalty)
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite loss {loss} at epoch {epoch}, batch starting {start}; "
                    f"max |param| = {max(float(np.abs(p).max()) for p in params):.3g}, "
                    f"learning rate {config.learning_rate}")
            total += loss * len(idx)
            t += 1
            lr_t = config.learning_rate * np.sqrt(1 - config.beta2 ** t) / (1 - config.beta1 ** t)
            # in-place updates; same operation order as the textbook formulas
            for j, g in enumerate(grads):
                a, b = scratch[j]
                m[j] *= config.beta1
                np.multiply(g, 1 - config.beta1, out=a)
                m[j] += a
                v[j] *= config.beta2
                np.multiply(g, 1 - config.beta2, out=a)
                a *= g
                v[j] += a
                np.sqrt(v[j], out=b)
                b += config.eps
                np.multiply(m[j], lr_t, out=a)
                a /= b
                params[j] -= a
        history.append(total / n)
    return params


def _sample_weights(labels, y_idx, class_weights):
    if class_weights is None:
        return np.ones(len(y_idx))
    if class_weights == "inverse":
        counts = np.bincount(y_idx, minlength=len(labels)).astype(float)
        w = counts.max() / np.maximum(counts, 1.0)
        return (w / w.max())[y_idx]
    w = np.array([float(class_weights[lab]) for lab in labels])
    w = w / w.max()
    return w[y_idx]


def train_mlp(X, y, config: MlpConfig | None = None, preprocessing="") -> MLP:
    """Train a ReLU MLP with softmax output and (optionally class-weighted) cross-entropy."""
    config = config or MlpConfig()
    X = as_matrix(X)
    labels, y_idx = check_training_data(X, y)
    rng = np.random.default_rng(derive_seed(config.seed, "init"))
    sizes = [X.shape[1], *config.hidden_layers, len(labels)]
    params = init_params(sizes, rng)
    history = []
    shuffle = np.random.default_rng(derive_seed(config.seed, "shuffle", 0))
    _adam_fit(params, X, y_idx, len(labels), _sample_weights(labels, y_idx, config.class_weights),
              config, shuffle, history)
    model = MLP(labels, X.shape[1], params, config, preprocessing)
    model.info["loss"] = history
    return model


@dataclass
class RoundSchedule:
    """Training rounds in training order.

    Each round is ``(labels, overrides)`` where ``overrides`` is a dict of
    :class:`MlpConfig` fields applied for that round only.
    """

    rounds: list = field(default_factory=list)

    def validate(self, all_labels=None):
        if not self.rounds:
            raise ScheduleViolationError("schedule has no rounds")
        prev = set()
        for i, (labs, _) in enumerate(self.rounds):
            cur = set(labs)
            if i and not (prev < cur):
                raise ScheduleViolationError(
                    f"round {i} labels {sorted(map(str, cur))} do not strictly grow "
                    f"from {sorted(map(str, prev))}")
            prev = cur
        if all_labels is not None and prev != set(all_labels):
            raise ScheduleViolationError("final round must contain every label")


def make_rounds(y, eliminate, seed=0):
    """Split an unbalanced label vector into disjoint, balanced round datasets.

    Rounds are created largest-label-set first: round 1 holds every class,
    each sampled to the size of the smallest remaining pool; then the
    ``eliminate[i]`` smallest classes are dropped and the next round is drawn
    from the samples not used yet. The result is returned in training order
    (fewest classes first).

    Returns
    -------
    (RoundSchedule, list of index arrays)
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    pools = {lab: list(rng.permutation(np.flatnonzero(y == lab))) for lab in np.unique(y)}
    active = sorted(pools, key=lambda lab: (len(pools[lab]), str(lab)))
    created = []
    for step in range(len(eliminate) + 1):
        size = min(len(pools[lab]) for lab in active)
        if size == 0:
            raise ScheduleViolationError("ran out of samples while creating rounds")
        idx = []
        for lab in active:
            idx.extend(pools[lab][:size])
            pools[lab] = pools[lab][size:]
        created.append(([a.item() if hasattr(a, "item") else a for a in active], np.sort(np.array(idx))))
        if step < len(eliminate):
            active = sorted(active, key=lambda lab: (len(pools[lab]), str(lab)))[eliminate[step]:]
            if not active:
                raise ScheduleViolationError("eliminated every class")
    created.reverse()
    return RoundSchedule([(labs, {}) for labs, _ in created]), [idx for _, idx in created]


def fine_tune(schedule: RoundSchedule, datasets, config: MlpConfig | None = None, preprocessing="") -> MLP:
    """Train rounds in order, passing parameters from one round to the next.

    When a round introduces new labels, the output layer gains one column
    per new label, initialized like a fresh layer. Optimizer state restarts
    each round.
    """
    config = config or MlpConfig()
    schedule.validate()
    if len(datasets) != len(schedule.rounds):
        raise ScheduleViolationError("need one dataset per round")
    labels = []
    params = None
    history = []
    n_features = None
    for r, ((round_labels, overrides), (X, y)) in enumerate(zip(schedule.rounds, datasets)):
        X = as_matrix(X)
        y = np.asarray(y, dtype=object)
        if set(y.tolist()) - set(round_labels):
            raise ScheduleViolationError(f"round {r} data has labels outside its label set")
        cfg = replace(config, **overrides)
        if params is None:
            n_features = X.shape[1]
            labels = sorted(round_labels, key=str)
            rng = np.random.default_rng(derive_seed(cfg.seed, "init"))
            params = init_params([n_features, *cfg.hidden_layers, len(labels)], rng)
        else:
            new = sorted((lab for lab in round_labels if lab not in labels), key=str)
            if new:
                rng = np.random.default_rng(derive_seed(cfg.seed, "grow", r))
                W_new, b_new = glorot_layer(rng, params[-2].shape[0], params[-2].shape[1] + len(new))
                params[-2] = np.hstack([params[-2], W_new[:, -len(new):]])
                params[-1] = np.concatenate([params[-1], b_new[-len(new):]])
                labels = labels + new
        pos = {lab: i for i, lab in enumerate(labels)}
        y_idx = np.array([pos[lab] for lab in y.tolist()])
        weights = _sample_weights(labels, y_idx, cfg.class_weights)
        shuffle = np.random.default_rng(derive_seed(cfg.seed, "shuffle", r))
        round_hist = []
        _adam_fit(params, X, y_idx, len(labels), weights, cfg, shuffle, round_hist)
        history.append(round_hist)
    model = MLP(labels, n_features, params, config, preprocessing)
    model.info["loss"] = history
    return model

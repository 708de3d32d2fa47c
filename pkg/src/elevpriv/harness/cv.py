"""Cross-validated attack experiments and the three threat-model sweeps."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import models as M
from .._seeding import derive_seed
from ..core import Dataset, balance
from ..errors import DataError, InsufficientSamplesError
from ..imagerep import RasterConfig
from ..textrep import DEFAULT_N_MAX, DEFAULT_TARGET_DIM, FLOOR_WHOLE
from .features import REPRESENTATIONS, make_representation
from .metrics import MetricsReport, compute_metrics, confusion_matrix
from .voting import PAD_EDGE, ChunkSpec, soft_vote

THREAT_MODELS = ("TM1", "TM2", "TM3")
TM1_FIXED_ORDER = ("WDC", "ORL", "NYC", "SD")
TM1_CLASS_COUNTS = (2, 3, 4)
TM3_CLASS_COUNTS = (3, 5, 7, 8, 10)

# Small networks by default: twenty deep layers underfit on desk-sized data.
DESK_MLP = {"hidden_layers": (64, 64)}


@dataclass
class ExperimentSpec:
    """One attack configuration: representation, model and CV protocol."""

    representation: str = "ngrams"
    model: str = "rf"
    model_config: dict = field(default_factory=dict)
    folds: int = 10
    seed: int = 0
    classes: tuple | None = None
    threat_model: str | None = None
    chunk: ChunkSpec = ChunkSpec(32, PAD_EDGE)
    discretization: str = FLOOR_WHOLE
    alphabet_len: int = 26
    n_max: int = DEFAULT_N_MAX
    target_dim: int = DEFAULT_TARGET_DIM
    raster: RasterConfig = RasterConfig()
    aggregate_quantum: float = 0.0
    balance: bool = True
    name: str = ""

    def __post_init__(self):
        if self.folds < 2:
            raise DataError("folds must be at least 2")
        if self.representation not in REPRESENTATIONS:
            raise DataError(f"unknown representation {self.representation!r}")
        if self.model not in M.MODEL_KINDS:
            raise DataError(f"unknown model {self.model!r}")
        if self.threat_model is not None and self.threat_model not in THREAT_MODELS:
            raise DataError(f"unknown threat model {self.threat_model!r}")

    def replace(self, **changes):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ExperimentSpec(**d)

    def describe(self):
        d = asdict(self)
        d["raster"] = {"width": self.raster.width, "height": self.raster.height,
                       "points": self.raster.points}
        return d

    def make_representation(self):
        return make_representation(self.representation, chunk=self.chunk, mode=self.discretization,
                                   alphabet_len=self.alphabet_len, n_max=self.n_max,
                                   target_dim=self.target_dim, raster=self.raster,
                                   quantum=self.aggregate_quantum)

    def model_config_for(self, fold):
        overrides = dict(DESK_MLP) if self.model == "mlp" else {}
        overrides.update(self.model_config)
        overrides.setdefault("seed", derive_seed(self.seed, "model", fold))
        return M.make_config(self.model, **overrides)


def stratified_folds(y, k, seed):
    """Assign each sample to one of ``k`` folds, per class as evenly as possible.

    Returns a list of ``k`` sorted index arrays.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for lab in sorted(set(y.tolist()), key=str):
        idx = rng.permutation(np.flatnonzero(y == lab))
        for j, i in enumerate(idx):
            folds[(offset + j) % k].append(int(i))
        offset = (offset + len(idx)) % k
    return [np.array(sorted(f), dtype=int) for f in folds]


def permute_labels(dataset: Dataset, seed) -> Dataset:
    """Same samples with labels shuffled (class counts are preserved)."""
    y = dataset.y
    perm = np.random.default_rng(seed).permutation(len(y))
    return dataset.relabel(y[perm].tolist())


def predict_profiles(model, rep, profiles):
    """Predicted label per profile; chunked representations use soft voting."""
    X, groups = rep.transform(profiles)
    proba = model.predict_proba(X)
    out = []
    for i in range(len(profiles)):
        label_idx, _ = soft_vote(proba[groups == i])
        out.append(model.labels[label_idx])
    return out


def fit_fold(spec, train: Dataset, fold):
    """Fit the representation and model on one training split."""
    rep = spec.make_representation().fit(train.samples)
    X, groups = rep.transform(train.samples)
    y = train.y[groups]
    model = M.train(spec.model, X, y, spec.model_config_for(fold), rep.fingerprint())
    return rep, model


def _run_fold(args):
    spec, dataset, train_idx, test_idx, fold, replacements = args
    train = dataset.subset(train_idx)
    if spec.balance:
        train = balance(train, derive_seed(spec.seed, "balance", fold))
    test = dataset.subset(test_idx)
    if replacements:
        test = Dataset([replacements.get(s.source_id, s) for s in test.samples], test.labels,
                       test.provenance)
    rep, model = fit_fold(spec, train, fold)
    pred = predict_profiles(model, rep, test.samples)
    cm = confusion_matrix(test.y.tolist(), pred, list(dataset.labels))
    return cm, rep.fingerprint(), [s.source_id for s in train.samples]


def run_cv(spec: ExperimentSpec, dataset: Dataset, jobs: int = 1,
           test_dataset: Dataset | None = None) -> MetricsReport:
    """Stratified k-fold evaluation of one attack configuration.

    The dataset is (optionally) restricted to ``spec.classes`` and balanced;
    each fold re-balances its training split with a fold-specific seed, fits
    the representation and model on it, and predicts the held-out profiles.
    Metrics are averaged over folds; the confusion matrix is summed.

    When ``test_dataset`` is given, held-out profiles are swapped for the
    profile with the same source id from it, so a model trained on one
    version of the data is scored on another with identical folds.
    """
    replacements = None
    if test_dataset is not None:
        replacements = {s.source_id: s for s in test_dataset.samples}
    if spec.classes:
        dataset = dataset.subset(labels=spec.classes)
    if spec.balance:
        dataset = balance(dataset, derive_seed(spec.seed, "balance"))
    for lab, c in dataset.counts().items():
        if c < spec.folds:
            raise InsufficientSamplesError(lab, c, spec.folds)
    folds = stratified_folds(dataset.y, spec.folds, derive_seed(spec.seed, "folds"))
    tasks = []
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(len(dataset)), test_idx)
        tasks.append((spec, dataset, train_idx, test_idx, f, replacements))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold, tasks))
    else:
        results = [_run_fold(t) for t in tasks]

    labels = list(dataset.labels)
    per_fold = [compute_metrics(cm, labels) for cm, _, _ in results]
    total = sum(cm for cm, _, _ in results)
    report = compute_metrics(total, labels)
    report.accuracy = float(np.mean([r.accuracy for r in per_fold]))
    report.recall = float(np.mean([r.recall for r in per_fold]))
    report.specificity = float(np.mean([r.specificity for r in per_fold]))
    report.f1 = float(np.mean([r.f1 for r in per_fold]))
    report.fold_accuracies = [r.accuracy for r in per_fold]
    report.meta = {"experiment": spec.name, "threat_model": spec.threat_model or "",
                   "representation": spec.representation, "model": spec.model,
                   "cell": f"{len(labels)}-class",
                   "fold_fingerprints": [fp for _, fp, _ in results],
                   "fold_train_ids": [ids for _, _, ids in results],
                   "fold_test_ids": [[dataset.samples[i].source_id for i in idx] for idx in folds]}
    return report


def _subset_labels(labels, k, seed, key):
    if k > len(labels):
        raise DataError(f"requested {k} classes but only {len(labels)} labels exist")
    rng = np.random.default_rng(derive_seed(seed, key, k))
    chosen = set(rng.choice(len(labels), size=k, replace=False).tolist())
    return tuple(lab for i, lab in enumerate(labels) if i in chosen)


def tm1_classes(labels, k, seed):
    """Fixed subsets when the user-study region labels are present, seeded otherwise."""
    if set(TM1_FIXED_ORDER) <= set(labels) and k <= len(TM1_FIXED_ORDER):
        return TM1_FIXED_ORDER[:k]
    return _subset_labels(list(labels), k, seed, "tm1")


def run_tm1(dataset: Dataset, spec: ExperimentSpec, class_counts=TM1_CLASS_COUNTS, jobs=1):
    """Region-level attack against one user's history, sweeping the class count."""
    out = []
    for k in class_counts:
        classes = tm1_classes(dataset.labels, k, spec.seed)
        r = run_cv(spec.replace(classes=classes, threat_model="TM1"), dataset, jobs)
        r.meta["cell"] = f"{k}-class"
        r.meta["classes"] = list(classes)
        out.append(r)
    return out


def run_tm2(city_datasets: dict, spec: ExperimentSpec, jobs=1):
    """One borough-level model per city; returns ``{city: report}``."""
    out = {}
    for city in sorted(city_datasets):
        r = run_cv(spec.replace(threat_model="TM2", classes=None), city_datasets[city], jobs)
        r.meta["cell"] = city
        out[city] = r
    return out


def run_tm3(dataset: Dataset, spec: ExperimentSpec, class_counts=TM3_CLASS_COUNTS, jobs=1):
    """City-level attack with no prior, sweeping the class count over seeded subsets."""
    out = []
    for k in class_counts:
        classes = tuple(dataset.labels) if k == len(dataset.labels) else \
            _subset_labels(list(dataset.labels), k, spec.seed, "tm3")
        r = run_cv(spec.replace(classes=classes, threat_model="TM3"), dataset, jobs)
        r.meta["cell"] = f"{k}-class"
        r.meta["classes"] = list(classes)
        out.append(r)
    return out


def chance_interval(n, k, confidence=0.99):
    """Two-sided binomial interval for the accuracy of random guessing among ``k`` classes."""
    from scipy.stats import binom

    lo, hi = binom.interval(confidence, n, 1.0 / k)
    return lo / n, hi / n

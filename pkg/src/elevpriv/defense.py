"""Defenses: plausible perturbation of elevation signals and aggregate-only sharing."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._seeding import derive_seed
from .core import Dataset, ElevationProfile
from .errors import DataError, TooShortError


@dataclass(frozen=True)
class PerturbSpec:
    """Perturbation settings.

    ``epoch_len`` is in samples (10 samples = 10 s at 1 Hz); ``clip_window``
    is the trailing window of the moving statistics used for clipping.
    """

    fraction_perturbed: float = 0.10
    epoch_len: int = 10
    clip_window: int = 30
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.fraction_perturbed <= 1:
            raise DataError("fraction_perturbed must be in (0, 1]")
        if self.epoch_len < 1:
            raise DataError("epoch_len must be at least 1")
        if self.clip_window < 1:
            raise DataError("clip_window must be at least 1")


def moving_stats(values, window):
    """Trailing moving mean and standard deviation, truncated at the start of the signal."""
    x = np.asarray(values, dtype=float)
    c1 = np.concatenate([[0.0], np.cumsum(x)])
    c2 = np.concatenate([[0.0], np.cumsum(x * x)])
    end = np.arange(1, len(x) + 1)
    start = np.maximum(end - window, 0)
    n = end - start
    mean = (c1[end] - c1[start]) / n
    var = np.maximum((c2[end] - c2[start]) / n - mean ** 2, 0.0)
    return mean, np.sqrt(var)


def perturbation_positions(n, spec: PerturbSpec, rng):
    """Start indices of the perturbed epochs.

    ``ceil(fraction * n)`` positions are rounded up to whole epochs (at least
    one); epochs do not overlap.
    """
    wanted = max(1, math.ceil(spec.fraction_perturbed * n))
    L = min(spec.epoch_len, n)
    n_epochs = min(math.ceil(wanted / L), n // L)
    # choose epoch slots on a grid of free space so they never overlap
    free = n - n_epochs * L
    gaps = np.sort(rng.choice(free + n_epochs, size=n_epochs, replace=False)) - np.arange(n_epochs)
    return gaps + np.arange(n_epochs) * L, L


def perturb(profile, spec: PerturbSpec = PerturbSpec()):
    """Add epoch-correlated Gaussian noise to a fraction of the samples.

    Noise has zero mean and the standard deviation ``sigma`` of the whole
    original signal: each epoch draws one shared offset ``N(0, sigma^2)``
    plus per-sample jitter ``N(0, (sigma/10)^2)``. Every perturbed value is
    clipped to ``[ma - s, ma + s]`` where ``ma``/``s`` are the trailing
    moving mean/std of the original signal at that position. Unselected
    samples are returned unchanged.
    """
    values = profile.values if isinstance(profile, ElevationProfile) else np.asarray(profile, dtype=float)
    n = len(values)
    if n < spec.clip_window:
        raise TooShortError(f"signal of length {n} is shorter than clip_window {spec.clip_window}")
    rng = np.random.default_rng(spec.seed)
    sigma = float(values.std())
    out = values.copy()
    if sigma > 0:
        ma, s = moving_stats(values, spec.clip_window)
        starts, L = perturbation_positions(n, spec, rng)
        for st in starts:
            sl = slice(st, st + L)
            noise = rng.normal(0.0, sigma) + rng.normal(0.0, sigma / 10.0, L)
            out[sl] = np.clip(values[sl] + noise, ma[sl] - s[sl], ma[sl] + s[sl])
    if isinstance(profile, ElevationProfile):
        return profile.replace(values=out)
    return out


def perturb_dataset(dataset: Dataset, spec: PerturbSpec) -> Dataset:
    """Perturb every profile with its own derived seed."""
    samples = []
    for i, p in enumerate(dataset.samples):
        sub = PerturbSpec(spec.fraction_perturbed, spec.epoch_len, spec.clip_window,
                          derive_seed(spec.seed, "perturb", i))
        samples.append(perturb(p, sub))
    return Dataset(samples, dataset.labels, dataset.provenance)


@dataclass(frozen=True)
class AggregateStats:
    total_ascent: float
    total_descent: float
    mean_ascent: float
    mean_descent: float
    std_ascent: float
    std_descent: float
    min_elev: float
    max_elev: float
    rounding_quantum: float = 10.0
    sampled_signal: tuple | None = None

    FIELDS = ("total_ascent", "total_descent", "mean_ascent", "mean_descent",
              "std_ascent", "std_descent", "min_elev", "max_elev")

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS], dtype=float)

    def to_dict(self):
        return asdict(self)


def quantize(x, quantum):
    """Round half up to the nearest multiple of ``quantum`` (0 disables rounding)."""
    if quantum <= 0:
        return x
    return np.floor(np.asarray(x, dtype=float) / quantum + 0.5) * quantum


def aggregate(profile, quantum: float = 10.0, sample_every: int | None = None) -> AggregateStats:
    """Ascent/descent totals, their per-step means and stds, and the extrema.

    Ascent statistics use the positive consecutive differences and descent
    statistics the magnitudes of the negative ones (0 when there are none).
    All outputs are rounded to multiples of ``quantum``.
    """
    x = profile.values if isinstance(profile, ElevationProfile) else np.asarray(profile, dtype=float)
    if len(x) < 2:
        raise TooShortError("need at least two values to aggregate")
    d = np.diff(x)
    up = d[d > 0]
    down = -d[d < 0]

    def stats(a):
        # fsum is exact, so totals do not depend on the order of the steps
        if not len(a):
            return 0.0, 0.0, 0.0
        total = math.fsum(a)
        mean = total / len(a)
        return total, mean, math.sqrt(math.fsum((a - mean) ** 2) / len(a))

    ta, ma, sa = stats(up)
    td, md, sd = stats(down)
    q = lambda v: float(quantize(v, quantum))  # noqa: E731
    sampled = None
    if sample_every:
        sampled = tuple(float(v) for v in quantize(x[::sample_every], quantum))
    return AggregateStats(q(ta), q(td), q(ma), q(md), q(sa), q(sd), q(x.min()), q(x.max()),
                          quantum, sampled)


@dataclass(frozen=True)
class AggregateDefense:
    quantum: float = 10.0


@dataclass
class DefenseReport:
    clean: object
    defended: object

    @property
    def delta(self):
        return self.clean.accuracy - self.defended.accuracy


def evaluate_defense(dataset: Dataset, defense, spec, apply_to="all", jobs=1) -> DefenseReport:
    """Run the same attack on clean and defended data with identical seeds and folds.

    ``defense`` is a :class:`PerturbSpec` or an :class:`AggregateDefense`.
    With ``apply_to="all"`` the attack is trained and tested on defended
    profiles; with ``apply_to="test"`` it is trained on clean profiles (an
    attacker holding historical, undefended data) and tested on defended
    ones. The aggregation defense feeds the attack the quantized statistics
    vector instead of the profile.
    """
    from .harness.cv import run_cv

    clean = run_cv(spec, dataset, jobs)
    if isinstance(defense, AggregateDefense):
        defended = run_cv(spec.replace(representation="aggregate", aggregate_quantum=defense.quantum),
                          dataset, jobs)
    elif isinstance(defense, PerturbSpec):
        defended_data = perturb_dataset(dataset, defense)
        if apply_to == "all":
            defended = run_cv(spec, defended_data, jobs)
        elif apply_to == "test":
            defended = run_cv(spec, dataset, jobs, test_dataset=defended_data)
        else:
            raise ValueError(f"apply_to must be 'all' or 'test', not {apply_to!r}")
    else:
        raise TypeError(f"unsupported defense {defense!r}")
    for r, arm in ((clean, "clean"), (defended, "defended")):
        r.meta["arm"] = arm
    return DefenseReport(clean, defended)

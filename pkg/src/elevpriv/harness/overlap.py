"""Signal-level overlap between routes and overlapped-dataset simulation.

Two profiles overlap by the longest run of consecutive samples they share
exactly, divided by the length of the shorter profile.
"""
from __future__ import annotations

import itertools

import numpy as np

from ..core import Dataset
from ..errors import UnattainableRatioError

DERIVED_TAG = "~ov"


def longest_common_run(a, b) -> int:
    """Length of the longest contiguous subsequence present in both ``a`` and ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if len(a) == 0 or len(b) == 0:
        return 0
    eq = a[:, None] == b[None, :]
    run = np.zeros(len(b) + 1, dtype=np.int64)
    best = 0
    for row in eq:
        nxt = np.zeros_like(run)
        nxt[1:] = (run[:-1] + 1) * row
        run = nxt
        best = max(best, int(run.max()))
    return best


def signal_overlap(a, b) -> float:
    a = getattr(a, "values", a)
    b = getattr(b, "values", b)
    return longest_common_run(a, b) / min(len(a), len(b))


def mean_signal_overlap(dataset: Dataset, max_pairs=None, seed=0) -> float:
    """Mean overlap over unordered same-label pairs (optionally a seeded sample of them)."""
    pairs = []
    y = dataset.y
    for lab in dataset.labels:
        idx = np.flatnonzero(y == lab)
        pairs.extend(itertools.combinations(idx.tolist(), 2))
    if not pairs:
        return 0.0
    if max_pairs is not None and len(pairs) > max_pairs:
        pick = np.random.default_rng(seed).choice(len(pairs), max_pairs, replace=False)
        pairs = [pairs[i] for i in sorted(pick)]
    s = dataset.samples
    return float(np.mean([signal_overlap(s[i], s[j]) for i, j in pairs]))


def derived_pairs(dataset: Dataset):
    """``(parent, derived)`` sample pairs recovered from derived source ids."""
    by_id = {s.source_id: s for s in dataset.samples}
    out = []
    for s in dataset.samples:
        if DERIVED_TAG in s.source_id:
            parent = by_id.get(s.source_id.split(DERIVED_TAG)[0])
            if parent is not None:
                out.append((parent, s))
    return out


def parent_derived_overlap(dataset: Dataset) -> float:
    pairs = derived_pairs(dataset)
    return float(np.mean([signal_overlap(p, d) for p, d in pairs])) if pairs else 0.0


def _filler(rng, donor, length, anchor, step_scale):
    """A new stretch of route: a donor window re-anchored at ``anchor`` with small jitter."""
    dv = donor.values
    if len(dv) >= length:
        start = rng.integers(0, len(dv) - length + 1)
        seg = dv[start:start + length]
    else:
        seg = np.interp(np.linspace(0, len(dv) - 1, length), np.arange(len(dv)), dv)
    jitter = rng.normal(0.0, step_scale, length)
    return seg - seg[0] + anchor + jitter


def simulate_overlap(dataset: Dataset, target_ratio: float, seed: int, per_parent: int = 1,
                     tolerance: float = 0.02) -> Dataset:
    """Augment every class with routes that partially retrace existing ones.

    For each original profile of length ``L``, ``per_parent`` derived profiles
    of the same length are built: a contiguous window of
    ``round(target_ratio * L)`` samples copied from the parent, joined to a
    jittered stretch taken from another route of the same class. Derived
    profiles keep the parent's label and get source id
    ``<parent id>~ov<j>``; originals are kept unchanged.
    """
    if not 0 < target_ratio < 1:
        raise ValueError("target_ratio must be in (0, 1)")
    rng = np.random.default_rng(seed)
    y = dataset.y
    derived = []
    for lab in dataset.labels:
        members = [dataset.samples[i] for i in np.flatnonzero(y == lab)]
        steps = np.concatenate([np.abs(np.diff(m.values)) for m in members])
        step_scale = max(float(np.median(steps)) if len(steps) else 0.0, 1e-3)
        for pi, parent in enumerate(members):
            L = len(parent)
            k = int(round(target_ratio * L))
            if k < 1 or k > L - 1 or abs(k / L - target_ratio) > tolerance:
                raise UnattainableRatioError(
                    f"profile {parent.source_id!r} of length {L} cannot carry overlap {target_ratio}")
            for j in range(per_parent):
                start = int(rng.integers(0, L - k + 1))
                shared = parent.values[start:start + k]
                others = [m for m in range(len(members)) if m != pi]
                donor = members[int(rng.choice(others))] if others else parent
                if rng.random() < 0.5:
                    values = np.concatenate([shared, _filler(rng, donor, L - k, shared[-1], step_scale)])
                else:
                    tail = _filler(rng, donor, L - k, shared[0], step_scale)[::-1]
                    values = np.concatenate([tail, shared])
                derived.append(parent.replace(values=values, coords=None,
                                              source_id=f"{parent.source_id}{DERIVED_TAG}{j}"))
    out = Dataset(list(dataset.samples) + derived, dataset.labels, dataset.provenance)
    measured = parent_derived_overlap(out)
    if abs(measured - target_ratio) > tolerance:
        raise UnattainableRatioError(f"measured overlap {measured:.4f} misses target {target_ratio}")
    return out

"""Domain types, route geometry and dataset bookkeeping.

Elevations are in feet everywhere. Coordinates are ``(lat, lon)`` pairs in
degrees, and all areas and distances are planar in degree space.
"""
from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, MissingCoordsError

PROVENANCES = ("user_specific", "city_level", "borough_level", "synthetic")
DEFAULT_REGION_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class ElevationProfile:
    """A sequence of elevation samples along one route.

    Parameters
    ----------
    values : array-like of float
        Elevation samples in feet. Must be non-empty and finite.
    coords : array-like of shape (n, 2), optional
        ``(lat, lon)`` per sample.
    label : str, optional
        Region label.
    source_id : str
        Opaque identifier of where the sample came from.
    """

    values: np.ndarray
    coords: np.ndarray | None = None
    label: str | None = None
    source_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size == 0:
            raise DataError("elevation profile has no values")
        if not np.all(np.isfinite(values)):
            raise DataError(f"elevation profile {self.source_id!r} has non-finite values")
        object.__setattr__(self, "values", values)
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
            if len(coords) != len(values):
                raise DataError(
                    f"profile {self.source_id!r}: {len(coords)} coords for {len(values)} values")
            if np.any(np.abs(coords[:, 0]) > 90) or np.any(np.abs(coords[:, 1]) > 180):
                raise DataError(f"profile {self.source_id!r}: coordinate out of range")
            object.__setattr__(self, "coords", coords)

    def __len__(self):
        return len(self.values)

    def replace(self, **changes):
        kwargs = dict(values=self.values, coords=self.coords, label=self.label,
                      source_id=self.source_id)
        kwargs.update(changes)
        return ElevationProfile(**kwargs)

    def to_record(self):
        rec = {"source_id": self.source_id, "label": self.label,
               "values": [float(v) for v in self.values]}
        if self.coords is not None:
            rec["coords"] = [[float(a), float(b)] for a, b in self.coords]
        return rec

    @classmethod
    def from_record(cls, rec):
        return cls(values=rec["values"], coords=rec.get("coords"), label=rec.get("label"),
                   source_id=rec.get("source_id", ""))


@dataclass(frozen=True)
class BoundingRect:
    south_west: tuple[float, float]
    north_east: tuple[float, float]

    def __post_init__(self):
        sw = (float(self.south_west[0]), float(self.south_west[1]))
        ne = (float(self.north_east[0]), float(self.north_east[1]))
        if sw[0] > ne[0] or sw[1] > ne[1]:
            raise DataError(f"invalid rectangle SW{sw} NE{ne}")
        object.__setattr__(self, "south_west", sw)
        object.__setattr__(self, "north_east", ne)

    @property
    def height(self):
        return self.north_east[0] - self.south_west[0]

    @property
    def width(self):
        return self.north_east[1] - self.south_west[1]

    @property
    def area(self):
        return self.height * self.width

    @property
    def center(self):
        return ((self.south_west[0] + self.north_east[0]) / 2.0,
                (self.south_west[1] + self.north_east[1]) / 2.0)

    def contains(self, lat, lon):
        return (self.south_west[0] <= lat <= self.north_east[0]
                and self.south_west[1] <= lon <= self.north_east[1])

    def union_bounds(self, other):
        return BoundingRect(
            (min(self.south_west[0], other.south_west[0]), min(self.south_west[1], other.south_west[1])),
            (max(self.north_east[0], other.north_east[0]), max(self.north_east[1], other.north_east[1])),
        )


@dataclass
class Region:
    id: int
    name: str
    center: tuple[float, float]
    member_count: int = 0
    bounds: BoundingRect | None = None


@dataclass
class Dataset:
    """Labeled collection of elevation profiles."""

    samples: list
    labels: tuple = ()
    provenance: str = "synthetic"

    def __post_init__(self):
        self.samples = list(self.samples)
        if self.provenance not in PROVENANCES:
            raise DataError(f"unknown provenance {self.provenance!r}")
        seen = {s.label for s in self.samples}
        if None in seen:
            raise DataError("every sample in a dataset needs a label")
        if not self.labels:
            self.labels = tuple(sorted(seen))
        else:
            self.labels = tuple(self.labels)
        unknown = seen - set(self.labels)
        if unknown:
            raise DataError(f"sample labels {sorted(unknown)} not in the label set")
        empty = [lab for lab in self.labels if lab not in seen]
        if empty and self.samples:
            raise DataError(f"labels {empty} have no samples")

    def __len__(self):
        return len(self.samples)

    @property
    def y(self):
        return np.array([s.label for s in self.samples], dtype=object)

    def counts(self):
        out = {lab: 0 for lab in self.labels}
        for s in self.samples:
            out[s.label] += 1
        return out

    def subset(self, indices=None, labels=None):
        """Return a new dataset restricted to ``indices`` and/or ``labels``."""
        samples = self.samples if indices is None else [self.samples[i] for i in indices]
        if labels is not None:
            keep = set(labels)
            samples = [s for s in samples if s.label in keep]
            label_order = tuple(lab for lab in self.labels if lab in keep)
        else:
            present = {s.label for s in samples}
            label_order = tuple(lab for lab in self.labels if lab in present)
        return Dataset(samples, label_order, self.provenance)

    def relabel(self, new_labels):
        samples = [s.replace(label=lab) for s, lab in zip(self.samples, new_labels)]
        return Dataset(samples, (), self.provenance)


def tight_rect(profile: ElevationProfile) -> BoundingRect:
    """Axis-aligned bounding rectangle of a profile's route."""
    if profile.coords is None:
        raise MissingCoordsError(f"profile {profile.source_id!r} has no coordinates")
    lo = profile.coords.min(axis=0)
    hi = profile.coords.max(axis=0)
    return BoundingRect((lo[0], lo[1]), (hi[0], hi[1]))


def rect_iou(a: BoundingRect, b: BoundingRect) -> float:
    """Intersection over union of two rectangles in degree space.

    When the union has zero area the result is 1 for identical rectangles
    and 0 otherwise.
    """
    ih = min(a.north_east[0], b.north_east[0]) - max(a.south_west[0], b.south_west[0])
    iw = min(a.north_east[1], b.north_east[1]) - max(a.south_west[1], b.south_west[1])
    inter = max(ih, 0.0) * max(iw, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 1.0 if a == b else 0.0
    return min(max(inter / union, 0.0), 1.0)


def assign_region(rect: BoundingRect, regions: list, threshold: float = DEFAULT_REGION_THRESHOLD):
    """Match ``rect`` to the nearest region center, creating a region if none is close.

    ``regions`` is mutated: the matched region's member count and bounds are
    updated, or a new :class:`Region` is appended. Returns the region id.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    cy, cx = rect.center
    best = None
    for region in sorted(regions, key=lambda r: r.id):
        d = math.hypot(cy - region.center[0], cx - region.center[1])
        if d <= threshold and (best is None or d < best[0]):
            best = (d, region)
    if best is None:
        new_id = max((r.id for r in regions), default=0) + 1
        region = Region(id=new_id, name=f"R{new_id}", center=(cy, cx), member_count=0, bounds=rect)
        regions.append(region)
    else:
        region = best[1]
    region.member_count += 1
    if region.bounds is None:
        # regions created elsewhere start from their center point
        region.bounds = BoundingRect(region.center, region.center)
    region.bounds = region.bounds.union_bounds(rect)
    if not region.bounds.contains(*region.center):
        raise AssertionError(f"region {region.id} center left its member bounds")
    return region.id


def avg_overlap(dataset: Dataset) -> float:
    """Mean rectangle IoU over all unordered same-label sample pairs."""
    rects = [tight_rect(s) for s in dataset.samples]
    by_label = {}
    for rect, s in zip(rects, dataset.samples):
        by_label.setdefault(s.label, []).append(rect)
    ious = [rect_iou(a, b)
            for group in by_label.values()
            for a, b in itertools.combinations(group, 2)]
    return float(np.mean(ious)) if ious else 0.0


def balance(dataset: Dataset, seed: int) -> Dataset:
    """Downsample every class to the size of the smallest one.

    Samples are drawn uniformly without replacement; the original order of
    the kept samples is preserved.
    """
    if len(dataset) == 0:
        raise DataError("cannot balance an empty dataset")
    rng = np.random.default_rng(seed)
    counts = dataset.counts()
    target = min(counts.values())
    y = dataset.y
    keep = []
    for lab in dataset.labels:
        idx = np.flatnonzero(y == lab)
        keep.extend(rng.choice(idx, size=target, replace=False).tolist())
    return dataset.subset(sorted(keep))


# --- on-disk format -------------------------------------------------------

SAMPLES_FILE = "samples.jsonl"
MANIFEST_FILE = "manifest.json"


def save_dataset(dataset: Dataset, directory, extra: dict | None = None):
    """Write ``samples.jsonl`` plus ``manifest.json`` into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, SAMPLES_FILE), "w", encoding="utf-8") as fh:
        for s in dataset.samples:
            fh.write(json.dumps(s.to_record(), sort_keys=True) + "\n")
    manifest = {"provenance": dataset.provenance, "labels": list(dataset.labels),
                "record_count": len(dataset)}
    if extra:
        manifest.update(extra)
    with open(os.path.join(directory, MANIFEST_FILE), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_dataset(directory) -> Dataset:
    with open(os.path.join(directory, MANIFEST_FILE), encoding="utf-8") as fh:
        manifest = json.load(fh)
    samples = []
    with open(os.path.join(directory, SAMPLES_FILE), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                samples.append(ElevationProfile.from_record(json.loads(line)))
    if len(samples) != manifest["record_count"]:
        raise DataError(f"{directory}: manifest says {manifest['record_count']} records, "
                        f"found {len(samples)}")
    return Dataset(samples, tuple(manifest["labels"]), manifest["provenance"])


def read_manifest(directory) -> dict:
    with open(os.path.join(directory, MANIFEST_FILE), encoding="utf-8") as fh:
        return json.load(fh)


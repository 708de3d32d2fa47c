"""Feature pipelines fit on training profiles only.

Each representation turns a list of profiles into a feature matrix plus a
``groups`` array mapping rows back to profiles (raw chunking emits several
rows per profile). All learned state (codebook, vocabulary, document
frequencies, raster range, scaling) comes from :meth:`fit`, and
:meth:`fingerprint` hashes that state so folds can be audited for leakage.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import textrep
from ..imagerep import RasterConfig, profile_image
from ..models import fingerprint
from .voting import PAD_EDGE, ChunkSpec, chunk

REPRESENTATIONS = ("raw", "ngrams", "tfidf", "image", "aggregate")


class Scaler:
    """Per-column standardization; ``center=False`` keeps sparse inputs sparse."""

    def __init__(self, center=True):
        self.center = center
        self.mean = None
        self.scale = None

    def fit(self, X):
        if sp.issparse(X):
            mean = np.asarray(X.mean(axis=0)).ravel()
            sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
            std = np.sqrt(np.maximum(sq - mean ** 2, 0.0))
        else:
            mean = X.mean(axis=0)
            std = X.std(axis=0)
        self.mean = mean if self.center else np.zeros_like(mean)
        self.scale = np.where(std > 0, std, 1.0)
        return self

    def transform(self, X):
        if sp.issparse(X):
            return sp.csr_matrix(X.multiply(1.0 / self.scale[None, :]))
        return (X - self.mean) / self.scale

    def state(self):
        return {"center": self.center, "mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_state(cls, d):
        s = cls(d["center"])
        s.mean = np.asarray(d["mean"], dtype=float)
        s.scale = np.asarray(d["scale"], dtype=float)
        return s


class Representation:
    name = "base"

    def fit(self, profiles):
        raise NotImplementedError

    def transform(self, profiles):
        raise NotImplementedError

    def state(self) -> dict:
        raise NotImplementedError

    def fingerprint(self) -> str:
        return fingerprint({"name": self.name, **self.state()})


class RawChunks(Representation):
    """Raw elevation windows, standardized per position."""

    name = "raw"

    def __init__(self, spec: ChunkSpec = ChunkSpec(32, PAD_EDGE)):
        self.spec = spec
        self.scaler = Scaler()

    def _chunks(self, profiles):
        blocks, groups = [], []
        for i, p in enumerate(profiles):
            c = chunk(p.values, self.spec)
            blocks.append(c)
            groups.extend([i] * len(c))
        return np.vstack(blocks), np.asarray(groups)

    def fit(self, profiles):
        X, _ = self._chunks(profiles)
        self.scaler.fit(X)
        return self

    def transform(self, profiles):
        X, groups = self._chunks(profiles)
        return self.scaler.transform(X), groups

    def state(self):
        return {"chunk_len": self.spec.chunk_len, "remainder": self.spec.remainder,
                "scaler": self.scaler.state()}

    @classmethod
    def from_state(cls, d):
        r = cls(ChunkSpec(d["chunk_len"], d["remainder"]))
        r.scaler = Scaler.from_state(d["scaler"])
        return r


class NgramFeatures(Representation):
    """Normalized non-overlapping n-gram counts over a training vocabulary."""

    name = "ngrams"

    def __init__(self, mode=textrep.FLOOR_WHOLE, alphabet_len=26, n_max=textrep.DEFAULT_N_MAX,
                 target_dim=textrep.DEFAULT_TARGET_DIM, scale=True):
        self.mode = mode
        self.alphabet_len = alphabet_len
        self.n_max = n_max
        self.target_dim = target_dim
        self.scale = scale
        self.codebook = None
        self.vocabulary = None
        self.scaler = None

    def _lines(self, profiles):
        corpus, _ = textrep.encode(profiles, self.mode, self.alphabet_len, self.codebook)
        return corpus.lines

    def _matrix(self, lines):
        return textrep.ngram_matrix(lines, self.vocabulary)

    def fit(self, profiles):
        corpus, self.codebook = textrep.encode(profiles, self.mode, self.alphabet_len)
        self.vocabulary = textrep.select_features(
            textrep.build_vocabulary(corpus, self.n_max), self.target_dim)
        self._fit_extra(corpus)
        if self.scale:
            self.scaler = Scaler(center=False).fit(self._matrix(corpus.lines))
        return self

    def _fit_extra(self, corpus):
        pass

    def transform(self, profiles):
        X = self._matrix(self._lines(profiles))
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return X, np.arange(len(profiles))

    def state(self):
        return {"mode": self.mode, "n_max": self.n_max, "target_dim": self.target_dim,
                "codebook": self.codebook.to_json(), "vocabulary": self.vocabulary.to_json(),
                "scaler": self.scaler.state() if self.scaler else None}

    @classmethod
    def from_state(cls, d):
        r = cls(d["mode"], n_max=d["n_max"], target_dim=d["target_dim"], scale=d["scaler"] is not None)
        r.codebook = textrep.Codebook.from_json(d["codebook"])
        r.alphabet_len = r.codebook.alphabet_len
        r.vocabulary = textrep.Vocabulary.from_json(d["vocabulary"])
        r._restore_extra(d)
        if d["scaler"] is not None:
            r.scaler = Scaler.from_state(d["scaler"])
        return r

    def _restore_extra(self, d):
        pass


class TfidfFeatures(NgramFeatures):
    """tf-idf weights with document frequencies from the training corpus."""

    name = "tfidf"

    def _fit_extra(self, corpus):
        self.stats = textrep.TfidfStats(self.vocabulary, len(corpus.lines))

    def _restore_extra(self, d):
        self.stats = textrep.TfidfStats(self.vocabulary, self.vocabulary.n_docs)

    def _matrix(self, lines):
        return textrep.tfidf_matrix(lines, self.stats)


class ImageFeatures(Representation):
    """Flattened colored line-plot rasters scaled to [0, 1]."""

    name = "image"

    def __init__(self, config: RasterConfig = RasterConfig()):
        self.config = config

    def fit(self, profiles):
        lo = min(float(p.values.min()) for p in profiles)
        hi = max(float(p.values.max()) for p in profiles)
        self.config = self.config.with_range(lo, hi)
        return self

    def images(self, profiles):
        return [profile_image(p.values, self.config) for p in profiles]

    def transform(self, profiles):
        X = np.vstack([img.flatten() for img in self.images(profiles)])
        return X, np.arange(len(profiles))

    def state(self):
        c = self.config
        return {"width": c.width, "height": c.height, "points": c.points,
                "palette": [list(p) for p in c.palette], "global_range": list(c.global_range)}

    @classmethod
    def from_state(cls, d):
        return cls(RasterConfig(d["width"], d["height"], d["points"], tuple(map(tuple, d["palette"])),
                                tuple(d["global_range"])))


class AggregateFeatures(Representation):
    """Quantized ascent/descent/extrema statistics, standardized."""

    name = "aggregate"

    def __init__(self, quantum=0.0):
        self.quantum = quantum
        self.scaler = Scaler()

    def _raw(self, profiles):
        from ..defense import aggregate

        return np.vstack([aggregate(p.values, self.quantum).vector() for p in profiles])

    def fit(self, profiles):
        self.scaler.fit(self._raw(profiles))
        return self

    def transform(self, profiles):
        return self.scaler.transform(self._raw(profiles)), np.arange(len(profiles))

    def state(self):
        return {"quantum": self.quantum, "scaler": self.scaler.state()}

    @classmethod
    def from_state(cls, d):
        r = cls(d["quantum"])
        r.scaler = Scaler.from_state(d["scaler"])
        return r


_CLASSES = {c.name: c for c in (RawChunks, NgramFeatures, TfidfFeatures, ImageFeatures, AggregateFeatures)}


def make_representation(name, **options) -> Representation:
    """Build an unfitted representation; unknown option names are ignored per kind."""
    if name == "raw":
        return RawChunks(options.get("chunk", ChunkSpec(32, PAD_EDGE)))
    if name in ("ngrams", "tfidf"):
        return _CLASSES[name](options.get("mode", textrep.FLOOR_WHOLE), options.get("alphabet_len", 26),
                              options.get("n_max", textrep.DEFAULT_N_MAX),
                              options.get("target_dim", textrep.DEFAULT_TARGET_DIM))
    if name == "image":
        return ImageFeatures(options.get("raster", RasterConfig()))
    if name == "aggregate":
        return AggregateFeatures(options.get("quantum", 0.0))
    raise ValueError(f"unknown representation {name!r}")


def representation_from_state(name, state) -> Representation:
    return _CLASSES[name].from_state(state)

"""Text-like representation of elevation profiles.

Profiles are discretized, each distinct discrete value is mapped to a
fixed-width word over the alphabet ``a..z``, and a profile becomes one line
of words. Features are word n-gram counts or tf-idf weights over a
vocabulary built from training lines.
"""
from __future__ import annotations

import csv
import json
import math
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .core import ElevationProfile
from .errors import AlphabetTooSmallError, DataError

FLOOR_WHOLE = "floor_whole"
FLOOR_MILLI = "floor_milli"
DISCRETIZATION_MODES = (FLOOR_WHOLE, FLOOR_MILLI)
ALPHABET = string.ascii_lowercase
DEFAULT_N_MAX = 5
DEFAULT_TARGET_DIM = 5000
UNKNOWN_CHAR = "?"


def discretize(values, mode=FLOOR_WHOLE) -> np.ndarray:
    """Floor elevations to whole feet or to thousandths of a foot."""
    if isinstance(values, ElevationProfile):
        values = values.values
    x = np.asarray(values, dtype=float)
    if mode == FLOOR_WHOLE:
        return np.floor(x)
    if mode == FLOOR_MILLI:
        return np.floor(x * 1e3) / 1e3
    raise DataError(f"unknown discretization mode {mode!r}")


def word_size(c: int, l: int) -> int:
    """Smallest word width ``w >= 1`` with ``l**w >= c``."""
    if c < 1 or l < 2:
        raise ValueError("need c >= 1 and l >= 2")
    w = 1
    power = l
    while power < c:
        power *= l
        w += 1
    return w


@dataclass
class Codebook:
    alphabet_len: int
    word_size: int
    value_to_word: dict

    @property
    def word_to_value(self):
        return {w: v for v, w in self.value_to_word.items()}

    def encode_values(self, discrete_values) -> list:
        """Words for a discrete sequence; unseen values become a non-matching placeholder."""
        unknown = UNKNOWN_CHAR * self.word_size
        get = self.value_to_word.get
        return [get(float(v), unknown) for v in discrete_values]

    def decode(self, words) -> np.ndarray:
        inv = self.word_to_value
        return np.array([inv[w] for w in words], dtype=float)

    def to_json(self) -> str:
        items = sorted(self.value_to_word.items())
        return json.dumps({"alphabet_len": self.alphabet_len, "word_size": self.word_size,
                           "values": [v for v, _ in items], "words": [w for _, w in items]},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["alphabet_len"], d["word_size"],
                   {float(v): w for v, w in zip(d["values"], d["words"])})


def _base_l_word(i, l, w):
    chars = []
    for _ in range(w):
        i, r = divmod(i, l)
        chars.append(ALPHABET[r])
    return "".join(reversed(chars))


def build_codebook(discrete_values, l: int = 26) -> Codebook:
    """Map sorted distinct values to zero-padded base-``l`` words ``a, b, ..., ba, ...``."""
    if l > len(ALPHABET):
        raise AlphabetTooSmallError(f"alphabet has {len(ALPHABET)} letters, asked for {l}")
    uniq = sorted({float(v) for v in discrete_values})
    if not uniq:
        raise DataError("cannot build a codebook from no values")
    w = word_size(len(uniq), l)
    return Codebook(l, w, {v: _base_l_word(i, l, w) for i, v in enumerate(uniq)})


@dataclass
class Corpus:
    lines: list
    labels: list = field(default_factory=list)

    def to_text(self) -> str:
        return "\n".join(" ".join(line) for line in self.lines) + "\n"


def encode(profiles, mode=FLOOR_WHOLE, l: int = 26, codebook: Codebook | None = None):
    """Encode profiles into a corpus with one shared codebook.

    The codebook is built over all given profiles regardless of label unless
    an existing ``codebook`` is supplied (e.g. one fit on a training split).

    Returns
    -------
    (Corpus, Codebook)
    """
    profiles = list(getattr(profiles, "samples", profiles))
    if not profiles:
        raise DataError("cannot encode an empty dataset")
    discrete = [discretize(p.values, mode) for p in profiles]
    if codebook is None:
        codebook = build_codebook(np.concatenate(discrete), l)
    lines = [codebook.encode_values(d) for d in discrete]
    return Corpus(lines, [p.label for p in profiles]), codebook


def _split(line):
    return line.split() if isinstance(line, str) else list(line)


@dataclass
class Vocabulary:
    """Ordered n-gram entries with document and corpus term frequencies.

    Entries are word n-grams joined by single spaces, ordered by descending
    corpus term frequency then lexicographically.
    """

    entries: list
    df: dict
    tf_corpus: dict
    n_max: int
    n_docs: int = 0

    def __post_init__(self):
        self.index = {tuple(e.split(" ")): i for i, e in enumerate(self.entries)}
        if len(self.index) != len(self.entries):
            raise DataError("duplicate vocabulary entries")

    def __len__(self):
        return len(self.entries)

    def to_json(self) -> str:
        return json.dumps({"n_max": self.n_max, "n_docs": self.n_docs, "entries": self.entries,
                           "df": [self.df[e] for e in self.entries],
                           "tf_corpus": [self.tf_corpus[e] for e in self.entries]}, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["entries"], dict(zip(d["entries"], d["df"])),
                   dict(zip(d["entries"], d["tf_corpus"])), d["n_max"], d["n_docs"])


def _ordered(tf):
    return sorted(tf, key=lambda e: (-tf[e], e))


def build_vocabulary(corpus, n_max: int = DEFAULT_N_MAX) -> Vocabulary:
    """Collect every word n-gram (``1 <= n <= n_max``) of every line.

    A window of ``n`` words advances one word at a time; windows that would
    run past the end of a line are not formed.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    lines = corpus.lines if isinstance(corpus, Corpus) else list(corpus)
    tf = Counter()
    df = Counter()
    for raw in lines:
        words = _split(raw)
        seen = set()
        for n in range(1, n_max + 1):
            for i in range(len(words) - n + 1):
                g = " ".join(words[i:i + n])
                tf[g] += 1
                seen.add(g)
        df.update(seen)
    entries = _ordered(tf)
    return Vocabulary(entries, dict(df), dict(tf), n_max, len(lines))


def select_features(vocabulary: Vocabulary, target_dim: int = DEFAULT_TARGET_DIM) -> Vocabulary:
    """Keep the ``target_dim`` entries with the highest corpus term frequency."""
    if target_dim < 1:
        raise ValueError("target_dim must be at least 1")
    if len(vocabulary) <= target_dim:
        return vocabulary
    keep = _ordered(vocabulary.tf_corpus)[:target_dim]
    return Vocabulary(keep, {e: vocabulary.df[e] for e in keep},
                      {e: vocabulary.tf_corpus[e] for e in keep}, vocabulary.n_max, vocabulary.n_docs)


def ngram_counts(line, vocabulary: Vocabulary) -> dict:
    """Non-overlapping occurrence counts ``{entry index: count}``.

    Each entry is matched greedily from the left; once an occurrence is
    counted, the next one of the same entry must start after it ends.
    """
    words = _split(line)
    index = vocabulary.index
    counts = {}
    for n in range(1, vocabulary.n_max + 1):
        next_free = {}
        for i in range(len(words) - n + 1):
            j = index.get(tuple(words[i:i + n]))
            if j is not None and i >= next_free.get(j, 0):
                counts[j] = counts.get(j, 0) + 1
                next_free[j] = i + n
    return counts


def vectorize_ngrams(line, vocabulary: Vocabulary) -> np.ndarray:
    """Occurrence-probability vector over the vocabulary (sums to 1 or is all zero)."""
    out = np.zeros(len(vocabulary))
    for j, c in ngram_counts(line, vocabulary).items():
        out[j] = c
    total = out.sum()
    return out / total if total > 0 else out


@dataclass
class TfidfStats:
    """Vocabulary plus document frequencies from ``n_docs`` training documents."""

    vocabulary: Vocabulary
    n_docs: int

    @classmethod
    def fit(cls, corpus, n_max=DEFAULT_N_MAX, target_dim=DEFAULT_TARGET_DIM):
        vocab = select_features(build_vocabulary(corpus, n_max), target_dim)
        return cls(vocab, vocab.n_docs)

    @property
    def idf(self) -> np.ndarray:
        df = np.array([self.vocabulary.df[e] for e in self.vocabulary.entries], dtype=float)
        return np.log(self.n_docs / df)


def vectorize_tfidf(line, stats: TfidfStats, idf=None) -> np.ndarray:
    """``ln(1 + freq) * ln(N / df)`` per vocabulary entry.

    ``freq`` is the non-overlapping occurrence count used by
    :func:`vectorize_ngrams`.
    """
    idf = stats.idf if idf is None else idf
    out = np.zeros(len(stats.vocabulary))
    for j, c in ngram_counts(line, stats.vocabulary).items():
        out[j] = math.log1p(c)
    return out * idf


def ngram_matrix(lines, vocabulary: Vocabulary, normalize=True) -> sp.csr_matrix:
    """Sparse row-per-line count matrix (row-normalized when ``normalize``)."""
    rows, cols, vals = [], [], []
    for r, line in enumerate(lines):
        counts = ngram_counts(line, vocabulary)
        total = sum(counts.values())
        for j, c in counts.items():
            rows.append(r)
            cols.append(j)
            vals.append(c / total if normalize else float(c))
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(lines), len(vocabulary)))


def tfidf_matrix(lines, stats: TfidfStats) -> sp.csr_matrix:
    counts = ngram_matrix(lines, stats.vocabulary, normalize=False)
    counts.data = np.log1p(counts.data)
    return sp.csr_matrix(counts.multiply(stats.idf[None, :]))


def export_features_csv(path, matrix, entries: Sequence[str], labels=None):
    """Write a feature matrix as CSV with the entry strings as header."""
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow((["label"] if labels is not None else []) + list(entries))
        for i, row in enumerate(dense):
            prefix = [labels[i]] if labels is not None else []
            writer.writerow(prefix + [repr(float(v)) for v in row])

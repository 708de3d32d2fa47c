import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elevpriv.core import ElevationProfile
from elevpriv.errors import AlphabetTooSmallError, DataError
from elevpriv.textrep import (FLOOR_MILLI, FLOOR_WHOLE, Codebook, TfidfStats, Vocabulary,
                              build_codebook, build_vocabulary, discretize, encode, ngram_counts,
                              ngram_matrix, select_features, tfidf_matrix, vectorize_ngrams,
                              vectorize_tfidf, word_size)

from oracles import brute_counts, brute_ngram_vector, brute_tfidf_vector, brute_vocabulary, random_corpus


def vocab_of(lines, n_max=5):
    return build_vocabulary(lines, n_max)


# --- discretization and codebook ---------------------------------------------------

def test_discretize_examples():
    assert discretize([12.3456])[0] == 12
    assert discretize([12.3456], FLOOR_MILLI)[0] == pytest.approx(12.345, abs=1e-12)
    assert discretize([-0.5])[0] == -1
    with pytest.raises(DataError):
        discretize([1.0], "round")


@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=200), st.sampled_from([FLOOR_WHOLE, FLOOR_MILLI]))
def test_discretize_never_adds_values(xs, mode):
    assert len(np.unique(discretize(xs, mode))) <= len(np.unique(xs))


def test_word_size_examples():
    assert word_size(26, 26) == 1
    assert word_size(100, 26) == 2
    assert word_size(1, 26) == 1


@given(st.integers(1, 10**6), st.integers(2, 26))
def test_word_size_bounds(c, l):
    w = word_size(c, l)
    assert l ** w >= c
    if c > 1:
        assert l ** (w - 1) < c


def test_codebook_examples():
    cb = build_codebook([10, 20])
    assert cb.word_size == 1 and cb.value_to_word == {10.0: "a", 20.0: "b"}
    assert build_codebook([5]).value_to_word == {5.0: "a"}
    cb = build_codebook(range(27))
    assert cb.word_size == 2 and cb.value_to_word[0.0] == "aa" and cb.value_to_word[26.0] == "ba"
    with pytest.raises(AlphabetTooSmallError):
        build_codebook([1, 2], 27)


def test_codebook_json_roundtrip():
    cb = build_codebook([1.5, 2.0, -3.0], 3)
    assert Codebook.from_json(cb.to_json()) == cb


def test_encode_examples():
    profiles = [ElevationProfile([10, 20], label="A"), ElevationProfile([20, 10], label="B")]
    corpus, cb = encode(profiles)
    assert [" ".join(line) for line in corpus.lines] == ["a b", "b a"]
    assert corpus.to_text() == "a b\nb a\n"
    corpus, _ = encode([ElevationProfile([7, 7, 7])])
    assert corpus.lines == [["a", "a", "a"]]
    with pytest.raises(DataError):
        encode([])


def test_unseen_values_get_placeholder():
    _, cb = encode([ElevationProfile([1, 2, 3])])
    corpus, _ = encode([ElevationProfile([2, 99])], codebook=cb)
    assert corpus.lines == [["b", "?"]]


@given(st.lists(st.lists(st.floats(-500, 5000), min_size=1, max_size=40), min_size=1, max_size=5),
       st.integers(2, 26), st.sampled_from([FLOOR_WHOLE, FLOOR_MILLI]))
def test_encode_decode_identity(rows, l, mode):
    profiles = [ElevationProfile(r) for r in rows]
    corpus, cb = encode(profiles, mode, l)
    for p, line in zip(profiles, corpus.lines):
        assert len({len(w) for w in line}) == 1
        assert np.array_equal(cb.decode(line), discretize(p.values, mode))


# --- vocabulary ----------------------------------------------------------------------

def test_vocabulary_examples():
    v = vocab_of([["a", "b", "c"]], 2)
    assert set(v.entries) == {"a", "b", "c", "a b", "b c"}
    assert vocab_of([["a"]], 3).entries == ["a"]
    two = vocab_of([["a", "b"], ["a", "b"]], 2)
    assert set(two.entries) == set(vocab_of([["a", "b"]], 2).entries)
    assert all(two.df[e] == 2 for e in two.entries)


def test_vocabulary_ordering_and_json():
    v = vocab_of([["b", "a", "a"], ["a"]], 2)
    assert v.entries[0] == "a"  # tf 3
    assert v.entries == sorted(v.entries, key=lambda e: (-v.tf_corpus[e], e))
    assert Vocabulary.from_json(v.to_json()).entries == v.entries


@given(st.integers(0, 10**6))
def test_vocabulary_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    lines = random_corpus(rng, max_docs=50, max_words=30, alphabet="abc")
    n_max = int(rng.integers(1, 6))
    v = vocab_of(lines, n_max)
    brute = brute_vocabulary(lines, n_max)
    assert set(v.entries) == set(brute)
    for e in v.entries:
        assert (v.tf_corpus[e], v.df[e]) == brute[e]


def test_select_features_examples():
    v = Vocabulary(["x", "y", "z"], {"x": 1, "y": 1, "z": 1}, {"x": 5, "y": 3, "z": 1}, 1, 1)
    assert select_features(v, 5000) is v
    assert select_features(v, 2).entries == ["x", "y"]
    tie = Vocabulary(["y", "x"], {"x": 1, "y": 1}, {"x": 2, "y": 2}, 1, 1)
    assert select_features(tie, 1).entries == ["x"]


# --- vectorizers ----------------------------------------------------------------------

def test_ngram_examples():
    v = Vocabulary(["a a"], {"a a": 1}, {"a a": 3}, 2, 1)
    assert ngram_counts(["a"] * 4, v) == {0: 2}
    v = vocab_of([["a", "b"]], 1)
    assert np.allclose(vectorize_ngrams(["a", "b"], v), [0.5, 0.5])
    assert not vectorize_ngrams(["z", "q"], v).any()


def test_tfidf_examples():
    # N=10, df=2, freq=3
    v = Vocabulary(["t"], {"t": 2}, {"t": 3}, 1, 10)
    stats = TfidfStats(v, 10)
    assert vectorize_tfidf(["t", "t", "t"], stats)[0] == pytest.approx(math.log(4) * math.log(5), abs=1e-12)
    assert vectorize_tfidf(["u"], stats)[0] == 0.0
    every = TfidfStats(Vocabulary(["t"], {"t": 10}, {"t": 10}, 1, 10), 10)
    assert vectorize_tfidf(["t"], every)[0] == 0.0


@given(st.integers(0, 10**6))
def test_vectorizers_match_bruteforce(seed):
    rng = np.random.default_rng(seed)
    train = random_corpus(rng)
    stats = TfidfStats.fit(train, 5, 5000)
    entries = stats.vocabulary.entries
    for line in random_corpus(rng, 5):
        dense = vectorize_ngrams(line, stats.vocabulary)
        assert np.array_equal(dense, brute_ngram_vector(line, entries))
        assert np.allclose(vectorize_tfidf(line, stats), brute_tfidf_vector(line, entries, train),
                           atol=1e-9, rtol=0)
        s = dense.sum()
        assert s == 0 or abs(s - 1) < 1e-12


@given(st.integers(0, 10**6))
def test_tfidf_zero_iff_absent_or_everywhere(seed):
    rng = np.random.default_rng(seed)
    train = random_corpus(rng, 8, 12, "ab")
    stats = TfidfStats.fit(train, 3)
    n = len(train)
    for line in train[:3]:
        vec = vectorize_tfidf(line, stats)
        counts = brute_counts(line, stats.vocabulary.entries)
        for j, e in enumerate(stats.vocabulary.entries):
            assert (vec[j] == 0) == (counts[j] == 0 or stats.vocabulary.df[e] == n)


def test_sparse_matrices_match_dense_rows():
    rng = np.random.default_rng(4)
    train = random_corpus(rng)
    stats = TfidfStats.fit(train, 4)
    M = ngram_matrix(train, stats.vocabulary).toarray()
    T = tfidf_matrix(train, stats).toarray()
    for i, line in enumerate(train):
        assert np.allclose(M[i], vectorize_ngrams(line, stats.vocabulary))
        assert np.allclose(T[i], vectorize_tfidf(line, stats))

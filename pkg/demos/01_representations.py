"""Turning elevation profiles into words, n-gram features and small pictures.

Run: python3 demos/01_representations.py [output_dir]
"""
import sys
from pathlib import Path

import numpy as np

from elevpriv.imagerep import RasterConfig, profile_image
from elevpriv.ingest import synth_city_dataset
from elevpriv.textrep import TfidfStats, encode, tfidf_matrix

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "representations"
out.mkdir(parents=True, exist_ok=True)

# %% Two synthetic cities, a handful of 64-sample routes each
data = synth_city_dataset(n_cities=2, routes_per_city=6, route_len=64, seed=0, grid_size=65)
first = data.samples[0]
print("labels:", data.labels, "counts:", data.counts())
print("first route (ft):", np.round(first.values[:8], 1), "...")

# %% Floor to whole feet, then map each distinct value to a fixed-width base-26 word
corpus, codebook = encode(data.samples)
print(f"{len(codebook.value_to_word)} distinct values -> word size {codebook.word_size}")
print("first route as words:", " ".join(corpus.lines[0][:8]), "...")

# %% n-grams of up to 5 words; tf-idf statistics come from the documents passed to fit
stats = TfidfStats.fit(corpus.lines, 5, 5000)
X = tfidf_matrix(corpus.lines, stats)
print("vocabulary size:", len(stats.vocabulary.entries), "matrix:", X.shape, "non-zeros:", X.nnz)
print("most frequent entries:", stats.vocabulary.entries[:5])

# %% The same routes as 32x32 line plots whose color encodes the elevation band
lo = min(p.values.min() for p in data.samples)
hi = max(p.values.max() for p in data.samples)
cfg = RasterConfig(global_range=(float(lo), float(hi)))
for p in data.samples[:: len(data.samples) // 2]:
    path = out / f"{p.source_id}.png"
    profile_image(p.values, cfg).save_png(path)
    print("wrote", path)

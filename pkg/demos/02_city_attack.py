"""Guessing the city of a route from its elevation alone, with a chance-level control.

Run: python3 demos/02_city_attack.py
"""
from elevpriv.harness import ExperimentSpec, chance_interval, permute_labels, run_cv, run_tm3
from elevpriv.ingest import synth_city_dataset

# %% Five synthetic cities with different base elevations and roughness
data = synth_city_dataset(n_cities=5, routes_per_city=40, route_len=96, seed=0)
print("cities:", data.labels)

# %% Raw 32-sample chunks, a random forest, and soft voting over chunks per route
spec = ExperimentSpec(representation="raw", model="rf", folds=5, seed=0)
for report in run_tm3(data, spec, class_counts=(3, 5)):
    print(f"{report.meta['cell']:>8}: accuracy {report.accuracy:.3f} on {report.meta['classes']}")

# %% Shuffled labels should land inside the binomial chance interval
control = run_cv(spec, permute_labels(data, seed=1))
lo, hi = chance_interval(len(data), len(data.labels))
print(f"permuted labels: accuracy {control.accuracy:.3f}, 99% chance interval [{lo:.3f}, {hi:.3f}]")

# %% Each fold fitted its preprocessing on its own training profiles only
print("fold fingerprints:", control.meta["fold_fingerprints"])

"""Route overlap helps the attacker; perturbation and aggregation try to hurt it.

Run: python3 demos/03_overlap_and_defenses.py
"""
from elevpriv.defense import AggregateDefense, PerturbSpec, aggregate, evaluate_defense
from elevpriv.harness import ExperimentSpec, mean_signal_overlap, parent_derived_overlap, run_cv, simulate_overlap
from elevpriv.ingest import synth_borough_datasets

# %% Boroughs of one city share an elevation range, which makes them hard to tell apart
city = synth_borough_datasets(n_cities=1, boroughs_per_city=3, routes_per_borough=30, seed=0)["MIA"]
spec = ExperimentSpec(representation="ngrams", model="svm", folds=5, seed=0)
base = run_cv(spec, city)

# %% Add routes that retrace 35% of an existing route of the same borough
over = simulate_overlap(city, 0.35, seed=1)
print(f"parent/derived overlap {parent_derived_overlap(over):.3f}; "
      f"mean same-class overlap {mean_signal_overlap(city):.3f} -> {mean_signal_overlap(over):.3f}")
print(f"accuracy {base.accuracy:.3f} -> {run_cv(spec, over).accuracy:.3f} with overlapping routes")

# %% Perturb 10% of each profile in 10-sample epochs, clipped to the local moving mean +- std
report = evaluate_defense(city, PerturbSpec(0.10, 10, 30, seed=0), spec)
print(f"perturbation: {report.clean.accuracy:.3f} -> {report.defended.accuracy:.3f}")

# %% Share only rounded ascent/descent statistics instead of the profile
print("aggregate of the first route:", aggregate(city.samples[0].values, quantum=10).to_dict())
for q in (0.0, 10.0):
    r = evaluate_defense(city, AggregateDefense(q), spec)
    print(f"aggregates rounded to {q:g} ft: attack accuracy {r.defended.accuracy:.3f}")

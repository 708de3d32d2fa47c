"""Class-weighted loss on imbalanced data, and training in rounds of growing label sets.

Run: python3 demos/04_weighted_loss_and_rounds.py
"""
import numpy as np

from elevpriv.harness import ExperimentSpec, make_representation, predict_profiles, run_cv
from elevpriv.ingest import synth_city_dataset
from elevpriv.models import MlpConfig, fine_tune, make_rounds, train_mlp

# %% A 9:1 two-city task
data = synth_city_dataset(2, 180, 96, 0, presets=[("A", 100.0, 60.0, 0.45), ("B", 110.0, 60.0, 0.55)])
y = data.y
imbalanced = data.subset(np.r_[np.flatnonzero(y == "A"), np.flatnonzero(y == "B")[:20]])
for weights in (None, "inverse"):
    spec = ExperimentSpec(representation="raw", model="mlp", balance=False, folds=5, seed=0,
                          model_config={"class_weights": weights})
    cm = run_cv(spec, imbalanced).confusion
    print(f"class weights {weights!s:>7}: minority recall {cm[1, 1] / cm[1].sum():.2f}")

# %% Rounds: one class, then two, then three, each a disjoint balanced draw
data = synth_city_dataset(3, 120, 96, 0)
y = data.y
data = data.subset(np.concatenate([np.flatnonzero(y == lab)[:n] for lab, n in zip(data.labels, (120, 80, 40))]))
rng = np.random.default_rng(0)
test_idx = np.sort(rng.choice(len(data), len(data) // 5, replace=False))
train = data.subset(np.setdiff1d(np.arange(len(data)), test_idx))
test = data.subset(test_idx)
rep = make_representation("raw").fit(train.samples)
schedule, idx = make_rounds(train.y, [1, 1], seed=0)
rounds = []
for i in idx:
    sub = train.subset(i)
    X, g = rep.transform(sub.samples)
    rounds.append((X, sub.y[g]))
print("rounds:", [labels for labels, _ in schedule.rounds], "sizes:", [len(i) for i in idx])
cfg = MlpConfig(hidden_layers=(64, 64), seed=1)
tuned = fine_tune(schedule, rounds, cfg)
X, g = rep.transform(train.samples)
single = train_mlp(X, train.y[g], cfg)
for name, model in (("single shot", single), ("fine-tuned", tuned)):
    pred = np.array(predict_profiles(model, rep, test.samples), dtype=object)
    print(f"{name}: held-out accuracy {np.mean(pred == test.y):.3f}")

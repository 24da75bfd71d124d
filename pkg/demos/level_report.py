"""Per-level statistics of a cascade trained on Yeast.

Prints the training report (rows in, easy rows, validation accuracies and
which smart-iteration rule fired) and the pass rate of test rows per level.
"""
# %%
from pathlib import Path

import numpy as np

from dbrf.bench import pass_rates
from dbrf.cascade import TrainConfig, predict_cascade, train_cascade
from dbrf.data import SplitSpec, load_csv, train_test_split
from dbrf.metrics import accuracy

DATA = Path(__file__).resolve().parents[1] / "data" / "yeast.csv"

yeast = load_csv(DATA)
train, test = train_test_split(yeast, SplitSpec(0.7, True, 0))
model, report = train_cascade(train, TrainConfig(master_seed=0))

# %%
print("level  rows_in  easy  val_acc  easy_val_acc  rule")
for r in report.levels:
    va = f"{r.validation_accuracy:.3f}" if r.validation_accuracy is not None else "   - "
    ea = f"{r.easy_validation_accuracy:.3f}" if r.easy_validation_accuracy is not None else "   - "
    print(f"{r.level_index:5d}  {r.n_rows_in:7d}  {r.n_easy:4d}  {va:>7}  {ea:>12}  "
          f"{r.rule_triggered}")
report.to_csv("yeast_levels.csv")

# %%
pred, level_used = predict_cascade(model, test)
print(f"\ntest accuracy {accuracy(pred, test.labels):.4f}")
rates = pass_rates(level_used, model.n_levels)
for k, rate in enumerate(rates, start=1):
    mask = level_used == k
    acc = accuracy(pred[mask], test.labels[mask]) if mask.any() else float("nan")
    print(f"level {k}: {rate:6.1%} of test rows exit here, accuracy {acc:.3f}")
print("rows per level:", np.bincount(level_used, minlength=model.n_levels + 1)[1:].tolist())

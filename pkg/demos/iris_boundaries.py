"""Decision regions of a plain forest and of the cascade on two Iris features.

Writes ``iris_grid_rf.csv`` and ``iris_grid_dbrf.csv`` (x, y, predicted) to
the working directory and, when matplotlib is importable, a side-by-side
picture ``iris_boundaries.png``.
"""
# %%
from pathlib import Path

import numpy as np

from dbrf.bench import decision_grid, grid_bounds
from dbrf.cascade import TrainConfig, predict_cascade, train_cascade
from dbrf.data import SplitSpec, load_csv, train_test_split
from dbrf.metrics import accuracy

DATA = Path(__file__).resolve().parents[1] / "data" / "iris.csv"
SEED = 0

# petal length and petal width
iris = load_csv(DATA).select_features([2, 3])
train, test = train_test_split(iris, SplitSpec(0.67, True, SEED))
print(f"{len(train)} training rows, {len(test)} test rows")

# %%
# A single level without evolution or validation guards is just a forest, so
# the same seed gives the RF baseline.
rf_cfg = TrainConfig(n_iterations=1, evolution_enabled=False, smart_iteration_enabled=False,
                     master_seed=SEED)
rf, _ = train_cascade(train, rf_cfg)
db, report = train_cascade(train, TrainConfig(master_seed=SEED))

for name, model in (("rf", rf), ("dbrf", db)):
    tr = accuracy(model.predict(train.features), train.labels)
    te = accuracy(model.predict(test.features), test.labels)
    print(f"{name:>4}: train {tr:.3f}  test {te:.3f}  levels {model.n_levels}")

_, exit_level = predict_cascade(db, test)
print("test rows leaving at each level:", np.bincount(exit_level)[1:].tolist())

# %%
bounds = (grid_bounds(db, 0), grid_bounds(db, 1))
grids = {}
for name, model in (("rf", rf), ("dbrf", db)):
    x, y, pred = decision_grid(model, (0, 1), resolution=200, bounds=bounds)
    grids[name] = pred.reshape(200, 200)
    with open(f"iris_grid_{name}.csv", "w") as fh:
        fh.write("x,y,predicted\n")
        for a, b, c in zip(x, y, pred):
            fh.write(f"{a!r},{b!r},{iris.schema.decode_label(c)}\n")
print("disagreeing grid cells:", int(np.sum(grids["rf"] != grids["dbrf"])))

# %%
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    extent = (*bounds[0], *bounds[1])
    for ax, name in zip(axes, ("rf", "dbrf")):
        ax.imshow(grids[name], origin="lower", extent=extent, aspect="auto", alpha=0.35)
        ax.scatter(test.features[:, 0], test.features[:, 1], c=test.labels, s=12,
                   edgecolors="k", linewidths=0.3)
        ax.set_title(name.upper())
        ax.set_xlabel("petal length")
    axes[0].set_ylabel("petal width")
    fig.tight_layout()
    fig.savefig("iris_boundaries.png", dpi=120)
    print("wrote iris_boundaries.png")

"""How the class ratio of the training set moves as easy rows are peeled off.

A 100:1 two-blob problem is trained with default settings; each level's
input ratio is printed along with the share of rows found easy.
"""
# %%
from dbrf.cascade import TrainConfig, class_balance_trace, train_cascade
from dbrf.data import make_blobs

for separation in (1.0, 2.0, 3.0):
    data = make_blobs(20000, 2, class_weights=(100, 1), separation=separation, seed=0)
    _, report = train_cascade(data, TrainConfig(master_seed=0))
    ratios = class_balance_trace(report)
    print(f"\nseparation {separation}: stop reason {report.stop_reason}")
    for rec, ratio in zip(report.levels, ratios):
        share = rec.n_easy / rec.n_rows_in
        print(f"  level {rec.level_index:2d}: {rec.n_rows_in:6d} rows  neg:pos {ratio:7.2f}  "
              f"easy {share:6.1%}  rule {rec.rule_triggered}")

# %%
# Overlapping blobs keep many majority rows near the boundary, so they stay
# hard and the ratio falls more slowly than for well separated ones.

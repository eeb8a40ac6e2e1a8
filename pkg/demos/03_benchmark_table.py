# Full benchmark: the table of classifiers, direction ablation and timing, averaged over seeds.
import time
import numpy as np
from tailcomp.experiment import ExperimentConfig, run_experiment
from tailcomp.cli import format_table

rows, ablation = {}, {}
t0 = time.perf_counter()
for seed in range(5):
    r = run_experiment(ExperimentConfig(seed=seed))
    for row in r["table"]:
        rows.setdefault(row["classifier"], []).append([row[g] for g in ("many", "medium", "few", "total")])
    for d, v in r["ablation"].items():
        ablation.setdefault(d, []).append(v["total"])
print(f"5 seeds in {time.perf_counter() - t0:.1f}s\n")

mean = [dict(classifier=k, **dict(zip(("many", "medium", "few", "total"), np.mean(v, axis=0))))
        for k, v in rows.items()]
print(format_table(mean))
print("\nensemble total by attention direction:")
for d, v in ablation.items():
    print(f"  {d}: {np.mean(v):.4f}  per seed {np.round(v, 3)}")

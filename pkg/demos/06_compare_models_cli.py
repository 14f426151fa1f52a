"""The full comparison through the command-line surface, at desk scale.

Drives simulate -> prepare -> train -> evaluate -> baselines -> compare via
the same entry points as the `ltvkit` executable, then prints the ranking
table. Runs in a couple of minutes; enlarge n_users for tighter numbers.
"""

import json
import tempfile
from pathlib import Path

from ltvkit.cli import main
from ltvkit.metrics import MetricsReport

SIM = {
    "n_users": 2000,
    "start_cohort": "2021-01-04",
    "end_cohort": "2021-03-28",
    "horizon_days": 364,
    "base_rate": 0.1,
    "quality_sigma": 0.8,
    "cohort_drift": 0.002,
    "age_decay_tau": 60.0,
    "age_floor": 0.35,
    "weekly_multipliers": [0.85, 0.9, 0.95, 1.0, 1.05, 1.3, 1.25],
    "event_days": {"2021-05-21": 1.8},
    "outage_days": {"2021-03-06": 0.0},
    "amount_shape": 2.0,
    "amount_scale": 6.0,
    "n_regions": 4,
    "region_multipliers": [0.7, 1.0, 1.2, 1.5],
    "seed": 42,
}

base = Path(tempfile.mkdtemp(prefix="ltvkit_demo_"))
print(f"working under {base}")
(base / "sim.json").write_text(json.dumps(SIM, indent=2))

steps = [
    ["simulate", "--config", str(base / "sim.json"), "--out", str(base / "panel.csv")],
    ["prepare", "--in", str(base / "panel.csv"), "--mode", "rolling",
     "--out", str(base / "prep"), "--horizons", "1,4,13,26",
     "--eval-date", "2021-06-28", "--val-cohort", "2021-03-08",
     "--test-cohort", "2021-03-22", "--seed", "5"],
    ["train", "--data", str(base / "prep"), "--out", str(base / "model.txt"),
     "--epochs", "20", "--batch-size", "128", "--lr", "0.002",
     "--width", "12", "--seed", "11"],
    ["evaluate", "--model", str(base / "model.txt"), "--data", str(base / "prep"),
     "--floor", "1.0", "--report", str(base / "rep_drnn.json")],
    ["baseline", "--kind", "ridge", "--data", str(base / "prep"),
     "--panel", str(base / "panel.csv"), "--report", str(base / "rep_ridge.json")],
    ["baseline", "--kind", "btyd", "--data", str(base / "prep"),
     "--panel", str(base / "panel.csv"), "--report", str(base / "rep_btyd.json")],
    ["compare", "--reports", str(base / "rep_drnn.json"),
     str(base / "rep_ridge.json"), str(base / "rep_btyd.json"),
     "--out", str(base / "combined.json")],
]
for argv in steps:
    print(f"\n$ ltvkit {' '.join(argv[:1] + [a for a in argv[1:] if not a.startswith(str(base))])}")
    assert main(argv) == 0

report = MetricsReport.load(base / "combined.json")
print("\nfloored-SMAPE (floor $1), lower is better; * marks the winner")
header = "model      " + "".join(f"{h:>10s}" for h in report.horizon_labels)
print(header)
for model in sorted(report.models):
    cells = ""
    for h in report.horizon_labels:
        star = "*" if report.best[h] == model else " "
        cells += f"  {report.models[model][h]['asmape']:7.4f}{star} "
    print(f"{model:10s}{cells}")

# %% [markdown]
# A resumable experiment run through the harness, then the report files.

# %%
import csv
from pathlib import Path

from gfmsim.harness import ExperimentConfig, run_experiment

out = Path("runs/demo-ar3-ss")
cfg = ExperimentConfig.from_dict(
    {
        "preset": "ar3-ss",
        "scenario": {"series_length": [18, 90, 450]},
        "models": ["AR-2", "AR-3", "AR-10", "PR-3", "GBT-3"],
        "replicates": 50,
        "gbt": "desk",
        "out": str(out),
    }
)
manifest = run_experiment(cfg)
print(len(manifest.cells), "cells,", len(manifest.failed), "failed")

# %%
with open(out / "reports" / "summary.csv", newline="") as fh:
    for row in csv.reader(fh):
        print(row)

# %%
with open(out / "reports" / "availability.csv", newline="") as fh:
    for row in csv.reader(fh):
        print(row)

# %% [markdown]
# Running the cell again only recomputes what is missing from the manifest.

# %%
run_experiment(cfg)

"""Provenance run behind ACCEPTANCE_BANDS["regions_128x128"].

Runs 2000 trials of the regions experiment on topology (1, [128, 128], 1)
with sigma_b = 1 and prints the pooled ratio mean/256, its standard error,
and the spread of 200-trial batch ratios (the size the acceptance test
uses).  Output is written to scripts/provenance_regions.json.
"""

import json
import sys
from pathlib import Path

import numpy as np

from relu1d.montecarlo import ExperimentConfig, run_regions
from relu1d.network import Topology


def main(trials: int = 2000, batch: int = 200) -> dict:
    cfg = ExperimentConfig(Topology.of(128, 128), 1.0, trials, 0, "regions")
    res = run_regions(cfg)
    vals = res.per_trial_values / 256.0
    batches = vals.reshape(-1, batch).mean(axis=1)
    out = {
        "trials": trials,
        "ratio_mean": float(vals.mean()),
        "ratio_stderr": float(vals.std(ddof=1) / np.sqrt(trials)),
        "per_trial_ratio_std": float(vals.std(ddof=1)),
        "batch_size": batch,
        "batch_ratio_min": float(batches.min()),
        "batch_ratio_max": float(batches.max()),
    }
    Path(__file__).with_suffix(".json").write_text(json.dumps(out, indent=2) + "\n")
    return out


if __name__ == "__main__":
    print(json.dumps(main(*map(int, sys.argv[1:])), indent=2))

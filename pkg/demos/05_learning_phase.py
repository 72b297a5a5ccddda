# %% [markdown]
# The learning phase
#
# The Bayesian bidder starts with flat counts, so early decisions rest on
# smoothing alone. Running the same network for a short and a long session
# shows how calibration and delivery change as evidence accumulates.

# %%
from pathlib import Path

import numpy as np

from bmaniac import load_scenario, run

cfg = load_scenario(Path(__file__).with_name("scenario.json")).replace(strategy="bmaniac", agents={})

for ticks in (100, 400, 1600):
    gaps, ratios, fallbacks = [], [], []
    for seed in range(1, 6):
        report, _ = run(cfg.replace(ticks=ticks, seed=seed))
        agg = report.by_strategy()["bmaniac"]
        if agg["calibration_gap"] is not None:
            gaps.append(agg["calibration_gap"])
        if agg["delivery_ratio"] is not None:
            ratios.append(agg["delivery_ratio"])
        if agg["fallback_rate"] is not None:
            fallbacks.append(agg["fallback_rate"])
    print(f"{ticks:>5} ticks: calibration gap {np.mean(gaps):.3f}  "
          f"delivery {np.mean(ratios):.3f}  fallback rate {np.mean(fallbacks):.3f}")

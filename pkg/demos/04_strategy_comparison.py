# %% [markdown]
# Comparing strategies in a simulated network
#
# Twelve nodes, one of them the backbone gateway. Agents are split between the
# learning bidder and three baselines. A 10-seed sweep writes per-seed traces,
# metrics and a summary table.

# %%
import csv
import tempfile
from pathlib import Path

from bmaniac import load_scenario
from bmaniac.cli import run_sweep

cfg = load_scenario(Path(__file__).with_name("scenario.json"))
print("config hash:", cfg.config_hash())

out = Path(tempfile.mkdtemp(prefix="bmaniac-sweep-"))
reports = run_sweep(cfg.replace(ticks=800), out, n_seeds=10)

# %%
for row in csv.DictReader((out / "summary.csv").open()):
    if row["strategy"] == "*":
        continue  # network-wide delivery ratio only
    print(f"{row['strategy']:<16} profit {float(row['mean_profit_mean']):>8.1f}  "
          f"delivery {float(row['delivery_ratio_mean']):.3f}")
print("outputs in", out)

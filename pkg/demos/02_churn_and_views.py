# %% [markdown]
# Link churn and per-node routing views
#
# Each potential link flips between up and down as a two-state Markov chain.
# A routing view is what one node knows at one tick: hop counts and the
# shortest-path next hop to every other node.

# %%
import numpy as np

from bmaniac import ChurnParams, NetQualityModel, PathEvidence, Scenario, derive_view, step_churn

scenario = Scenario(
    nodes=tuple(range(6)),
    potential_edges=((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4), (0, 3)),
    backbone=0,
)
params = ChurnParams(p_down=0.1, p_up=0.3)
print("stationary up fraction:", params.stationary_up_fraction())

# %%
rng = np.random.default_rng(5)
snap = scenario.initial_snapshot()
up = []
for _ in range(5000):
    snap, rng = step_churn(snap, scenario.potential_edges, params, rng)
    up.append(len(snap.edges) / len(scenario.potential_edges))
print("empirical up fraction:", np.mean(up))
print("last snapshot:", snap.trace_line())

# %%
view = derive_view(snap, observer=1)
for n in scenario.nodes:
    print(n, "reachable" if view.reachable(n) else "unreachable",
          view.hops.get(n), view.next_hop(n) if n != 1 else "-")

# %% [markdown]
# Feeding every view into a NetQualityModel learns how often each destination
# is reachable, and through which neighbor.

# %%
model = NetQualityModel(1, scenario.nodes, alpha=1)
snap = scenario.initial_snapshot()
hits = np.zeros(len(scenario.nodes))
for _ in range(5000):
    snap, rng = step_churn(snap, scenario.potential_edges, params, rng)
    v = derive_view(snap, 1)
    model.ingest_view(v)
    hits += [v.reachable(n) for n in scenario.nodes]
for d in model.destinations:
    print(f"dest {d}: prior {model.reachability_prior(d):.3f}  empirical {hits[d] / 5000:.3f}")
print("P(reach 5 | via 4, 2 hops) =", model.path_success_probability(5, PathEvidence(4, 2)))

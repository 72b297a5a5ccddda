# %% [markdown]
# One bidding decision
#
# An agent asked to forward a packet picks a relay and two fractions: how much
# to undercut the announced budget and how much of it to keep as margin. The
# choice maximizes path confidence plus (margin - undercut) subject to two
# probability thresholds; if nothing qualifies it bids to use the backbone.

# %%
from bmaniac import (
    AuctionOutcomeRecord,
    AuctionRequest,
    AuctionSuccessModel,
    NetQualityModel,
    StrategyParams,
    TopologySnapshot,
    decide_bid,
    derive_view,
)

nodes = (0, 1, 2, 3, 4)
edges = frozenset({(0, 1), (1, 2), (1, 3), (2, 4), (3, 4)})
view = derive_view(TopologySnapshot(0, edges, nodes), observer=1)

params = StrategyParams(theta1=0.4, theta2=0.3)
netq = NetQualityModel(1, nodes)
aucm = AuctionSuccessModel(nodes, t_max=40, grid=params.grid)
for _ in range(30):
    netq.ingest_view(view)

# %% [markdown]
# Teach the auction model that cheap bids tend to win and greedy ones lose.

# %%
for u in params.grid:
    for m in params.grid:
        if u + m <= 1:
            aucm.record_outcome(AuctionOutcomeRecord(10, u, m, 4, u >= m))

req = AuctionRequest(destination=4, budget=80, timeout=10)
print(decide_bid(netq, aucm, req, view, params, backbone=0))

# %% [markdown]
# Success probability over the whole (undercut, margin) grid.

# %%
grid = aucm.success_grid(10, 4)
print(grid[::4, ::4].round(2))

# %% [markdown]
# Demanding certainty from the auction model pushes the agent to the backbone.

# %%
strict = StrategyParams(theta1=1.0, theta2=0.3)
print(decide_bid(netq, aucm, req, view, strict, backbone=0))

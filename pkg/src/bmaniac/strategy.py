"""Bid decisions: the Bayesian bidder and the baseline strategies.

A bid is described by two grid fractions of the announced budget ``b``:

* ``undercut`` -- the share given up to win, so the price is
  ``floor(b * (1 - undercut))``;
* ``margin`` -- the share the bidder plans to keep, ``floor(b * margin)``.
  When the winner re-auctions the packet it announces ``price - margin``.

The Bayesian bidder maximizes ``pcd + (margin - undercut)`` over (relay,
undercut, margin) where ``pcd`` is the path-stability posterior of the relay
toward the destination, subject to

* auction-success posterior >= ``theta1``,
* ``pcd`` >= ``theta2``,
* ``undercut + margin <= 1`` and price >= 1.

With no feasible point it falls back to the wired backbone at price ``b``,
or abstains when the backbone is unreachable.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .auction_model import AuctionSuccessModel, make_grid
from .core_bayes import IndeterminatePosteriorError
from .net_quality import NetQualityModel, PathEvidence
from .topology import RoutingView

STRATEGY_KINDS = ("bmaniac", "random", "fixed_margin", "always_backbone")
BASELINE_KINDS = ("random", "fixed_margin", "always_backbone")
SEARCH_MODES = ("exhaustive", "hill-climb")

FIXED_UNDERCUT = 0.1
FIXED_MARGIN = 0.2

# objective ties are decided on this many decimals, then by the tie-break keys
_SCORE_DECIMALS = 12


@dataclass(frozen=True)
class AuctionRequest:
    destination: int
    budget: int
    timeout: int
    auction_id: int = 0
    announcer: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.timeout < 1:
            raise ValueError("timeout must be >= 1")


@dataclass(frozen=True)
class StrategyParams:
    theta1: float = 0.4
    theta2: float = 0.3
    grid: tuple[float, ...] = make_grid(0.05)
    search: str = "exhaustive"

    def __post_init__(self):
        for name in ("theta1", "theta2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        grid = tuple(float(g) for g in self.grid)
        if not grid or list(grid) != sorted(set(grid)) or not 0 <= grid[0] <= grid[-1] <= 1:
            raise ValueError("grid must be non-empty, strictly increasing and within [0, 1]")
        if 0.0 not in grid:
            raise ValueError("grid must contain 0")
        object.__setattr__(self, "grid", grid)
        if self.search not in SEARCH_MODES:
            raise ValueError(f"search must be one of {SEARCH_MODES}")


@dataclass(frozen=True)
class Bid:
    price: int
    next_hop: int
    undercut: float
    margin: float
    predicted_pcd: float | None = None
    predicted_ps: float | None = None

    def margin_units(self, budget: int) -> int:
        return kept_margin(budget, self.margin)


@dataclass(frozen=True)
class BackboneFallback:
    price: int


@dataclass(frozen=True)
class Abstain:
    pass


BidDecision = Union[Bid, BackboneFallback, Abstain]


@lru_cache(maxsize=4096)
def _exact(x: float) -> Fraction:
    # grid values are short decimals; go through repr to recover them exactly
    return Fraction(repr(float(x)))


def bid_price(budget: int, undercut: float) -> int:
    return math.floor(budget * (1 - _exact(undercut)))


def kept_margin(budget: int, margin: float) -> int:
    return math.floor(budget * _exact(margin))


def objective(pcd: float, undercut: float, margin: float) -> float:
    return pcd + (margin - undercut)


@lru_cache(maxsize=None)
def _budget_ok(undercut: float, margin: float) -> bool:
    return _exact(undercut) + _exact(margin) <= 1


def is_feasible(ps: float, pcd: float, undercut: float, margin: float, budget: int,
                params: StrategyParams) -> bool:
    return (
        ps >= params.theta1
        and pcd >= params.theta2
        and _budget_ok(undercut, margin)
        and undercut + margin >= 0
        and bid_price(budget, undercut) >= 1
    )


def fallback_or_abstain(req: AuctionRequest, view: RoutingView, backbone: int) -> BidDecision:
    if view.observer == backbone or view.reachable(backbone):
        return BackboneFallback(price=req.budget)
    return Abstain()


def candidate_scores(netq: NetQualityModel, req: AuctionRequest, view: RoutingView) -> list[tuple[int, float]]:
    """(relay, path posterior) for every current neighbor, in id order.

    Relays whose posterior is undefined (unsmoothed tables, unseen evidence)
    are left out.
    """
    d = req.destination
    out = []
    for f in sorted(view.neighbors):
        try:
            p = netq.path_success_probability(d, PathEvidence(f, view.relay_hops(f, d)))
        except IndeterminatePosteriorError:
            continue
        out.append((f, p))
    return out


@lru_cache(maxsize=1024)
def _static_mask_cached(grid, budget):
    n = len(grid)
    mask = np.zeros((n, n), dtype=bool)
    for i, u in enumerate(grid):
        if bid_price(budget, u) < 1:
            continue
        for j, m in enumerate(grid):
            mask[i, j] = _budget_ok(u, m)
    mask.flags.writeable = False
    return mask


def _static_mask(grid, budget):
    """Grid cells meeting the budget constraints (independent of the models)."""
    return _static_mask_cached(tuple(grid), int(budget))


@lru_cache(maxsize=1024)
def _affordable_pairs(grid, budget):
    return [
        (u, m) for u in grid for m in grid
        if _budget_ok(u, m) and bid_price(budget, u) >= 1
    ]


def decide_bid(
    netq: NetQualityModel,
    aucm: AuctionSuccessModel,
    req: AuctionRequest,
    view: RoutingView,
    params: StrategyParams,
    backbone: int,
) -> BidDecision:
    """Bayesian bid for ``req`` as seen from ``view.observer``."""
    if req.destination == view.observer:
        raise ValueError("the deciding node is the destination")
    grid = params.grid
    if tuple(aucm.grid) != grid:
        raise ValueError("auction model grid differs from strategy grid")
    ps = aucm.success_grid(req.timeout, req.destination)
    base_ok = _static_mask(grid, req.budget) & (ps >= params.theta1)
    relays = [(f, p) for f, p in candidate_scores(netq, req, view) if p >= params.theta2]
    if not relays or not base_ok.any():
        return fallback_or_abstain(req, view, backbone)

    g = np.asarray(grid)
    if params.search == "exhaustive":
        best = _exhaustive(relays, g, base_ok)
    else:
        best = _hill_climb(relays, g, base_ok)
    f, pcd, i, j = best
    u, m = grid[i], grid[j]
    return Bid(
        price=bid_price(req.budget, u),
        next_hop=f,
        undercut=u,
        margin=m,
        predicted_pcd=pcd,
        predicted_ps=float(ps[i, j]),
    )


def _key(score: float, margin: float, undercut: float, f: int):
    return (round(score, _SCORE_DECIMALS), margin, -undercut, -f)


def _exhaustive(relays, g, ok):
    ii, jj = np.nonzero(ok)
    per_relay = [(f, pcd, pcd + (g[jj] - g[ii])) for f, pcd in relays]
    top = max(float(scores.max()) for _, _, scores in per_relay)
    best, best_key = None, None
    # only cells within rounding distance of the top score can win the tie-break
    for f, pcd, scores in per_relay:
        for k in np.nonzero(scores >= top - 1e-9)[0]:
            i, j = int(ii[k]), int(jj[k])
            key = _key(objective(pcd, g[i], g[j]), g[j], g[i], f)
            if best_key is None or key > best_key:
                best, best_key = (f, pcd, i, j), key
    return best


def _hill_climb(relays, g, ok):
    """Steepest-ascent over grid neighbors, started at the feasible cell
    closest to (0, 0) for every relay."""
    n = len(g)
    best, best_key = None, None
    cells = np.argwhere(ok)
    start = tuple(cells[np.lexsort((cells[:, 1], cells[:, 0], cells.sum(axis=1)))[0]])
    for f, pcd in relays:
        i, j = start
        cur = _key(objective(pcd, g[i], g[j]), g[j], g[i], f)
        while True:
            moves = []
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                a, b = i + di, j + dj
                if 0 <= a < n and 0 <= b < n and ok[a, b]:
                    moves.append((_key(objective(pcd, g[a], g[b]), g[b], g[a], f), a, b))
            if not moves:
                break
            k, a, b = max(moves)
            if k <= cur:
                break
            cur, i, j = k, a, b
        if best_key is None or cur > best_key:
            best, best_key = (f, pcd, int(i), int(j)), cur
    return best


def baseline_decide(
    kind: str,
    req: AuctionRequest,
    view: RoutingView,
    rng: np.random.Generator,
    backbone: int,
    grid=None,
) -> tuple[BidDecision, np.random.Generator]:
    """Decision of a non-learning comparison strategy."""
    if kind == "always_backbone":
        return fallback_or_abstain(req, view, backbone), rng

    if kind == "random":
        grid = make_grid(0.05) if grid is None else tuple(grid)
        neighbors = sorted(view.neighbors)
        if not neighbors:
            return Abstain(), rng
        pairs = _affordable_pairs(grid, req.budget)
        if not pairs:
            return fallback_or_abstain(req, view, backbone), rng
        u, m = pairs[int(rng.integers(len(pairs)))]
        f = neighbors[int(rng.integers(len(neighbors)))]
        return Bid(price=bid_price(req.budget, u), next_hop=f, undercut=u, margin=m), rng

    if kind == "fixed_margin":
        f = view.next_hop(req.destination)
        price = bid_price(req.budget, FIXED_UNDERCUT)
        if f is None or price < 1:
            return fallback_or_abstain(req, view, backbone), rng
        return Bid(price=price, next_hop=f, undercut=FIXED_UNDERCUT, margin=FIXED_MARGIN), rng

    raise ValueError(f"unknown baseline strategy {kind!r}")

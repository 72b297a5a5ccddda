"""Discrete-event simulation of auction-based packet offloading.

Each tick:

1. every potential link takes one churn step;
2. learning agents ingest their routing view of the new snapshot;
3. the backbone spawns packets (random workload plus scheduled ones);
4. every active packet acts once: the holder delivers if the destination is
   adjacent (or via the backbone after a fallback win), otherwise it
   re-auctions the packet among its neighbors;
5. packets at their deadline expire and the holder is fined;
6. auction outcomes that became known this tick are fed to the learners.

Auctions are reverse auctions: lowest price wins, ties to the lowest node id,
pay-your-bid on delivery.  Money is integer and conserved: the sum of node
balances always equals what the backbone injected minus fines collected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .auction_model import AuctionOutcomeRecord, AuctionSuccessModel
from .config import ScenarioConfig
from .net_quality import NetQualityModel
from .strategy import (
    Abstain,
    AuctionRequest,
    BackboneFallback,
    Bid,
    BidDecision,
    baseline_decide,
    decide_bid,
    kept_margin,
)
from .topology import TopologySnapshot, derive_view, step_churn

EVENT_KINDS = (
    "snapshot",
    "auction_opened",
    "bid_submitted",
    "auction_won",
    "packet_forwarded",
    "delivered",
    "expired",
    "settled",
)


class StateError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class SimEvent:
    tick: int
    seq: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"tick": self.tick, "seq": self.seq, "kind": self.kind, "payload": self.payload},
            separators=(",", ":"),
        )


def trace_to_jsonl(events: Iterable[SimEvent]) -> str:
    return "".join(e.to_json() + "\n" for e in events)


def read_trace(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


# --------------------------------------------------------------------------
# auctions and money


def run_auction(req: AuctionRequest, decisions: Mapping[int, BidDecision]):
    """Winner ``(node, price)`` of a reverse auction, or ``None``.

    Abstentions and prices outside ``[1, req.budget]`` are ignored.
    """
    best = None
    for node in sorted(decisions):
        dec = decisions[node]
        if isinstance(dec, Abstain) or dec is None:
            continue
        if not 1 <= dec.price <= req.budget:
            continue
        if best is None or dec.price < best[1]:
            best = (node, dec.price)
    return best


@dataclass
class Hop:
    node: int
    price: int
    budget: int
    margin: int
    fallback: bool = False
    undercut_frac: float = 0.0
    margin_frac: float = 0.0
    predicted_ps: float | None = None
    timeout: int = 1


@dataclass
class PacketJob:
    packet_id: int
    source: int
    destination: int
    budget: int
    created: int
    deadline: int
    holder: int
    chain: list[Hop] = field(default_factory=list)
    state: str = "active"
    via_backbone: bool = False

    @property
    def terminal(self) -> bool:
        return self.state != "active"

    @property
    def pending_price(self) -> int:
        return self.chain[-1].price if self.chain else 0


@dataclass
class Ledger:
    """Integer balances of agent nodes.  The backbone is the outside world:
    money it pays in counts as ``injected`` (net of fees it takes back)."""

    balances: dict[int, int]
    injected: int = 0
    fines: int = 0
    fine_factor: float = 1.0
    backbone_fee_factor: float = 1.0
    _settled: set = field(default_factory=set, repr=False)

    @classmethod
    def for_nodes(cls, nodes, **kw) -> "Ledger":
        return cls({n: 0 for n in nodes}, **kw)

    def identity_gap(self) -> int:
        """``sum(balances) - injected + fines``; zero when money is conserved."""
        return sum(self.balances.values()) - self.injected + self.fines

    def settle(self, job: PacketJob, outcome: str) -> list[tuple[Any, Any, int]]:
        """Apply the payments of a terminal job; returns ``(payer, payee, amount)``.

        ``"backbone"`` and ``"fines"`` name the outside parties.
        """
        if job.packet_id in self._settled:
            raise StateError(f"packet {job.packet_id} already settled")
        if outcome not in ("delivered", "expired"):
            raise ValueError(f"unknown outcome {outcome!r}")
        transfers = []
        if outcome == "delivered":
            upstream = "backbone"
            for k, hop in enumerate(job.chain):
                if k > 0:
                    prev = job.chain[k - 1]
                    if hop.price > prev.price - prev.margin:
                        raise StateError(
                            f"packet {job.packet_id}: hop price {hop.price} exceeds "
                            f"upstream price {prev.price} minus margin {prev.margin}"
                        )
                transfers.append((upstream, hop.node, hop.price))
                upstream = hop.node
            if job.via_backbone and job.chain:
                fee = math.floor(self.backbone_fee_factor * job.chain[-1].price)
                if fee:
                    transfers.append((job.chain[-1].node, "backbone", fee))
        elif job.chain:
            fine = math.floor(self.fine_factor * job.chain[-1].price)
            if fine:
                transfers.append((job.chain[-1].node, "fines", fine))
        for payer, payee, amount in transfers:
            if payer == "backbone":
                self.injected += amount
            else:
                self.balances[payer] -= amount
            if payee == "backbone":
                self.injected -= amount
            elif payee == "fines":
                self.fines += amount
            else:
                self.balances[payee] += amount
        self._settled.add(job.packet_id)
        return transfers


def hop_profits(job: PacketJob, transfers) -> dict[int, int]:
    profit = {h.node: 0 for h in job.chain}
    for payer, payee, amount in transfers:
        if payer in profit:
            profit[payer] -= amount
        if payee in profit:
            profit[payee] += amount
    return profit


# --------------------------------------------------------------------------
# agents


@dataclass
class AgentStats:
    bids: int = 0
    wins: int = 0
    fallbacks: int = 0
    deliveries: int = 0
    won_delivered: int = 0
    won_resolved: int = 0
    predictions: list = field(default_factory=list)  # (predicted_ps, success)


class Agent:
    def __init__(self, node: int, kind: str, config: ScenarioConfig):
        self.node = node
        self.kind = kind
        self.params = config.agent_params(node)
        self.backbone = config.backbone
        self.stats = AgentStats()
        self.netq = None
        self.aucm = None
        if kind == "bmaniac":
            self.netq = NetQualityModel(node, config.nodes, alpha=config.alpha, window=config.window)
            self.aucm = AuctionSuccessModel(
                config.nodes,
                t_max=config.t_max,
                time_bins=config.time_bins,
                grid=config.grid,
                alpha=config.alpha,
                window=config.window,
            )

    @property
    def learns(self) -> bool:
        return self.netq is not None

    def decide(self, req: AuctionRequest, view, rng) -> BidDecision:
        if self.kind == "bmaniac":
            return decide_bid(self.netq, self.aucm, req, view, self.params, self.backbone)
        dec, _ = baseline_decide(self.kind, req, view, rng, self.backbone, self.params.grid)
        return dec


# --------------------------------------------------------------------------
# simulation


def _dec_payload(dec: BidDecision) -> dict:
    if isinstance(dec, Bid):
        out = {
            "type": "bid",
            "price": dec.price,
            "next_hop": dec.next_hop,
            "undercut": dec.undercut,
            "margin": dec.margin,
        }
        if dec.predicted_ps is not None:
            out["predicted_pcd"] = dec.predicted_pcd
            out["predicted_ps"] = dec.predicted_ps
        return out
    if isinstance(dec, BackboneFallback):
        return {"type": "fallback", "price": dec.price}
    return {"type": "abstain"}


class Simulation:
    """Mutable state of one run; call :meth:`advance` once per tick."""

    def __init__(self, config: ScenarioConfig, strategy_override: str | None = None):
        self.config = config
        self.scenario = config.scenario
        self.churn = config.churn
        churn_ss, work_ss, strat_ss = np.random.SeedSequence(config.seed).spawn(3)
        self.churn_rng = np.random.default_rng(churn_ss)
        self.work_rng = np.random.default_rng(work_ss)
        self.strat_rng = np.random.default_rng(strat_ss)
        self.snapshot: TopologySnapshot = self.scenario.initial_snapshot()
        self.agents = {
            n: Agent(n, strategy_override or config.agent_strategy(n), config)
            for n in self.scenario.agents
        }
        self.ledger = Ledger.for_nodes(
            self.scenario.agents,
            fine_factor=config.fine_factor,
            backbone_fee_factor=config.backbone_fee_factor,
        )
        self.jobs: dict[int, PacketJob] = {}
        self.active: list[int] = []
        self.tick = 0
        self._seq = 0
        self._next_packet = 0
        self._next_auction = 0
        self._views: dict = {}
        self._adj: dict = {}
        self._pending_records: list = []
        self._scheduled: dict[int, list] = {}
        for p in config.packets:
            self._scheduled.setdefault(p.tick, []).append(p)
        self.spawned = 0
        self.delivered = 0
        self.expired = 0

    # -- helpers ------------------------------------------------------------

    def _emit(self, events, kind, payload):
        events.append(SimEvent(self.tick, self._seq, kind, payload))
        self._seq += 1

    def view(self, node):
        v = self._views.get(node)
        if v is None:
            v = self._views[node] = derive_view(self.snapshot, node)
        return v

    # -- tick ---------------------------------------------------------------

    def advance(self) -> list[SimEvent]:
        events: list[SimEvent] = []
        self.snapshot, self.churn_rng = step_churn(
            self.snapshot, self.scenario.potential_edges, self.churn, self.churn_rng
        )
        self.tick = self.snapshot.tick
        self._seq = 0
        self._views = {}
        self._adj = self.snapshot.adjacency()
        self._emit(events, "snapshot", {"edges": [list(e) for e in self.snapshot.sorted_edges()]})

        for agent in self.agents.values():
            if agent.learns:
                agent.netq.ingest_view(self.view(agent.node))

        self._spawn()

        for pid in list(self.active):
            self._act(self.jobs[pid], events)

        for pid in list(self.active):
            job = self.jobs[pid]
            if self.tick >= job.deadline:
                job.state = "expired"
                self.expired += 1
                self._emit(events, "expired", {"packet": pid, "holder": job.holder})
                self._finish(job, "expired", events)

        self._dispatch_records()
        return events

    def _spawn(self):
        cfg = self.config
        specs = []
        n = int(self.work_rng.poisson(cfg.packet_rate)) if cfg.packet_rate > 0 else 0
        agents = self.scenario.agents
        for _ in range(n):
            d = agents[int(self.work_rng.integers(len(agents)))]
            b = int(self.work_rng.integers(cfg.budget_range[0], cfg.budget_range[1] + 1))
            t = int(self.work_rng.integers(cfg.timeout_range[0], cfg.timeout_range[1] + 1))
            specs.append((d, b, t))
        for p in self._scheduled.get(self.tick, ()):
            specs.append((p.destination, p.budget, p.timeout))
        for d, b, t in specs:
            pid = self._next_packet
            self._next_packet += 1
            self.jobs[pid] = PacketJob(
                packet_id=pid,
                source=self.scenario.backbone,
                destination=d,
                budget=b,
                created=self.tick,
                deadline=self.tick + t,
                holder=self.scenario.backbone,
            )
            self.active.append(pid)
            self.spawned += 1

    def _act(self, job: PacketJob, events):
        backbone = self.scenario.backbone
        remaining = job.deadline - self.tick
        if job.holder == backbone:
            if remaining >= 1:
                self._auction(job, backbone, job.budget, remaining, events)
            return
        hop = job.chain[-1]
        if job.destination in self._adj[job.holder]:
            self._deliver(job, "direct", events)
        elif hop.fallback:
            if self.view(job.holder).reachable(backbone):
                job.via_backbone = True
                self._deliver(job, "backbone", events)
        else:
            budget = hop.price - hop.margin
            if budget >= 1 and remaining >= 1:
                self._auction(job, job.holder, budget, remaining, events)

    def _auction(self, job: PacketJob, announcer: int, budget: int, timeout: int, events):
        backbone = self.scenario.backbone
        excluded = {backbone, job.destination} | {h.node for h in job.chain}
        bidders = [n for n in self._adj[announcer] if n not in excluded]
        aid = self._next_auction
        self._next_auction += 1
        req = AuctionRequest(job.destination, budget, timeout, aid, announcer)
        self._emit(events, "auction_opened", {
            "auction": aid, "packet": job.packet_id, "announcer": announcer,
            "destination": job.destination, "budget": budget, "timeout": timeout,
            "bidders": bidders,
        })
        decisions = {}
        for n in bidders:
            agent = self.agents[n]
            dec = agent.decide(req, self.view(n), self.strat_rng)
            if isinstance(dec, Abstain):
                continue
            decisions[n] = dec
            agent.stats.bids += 1
            if isinstance(dec, BackboneFallback):
                agent.stats.fallbacks += 1
            self._emit(events, "bid_submitted", {"auction": aid, "bidder": n, **_dec_payload(dec)})

        winner = run_auction(req, decisions)
        for n, dec in decisions.items():
            if winner is not None and n == winner[0]:
                continue
            self._queue_record(n, dec, timeout, job.destination, False)
        if winner is None:
            return
        node, price = winner
        dec = decisions[node]
        self.agents[node].stats.wins += 1
        self._emit(events, "auction_won", {"auction": aid, "winner": node, "price": price})
        fallback = isinstance(dec, BackboneFallback)
        job.chain.append(Hop(
            node=node,
            price=price,
            budget=budget,
            margin=0 if fallback else kept_margin(budget, dec.margin),
            fallback=fallback,
            undercut_frac=0.0 if fallback else dec.undercut,
            margin_frac=0.0 if fallback else dec.margin,
            predicted_ps=None if fallback else dec.predicted_ps,
            timeout=timeout,
        ))
        self._emit(events, "packet_forwarded", {
            "packet": job.packet_id, "from": announcer, "to": node, "price": price,
        })
        job.holder = node

    def _deliver(self, job: PacketJob, via: str, events):
        job.state = "delivered"
        self.delivered += 1
        self.agents[job.holder].stats.deliveries += 1
        self._emit(events, "delivered", {"packet": job.packet_id, "holder": job.holder, "via": via})
        self._finish(job, "delivered", events)

    def _finish(self, job: PacketJob, outcome: str, events):
        transfers = self.ledger.settle(job, outcome)
        self.active.remove(job.packet_id)
        self._emit(events, "settled", {
            "packet": job.packet_id,
            "outcome": outcome,
            "transfers": [list(t) for t in transfers],
            "balance_sum": sum(self.ledger.balances.values()),
            "injected": self.ledger.injected,
            "fines": self.ledger.fines,
        })
        profits = hop_profits(job, transfers)
        for hop in job.chain:
            success = outcome == "delivered" and profits[hop.node] > 0
            stats = self.agents[hop.node].stats
            stats.won_resolved += 1
            if outcome == "delivered":
                stats.won_delivered += 1
            self._pending_records.append((hop.node, hop.undercut_frac, hop.margin_frac,
                                          hop.timeout, job.destination, success,
                                          hop.predicted_ps, hop.fallback))

    def _queue_record(self, node, dec, timeout, destination, success):
        if isinstance(dec, BackboneFallback):
            self._pending_records.append((node, 0.0, 0.0, timeout, destination, success, None, True))
        else:
            self._pending_records.append((node, dec.undercut, dec.margin, timeout, destination,
                                          success, dec.predicted_ps, False))

    def _dispatch_records(self):
        for node, u, m, t, d, success, predicted, _fallback in self._pending_records:
            agent = self.agents[node]
            if predicted is not None:
                agent.stats.predictions.append((predicted, success))
            if agent.learns:
                agent.aucm.record_outcome(AuctionOutcomeRecord(t, u, m, d, success))
        self._pending_records = []

    # -- reporting ----------------------------------------------------------

    def report(self) -> "MetricsReport":
        rows = []
        for n, agent in self.agents.items():
            s = agent.stats
            gap = None
            if s.predictions:
                pred = np.mean([p for p, _ in s.predictions])
                real = np.mean([1.0 if ok else 0.0 for _, ok in s.predictions])
                gap = float(abs(pred - real))
            rows.append(AgentMetrics(
                agent=n,
                strategy=agent.kind,
                profit=self.ledger.balances[n],
                deliveries=s.deliveries,
                wins=s.wins,
                bids=s.bids,
                fallbacks=s.fallbacks,
                won_delivered=s.won_delivered,
                won_resolved=s.won_resolved,
                calibration_gap=gap,
            ))
        return MetricsReport(
            agents=rows,
            spawned=self.spawned,
            delivered=self.delivered,
            expired=self.expired,
            ticks=self.tick,
            seed=self.config.seed,
            config_hash=self.config.config_hash(),
        )


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class AgentMetrics:
    agent: int
    strategy: str
    profit: int
    deliveries: int
    wins: int
    bids: int
    fallbacks: int
    won_delivered: int
    won_resolved: int
    calibration_gap: float | None

    @property
    def delivery_ratio(self) -> float | None:
        """Share of won packets (already terminal) that were delivered."""
        return self.won_delivered / self.won_resolved if self.won_resolved else None

    @property
    def win_rate(self) -> float | None:
        return self.wins / self.bids if self.bids else None

    @property
    def fallback_rate(self) -> float | None:
        return self.fallbacks / self.bids if self.bids else None


CSV_HEADER = ("strategy", "agent", "profit", "deliveries", "wins", "bids", "fallbacks",
              "calibration_gap")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(round(x, 12))
    return str(x)


@dataclass
class MetricsReport:
    agents: list[AgentMetrics]
    spawned: int
    delivered: int
    expired: int
    ticks: int
    seed: int
    config_hash: str

    @property
    def delivery_ratio(self) -> float | None:
        done = self.delivered + self.expired
        return self.delivered / done if done else None

    def by_strategy(self) -> dict[str, dict[str, float | None]]:
        """Per-strategy means over agents; ratios pooled over the strategy's bids."""
        out = {}
        for kind in sorted({a.strategy for a in self.agents}):
            group = [a for a in self.agents if a.strategy == kind]
            wins = sum(a.wins for a in group)
            resolved = sum(a.won_resolved for a in group)
            bids = sum(a.bids for a in group)
            gaps = [a.calibration_gap for a in group if a.calibration_gap is not None]
            out[kind] = {
                "agents": len(group),
                "mean_profit": float(np.mean([a.profit for a in group])),
                "total_profit": sum(a.profit for a in group),
                "delivery_ratio": sum(a.won_delivered for a in group) / resolved if resolved else None,
                "win_rate": wins / bids if bids else None,
                "fallback_rate": sum(a.fallbacks for a in group) / bids if bids else None,
                "calibration_gap": float(np.mean(gaps)) if gaps else None,
            }
        return out

    def csv_rows(self) -> list[tuple]:
        return [
            (a.strategy, a.agent, a.profit, a.deliveries, a.wins, a.bids, a.fallbacks,
             a.calibration_gap)
            for a in self.agents
        ]

    def to_csv(self) -> str:
        lines = [",".join(CSV_HEADER)]
        lines += [",".join(_fmt(x) for x in row) for row in self.csv_rows()]
        return "\n".join(lines) + "\n"


def run(config: ScenarioConfig, strategy_override: str | None = None,
        ticks: int | None = None) -> tuple[MetricsReport, list[SimEvent]]:
    """Run ``config.ticks`` steps; returns the metrics and the full event trace."""
    sim = Simulation(config, strategy_override)
    events: list[SimEvent] = []
    for _ in range(config.ticks if ticks is None else ticks):
        events.extend(sim.advance())
    return sim.report(), events

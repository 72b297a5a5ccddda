"""Scenario configuration: JSON loading, validation, defaults and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .auction_model import make_grid
from .strategy import SEARCH_MODES, STRATEGY_KINDS, StrategyParams
from .topology import ChurnParams, Scenario

REQUIRED = ("nodes", "edges", "backbone", "ticks", "seed")
_FLOAT_FIELDS = (
    "p_up", "p_down", "packet_rate", "theta1", "theta2", "alpha",
    "lambda_step", "fine_factor", "backbone_fee_factor",
)


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class AgentConfig:
    strategy: str | None = None
    theta1: float | None = None
    theta2: float | None = None
    search: str | None = None


@dataclass(frozen=True)
class PacketSpec:
    """A packet injected at a fixed tick (in addition to the random workload)."""

    tick: int
    destination: int
    budget: int
    timeout: int


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    backbone: int
    ticks: int
    seed: int
    p_up: float = 0.3
    p_down: float = 0.1
    packet_rate: float = 0.2
    budget_range: tuple[int, int] = (10, 100)
    timeout_range: tuple[int, int] = (5, 40)
    strategy: str = "bmaniac"
    theta1: float = 0.4
    theta2: float = 0.3
    search: str = "exhaustive"
    agents: dict[int, AgentConfig] = field(default_factory=dict)
    alpha: float = 1.0
    window: int | None = None
    lambda_step: float = 0.05
    lambda_grid: tuple[float, ...] | None = None
    time_bins: int = 8
    fine_factor: float = 1.0
    backbone_fee_factor: float = 1.0
    packets: tuple[PacketSpec, ...] = ()

    def __post_init__(self):
        _validate(self)

    # -- derived objects ----------------------------------------------------

    @property
    def scenario(self) -> Scenario:
        return Scenario(self.nodes, self.edges, self.backbone)

    @property
    def churn(self) -> ChurnParams:
        return ChurnParams(p_down=self.p_down, p_up=self.p_up, seed=self.seed)

    @property
    def grid(self) -> tuple[float, ...]:
        if self.lambda_grid is not None:
            return tuple(self.lambda_grid)
        return make_grid(self.lambda_step)

    @property
    def b_max(self) -> int:
        return self.budget_range[1]

    @property
    def t_max(self) -> int:
        return self.timeout_range[1]

    def agent_strategy(self, node: int) -> str:
        override = self.agents.get(node)
        if override is not None and override.strategy is not None:
            return override.strategy
        return self.strategy

    def agent_params(self, node: int) -> StrategyParams:
        o = self.agents.get(node, AgentConfig())
        return StrategyParams(
            theta1=self.theta1 if o.theta1 is None else o.theta1,
            theta2=self.theta2 if o.theta2 is None else o.theta2,
            grid=self.grid,
            search=self.search if o.search is None else o.search,
        )

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": list(self.nodes),
            "edges": [list(e) for e in self.edges],
            "backbone": self.backbone,
            "ticks": self.ticks,
            "seed": self.seed,
            "p_up": self.p_up,
            "p_down": self.p_down,
            "packet_rate": self.packet_rate,
            "budget_range": list(self.budget_range),
            "timeout_range": list(self.timeout_range),
            "strategy": self.strategy,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "search": self.search,
            "agents": {
                str(n): {k: v for k, v in dataclasses.asdict(a).items() if v is not None}
                for n, a in sorted(self.agents.items())
            },
            "alpha": self.alpha,
            "window": self.window,
            "lambda_step": self.lambda_step,
            "lambda_grid": None if self.lambda_grid is None else list(self.lambda_grid),
            "time_bins": self.time_bins,
            "fine_factor": self.fine_factor,
            "backbone_fee_factor": self.backbone_fee_factor,
            "packets": [dataclasses.asdict(p) for p in self.packets],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _validate(c: ScenarioConfig) -> None:
    try:
        scenario = Scenario(c.nodes, c.edges, c.backbone)
    except ValueError as exc:
        raise ConfigError("edges" if "edge" in str(exc) else "nodes", str(exc)) from None
    if len(scenario.agents) < 1:
        raise ConfigError("nodes", "need at least one node besides the backbone")
    if c.ticks < 0:
        raise ConfigError("ticks", "must be >= 0")
    for name in ("p_up", "p_down"):
        v = getattr(c, name)
        if not 0.0 <= v <= 1.0:
            raise ConfigError(name, f"{v} outside [0, 1]")
    if c.packet_rate < 0:
        raise ConfigError("packet_rate", "must be >= 0")
    for name in ("budget_range", "timeout_range"):
        lo, hi = getattr(c, name)
        if not 1 <= lo <= hi:
            raise ConfigError(name, f"need 1 <= lo <= hi, got [{lo}, {hi}]")
    for name in ("theta1", "theta2"):
        v = getattr(c, name)
        if not 0.0 <= v <= 1.0:
            raise ConfigError(name, f"{v} outside [0, 1]")
    if c.strategy not in STRATEGY_KINDS:
        raise ConfigError("strategy", f"unknown strategy {c.strategy!r}")
    if c.search not in SEARCH_MODES:
        raise ConfigError("search", f"unknown search mode {c.search!r}")
    if c.alpha < 0:
        raise ConfigError("alpha", "must be >= 0")
    if c.window is not None and c.window < 1:
        raise ConfigError("window", "must be >= 1 or null")
    try:
        grid = c.grid
        StrategyParams(grid=grid)
    except ValueError as exc:
        raise ConfigError("lambda_grid" if c.lambda_grid is not None else "lambda_step", str(exc)) from None
    if c.time_bins < 1:
        raise ConfigError("time_bins", "must be >= 1")
    if c.fine_factor < 0:
        raise ConfigError("fine_factor", "must be >= 0")
    if c.backbone_fee_factor < 0:
        raise ConfigError("backbone_fee_factor", "must be >= 0")
    agents = set(scenario.agents)
    for n, a in c.agents.items():
        if n not in agents:
            raise ConfigError("agents", f"{n} is not an agent node")
        if a.strategy is not None and a.strategy not in STRATEGY_KINDS:
            raise ConfigError("agents", f"unknown strategy {a.strategy!r} for node {n}")
        for name in ("theta1", "theta2"):
            v = getattr(a, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ConfigError("agents", f"{name}={v} outside [0, 1] for node {n}")
        if a.search is not None and a.search not in SEARCH_MODES:
            raise ConfigError("agents", f"unknown search mode {a.search!r} for node {n}")
    for p in c.packets:
        if p.destination not in agents:
            raise ConfigError("packets", f"destination {p.destination} is not an agent node")
        if p.tick < 1 or p.budget < 1 or not 1 <= p.timeout <= c.t_max:
            raise ConfigError("packets", f"invalid packet {p}")


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    for key in REQUIRED:
        if key not in data:
            raise ConfigError(key, "missing required field")
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    kw = dict(data)
    try:
        kw["nodes"] = tuple(int(n) for n in data["nodes"])
        kw["edges"] = tuple(tuple(int(x) for x in e) for e in data["edges"])
        if any(len(e) != 2 for e in kw["edges"]):
            raise ConfigError("edges", "every edge needs two endpoints")
        for key in ("budget_range", "timeout_range"):
            if key in data:
                lo, hi = data[key]
                kw[key] = (int(lo), int(hi))
        if data.get("lambda_grid") is not None:
            kw["lambda_grid"] = tuple(float(g) for g in data["lambda_grid"])
        for key in _FLOAT_FIELDS:
            if key in data:
                kw[key] = float(data[key])
        for key in ("ticks", "seed", "backbone", "time_bins"):
            if isinstance(data[key] if key in data else 0, float):
                raise ConfigError(key, "must be a whole number")
        kw["agents"] = {
            int(n): AgentConfig(**a) for n, a in (data.get("agents") or {}).items()
        }
        kw["packets"] = tuple(PacketSpec(**p) for p in data.get("packets") or ())
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<root>", f"malformed value: {exc}") from None
    return ScenarioConfig(**kw)


def load_scenario(source: str | Path) -> ScenarioConfig:
    """Parse a scenario from a path or from JSON text."""
    if isinstance(source, Path) or not source.lstrip().startswith("{"):
        text = Path(source).read_text()
    else:
        text = source
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return config_from_dict(data)

"""Bayesian bidding agent for auction-based data offloading, with a
deterministic churn/auction simulator to evaluate it."""

from .auction_model import AuctionOutcomeRecord, AuctionSuccessModel, make_grid
from .config import ConfigError, ScenarioConfig, load_scenario
from .core_bayes import ABSENT, FrequencyTable
from .engine import Ledger, MetricsReport, Simulation, run, run_auction
from .net_quality import NetQualityModel, PathEvidence
from .strategy import (
    Abstain,
    AuctionRequest,
    BackboneFallback,
    Bid,
    StrategyParams,
    baseline_decide,
    decide_bid,
    objective,
)
from .topology import (
    UNREACHABLE,
    ChurnParams,
    RoutingView,
    Scenario,
    TopologySnapshot,
    derive_view,
    hop_count,
    step_churn,
)

__version__ = "0.1.0"

"""Order-book market simulator with herding cascades on a small-world network."""

from .agents import PriceHistory, Status, Trader, TraderKind
from .config import ConfigError, ModelConfig, default_config, load_config, save_config
from .engine import MarketRecord, SimulationState, initialize, run, run_transient, step
from .network import SmallWorldNet, build_lattice, rewire
from .orderbook import MatchOutcome, Order, OrderBook, Side, settle, update_price
from .soc import AvalancheReport, CascadeOverflowError, InfoField, drive, relax, topple
from .stats import (
    QGaussianFit,
    RegimeSplit,
    ReturnSeries,
    analyze_series,
    avalanche_tail_stats,
    detect_transition,
    excess_kurtosis,
    fit_q_gaussian,
    normalize_returns,
    q_gaussian,
)

__version__ = "0.1.0"

__all__ = [
    "AvalancheReport",
    "CascadeOverflowError",
    "ConfigError",
    "InfoField",
    "MarketRecord",
    "MatchOutcome",
    "ModelConfig",
    "Order",
    "OrderBook",
    "PriceHistory",
    "QGaussianFit",
    "RegimeSplit",
    "ReturnSeries",
    "Side",
    "SimulationState",
    "SmallWorldNet",
    "Status",
    "Trader",
    "TraderKind",
    "analyze_series",
    "avalanche_tail_stats",
    "build_lattice",
    "default_config",
    "detect_transition",
    "drive",
    "excess_kurtosis",
    "fit_q_gaussian",
    "initialize",
    "load_config",
    "normalize_returns",
    "q_gaussian",
    "relax",
    "rewire",
    "run",
    "run_transient",
    "save_config",
    "settle",
    "step",
    "topple",
    "update_price",
]

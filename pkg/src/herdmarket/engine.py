"""Simulation engine: initialization, SOC-only transient, trading loop.

Each trading step runs the same phase order: expectations, autonomous
status decisions, information drive/relaxation (which overwrites statuses
of cascade participants), order placement, matching and settlement, price
update, recording. The transient runs only the information phases with the
book suspended.

Agent state lives in parallel numpy arrays keyed by node id; the per-agent
rules in `agents` define the same semantics one trader at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .agents import PriceHistory, Status, Trader, TraderKind
from .config import ModelConfig
from .network import SmallWorldNet, build_network
from .orderbook import MatchOutcome, OrderBook, settle, update_price
from .soc import AvalancheReport, InfoField, drive, relax

DEFAULT_SNAPSHOT_TIMES = (0, 100, 360, 1000, 20000)

_HOLDER = int(Status.HOLDER)
_BIDDER = int(Status.BIDDER)
_ASKER = int(Status.ASKER)
_RANDOM = int(TraderKind.RANDOM)


@dataclass
class MarketRecord:
    """Per-step observables plus cascade log and agent snapshots."""

    t: list[int] = dc_field(default_factory=list)
    price: list[float] = dc_field(default_factory=list)
    ret: list[float] = dc_field(default_factory=list)
    n_bid: list[int] = dc_field(default_factory=list)
    n_ask: list[int] = dc_field(default_factory=list)
    n_trades: list[int] = dc_field(default_factory=list)
    avalanche_size: list[int] = dc_field(default_factory=list)
    money_total: list[float] = dc_field(default_factory=list)
    shares_total: list[int] = dc_field(default_factory=list)
    avalanches: list[AvalancheReport] = dc_field(default_factory=list)
    snapshots: dict[int, list[Trader]] = dc_field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class SimulationState:
    config: ModelConfig
    net: SmallWorldNet
    rng: np.random.Generator
    price: float
    history: PriceHistory
    kind: np.ndarray
    money: np.ndarray
    shares: np.ndarray
    field: InfoField
    p_fund: np.ndarray
    window: np.ndarray
    expected: np.ndarray
    status: np.ndarray
    order_price: np.ndarray
    records: MarketRecord
    step_index: int = 0
    transient_done: bool = False
    # debug hook, called with (t, ranked book) right before matching
    on_book: Callable[[int, OrderBook], None] | None = None

    @property
    def info(self) -> np.ndarray:
        return self.field.levels

    def trader(self, i: int) -> Trader:
        kind = TraderKind(int(self.kind[i]))
        return Trader(
            id=i,
            kind=kind,
            money=float(self.money[i]),
            shares=int(self.shares[i]),
            info=float(self.info[i]),
            p_personal_fund=float(self.p_fund[i]) if kind is TraderKind.FUNDAMENTALIST else None,
            window=int(self.window[i]) if kind is TraderKind.CHARTIST else None,
            expected_price=float(self.expected[i]),
            status=Status(int(self.status[i])),
            order_price=None if math.isnan(self.order_price[i]) else float(self.order_price[i]),
        )

    def snapshot(self) -> list[Trader]:
        return [self.trader(i) for i in range(self.config.n_agents)]


def initialize(config: ModelConfig) -> SimulationState:
    """Seeded setup: network, kind assignment, endowments, info levels."""
    rng = np.random.default_rng(config.seed)
    net = build_network(config.lattice_side, config.rewire_prob, rng)
    n = config.n_agents

    n_fund, n_chart, n_rand = config.agent_counts()
    kind = np.concatenate(
        [
            np.full(n_fund, int(TraderKind.FUNDAMENTALIST), dtype=np.int8),
            np.full(n_chart, int(TraderKind.CHARTIST), dtype=np.int8),
            np.full(n_rand, _RANDOM, dtype=np.int8),
        ]
    )
    rng.shuffle(kind)

    info = rng.uniform(0.0, config.i_threshold, n)

    p_fund = np.full(n, np.nan)
    fund_ids = np.nonzero(kind == int(TraderKind.FUNDAMENTALIST))[0]
    p_fund[fund_ids] = rng.uniform(
        config.p_fund_global - config.theta, config.p_fund_global + config.theta, fund_ids.size
    )

    window = np.zeros(n, dtype=np.int64)
    chart_ids = np.nonzero(kind == int(TraderKind.CHARTIST))[0]
    window[chart_ids] = rng.integers(2, config.t_max_window + 1, chart_ids.size)

    return SimulationState(
        config=config,
        net=net,
        rng=rng,
        price=config.p0,
        history=PriceHistory(config.p0, config.t_max_window),
        kind=kind,
        money=np.full(n, float(config.m_init)),
        shares=np.full(n, config.q_init, dtype=np.int64),
        field=InfoField(info, config.i_threshold, config.alpha),
        p_fund=p_fund,
        window=window,
        expected=np.full(n, float(config.p0)),
        status=np.full(n, _HOLDER, dtype=np.int8),
        order_price=np.full(n, np.nan),
        records=MarketRecord(),
    )


def run_transient(state: SimulationState) -> SimulationState:
    """Information dynamics only; the book stays suspended and the price fixed.

    Cascade reports carry step labels -t_soc+1 .. 0 so the log distinguishes
    warmup activity from the trading phase.
    """
    if state.transient_done:
        raise RuntimeError("transient already completed")
    cfg = state.config
    for i in range(cfg.t_soc):
        drive(state.field, state.rng)
        _, reports = relax(
            state.field,
            state.net,
            state.status,
            state.kind,
            state.rng,
            cfg.avalanche_topple_cap,
            step=i - cfg.t_soc + 1,
        )
        state.records.avalanches.extend(reports)
    state.transient_done = True
    return state


def step(state: SimulationState) -> SimulationState:
    """Advance one trading step (see module docstring for the phase order)."""
    if not state.transient_done:
        raise RuntimeError("run_transient must complete before trading steps")
    cfg = state.config
    rng = state.rng
    p_t = state.price
    n = cfg.n_agents
    kind = state.kind
    money = state.money
    shares = state.shares
    status = state.status
    expected = state.expected
    t = state.step_index + 1

    # (1) expectations
    eps = rng.uniform(-cfg.sigma, cfg.sigma, n) if cfg.sigma > 0 else np.zeros(n)
    trailing = state.history.trailing_means()
    is_fund = kind == int(TraderKind.FUNDAMENTALIST)
    is_chart = kind == int(TraderKind.CHARTIST)
    is_rand = kind == _RANDOM
    expected[is_fund] = p_t + cfg.phi * (state.p_fund[is_fund] - p_t) + eps[is_fund]
    if np.any(is_chart):
        w = state.window[is_chart]
        expected[is_chart] = p_t + (cfg.kappa / w) * (p_t - trailing[w]) + eps[is_chart]
    # random traders hold no view; for order pricing they carry the current
    # price plus the same noise term, which keeps them providing liquidity
    expected[is_rand] = p_t + eps[is_rand]

    # (2) autonomous statuses
    diff = expected - p_t
    status[:] = _HOLDER
    nonrand = ~is_rand
    status[nonrand & (diff > cfg.tau) & (money > 0)] = _BIDDER
    status[nonrand & (-diff > cfg.tau) & (shares > 0)] = _ASKER
    rand_ids = np.nonzero(is_rand)[0]
    if rand_ids.size:
        picks = rng.integers(0, 3, rand_ids.size).astype(np.int8)
        picks[(picks == _BIDDER) & (money[rand_ids] <= 0)] = _HOLDER
        picks[(picks == _ASKER) & (shares[rand_ids] <= 0)] = _HOLDER
        status[rand_ids] = picks

    # (3) information drive and cascades (may overwrite statuses)
    drive(state.field, rng)
    _, reports = relax(
        state.field, state.net, status, kind, rng, cfg.avalanche_topple_cap, step=t
    )
    state.records.avalanches.extend(reports)
    avalanche_total = sum(r.size for r in reports)

    # (4) order placement; unfunded or priced-out traders fall back to holder
    state.order_price[:] = np.nan
    bid_cap = np.minimum(money, expected)
    bid_mask = (status == _BIDDER) & (money > 0) & (bid_cap > 0)
    status[(status == _BIDDER) & ~bid_mask] = _HOLDER
    ask_mask = (status == _ASKER) & (shares >= 1)
    status[(status == _ASKER) & ~ask_mask] = _HOLDER

    bid_ids = np.nonzero(bid_mask)[0]
    caps = bid_cap[bid_ids]
    bid_prices = caps - rng.uniform(0.0, caps) if bid_ids.size else caps
    ask_ids = np.nonzero(ask_mask)[0]
    if ask_ids.size:
        lo = np.maximum(np.minimum(expected[ask_ids], p_t), 0.0)
        hi = np.maximum(expected[ask_ids], p_t)
        ask_prices = hi - rng.uniform(0.0, hi - lo)
    else:
        ask_prices = np.empty(0)
    state.order_price[bid_ids] = bid_prices
    state.order_price[ask_ids] = ask_prices

    # (5) match, settle, reprice
    book = OrderBook.from_arrays(bid_ids, bid_prices, ask_ids, ask_prices)
    if state.on_book is not None:
        state.on_book(t, book)
    outcome = book.match()
    settle(outcome, money, shares)
    new_price = update_price(p_t, outcome, cfg.delta, cfg.price_floor)

    # (6) record
    state.history.push(new_price)
    state.price = new_price
    rec = state.records
    rec.t.append(t)
    rec.price.append(new_price)
    rec.ret.append(math.log(new_price) - math.log(p_t))
    rec.n_bid.append(int(outcome.n_b))
    rec.n_ask.append(int(outcome.n_a))
    rec.n_trades.append(outcome.n_t)
    rec.avalanche_size.append(avalanche_total)
    rec.money_total.append(float(money.sum()))
    rec.shares_total.append(int(shares.sum()))
    state.step_index = t
    return state


def run(
    config: ModelConfig,
    snapshot_times: tuple[int, ...] = DEFAULT_SNAPSHOT_TIMES,
) -> tuple[MarketRecord, list[Trader]]:
    """Full protocol: initialize, transient, t_run trading steps.

    Snapshot times are trading-step indices (0 = end of transient). Returns
    the record plus the final agent table.
    """
    state = initialize(config)
    run_transient(state)
    wanted = {s for s in snapshot_times if 0 <= s <= config.t_run}
    if 0 in wanted:
        state.records.snapshots[0] = state.snapshot()
    for _ in range(config.t_run):
        step(state)
        if state.step_index in wanted:
            state.records.snapshots[state.step_index] = state.snapshot()
    return state.records, state.snapshot()

"""Single-asset, 1-share-per-order limit order book rebuilt every step.

Bids are ranked by price descending, asks ascending, equal prices by
arrival. Matching pairs best bid with best ask while bid >= ask, executes
at the ask price, and the leftover imbalance feeds the global price update.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Side(Enum):
    BID = "bid"
    ASK = "ask"


@dataclass(frozen=True)
class Order:
    agent_id: int
    side: Side
    price: float
    quantity: int = 1

    def __post_init__(self) -> None:
        if self.price <= 0:
            raise ValueError(f"order price must be positive, got {self.price!r}")
        if self.quantity != 1:
            raise ValueError("only 1-share orders are supported")


@dataclass(frozen=True)
class MatchOutcome:
    """Executed trades plus the order counts that drive the price update."""

    buyers: np.ndarray
    sellers: np.ndarray
    exec_prices: np.ndarray
    n_b: int
    n_a: int
    p_last: float | None

    @property
    def n_t(self) -> int:
        return int(self.exec_prices.size)

    @property
    def omega(self) -> float:
        """Unsatisfied order count on the dominant side (0 for a balanced book)."""
        if self.n_b > self.n_a:
            return float(self.n_b - self.n_t)
        if self.n_a > self.n_b:
            return float(self.n_a - self.n_t)
        return 0.0


_EMPTY_IDS = np.empty(0, dtype=np.int64)
_EMPTY_PRICES = np.empty(0, dtype=np.float64)


class OrderBook:
    """Per-step book; build with insert() or in bulk with from_arrays()."""

    def __init__(self) -> None:
        self._bid_ids: list[int] = []
        self._bid_prices: list[float] = []
        self._bid_keys: list[float] = []  # negated prices, ascending
        self._ask_ids: list[int] = []
        self._ask_prices: list[float] = []

    @classmethod
    def from_arrays(
        cls,
        bid_ids: np.ndarray,
        bid_prices: np.ndarray,
        ask_ids: np.ndarray,
        ask_prices: np.ndarray,
    ) -> "OrderBook":
        """Bulk construction; input order is the arrival order for tie-breaks."""
        book = cls()
        rank_b = np.argsort(-np.asarray(bid_prices, dtype=np.float64), kind="stable")
        rank_a = np.argsort(np.asarray(ask_prices, dtype=np.float64), kind="stable")
        book._bid_ids = [int(bid_ids[i]) for i in rank_b]
        book._bid_prices = [float(bid_prices[i]) for i in rank_b]
        book._bid_keys = [-p for p in book._bid_prices]
        book._ask_ids = [int(ask_ids[i]) for i in rank_a]
        book._ask_prices = [float(ask_prices[i]) for i in rank_a]
        return book

    @property
    def bids(self) -> list[Order]:
        return [Order(i, Side.BID, p) for i, p in zip(self._bid_ids, self._bid_prices)]

    @property
    def asks(self) -> list[Order]:
        return [Order(i, Side.ASK, p) for i, p in zip(self._ask_ids, self._ask_prices)]

    @property
    def n_b(self) -> int:
        return len(self._bid_ids)

    @property
    def n_a(self) -> int:
        return len(self._ask_ids)

    def best_bid(self) -> float | None:
        return self._bid_prices[0] if self._bid_prices else None

    def best_ask(self) -> float | None:
        return self._ask_prices[0] if self._ask_prices else None

    def insert(self, order: Order) -> None:
        """Rank the order into its side; equal prices keep arrival order."""
        if order.price <= 0:
            raise ValueError(f"order price must be positive, got {order.price!r}")
        if order.side is Side.BID:
            pos = bisect.bisect_right(self._bid_keys, -order.price)
            self._bid_keys.insert(pos, -order.price)
            self._bid_ids.insert(pos, order.agent_id)
            self._bid_prices.insert(pos, order.price)
        else:
            pos = bisect.bisect_right(self._ask_prices, order.price)
            self._ask_ids.insert(pos, order.agent_id)
            self._ask_prices.insert(pos, order.price)

    def match(self) -> MatchOutcome:
        """Pair best bid with best ask while bid >= ask, executing at the ask."""
        bid_p, ask_p = self._bid_prices, self._ask_prices
        n = 0
        limit = min(len(bid_p), len(ask_p))
        while n < limit and bid_p[n] >= ask_p[n]:
            n += 1
        if n == 0:
            return MatchOutcome(
                _EMPTY_IDS, _EMPTY_IDS, _EMPTY_PRICES, self.n_b, self.n_a, None
            )
        prices = np.array(ask_p[:n], dtype=np.float64)
        return MatchOutcome(
            buyers=np.array(self._bid_ids[:n], dtype=np.int64),
            sellers=np.array(self._ask_ids[:n], dtype=np.int64),
            exec_prices=prices,
            n_b=self.n_b,
            n_a=self.n_a,
            p_last=float(prices[-1]),
        )


def settle(outcome: MatchOutcome, money: np.ndarray, shares: np.ndarray) -> None:
    """Apply trades to the portfolio arrays in place.

    Raises if any buyer cannot pay or any seller lacks inventory; with bids
    capped at the bidder's money and 1-share orders, that would be an
    internal consistency bug rather than a market state.
    """
    if outcome.n_t == 0:
        return
    buyers, sellers, prices = outcome.buyers, outcome.sellers, outcome.exec_prices
    if np.any(money[buyers] < prices):
        raise RuntimeError("settlement inconsistency: buyer with money < exec price")
    if np.any(shares[sellers] < 1):
        raise RuntimeError("settlement inconsistency: seller without inventory")
    money[buyers] -= prices
    money[sellers] += prices
    shares[buyers] += 1
    shares[sellers] -= 1


def update_price(p_t: float, outcome: MatchOutcome, delta: float, price_floor: float) -> float:
    """New global price from the order counts and the last trade price.

    One-sided books shift the old price by delta times the unsatisfied
    count; a crossed book restarts from the last execution price; a
    balanced book carries no imbalance signal. Clamped at price_floor.
    """
    n_a, n_b, n_t = outcome.n_a, outcome.n_b, outcome.n_t
    if n_a == 0 and n_b == 0:
        new = p_t
    elif n_a == 0:
        new = p_t + delta * n_b
    elif n_b == 0:
        new = p_t - delta * n_a
    elif n_t == 0:
        if n_b > n_a:
            new = p_t + delta * n_b
        elif n_a > n_b:
            new = p_t - delta * n_a
        else:
            new = p_t
    else:
        assert outcome.p_last is not None
        if n_b > n_a:
            new = outcome.p_last + delta * (n_b - n_t)
        elif n_a > n_b:
            new = outcome.p_last - delta * (n_a - n_t)
        else:
            new = outcome.p_last
    return max(new, price_floor)

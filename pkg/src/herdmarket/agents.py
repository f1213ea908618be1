"""Trader state and per-agent decision rules.

The scalar functions here are the reference semantics for one agent; the
engine applies the same rules vectorized over the whole population (see
`engine`), and the test suite pins the two against each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class TraderKind(IntEnum):
    FUNDAMENTALIST = 0
    CHARTIST = 1
    RANDOM = 2


class Status(IntEnum):
    HOLDER = 0
    BIDDER = 1
    ASKER = 2


@dataclass
class Trader:
    """One agent's full state, as exposed in snapshots."""

    id: int
    kind: TraderKind
    money: float
    shares: int
    info: float
    p_personal_fund: float | None = None  # fundamentalists only
    window: int | None = None  # chartists only
    expected_price: float = 0.0
    status: Status = Status.HOLDER
    order_price: float | None = None

    def wealth(self, price: float) -> float:
        return self.money + self.shares * price


class PriceHistory:
    """The current global price plus a window of the prices before it.

    Trend rules average strictly past prices, so the current price is kept
    apart from the buffer. Pre-filled with the initial price so every
    chartist window is defined from the first trading step.
    """

    def __init__(self, p0: float, capacity: int):
        if capacity < 2:
            raise ValueError("history capacity must be at least 2")
        self._buf = np.full(capacity, float(p0))
        self._current = float(p0)

    def __len__(self) -> int:
        return self._buf.size

    @property
    def current(self) -> float:
        return self._current

    def push(self, price: float) -> None:
        """Record a newly formed price; the old current price becomes history."""
        self._buf[:-1] = self._buf[1:]
        self._buf[-1] = self._current
        self._current = float(price)

    def mean_last(self, window: int) -> float:
        """Mean of the `window` prices preceding the current one."""
        if not 1 <= window <= self._buf.size:
            raise ValueError(f"window {window} outside [1, {self._buf.size}]")
        return float(self._buf[-window:].mean())

    def trailing_means(self) -> np.ndarray:
        """trailing_means()[T] = mean of the last T past prices; index 0 unused."""
        rev = self._buf[::-1]
        means = np.empty(self._buf.size + 1)
        means[0] = np.nan
        means[1:] = np.cumsum(rev) / np.arange(1, self._buf.size + 1)
        return means


def draw_noise(sigma: float, rng: np.random.Generator) -> float:
    """Uniform noise on (-sigma, sigma); exactly 0 when sigma is 0."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return 0.0
    return float(rng.uniform(-sigma, sigma))


def expect_fundamentalist(p_t: float, p_f: float, phi: float, eps: float) -> float:
    """Mean-reverting expectation toward the personal fundamental price."""
    return p_t + phi * (p_f - p_t) + eps


def expect_chartist(p_t: float, history: PriceHistory, window: int, kappa: float, eps: float) -> float:
    """Trend-extrapolating expectation from the mean of the last `window` prices."""
    if window > len(history):
        raise ValueError(f"window {window} exceeds available history {len(history)}")
    p_bar = history.mean_last(window)
    return p_t + (kappa / window) * (p_t - p_bar) + eps


def decide_status(expected: float, p_t: float, tau: float, money: float, shares: int) -> Status:
    """Buy/sell/hold from the expectation gap, gated by the tau dead zone
    and by resources (bidders need money, askers need inventory)."""
    if expected - p_t > tau and money > 0:
        return Status.BIDDER
    if p_t - expected > tau and shares > 0:
        return Status.ASKER
    return Status.HOLDER


def decide_status_random(money: float, shares: int, rng: np.random.Generator) -> Status:
    """Uniform choice over the three statuses, downgraded when unfunded."""
    pick = Status(int(rng.integers(3)))
    if pick is Status.BIDDER and money <= 0:
        return Status.HOLDER
    if pick is Status.ASKER and shares <= 0:
        return Status.HOLDER
    return pick


def draw_order_price(
    status: Status,
    expected: float,
    p_t: float,
    money: float,
    rng: np.random.Generator,
) -> float | None:
    """Personal limit price for a bidder or asker.

    Bid: uniform in (0, min(money, expected)], so a bid is always affordable.
    Ask: uniform between the expectation and the current price, endpoints
    ordered (imitated askers may expect more than p_t) and floored at 0.
    Returns None when the bid interval is empty; the caller downgrades the
    trader to holder.
    """
    if status is Status.BIDDER:
        hi = min(money, expected)
        if hi <= 0:
            return None
        return hi - float(rng.uniform(0.0, hi))
    if status is Status.ASKER:
        lo = max(min(expected, p_t), 0.0)
        hi = max(expected, p_t)
        return hi - float(rng.uniform(0.0, hi - lo))
    raise ValueError("holders do not place orders")

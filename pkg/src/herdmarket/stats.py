"""Post-processing of simulated series: normalized returns, heavy-tail
density fitting, regime-transition detection, cascade-size tail statistics.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special


@dataclass(frozen=True)
class ReturnSeries:
    raw: np.ndarray
    normalized: np.ndarray
    r_av: float
    r_stdev: float


@dataclass(frozen=True)
class QGaussianFit:
    q: float
    a: float
    b: float
    residual: float  # sum of squared log-density errors over fitted bins


@dataclass(frozen=True)
class RegimeSplit:
    t_star: int | None
    window: int
    threshold: float


def normalize_returns(prices: np.ndarray) -> ReturnSeries:
    """Log returns standardized by their whole-series mean and stdev."""
    prices = np.asarray(prices, dtype=np.float64)
    if prices.size < 3:
        raise ValueError("need at least 3 prices")
    if np.any(prices <= 0):
        raise ValueError("prices must be positive to take log returns")
    raw = np.diff(np.log(prices))
    r_av = float(raw.mean())
    r_stdev = float(raw.std())
    if r_stdev == 0.0:
        raise ValueError("returns have zero standard deviation")
    return ReturnSeries(raw, (raw - r_av) / r_stdev, r_av, r_stdev)


def q_gaussian(x, q: float, a: float, b: float):
    """Generalized Gaussian density a*[1 - (1-q) b x^2]^(1/(1-q)).

    Reduces to a*exp(-b x^2) as q -> 1; heavy tails for q in (1, 3).
    """
    if q == 1.0:
        return a * np.exp(-b * np.asarray(x, dtype=np.float64) ** 2)
    base = 1.0 - (1.0 - q) * b * np.asarray(x, dtype=np.float64) ** 2
    if np.any(base <= 0):
        raise ValueError("argument outside the distribution support (q < 1 cutoff)")
    return a * base ** (1.0 / (1.0 - q))


def _log_q_gaussian(x2: np.ndarray, q: np.ndarray, b: np.ndarray) -> np.ndarray:
    """log of the unscaled q-Gaussian on squared abscissae; broadcasts."""
    return np.log1p((q - 1.0) * b * x2) / (1.0 - q)


def fit_q_gaussian(
    r_norm: np.ndarray,
    bins: int = 61,
    bin_range: tuple[float, float] = (-10.0, 10.0),
    min_count: int = 5,
) -> QGaussianFit:
    """Least-squares q-Gaussian fit to the log-density histogram.

    Coarse grid search over q in [1.05, 2.5], log-spaced b in [0.1, 50] and
    a in [0.1, 2], then shrinking-grid refinement to 1e-3 relative
    parameter tolerance. Only bins holding at least `min_count` samples
    enter the objective, so empty tails cannot dominate the fit.
    """
    r_norm = np.asarray(r_norm, dtype=np.float64)
    if r_norm.size < 1000:
        raise ValueError(f"need at least 1000 samples, got {r_norm.size}")
    counts, edges = np.histogram(r_norm, bins=bins, range=bin_range)
    if counts.sum() == 0:
        raise ValueError("all samples fall outside the histogram range")
    widths = np.diff(edges)
    density = counts / (counts.sum() * widths)
    keep = counts >= min_count
    if keep.sum() < 4:
        raise ValueError("too few populated bins for a 3-parameter fit")
    centers = 0.5 * (edges[:-1] + edges[1:])[keep]
    log_dens = np.log(density[keep])
    x2 = centers**2

    def sse_grid(qs: np.ndarray, bs: np.ndarray, as_: np.ndarray):
        shape = _log_q_gaussian(
            x2[None, None, :], qs[:, None, None], bs[None, :, None]
        )  # (nq, nb, nx)
        model = shape[:, :, None, :] + np.log(as_)[None, None, :, None]
        sse = ((log_dens - model) ** 2).sum(axis=-1)
        i = np.unravel_index(np.argmin(sse), sse.shape)
        return float(qs[i[0]]), float(bs[i[1]]), float(as_[i[2]]), float(sse[i])

    q0, b0, a0, best = sse_grid(
        np.linspace(1.05, 2.5, 30),
        np.geomspace(0.1, 50.0, 30),
        np.linspace(0.1, 2.0, 20),
    )

    spans = (0.15, 0.6, 0.25)  # relative half-widths around the incumbent
    q_lo, q_hi = 1.0005, 2.9995
    while True:
        qs = np.clip(np.linspace(q0 * (1 - spans[0]), q0 * (1 + spans[0]), 7), q_lo, q_hi)
        bs = np.geomspace(b0 * (1 - spans[1]), b0 * (1 + spans[1]), 7)
        as_ = np.linspace(a0 * (1 - spans[2]), a0 * (1 + spans[2]), 7)
        q0, b0, a0, best = sse_grid(qs, bs, as_)
        spans = tuple(s / 2 for s in spans)
        if all(s < 1e-3 for s in spans):
            break
    return QGaussianFit(q=q0, a=a0, b=b0, residual=best)


def detect_transition(
    n_trades: np.ndarray, window: int = 50, threshold: float = 100.0
) -> RegimeSplit:
    """First step whose trailing moving average of trade counts drops below
    the threshold; series index 0 is step 1. No crossing is a valid outcome."""
    series = np.asarray(n_trades, dtype=np.float64)
    if series.size <= window:
        raise ValueError(f"series length {series.size} must exceed window {window}")
    ma = np.convolve(series, np.full(window, 1.0 / window), mode="valid")
    below = np.nonzero(ma < threshold)[0]
    t_star = int(below[0]) + window if below.size else None
    return RegimeSplit(t_star=t_star, window=window, threshold=threshold)


def excess_kurtosis(series: np.ndarray) -> float:
    """Fourth standardized moment minus 3 (0 for a Gaussian)."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 4:
        raise ValueError("need at least 4 observations")
    centered = x - x.mean()
    var = float((centered**2).mean())
    if var == 0.0:
        raise ValueError("series has zero variance")
    return float((centered**4).mean() / var**2 - 3.0)


def avalanche_tail_stats(sizes: np.ndarray) -> tuple[float, float]:
    """(decades spanned, ML tail exponent) of the nonzero cascade sizes.

    The exponent is the discrete power-law MLE with the cutoff fixed at the
    smallest observed size >= 2; it is a diagnostic, not a fit quality claim.
    """
    sizes = np.asarray(sizes)
    nonzero = sizes[sizes > 0].astype(np.float64)
    if nonzero.size < 100:
        raise ValueError(f"need at least 100 nonzero sizes, got {nonzero.size}")
    lo, hi = float(nonzero.min()), float(nonzero.max())
    if lo == hi:
        raise ValueError("all cascade sizes equal; tail exponent undefined")
    decades = float(np.log10(hi / lo))
    tail = nonzero[nonzero >= 2.0]
    if tail.size < 10:
        raise ValueError("too few sizes >= 2 for a tail estimate")
    s_min = float(tail.min())
    log_sum = float(np.log(tail).sum())

    def nll(a: float) -> float:
        return tail.size * np.log(special.zeta(a, s_min)) + a * log_sum

    res = optimize.minimize_scalar(nll, bounds=(1.01, 6.0), method="bounded")
    return decades, float(res.x)


def analyze_series(
    prices: np.ndarray,
    n_trades: np.ndarray,
    cascade_sizes: np.ndarray,
    window: int = 50,
    threshold: float = 100.0,
    bins: int = 61,
    bin_range: tuple[float, float] = (-10.0, 10.0),
) -> tuple[dict, dict]:
    """Full analysis of one run: returns (summary, histogram table).

    The density, its fit, and the kurtosis are computed on the intermittent
    segment (returns after t_star; the whole series when no transition is
    found). Avalanche fields are None when the cascade log is too thin.
    """
    rs = normalize_returns(prices)
    split = detect_transition(n_trades, window=window, threshold=threshold)
    # return i arises from the step i+2 price move (prices row t starts at 1)
    t_of_return = np.arange(2, rs.raw.size + 2)
    segment = rs.normalized[t_of_return > split.t_star] if split.t_star is not None else rs.normalized

    fit = fit_q_gaussian(segment, bins=bins, bin_range=bin_range)
    kurt = excess_kurtosis(segment)
    try:
        decades, exponent = avalanche_tail_stats(np.asarray(cascade_sizes))
    except ValueError:
        decades, exponent = None, None

    counts, edges = np.histogram(segment, bins=bins, range=bin_range)
    widths = np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = counts.sum()
    density = counts / (total * widths) if total else np.zeros_like(widths)
    fit_density = q_gaussian(centers, fit.q, fit.a, fit.b)

    summary = {
        "r_av": rs.r_av,
        "r_stdev": rs.r_stdev,
        "q": fit.q,
        "A": fit.a,
        "B": fit.b,
        "residual": fit.residual,
        "excess_kurtosis": kurt,
        "t_star": split.t_star,
        "transition_window": window,
        "transition_threshold": threshold,
        "avalanche_decades": decades,
        "tail_exponent": exponent,
        "n_returns": int(rs.raw.size),
        "n_intermittent_returns": int(segment.size),
    }
    histogram = {
        "bin_center": centers,
        "density": density,
        "fit_density": fit_density,
    }
    return summary, histogram

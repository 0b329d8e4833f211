"""Lookback-straddle trend scores and the per-market regressor panel.

A window of ``n`` days means ``n`` price observations ending at ``t``
inclusive, i.e. ``n - 1`` log-returns. Scores are only emitted once a full
window is available.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import ndtr

from .errors import InputError, ModelError
from .market_data import PriceSeries, Universe, intersect_dates

ST_WINDOWS = (10, 20, 40, 60)
LT_WINDOWS = (500,)
FACTOR_KINDS = ("ST", "LT", "MKT")


@dataclass(frozen=True)
class HorizonSet:
    windows: tuple[int, ...]

    def __post_init__(self):
        windows = tuple(int(w) for w in self.windows)
        if not windows:
            raise InputError("empty horizon set")
        if any(w < 2 for w in windows):
            raise InputError(f"all windows must be >= 2, got {windows}")
        object.__setattr__(self, "windows", windows)

    @property
    def longest(self) -> int:
        return max(self.windows)


SHORT_TERM = HorizonSet(ST_WINDOWS)
LONG_TERM = HorizonSet(LT_WINDOWS)


@dataclass(frozen=True, eq=False)
class TrendScoreSeries:
    dates: np.ndarray
    values: np.ndarray
    window: int

    def __len__(self):
        return len(self.values)


class RollingExtrema:
    """Sliding-window max and min over the last ``n`` pushed values.

    Two monotonic deques of (index, value); each value enters and leaves
    each deque at most once, so a push is amortized O(1).
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("window must be >= 1")
        self.n = n
        self._i = 0
        self._max = deque()
        self._min = deque()

    def push(self, value: float) -> tuple[float, float]:
        i = self._i
        mx, mn = self._max, self._min
        while mx and mx[-1][1] <= value:
            mx.pop()
        mx.append((i, value))
        while mn and mn[-1][1] >= value:
            mn.pop()
        mn.append((i, value))
        if mx[0][0] <= i - self.n:
            mx.popleft()
        if mn[0][0] <= i - self.n:
            mn.popleft()
        self._i = i + 1
        return mx[0][1], mn[0][1]

    @property
    def full(self) -> bool:
        return self._i >= self.n


def _check_window(p: PriceSeries, n: int):
    if n < 2:
        raise InputError(f"window must be >= 2, got {n}")
    if len(p) < n:
        raise InputError(f"{p.name or 'series'}: {len(p)} prices is shorter than window {n}")


def running_extrema(p: PriceSeries, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Trailing ``n``-observation max and min, one value per full window.

    Element ``k`` of each output corresponds to ``p.dates[n - 1 + k]``.
    """
    _check_window(p, n)
    roll = RollingExtrema(n)
    values = p.values.tolist()
    hi = np.empty(len(values) - n + 1)
    lo = np.empty_like(hi)
    for i, v in enumerate(values):
        m, s = roll.push(v)
        if i >= n - 1:
            hi[i - n + 1] = m
            lo[i - n + 1] = s
    return hi, lo


def rolling_volatility(p: PriceSeries, n: int) -> np.ndarray:
    """Per-day vol: root mean square (no demeaning) of the window's n-1 log-returns."""
    _check_window(p, n)
    v = p.values
    lr2 = np.log(v[1:] / v[:-1]) ** 2
    return np.sqrt(sliding_window_view(lr2, n - 1).sum(axis=1) / (n - 1))


def score_from_state(log_s, log_max, log_min, sigma, n):
    """Trend score from log price, log extrema and per-day vol (vectorized).

    Returns ``Phi(ln(S/m)/(sigma sqrt n)) - Phi(ln(M/S)/(sigma sqrt n))``; a
    window with zero vol must be flat and scores exactly 0.
    """
    log_s, log_max, log_min, sigma = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (log_s, log_max, log_min, sigma))
    )
    up = log_s - log_min
    down = log_max - log_s
    flat = sigma == 0
    if np.any(flat & ((up != 0) | (down != 0))):
        raise ModelError("zero volatility with a non-degenerate price range")
    scale = np.where(flat, 1.0, sigma) * np.sqrt(n)
    out = ndtr(up / scale) - ndtr(down / scale)
    return np.where(flat, 0.0, out)


def trend_score(p: PriceSeries, n: int) -> TrendScoreSeries:
    hi, lo = running_extrema(p, n)
    sigma = rolling_volatility(p, n)
    s = p.values[n - 1 :]
    # distances as logs of price ratios, matching how sigma is formed; differences of
    # logs lose relative accuracy in near-flat windows
    values = score_from_state(0.0, np.log(hi / s), np.log(lo / s), sigma, n)
    return TrendScoreSeries(p.dates[n - 1 :], values, n)


def composite_score(p: PriceSeries, h: HorizonSet) -> TrendScoreSeries:
    """Equal-weight mean of per-window scores, from the longest window's first date."""
    longest = h.longest
    _check_window(p, longest)
    start = longest - 1
    total = np.zeros(len(p) - start)
    for n in h.windows:
        total += trend_score(p, n).values[start - (n - 1) :]
    return TrendScoreSeries(p.dates[start:], total / len(h.windows), longest)


@dataclass(frozen=True, eq=False)
class FactorPanel:
    """Regressors per (date, market): composite ST score, LT score, simple return.

    ``st``, ``lt`` and ``mkt`` are arrays of shape (dates, markets).
    """

    dates: np.ndarray
    markets: tuple[str, ...]
    st: np.ndarray
    lt: np.ndarray
    mkt: np.ndarray
    asset_classes: tuple[str, ...] = ()

    def __post_init__(self):
        shape = (len(self.dates), len(self.markets))
        for name in ("st", "lt", "mkt"):
            if getattr(self, name).shape != shape:
                raise InputError(f"panel field {name} has shape {getattr(self, name).shape}, expected {shape}")

    def __len__(self):
        return len(self.dates)

    def design(self, components=FACTOR_KINDS) -> tuple[np.ndarray, list[str]]:
        """Flatten to a (dates, K) matrix, market-major with kinds in ST, LT, MKT order."""
        kinds = [k for k in FACTOR_KINDS if k in set(components)]
        if not kinds:
            raise InputError(f"no known factor kinds in {components!r}")
        unknown = set(components) - set(FACTOR_KINDS)
        if unknown:
            raise InputError(f"unknown factor kinds {sorted(unknown)}")
        arrays = {"ST": self.st, "LT": self.lt, "MKT": self.mkt}
        x = np.stack([arrays[k] for k in kinds], axis=2).reshape(len(self.dates), -1)
        labels = [f"{m}:{k}" for m in self.markets for k in kinds]
        return x, labels

    def label_groups(self, components=FACTOR_KINDS) -> list[str]:
        """Asset-class/kind group of each design column (for prior correlation blocks)."""
        kinds = [k for k in FACTOR_KINDS if k in set(components)]
        classes = self.asset_classes or self.markets
        return [f"{c}:{k}" for c in classes for k in kinds]

    def between(self, start=None, end=None) -> FactorPanel:
        mask = np.ones(len(self.dates), dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "D")
        return FactorPanel(
            self.dates[mask], self.markets, self.st[mask], self.lt[mask], self.mkt[mask], self.asset_classes
        )


def build_panel(
    universe: Universe,
    prices: dict[str, PriceSeries],
    st: HorizonSet = SHORT_TERM,
    lt: HorizonSet = LONG_TERM,
) -> FactorPanel:
    """Compute each market's factors on its own calendar, then intersect dates."""
    missing = [r for r in universe.roots if r not in prices]
    if missing:
        raise InputError(f"missing prices for {', '.join(missing)}")
    need = max(st.longest, lt.longest)
    per_market = {}
    for root in universe.roots:
        p = prices[root]
        if len(p) < need + 1:
            raise InputError(f"{root}: {len(p)} prices, need at least {need + 1}")
        s = composite_score(p, st)
        l = composite_score(p, lt)
        rets = p.values[1:] / p.values[:-1] - 1.0
        per_market[root] = (p.dates, s, l, rets)

    dates = intersect_dates(*(np.intersect1d(s.dates, l.dates) for _, s, l, _ in per_market.values()))
    if len(dates) == 0:
        raise InputError("insufficient common history: no date has full windows in every market")
    cols = {"st": [], "lt": [], "mkt": []}
    for root in universe.roots:
        pdates, s, l, rets = per_market[root]
        cols["st"].append(s.values[np.searchsorted(s.dates, dates)])
        cols["lt"].append(l.values[np.searchsorted(l.dates, dates)])
        # return at price index i is stored at rets[i - 1]
        cols["mkt"].append(rets[np.searchsorted(pdates, dates) - 1])
    return FactorPanel(
        dates,
        tuple(universe.roots),
        np.column_stack(cols["st"]),
        np.column_stack(cols["lt"]),
        np.column_stack(cols["mkt"]),
        tuple(c.asset_class.value for c in universe.contracts),
    )


def write_panel(panel: FactorPanel, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "market", "st_score", "lt_score", "mkt_return"])
        for i, d in enumerate(panel.dates):
            for j, m in enumerate(panel.markets):
                w.writerow([str(d), m, repr(float(panel.st[i, j])), repr(float(panel.lt[i, j])),
                            repr(float(panel.mkt[i, j]))])


def read_panel(path) -> FactorPanel:
    rows: dict = {}
    markets: list[str] = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            d = np.datetime64(row["date"], "D")
            m = row["market"]
            if m not in markets:
                markets.append(m)
            rows.setdefault(d, {})[m] = (float(row["st_score"]), float(row["lt_score"]), float(row["mkt_return"]))
    dates = np.array(sorted(rows), dtype="datetime64[D]")
    arr = np.empty((len(dates), len(markets), 3))
    for i, d in enumerate(dates):
        for j, m in enumerate(markets):
            try:
                arr[i, j] = rows[d][m]
            except KeyError:
                raise InputError(f"{path}: panel is not rectangular ({m} missing on {d})") from None
    return FactorPanel(dates, tuple(markets), arr[:, :, 0], arr[:, :, 1], arr[:, :, 2])

"""Deterministic synthetic futures universe with a trend-following benchmark.

Prices are GBM with exact log-normal steps, a per-class common shock and
piecewise-constant drift regimes so that trends exist to be found. The
benchmark is a diversified trend follower: yesterday's blended ST/LT scores
times today's returns, scaled to a target volatility, plus idiosyncratic
noise. It is not generated from the regression model itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factors import LONG_TERM, SHORT_TERM, HorizonSet, build_panel, composite_score
from .market_data import AssetClass, PriceSeries, ReturnSeries, Universe, business_days, default_universe

CLASS_VOL = {
    AssetClass.EQUITY: 0.18,
    AssetClass.FIXED_INCOME: 0.06,
    AssetClass.CURRENCY: 0.09,
    AssetClass.COMMODITY: 0.28,
}
CLASS_CORR = 0.5
DEFAULT_SEED = 20250601


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    universe: Universe
    prices: dict[str, PriceSeries]
    benchmark: ReturnSeries


def simulate_universe_prices(universe: Universe, n_days: int, seed: int = DEFAULT_SEED,
                             days_per_year: int = 252, regime_days: int = 120,
                             drift_sharpe: float = 0.8, start="2004-01-02") -> dict[str, PriceSeries]:
    rng = np.random.default_rng(seed)
    dt = 1.0 / days_per_year
    dates = business_days(start, n_days)
    classes = sorted({c.asset_class for c in universe.contracts}, key=lambda a: a.value)
    common = {a: rng.standard_normal(n_days - 1) for a in classes}
    out = {}
    for c in universe.contracts:
        vol = CLASS_VOL[c.asset_class]
        z = np.sqrt(CLASS_CORR) * common[c.asset_class] + np.sqrt(1 - CLASS_CORR) * rng.standard_normal(n_days - 1)
        n_regimes = -(-(n_days - 1) // regime_days)
        drifts = np.repeat(rng.choice([-1.0, 1.0], n_regimes) * drift_sharpe * vol, regime_days)[: n_days - 1]
        inc = (drifts - 0.5 * vol**2) * dt + vol * np.sqrt(dt) * z
        s0 = float(rng.uniform(50, 150))
        out[c.root] = PriceSeries(dates, s0 * np.exp(np.concatenate([[0.0], np.cumsum(inc)])), c.root)
    return out


def trend_benchmark(universe: Universe, prices: dict[str, PriceSeries], seed: int = DEFAULT_SEED,
                    st: HorizonSet = SHORT_TERM, lt: HorizonSet = LONG_TERM,
                    target_vol: float = 0.10, noise_share: float = 0.3,
                    days_per_year: int = 252) -> ReturnSeries:
    rng = np.random.default_rng(seed + 1)
    panel = build_panel(universe, prices, st, lt)
    dates = panel.dates[1:]
    pnl = np.zeros(len(dates))
    for j, c in enumerate(universe.contracts):
        pos = 0.5 * (panel.st[:-1, j] + panel.lt[:-1, j]) / CLASS_VOL[c.asset_class]
        pnl += pos * panel.mkt[1:, j]
    pnl *= target_vol / (np.std(pnl) * np.sqrt(days_per_year))
    pnl += noise_share * np.std(pnl) * rng.standard_normal(len(pnl))
    return ReturnSeries(dates, pnl, "SGCTAT")


def synthetic_dataset(universe: Universe | None = None, n_days: int = 2000, seed: int = DEFAULT_SEED,
                      st: HorizonSet = SHORT_TERM, lt: HorizonSet = LONG_TERM) -> SyntheticDataset:
    universe = universe or default_universe()
    prices = simulate_universe_prices(universe, n_days, seed)
    return SyntheticDataset(universe, prices, trend_benchmark(universe, prices, seed, st, lt))

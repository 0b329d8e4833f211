"""Run configuration and the ingestion -> factors -> filter -> backtest pipeline."""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .costs import CostAssumptions, all_in_cost_bp, apply_costs, cost_assumptions_from_dict, load_cost_assumptions
from .errors import InputError
from .factors import FactorPanel, HorizonSet, build_panel
from .market_data import ReturnSeries, Universe, default_universe_path, load_prices, load_returns, load_universe, read_config
from .state_space import FilterSettings
from .strategy import (
    SLEEVE_ORDER,
    CorrelationMatrix,
    PerformanceReport,
    SleeveSpec,
    correlation_matrix,
    performance,
    run_sleeve,
)
from .synthetic import DEFAULT_SEED

NET_LEVELS = ("lo", "mid", "hi")


@dataclass
class RunConfig:
    universe: str | None = None
    prices: str | None = None
    benchmark: str | None = None
    output: str = "out"
    seed: int = DEFAULT_SEED
    days_per_year: int = 252
    st_windows: list[int] = field(default_factory=lambda: [10, 20, 40, 60])
    lt_windows: list[int] = field(default_factory=lambda: [500])
    filter: dict = field(default_factory=dict)
    costs: dict = field(default_factory=dict)
    net_level: str = "hi"
    start: str | None = None
    end: str | None = None
    sleeves: list[str] = field(default_factory=lambda: [s.value for s in SLEEVE_ORDER])

    @classmethod
    def load(cls, path) -> RunConfig:
        path = Path(path)
        data = read_config(path)
        horizons = data.pop("horizons", None) or {}
        if "st" in horizons:
            data["st_windows"] = list(horizons["st"])
        if "lt" in horizons:
            data["lt_windows"] = list(horizons["lt"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg = cls(**data)
        # relative paths are relative to the config file
        for key in ("universe", "prices", "benchmark", "output"):
            v = getattr(cfg, key)
            if v is not None and not Path(v).is_absolute():
                setattr(cfg, key, str((path.parent / v).resolve()))
        return cfg

    def with_overrides(self, **kw) -> RunConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def validate(self) -> None:
        for key in ("universe", "prices", "benchmark"):
            v = getattr(self, key)
            if v is not None and not Path(v).exists():
                raise InputError(f"{key} path does not exist: {v}")
        if self.start and self.end and np.datetime64(self.start) > np.datetime64(self.end):
            raise InputError(f"start {self.start} is after end {self.end}")
        if self.net_level not in NET_LEVELS:
            raise InputError(f"net_level must be one of {NET_LEVELS}")
        if self.days_per_year <= 0:
            raise InputError("days_per_year must be > 0")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def st(self) -> HorizonSet:
        return HorizonSet(tuple(self.st_windows))

    @property
    def lt(self) -> HorizonSet:
        return HorizonSet(tuple(self.lt_windows))

    @property
    def filter_settings(self) -> FilterSettings:
        return FilterSettings.from_dict(self.filter)

    def universe_path(self) -> Path:
        return Path(self.universe) if self.universe else default_universe_path()


def load_universe_and_prices(cfg: RunConfig):
    universe = load_universe(cfg.universe_path())
    if not cfg.prices:
        raise InputError("no price directory configured")
    pdir = Path(cfg.prices)
    prices = {}
    for root in universe.roots:
        f = pdir / f"{root}.csv"
        if not f.exists():
            raise InputError(f"missing price file for {root}: {f}")
        prices[root] = load_prices(f, root)
    return universe, prices


def compute_panel(cfg: RunConfig) -> tuple[Universe, FactorPanel]:
    universe, prices = load_universe_and_prices(cfg)
    panel = build_panel(universe, prices, cfg.st, cfg.lt).between(cfg.start, cfg.end)
    if len(panel) == 0:
        raise InputError("date range leaves an empty panel")
    return universe, panel


def load_benchmark(cfg: RunConfig) -> ReturnSeries:
    if not cfg.benchmark:
        raise InputError("no benchmark return file configured")
    return load_returns(cfg.benchmark, "SGCTAT")


def align_panel(panel: FactorPanel, benchmark: ReturnSeries) -> tuple[FactorPanel, ReturnSeries]:
    """Restrict both inputs to their common dates."""
    common = np.intersect1d(panel.dates, benchmark.dates)
    if len(common) == 0:
        raise InputError("panel and benchmark share no dates")
    sub = panel.between(common[0], common[-1])
    mask = np.isin(sub.dates, common)
    sub = FactorPanel(sub.dates[mask], sub.markets, sub.st[mask], sub.lt[mask], sub.mkt[mask], sub.asset_classes)
    return sub, benchmark.align(sub.dates)


def cost_setup(cfg: RunConfig) -> tuple[CostAssumptions, float]:
    assumptions, tx = load_cost_assumptions(cfg.universe_path())
    if cfg.costs:
        block = dict(cfg.costs)
        tx = float(block.pop("tx_cost_bp", tx))
        merged = {**asdict(assumptions), **block}
        assumptions = cost_assumptions_from_dict(merged)
    return assumptions, tx


def annual_drag_bp(cfg: RunConfig) -> float:
    lo, hi = all_in_cost_bp(*cost_setup(cfg))
    return {"lo": lo, "mid": 0.5 * (lo + hi), "hi": hi}[cfg.net_level]


@dataclass
class BacktestResult:
    streams: dict[str, ReturnSeries]
    gross: dict[str, PerformanceReport]
    net: dict[str, PerformanceReport]
    correlation: CorrelationMatrix
    net_correlation: CorrelationMatrix
    drag_bp: float


def run_backtest(cfg: RunConfig, sleeves: list[SleeveSpec]) -> BacktestResult:
    if not sleeves:
        raise InputError("empty sleeve list")
    _, panel = compute_panel(cfg)
    benchmark = load_benchmark(cfg)
    panel, benchmark = align_panel(panel, benchmark)
    settings = cfg.filter_settings
    drag = annual_drag_bp(cfg)
    streams, net_streams = {}, {}
    for spec in sleeves:
        r, _ = run_sleeve(spec, panel, benchmark, settings)
        r = r.align(panel.dates) if spec.label == "SGCTAT" else r
        r = r.between(cfg.start, cfg.end)
        streams[spec.label] = r
        # the benchmark is already net of its own fees
        net_streams[spec.label] = r if spec.label == "SGCTAT" else apply_costs(r, drag, cfg.days_per_year)
    gross = {k: performance(v, cfg.days_per_year) for k, v in streams.items()}
    net = {k: performance(v, cfg.days_per_year) for k, v in net_streams.items()}
    corr = correlation_matrix(list(streams.values()))
    net_corr = correlation_matrix(list(net_streams.values()))
    return BacktestResult(streams, gross, net, corr, net_corr, drag)


def manifest_text(command: str, cfg: RunConfig | None, outputs: list[str], extra: dict | None = None) -> str:
    import scipy

    lines = [
        f"command: {command}",
        f"ctarep: {__version__}",
        f"python: {platform.python_version()}",
        f"numpy: {np.__version__}",
        f"scipy: {scipy.__version__}",
    ]
    if cfg is not None:
        lines.append(f"config_sha256: {cfg.digest()}")
        lines.append(f"seed: {cfg.seed}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    lines.append("outputs:")
    lines += [f"  - {o}" for o in outputs]
    return "\n".join(lines) + "\n"

"""Futures price data: contract universe, price/return series and GBM paths."""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import InputError


class AssetClass(str, enum.Enum):
    EQUITY = "Equity"
    FIXED_INCOME = "FixedIncome"
    CURRENCY = "Currency"
    COMMODITY = "Commodity"


@dataclass(frozen=True)
class ContractSpec:
    root: str
    asset_class: AssetClass
    exchange: str = ""
    tx_cost_bp: float = 0.0
    roll_drag_bp: float = 0.0

    def __post_init__(self):
        if not self.root:
            raise InputError("contract root must be a non-empty string")
        if self.tx_cost_bp < 0:
            raise InputError(f"{self.root}: tx_cost_bp must be >= 0, got {self.tx_cost_bp}")
        if self.roll_drag_bp < 0:
            raise InputError(f"{self.root}: roll_drag_bp must be >= 0, got {self.roll_drag_bp}")


@dataclass(frozen=True)
class Universe:
    contracts: tuple[ContractSpec, ...]

    def __post_init__(self):
        if not self.contracts:
            raise InputError("empty universe")
        seen = set()
        for c in self.contracts:
            if c.root in seen:
                raise InputError(f"duplicate contract root {c.root!r}")
            seen.add(c.root)

    @property
    def roots(self) -> list[str]:
        return [c.root for c in self.contracts]

    def __getitem__(self, root: str) -> ContractSpec:
        for c in self.contracts:
            if c.root == root:
                return c
        raise KeyError(root)

    def __len__(self):
        return len(self.contracts)


def _as_dates(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Positive prices on strictly increasing dates."""

    dates: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        dates = _as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or values.ndim != 1:
            raise InputError(f"{self.name}: dates and values must be 1-d of equal length")
        if len(values) < 2:
            raise InputError(f"{self.name}: need at least 2 prices, got {len(values)}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InputError(f"{self.name}: non-positive price")
        if np.any(np.diff(dates).astype(np.int64) <= 0):
            raise InputError(f"{self.name}: dates must be strictly increasing")
        dates.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def between(self, start=None, end=None) -> PriceSeries:
        mask = _date_mask(self.dates, start, end)
        return PriceSeries(self.dates[mask], self.values[mask], self.name)


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Simple (arithmetic) period returns on strictly increasing dates."""

    dates: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        dates = _as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or values.ndim != 1:
            raise InputError(f"{self.name}: dates and values must be 1-d of equal length")
        if np.any(np.diff(dates).astype(np.int64) <= 0):
            raise InputError(f"{self.name}: dates must be strictly increasing")
        dates.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def between(self, start=None, end=None) -> ReturnSeries:
        mask = _date_mask(self.dates, start, end)
        return ReturnSeries(self.dates[mask], self.values[mask], self.name)

    def align(self, dates) -> ReturnSeries:
        """Restrict to ``dates``; every requested date must be present."""
        dates = _as_dates(dates)
        idx = np.searchsorted(self.dates, dates)
        ok = (idx < len(self.dates)) & (self.dates[np.minimum(idx, len(self.dates) - 1)] == dates)
        if not np.all(ok):
            missing = dates[~ok]
            raise InputError(f"{self.name}: {len(missing)} dates missing, first {missing[0]}")
        return ReturnSeries(dates, self.values[idx], self.name)


def _date_mask(dates, start, end):
    mask = np.ones(len(dates), dtype=bool)
    if start is not None:
        mask &= dates >= np.datetime64(start, "D")
    if end is not None:
        mask &= dates <= np.datetime64(end, "D")
    return mask


@dataclass(frozen=True)
class GbmSpec:
    mu: float
    sigma: float
    s0: float = 100.0
    n_days: int = 252
    days_per_year: int = 252
    seed: int = 0
    start: dt.date = field(default=dt.date(2000, 1, 3))

    def __post_init__(self):
        if self.sigma <= 0:
            raise InputError("sigma must be > 0")
        if self.s0 <= 0:
            raise InputError("s0 must be > 0")
        if self.n_days < 2:
            raise InputError("n_days must be >= 2")
        if self.days_per_year <= 0:
            raise InputError("days_per_year must be > 0")


# ---------------------------------------------------------------------------
# loading


def _parse_contract(entry, i) -> ContractSpec:
    if not isinstance(entry, dict):
        raise InputError(f"contracts[{i}]: expected a mapping, got {type(entry).__name__}")
    try:
        root = str(entry["root"])
        cls = AssetClass(entry["asset_class"])
    except KeyError as exc:
        raise InputError(f"contracts[{i}]: missing field {exc.args[0]!r}") from None
    except ValueError:
        raise InputError(
            f"contracts[{i}] ({entry.get('root')}): asset_class must be one of "
            f"{[c.value for c in AssetClass]}, got {entry['asset_class']!r}"
        ) from None
    values = {}
    for key in ("tx_cost_bp", "roll_drag_bp"):
        try:
            values[key] = float(entry.get(key, 0.0))
        except (TypeError, ValueError):
            raise InputError(f"{root}: {key} is not a number: {entry.get(key)!r}") from None
        if values[key] < 0:
            raise InputError(f"{root}: {key} must be >= 0, got {values[key]}")
    return ContractSpec(root, cls, str(entry.get("exchange", "")), **values)


def read_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InputError(f"cannot parse {path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be a mapping")
    return data


def load_universe(path) -> Universe:
    """Read the ``contracts:`` list of a YAML universe file, keeping order."""
    data = read_config(path)
    entries = data.get("contracts") or []
    if not isinstance(entries, list):
        raise InputError(f"{path}: 'contracts' must be a list")
    contracts = tuple(_parse_contract(e, i) for i, e in enumerate(entries))
    return Universe(contracts)


def default_universe_path() -> Path:
    return Path(str(resources.files("ctarep") / "data" / "universe.yaml"))


def default_universe() -> Universe:
    """The 24-contract universe with its representative costs."""
    return load_universe(default_universe_path())


def _read_two_column_csv(path, value_col: str):
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "date" not in reader.fieldnames or value_col not in reader.fieldnames:
            raise InputError(f"{path}: expected header 'date,{value_col}'")
        dates, values = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                dates.append(dt.date.fromisoformat(row["date"].strip()))
            except (ValueError, AttributeError):
                raise InputError(f"{path}:{lineno}: unparsable date {row['date']!r}") from None
            try:
                values.append(float(row[value_col]))
            except (TypeError, ValueError):
                raise InputError(f"{path}:{lineno}: bad {value_col} {row[value_col]!r}") from None
    dates = np.array(dates, dtype="datetime64[D]")
    values = np.array(values, dtype=float)
    order = np.argsort(dates, kind="stable")
    dates, values = dates[order], values[order]
    dup = np.flatnonzero(np.diff(dates).astype(np.int64) == 0)
    if len(dup):
        raise InputError(f"{path}: duplicate date {dates[dup[0]]}")
    return dates, values


def load_prices(path, root: str = "") -> PriceSeries:
    """Load a ``date,price`` CSV; rows are sorted by date on the way in."""
    dates, values = _read_two_column_csv(path, "price")
    if len(values) < 2:
        raise InputError(f"{path}: need at least 2 rows, got {len(values)}")
    bad = np.flatnonzero(~(values > 0))
    if len(bad):
        raise InputError(f"{path}: non-positive price {values[bad[0]]} on {dates[bad[0]]}")
    return PriceSeries(dates, values, root)


def load_returns(path, name: str = "") -> ReturnSeries:
    """Load a ``date,return`` CSV of daily simple returns."""
    dates, values = _read_two_column_csv(path, "return")
    if not np.all(np.isfinite(values)):
        raise InputError(f"{path}: non-finite return")
    return ReturnSeries(dates, values, name)


def write_prices(p: PriceSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "price"])
        for d, v in zip(p.dates, p.values):
            w.writerow([str(d), repr(float(v))])


def write_returns(r: ReturnSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "return"])
        for d, v in zip(r.dates, r.values):
            w.writerow([str(d), repr(float(v))])


def to_returns(p: PriceSeries) -> ReturnSeries:
    """Simple returns S_t / S_{t-1} - 1, dated at t."""
    v = p.values
    return ReturnSeries(p.dates[1:], v[1:] / v[:-1] - 1.0, p.name)


# ---------------------------------------------------------------------------
# simulation


def business_days(start, n: int) -> np.ndarray:
    """``n`` consecutive weekdays starting at (or after) ``start``."""
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def gbm_log_increments(rng: np.random.Generator, mu, sigma, n_steps, days_per_year=252, size=None):
    """Exact log-normal increments ``(mu - sigma^2/2) dt + sigma sqrt(dt) Z``."""
    dt_ = 1.0 / days_per_year
    shape = (n_steps,) if size is None else (size, n_steps)
    z = rng.standard_normal(shape)
    return (mu - 0.5 * sigma**2) * dt_ + sigma * np.sqrt(dt_) * z


def simulate_gbm(spec: GbmSpec, name: str = "") -> PriceSeries:
    rng = np.random.default_rng(spec.seed)
    inc = gbm_log_increments(rng, spec.mu, spec.sigma, spec.n_days - 1, spec.days_per_year)
    log_path = np.concatenate([[0.0], np.cumsum(inc)])
    return PriceSeries(business_days(spec.start, spec.n_days), spec.s0 * np.exp(log_path), name)


def intersect_dates(*date_arrays) -> np.ndarray:
    out = date_arrays[0]
    for d in date_arrays[1:]:
        out = np.intersect1d(out, d, assume_unique=True)
    return out

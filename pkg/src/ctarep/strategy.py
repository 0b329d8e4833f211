"""Factor sleeves, performance statistics, correlation tables and report rendering."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import InputError
from .factors import FactorPanel
from .market_data import ReturnSeries, intersect_dates, load_returns
from .state_space import FilterSettings, PosteriorPath, decode_exposures, replicate_returns

DAYS_PER_YEAR = 252


class Sleeve(str, enum.Enum):
    LTT = "LTT"
    MKT = "MKT"
    STT_LTT = "STT+LTT"
    STT = "STT"
    MKT_STT_LTT = "MKT+STT+LTT"
    MKT_STT = "MKT+STT"
    BENCHMARK = "SGCTAT"


# report column order
SLEEVE_ORDER = tuple(Sleeve)

_COMPONENTS = {
    Sleeve.LTT: ("LT",),
    Sleeve.MKT: ("MKT",),
    Sleeve.STT_LTT: ("ST", "LT"),
    Sleeve.STT: ("ST",),
    Sleeve.MKT_STT_LTT: ("ST", "LT", "MKT"),
    Sleeve.MKT_STT: ("ST", "MKT"),
    Sleeve.BENCHMARK: (),
}


def parse_sleeve(name: str) -> Sleeve:
    key = name.strip().upper().replace("_", "+")
    for s in Sleeve:
        if key in (s.value, s.name.replace("_", "+")):
            return s
    if key == "BENCHMARK":
        return Sleeve.BENCHMARK
    raise InputError(f"unknown sleeve {name!r}; choose from {[s.value for s in Sleeve]}")


@dataclass(frozen=True)
class SleeveSpec:
    name: Sleeve
    components: tuple[str, ...] = ()
    benchmark_path: str | None = None

    def __post_init__(self):
        if self.name is Sleeve.BENCHMARK:
            if not self.benchmark_path:
                raise InputError("the benchmark sleeve needs a return file")
        elif not self.components:
            raise InputError(f"sleeve {self.name.value} has no components")

    @classmethod
    def of(cls, name, benchmark_path=None) -> SleeveSpec:
        s = name if isinstance(name, Sleeve) else parse_sleeve(name)
        return cls(s, _COMPONENTS[s], benchmark_path if s is Sleeve.BENCHMARK else None)

    @property
    def label(self) -> str:
        return self.name.value


def build_sleeve_returns(spec: SleeveSpec, panel: FactorPanel, posterior: PosteriorPath | None) -> ReturnSeries:
    """One-step replication stream for the sleeve's input set (benchmark: loaded as is)."""
    if spec.name is Sleeve.BENCHMARK:
        return load_returns(spec.benchmark_path, spec.label)
    x, labels = panel.design(spec.components)
    if posterior is None or tuple(posterior.labels) != tuple(labels):
        raise InputError(f"posterior was not fitted on the {spec.label} input set")
    if len(posterior.dates) != len(panel.dates) or np.any(posterior.dates != panel.dates):
        raise InputError(f"posterior dates do not match the panel for {spec.label}")
    return replicate_returns(posterior, x, spec.label)


def run_sleeve(spec: SleeveSpec, panel: FactorPanel, benchmark: ReturnSeries,
               settings: FilterSettings | None = None) -> tuple[ReturnSeries, PosteriorPath | None]:
    """Fit the filter on the sleeve's regressors and return its replication stream."""
    if spec.name is Sleeve.BENCHMARK:
        return build_sleeve_returns(spec, panel, None), None
    settings = settings or FilterSettings()
    x, labels = panel.design(spec.components)
    y = benchmark.align(panel.dates).values
    model = settings.model_for(labels, y, panel.label_groups(spec.components), x)
    post = decode_exposures(model, panel, benchmark, spec.components)
    return build_sleeve_returns(spec, panel, post), post


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class PerformanceReport:
    """Fractions, not percent. Undefined ratios are NaN."""

    cumulative_return: float
    annual_return: float
    volatility: float
    sharpe: float
    max_drawdown: float
    return_over_maxdd: float
    sharpe_over_maxdd: float


METRIC_NAMES = {
    "cumulative_return": "Cumulative Return (%)",
    "annual_return": "Annual Return (%)",
    "volatility": "Volatility (%)",
    "sharpe": "Sharpe Ratio",
    "max_drawdown": "Max Drawdown (%)",
    "return_over_maxdd": "Return/MaxDD",
    "sharpe_over_maxdd": "Sharpe/MaxDD",
}
_PERCENT = {"cumulative_return", "annual_return", "volatility", "max_drawdown"}


def max_drawdown(r) -> float:
    """Largest peak-to-trough fall of the compounded curve, starting from 1."""
    equity = np.concatenate([[1.0], np.cumprod(1.0 + np.asarray(r, dtype=float))])
    peak = np.maximum.accumulate(equity)
    return float(np.max(1.0 - equity / peak))


def performance(r, days_per_year: int = DAYS_PER_YEAR) -> PerformanceReport:
    """Geometric annualization; Sharpe is annual return over annualized vol (zero rate)."""
    v = np.asarray(r.values if isinstance(r, ReturnSeries) else r, dtype=float)
    if len(v) < 2:
        raise InputError("performance needs at least 2 returns")
    growth = float(np.prod(1.0 + v))
    cumulative = growth - 1.0
    annual = growth ** (days_per_year / len(v)) - 1.0 if growth > 0 else -1.0
    # a constant series has zero vol; np.std can leave ~1e-19 of roundoff
    vol = 0.0 if np.all(v == v[0]) else float(np.std(v, ddof=1) * math.sqrt(days_per_year))
    sharpe = annual / vol if vol > 0 else math.nan
    mdd = max_drawdown(v)
    if mdd > 0:
        r_dd, s_dd = annual / mdd, sharpe / mdd
    else:
        r_dd = s_dd = math.nan
    return PerformanceReport(cumulative, annual, vol, sharpe, mdd, r_dd, s_dd)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray
    undefined: tuple[str, ...] = ()

    def __getitem__(self, pair) -> float:
        a, b = pair
        return float(self.values[self.labels.index(a), self.labels.index(b)])


def correlation_matrix(series: list[ReturnSeries]) -> CorrelationMatrix:
    """Pearson correlations on the common date intersection."""
    labels = tuple(s.name for s in series)
    if len(set(labels)) != len(labels):
        raise InputError("series labels must be unique")
    dates = intersect_dates(*(s.dates for s in series))
    if len(dates) < 3:
        raise InputError(f"only {len(dates)} common dates; need at least 3")
    data = np.column_stack([s.align(dates).values for s in series])
    centered = data - data.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    const = norms == 0
    safe = np.where(const, 1.0, norms)
    z = centered / safe
    c = np.clip(z.T @ z, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    c[const, :] = np.nan
    c[:, const] = np.nan
    return CorrelationMatrix(labels, c, tuple(l for l, k in zip(labels, const) if k))


# ---------------------------------------------------------------------------
# rendering


def _ordered(labels):
    known = [s.value for s in SLEEVE_ORDER if s.value in labels]
    return known + [l for l in labels if l not in known]


def _fmt(v: float, percent: bool) -> str:
    if v is None or not math.isfinite(v):
        return "n/a"
    return f"{100 * v:.2f}" if percent else f"{v:.2f}"


def _text_table(header, rows) -> str:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    lines = []
    for j, r in enumerate([header] + rows):
        cells = [str(c).ljust(widths[0]) if i == 0 else str(c).rjust(widths[i]) for i, c in enumerate(r)]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _num(v: float) -> str:
    return repr(float(v)) if math.isfinite(v) else "nan"


def report_tables(reports: dict[str, PerformanceReport] | None = None,
                  matrix: CorrelationMatrix | None = None, fmt: str = "text") -> str:
    """Render the performance table and/or the lower-triangle correlation table.

    Columns follow SLEEVE_ORDER; unknown labels go last. CSV
    numbers are full precision fractions so they re-parse exactly.
    """
    if fmt not in ("text", "csv"):
        raise InputError(f"unknown format {fmt!r}")
    parts = []
    if reports:
        cols = _ordered(list(reports))
        header = ["Metric"] + cols
        rows = []
        for f in fields(PerformanceReport):
            if fmt == "csv":
                rows.append([f.name] + [_num(getattr(reports[c], f.name)) for c in cols])
            else:
                rows.append([METRIC_NAMES[f.name]] + [_fmt(getattr(reports[c], f.name), f.name in _PERCENT)
                                                      for c in cols])
        parts.append(_csv([header] + rows) if fmt == "csv" else _text_table(header, rows))
    if matrix is not None:
        cols = _ordered(list(matrix.labels))
        header = ["Strategy"] + cols
        rows = []
        for i, a in enumerate(cols):
            row = [a]
            for j, b in enumerate(cols):
                if j > i:
                    row.append("")
                elif fmt == "csv":
                    row.append(_num(matrix[a, b]))
                else:
                    row.append(_fmt(matrix[a, b], False))
            rows.append(row)
        parts.append(_csv([header] + rows) if fmt == "csv" else _text_table(header, rows))
    return "\n".join(parts)


def parse_report_csv(text: str) -> dict[str, PerformanceReport]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    values = {r[0]: [float(v) for v in r[1:]] for r in body if r and r[0] in METRIC_NAMES}
    return {label: PerformanceReport(**{m: values[m][i] for m in METRIC_NAMES})
            for i, label in enumerate(header[1:])}

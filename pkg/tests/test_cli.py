import csv
import io
from pathlib import Path

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from ctarep.cli import cli
from ctarep.market_data import GbmSpec, ReturnSeries, load_returns, simulate_gbm, write_prices, write_returns
from ctarep.strategy import parse_report_csv, performance

UNIVERSE = """contracts:
  - {root: AA, asset_class: Equity, exchange: X, tx_cost_bp: 2, roll_drag_bp: 15}
  - {root: BB, asset_class: Commodity, exchange: X, tx_cost_bp: 2, roll_drag_bp: 20}
costs:
  round_turns_per_year: [20, 35]
  gross_leverage: 4.0
  avg_roll_drag_bp: 12.0
  mgmt_fee_bp: 50.0
  tx_cost_bp: 2.0
"""

REFERENCE_POINTS = Path(__file__).resolve().parents[1] / "src" / "ctarep" / "data" / "reference_points.csv"


def make_dataset(root: Path, n_days=400, filter_cfg=None, bench_fn=None, **extra):
    (root / "prices").mkdir(parents=True)
    (root / "universe.yaml").write_text(UNIVERSE)
    prices = {}
    for i, r in enumerate(("AA", "BB")):
        prices[r] = simulate_gbm(GbmSpec(0.05 * (i + 1), 0.2, n_days=n_days, seed=10 + i), r)
        write_prices(prices[r], root / "prices" / f"{r}.csv")
    d = prices["AA"].dates[1:]
    rng = np.random.default_rng(0)
    y = bench_fn(prices) if bench_fn else rng.normal(0.0002, 0.008, len(d))
    write_returns(ReturnSeries(d, y, "SGCTAT"), root / "benchmark.csv")
    cfg = {"universe": "universe.yaml", "prices": "prices", "benchmark": "benchmark.csv", "output": "out",
           "horizons": {"st": [3, 5], "lt": [20]}, "filter": filter_cfg or {}}
    cfg.update(extra)
    (root / "config.yaml").write_text(yaml.safe_dump(cfg))
    return root / "config.yaml"


def run(*args):
    res = CliRunner().invoke(cli, [str(a) for a in args])
    return res


def read_csv(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


# -- factors ---------------------------------------------------------------

def test_factors_two_markets(tmp_path):
    cfg = make_dataset(tmp_path)
    res = run("factors", "--config", cfg)
    assert res.exit_code == 0, res.output
    rows = read_csv(tmp_path / "out" / "panel.csv")
    per_date = {}
    for r in rows:
        per_date.setdefault(r["date"], []).append(r)
    assert all(len(v) == 2 for v in per_date.values())
    # each row holds three factor values, so 2 x 3 numbers per date
    assert set(rows[0]) == {"date", "market", "st_score", "lt_score", "mkt_return"}
    assert len(per_date) == 400 - 19
    assert "markets=2" in res.output and "warmup_days=19" in res.output
    assert (tmp_path / "out" / "run_manifest.txt").exists()


def test_factors_missing_price_file(tmp_path):
    cfg = make_dataset(tmp_path)
    (tmp_path / "prices" / "BB.csv").unlink()
    res = run("factors", "--config", cfg)
    assert res.exit_code == 2
    assert "BB" in res.output


def test_factors_rerun_is_byte_identical(tmp_path):
    cfg = make_dataset(tmp_path)
    assert run("factors", "--config", cfg, "-o", tmp_path / "a").exit_code == 0
    assert run("factors", "--config", cfg, "-o", tmp_path / "b").exit_code == 0
    assert (tmp_path / "a" / "panel.csv").read_bytes() == (tmp_path / "b" / "panel.csv").read_bytes()


def test_factors_date_range(tmp_path):
    cfg = make_dataset(tmp_path)
    res = run("factors", "--config", cfg, "--start", "2000-03-01", "--end", "2000-03-31")
    assert res.exit_code == 0, res.output
    dates = {r["date"] for r in read_csv(tmp_path / "out" / "panel.csv")}
    assert min(dates) >= "2000-03-01" and max(dates) <= "2000-03-31"
    assert run("factors", "--config", cfg, "--start", "2016-01-01", "--end", "2015-01-01").exit_code == 2


# -- filter ----------------------------------------------------------------

def _st_benchmark(prices):
    from ctarep.factors import HorizonSet, composite_score

    s = composite_score(prices["AA"], HorizonSet((3, 5)))
    # benchmark covers every date after the first; pad the warm-up with zeros
    y = np.zeros(len(prices["AA"]) - 1)
    y[-len(s):] = 0.3 * s.values
    return y


def test_filter_recovers_known_exposure(tmp_path):
    cfg = make_dataset(tmp_path, filter_cfg={"sigma_eps": 1e-6}, bench_fn=_st_benchmark)
    res = run("filter", "--config", cfg)
    assert res.exit_code == 0, res.output
    rows = read_csv(tmp_path / "out" / "posterior.csv")
    last = rows[-1]["date"]
    final = {r["regressor"]: float(r["smoothed_mean"]) for r in rows if r["date"] == last}
    assert final["AA:ST"] == pytest.approx(0.3, abs=0.02)
    assert abs(final["BB:ST"]) < 0.02
    rep = load_returns(tmp_path / "out" / "replication.csv")
    assert len(rep) == len({r["date"] for r in rows})


def test_filter_single_date_smoothed_equals_filtered(tmp_path):
    cfg = make_dataset(tmp_path, filter_cfg={"sigma_eps": 0.01}, start="2000-06-01", end="2000-06-01")
    res = run("filter", "--config", cfg)
    assert res.exit_code == 0, res.output
    rows = read_csv(tmp_path / "out" / "posterior.csv")
    assert len(rows) == 6
    for r in rows:
        assert r["smoothed_mean"] == r["filtered_mean"] and r["smoothed_var"] == r["filtered_var"]


def test_filter_rerun_identical(tmp_path):
    cfg = make_dataset(tmp_path)
    for out in ("a", "b"):
        assert run("filter", "--config", cfg, "-o", tmp_path / out, "--components", "ST,MKT").exit_code == 0
    # the manifest hashes the output path, so only the data files are compared
    for f in ("posterior.csv", "replication.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


# -- backtest --------------------------------------------------------------

def test_backtest_seven_sleeves_and_net_shift(tmp_path):
    cfg = make_dataset(tmp_path)
    res = run("backtest", "--config", cfg)
    assert res.exit_code == 0, res.output
    out = tmp_path / "out"
    header = (out / "report_gross.csv").read_text().splitlines()[0].split(",")
    assert header == ["Metric", "LTT", "MKT", "STT+LTT", "STT", "MKT+STT+LTT", "MKT+STT", "SGCTAT"]
    gross = parse_report_csv((out / "report_gross.csv").read_text())
    net = parse_report_csv((out / "report_net.csv").read_text())
    streams = read_csv(out / "sleeve_returns.csv")
    drag = 168.0 * 1e-4 / 252
    for label in ("LTT", "MKT+STT"):
        g = np.array([float(r[label]) for r in streams])
        assert gross[label].annual_return == pytest.approx(performance(g).annual_return, rel=1e-12)
        assert net[label].annual_return == pytest.approx(performance(g - drag).annual_return, rel=1e-12)
        assert net[label].volatility == pytest.approx(gross[label].volatility, rel=1e-9)
    assert net["SGCTAT"] == gross["SGCTAT"]
    corr_rows = (out / "correlation_gross.txt").read_text().splitlines()
    assert corr_rows[0].split()[1:] == header[1:]


def test_backtest_subset_and_format(tmp_path):
    cfg = make_dataset(tmp_path)
    res = run("backtest", "--config", cfg, "--sleeves", "STT,SGCTAT", "--format", "csv")
    assert res.exit_code == 0, res.output
    assert res.output.splitlines()[0] == "Metric,STT,SGCTAT"


def test_backtest_errors(tmp_path):
    cfg = make_dataset(tmp_path)
    res = run("backtest", "--config", cfg, "--sleeves", ",")
    assert res.exit_code == 2 and "empty sleeve list" in res.output
    res = run("backtest", "--config", cfg, "--sleeves", "BOGUS")
    assert res.exit_code == 2 and "unknown sleeve" in res.output


def test_bad_config_key(tmp_path):
    (tmp_path / "c.yaml").write_text("nonsense: 1\n")
    assert run("factors", "--config", tmp_path / "c.yaml").exit_code == 2


# -- frontier --------------------------------------------------------------

def test_frontier_reference_points(tmp_path):
    res = run("frontier", REFERENCE_POINTS, "-o", tmp_path / "f")
    assert res.exit_code == 0, res.output
    out = tmp_path / "f"
    assert sorted(p.name for p in out.glob("curve_alpha_*.csv")) == [
        "curve_alpha_0.30.csv", "curve_alpha_0.50.csv", "curve_alpha_0.70.csv"]
    report = dict(line.split(": ", 1) for line in (out / "indifference.txt").read_text().splitlines())
    assert float(report["alpha"]) == pytest.approx(0.78, abs=0.01)
    assert float(report["utility"]) == pytest.approx(0.71, abs=0.01)
    front = [r["label"] for r in read_csv(out / "frontier.csv") if r["on_frontier"] == "1"]
    assert sorted(front) == ["MKT+STT", "MKT+STT+LTT"]


def test_frontier_single_point(tmp_path):
    (tmp_path / "p.csv").write_text("label,rho,y\nONLY,0.7,0.4\n")
    res = run("frontier", tmp_path / "p.csv", "--alpha", "0.5", "-o", tmp_path / "f")
    assert res.exit_code == 0, res.output
    assert not (tmp_path / "f" / "indifference.txt").exists()
    assert "skipped" in res.output
    rows = read_csv(tmp_path / "f" / "frontier.csv")
    assert rows == [{"rho": "0.7", "y": "0.4", "label": "ONLY", "on_frontier": "1"}]


def test_frontier_missing_file(tmp_path):
    assert run("frontier", tmp_path / "none.csv").exit_code == 2


def test_simulate_writes_dataset(tmp_path):
    res = run("simulate", "--out", tmp_path / "ds", "--days", 700, "--seed", 3)
    assert res.exit_code == 0, res.output
    ds = tmp_path / "ds"
    assert len(list((ds / "prices").glob("*.csv"))) == 24
    cfg = yaml.safe_load((ds / "config.yaml").read_text())
    assert cfg["seed"] == 3 and cfg["horizons"]["lt"] == [500]

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctarep.errors import InputError
from ctarep.factors import FactorPanel
from ctarep.market_data import ReturnSeries, write_returns
from ctarep.state_space import FilterSettings
from ctarep.strategy import (
    SLEEVE_ORDER,
    PerformanceReport,
    Sleeve,
    SleeveSpec,
    build_sleeve_returns,
    correlation_matrix,
    max_drawdown,
    parse_report_csv,
    parse_sleeve,
    performance,
    report_tables,
    run_sleeve,
)


def returns(values, name="r", start="2020-01-01"):
    d = np.arange(np.datetime64(start), np.datetime64(start) + len(values))
    return ReturnSeries(d, values, name)


# -- performance -----------------------------------------------------------

def test_constant_one_bp_per_day():
    rep = performance(returns(np.full(252, 1e-4)))
    assert rep.cumulative_return == pytest.approx(1.0001**252 - 1, rel=1e-12)
    assert rep.annual_return == pytest.approx(rep.cumulative_return, rel=1e-12)
    assert rep.volatility == 0.0 and rep.max_drawdown == 0.0
    assert math.isnan(rep.sharpe) and math.isnan(rep.return_over_maxdd) and math.isnan(rep.sharpe_over_maxdd)


def test_single_bad_day_drawdown():
    assert max_drawdown([-0.10] + [0.0] * 20) == pytest.approx(0.10, abs=1e-15)


def test_up_then_down():
    rep = performance([0.10, -0.10])
    assert rep.cumulative_return == pytest.approx(-0.01, abs=1e-15)
    assert rep.max_drawdown == pytest.approx(0.10, abs=1e-15)


def test_performance_closed_forms():
    v = np.array([0.01, -0.02, 0.015, 0.0, -0.005, 0.02])
    rep = performance(v, days_per_year=252)
    growth = np.prod(1 + v)
    annual = growth ** (252 / 6) - 1
    vol = np.sqrt(np.sum((v - v.mean()) ** 2) / 5) * np.sqrt(252)
    equity = np.cumprod(np.concatenate([[1.0], 1 + v]))
    dd = max(1 - equity[j] / equity[: j + 1].max() for j in range(len(equity)))
    assert rep.cumulative_return == pytest.approx(growth - 1, rel=1e-13)
    assert rep.annual_return == pytest.approx(annual, rel=1e-12)
    assert rep.volatility == pytest.approx(vol, rel=1e-12)
    assert rep.sharpe == pytest.approx(annual / vol, rel=1e-12)
    assert rep.max_drawdown == pytest.approx(dd, rel=1e-13)
    assert rep.return_over_maxdd == pytest.approx(annual / dd, rel=1e-12)
    assert rep.sharpe_over_maxdd == pytest.approx(annual / vol / dd, rel=1e-12)


def test_performance_needs_two_returns():
    with pytest.raises(InputError):
        performance([0.01])


def test_iid_volatility_annualization():
    sigma, n = 0.01, 20_000
    rep = performance(np.random.default_rng(0).normal(0.0002, sigma, n))
    target = sigma * np.sqrt(252)
    # sample std has standard error about s / sqrt(2(n-1))
    assert abs(rep.volatility - target) < 3 * target / np.sqrt(2 * (n - 1))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2, allow_nan=False), min_size=2, max_size=80))
def test_drawdown_bounds_and_sharpe_sign(v):
    rep = performance(v)
    assert 0 <= rep.max_drawdown <= 1
    if v[0] < 0:
        assert rep.max_drawdown >= -v[0] - 1e-15
    if rep.volatility > 0 and rep.annual_return != 0:
        assert np.sign(rep.sharpe) == np.sign(rep.annual_return)


# -- correlation -----------------------------------------------------------

def test_correlation_self_negation_and_null():
    rng = np.random.default_rng(1)
    a = returns(rng.standard_normal(10_000), "a")
    neg = returns(-a.values, "neg")
    b = returns(np.random.default_rng(101).standard_normal(10_000), "b")
    m = correlation_matrix([a, neg, b])
    assert m["a", "a"] == 1.0
    assert m["a", "neg"] == pytest.approx(-1.0, abs=1e-12)
    assert m["a", "b"] == pytest.approx(np.corrcoef(a.values, b.values)[0, 1], abs=1e-14)
    # about a 3-sigma bound for T = 1e4
    assert abs(m["a", "b"]) < 0.03
    np.testing.assert_allclose(m.values, m.values.T)
    assert np.linalg.eigvalsh(m.values).min() > -1e-10


def test_correlation_on_date_intersection():
    rng = np.random.default_rng(2)
    a = returns(rng.standard_normal(50), "a")
    b = returns(rng.standard_normal(50), "b", start="2020-01-11")
    m = correlation_matrix([a, b])
    expected = np.corrcoef(a.values[10:], b.values[:40])[0, 1]
    assert m["a", "b"] == pytest.approx(expected, rel=1e-12)


def test_correlation_constant_series_undefined():
    m = correlation_matrix([returns([0.0] * 10, "flat"), returns(np.arange(10.0), "ramp")])
    assert m.undefined == ("flat",)
    assert math.isnan(m["flat", "ramp"])


def test_correlation_permutation_exchangeable():
    rng = np.random.default_rng(3)
    s = [returns(rng.standard_normal(200), n) for n in "abc"]
    m1 = correlation_matrix(s)
    m2 = correlation_matrix([s[2], s[0], s[1]])
    for x in "abc":
        for y in "abc":
            assert m1[x, y] == pytest.approx(m2[x, y], abs=1e-14)


def test_correlation_needs_overlap():
    with pytest.raises(InputError, match="common dates"):
        correlation_matrix([returns([1.0, 2.0], "a"), returns([1.0, 2.0], "b", start="2021-01-01")])


# -- sleeves ---------------------------------------------------------------

def _panel(rng, t_len, markets=("A", "B")):
    k = len(markets)
    d = np.arange(np.datetime64("2015-01-01"), np.datetime64("2015-01-01") + t_len)
    return FactorPanel(d, tuple(markets), rng.uniform(-0.5, 0.5, (t_len, k)),
                       rng.uniform(-0.5, 0.5, (t_len, k)), rng.normal(0, 0.01, (t_len, k)))


def test_sleeve_order_and_parsing():
    assert [s.value for s in SLEEVE_ORDER] == ["LTT", "MKT", "STT+LTT", "STT", "MKT+STT+LTT", "MKT+STT", "SGCTAT"]
    assert parse_sleeve("mkt_stt") is Sleeve.MKT_STT
    assert parse_sleeve("benchmark") is Sleeve.BENCHMARK
    with pytest.raises(InputError, match="unknown sleeve"):
        parse_sleeve("XYZ")
    assert SleeveSpec.of("STT+LTT").components == ("ST", "LT")
    with pytest.raises(InputError, match="return file"):
        SleeveSpec.of("SGCTAT")


def test_mkt_sleeve_replicates_fixed_market_mix():
    rng = np.random.default_rng(4)
    panel = _panel(rng, 1500)
    bench = returns(panel.mkt @ [0.6, 0.4], "SGCTAT", start="2015-01-01")
    r, post = run_sleeve(SleeveSpec.of("MKT"), panel, bench, FilterSettings(sigma_eps=1e-5))
    assert post.labels == ("A:MKT", "B:MKT")
    assert np.corrcoef(r.values, bench.values)[0, 1] > 0.99


def test_disjoint_sleeves_on_noise_are_uncorrelated():
    rng = np.random.default_rng(5)
    t_len = 4000
    panel = _panel(rng, t_len, ("A",))
    bench = returns(rng.normal(0, 0.01, t_len), "SGCTAT", start="2015-01-01")
    s = FilterSettings(sigma_beta=1e-3)
    st_r, _ = run_sleeve(SleeveSpec.of("STT"), panel, bench, s)
    lt_r, _ = run_sleeve(SleeveSpec.of("LTT"), panel, bench, s)
    assert abs(np.corrcoef(st_r.values, lt_r.values)[0, 1]) < 3 / np.sqrt(t_len)


def test_benchmark_pass_through(tmp_path):
    bench = returns(np.random.default_rng(6).normal(0, 0.01, 30), "SGCTAT")
    write_returns(bench, tmp_path / "b.csv")
    spec = SleeveSpec.of("SGCTAT", str(tmp_path / "b.csv"))
    out = build_sleeve_returns(spec, None, None)
    np.testing.assert_array_equal(out.values, bench.values)
    assert out.name == "SGCTAT"


def test_posterior_mismatch_rejected():
    rng = np.random.default_rng(7)
    panel = _panel(rng, 300)
    bench = returns(rng.normal(0, 0.01, 300), start="2015-01-01")
    _, post = run_sleeve(SleeveSpec.of("STT"), panel, bench)
    with pytest.raises(InputError, match="not fitted"):
        build_sleeve_returns(SleeveSpec.of("LTT"), panel, post)


# -- rendering -------------------------------------------------------------

def _reports(labels, seed=8):
    rng = np.random.default_rng(seed)
    return {l: performance(rng.normal(0.0003, 0.01, 500)) for l in labels}


def test_report_columns_follow_sleeve_order():
    labels = ["SGCTAT", "MKT+STT", "LTT", "STT", "MKT", "MKT+STT+LTT", "STT+LTT"]
    text = report_tables(_reports(labels))
    header = text.splitlines()[0].split()
    assert header == ["Metric", "LTT", "MKT", "STT+LTT", "STT", "MKT+STT+LTT", "MKT+STT", "SGCTAT"]
    assert len(text.splitlines()) == 2 + 7


def test_single_sleeve_table():
    rows = report_tables(_reports(["STT"]), fmt="csv").splitlines()
    assert rows[0] == "Metric,STT"
    assert all(len(r.split(",")) == 2 for r in rows)


def test_report_csv_round_trip():
    reps = _reports(["LTT", "MKT", "SGCTAT"])
    reps["FLAT"] = performance(np.full(10, 1e-4))
    back = parse_report_csv(report_tables(reps, fmt="csv"))
    assert list(back) == ["LTT", "MKT", "SGCTAT", "FLAT"]
    for k, r in reps.items():
        for f in PerformanceReport.__dataclass_fields__:
            a, b = getattr(r, f), getattr(back[k], f)
            assert (math.isnan(a) and math.isnan(b)) or a == b


def test_correlation_table_is_lower_triangle():
    rng = np.random.default_rng(9)
    m = correlation_matrix([returns(rng.standard_normal(100), n) for n in ("STT", "LTT", "MKT")])
    rows = report_tables(None, m, "csv").splitlines()
    assert rows[0] == "Strategy,LTT,MKT,STT"
    assert rows[1].endswith(",,") and rows[1].startswith("LTT,1.0")
    assert rows[3].split(",")[3] == "1.0"
    text = report_tables(None, m)
    assert "n/a" not in text and text.splitlines()[2].startswith("LTT")


def test_unknown_format():
    with pytest.raises(InputError):
        report_tables(_reports(["LTT"]), fmt="html")

"""Command-line front end.

Exit codes: 0 success, 1 computation error, 2 input or usage error.
"""

from __future__ import annotations

import csv
import functools
import logging
import shutil
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .analytics import UtilityPoint, cobb_douglas, indifference_alpha, iso_utility_curve, pareto_frontier, read_points, write_curve
from .errors import InputError, ModelError
from .factors import write_panel
from .market_data import default_universe_path, load_universe, write_prices, write_returns
from .pipeline import RunConfig, align_panel, compute_panel, load_benchmark, manifest_text, run_backtest
from .state_space import decode_exposures, replicate_returns, write_posterior
from .strategy import SleeveSpec, report_tables
from .synthetic import DEFAULT_SEED, synthetic_dataset

logger = logging.getLogger("ctarep")


def _guarded(fn):
    """Map library errors to exit codes; click handles its own usage errors (2)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except (ModelError, FloatingPointError, np.linalg.LinAlgError) as exc:
            click.echo(f"computation failed: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _config(config_path, **overrides) -> RunConfig:
    cfg = RunConfig.load(config_path) if config_path else RunConfig()
    cfg = cfg.with_overrides(**overrides)
    cfg.validate()
    return cfg


def _write_manifest(out: Path, command: str, cfg, outputs, extra=None):
    (out / "run_manifest.txt").write_text(manifest_text(command, cfg, outputs, extra))


_config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                              help="YAML run configuration.")
_output_option = click.option("--output", "-o", type=click.Path(file_okay=False), help="Output directory.")


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def cli(verbose):
    """CTA replication from lookback-straddle trend factors."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.command()
@click.option("--out", "out", type=click.Path(file_okay=False), required=True, help="Dataset directory to create.")
@click.option("--days", type=click.IntRange(min=600), default=2000, show_default=True)
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@_guarded
def simulate(out, days, seed):
    """Write the synthetic 24-contract dataset and a matching run config."""
    out = Path(out)
    (out / "prices").mkdir(parents=True, exist_ok=True)
    shutil.copyfile(default_universe_path(), out / "universe.yaml")
    ds = synthetic_dataset(load_universe(out / "universe.yaml"), n_days=days, seed=seed)
    for root, p in ds.prices.items():
        write_prices(p, out / "prices" / f"{root}.csv")
    write_returns(ds.benchmark, out / "benchmark.csv")
    config = {
        "universe": "universe.yaml",
        "prices": "prices",
        "benchmark": "benchmark.csv",
        "output": "results",
        "seed": seed,
        "days_per_year": 252,
        "horizons": {"st": [10, 20, 40, 60], "lt": [500]},
        "filter": {"sigma_beta": 0.01 / 252**0.5, "sigma_eps": None, "eps_fraction": 0.2, "burn_in": 250,
                   "prior_corr_within_class": 0.2},
        "net_level": "hi",
    }
    (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=False))
    _write_manifest(out, "simulate", None, ["universe.yaml", "prices/", "benchmark.csv", "config.yaml"],
                    {"seed": seed, "days": days})
    click.echo(f"wrote {len(ds.prices)} price files and benchmark ({len(ds.benchmark)} days) to {out}")


@cli.command()
@_config_option
@_output_option
@click.option("--start")
@click.option("--end")
@_guarded
def factors(config_path, output, start, end):
    """Compute the ST/LT/MKT factor panel."""
    cfg = _config(config_path, output=output, start=start, end=end)
    _, panel = compute_panel(cfg)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_panel(panel, out / "panel.csv")
    _write_manifest(out, "factors", cfg, ["panel.csv"])
    warmup = max(cfg.st.longest, cfg.lt.longest) - 1
    click.echo(f"markets={len(panel.markets)} dates={len(panel)} "
               f"first={panel.dates[0]} last={panel.dates[-1]} warmup_days={warmup}")


@cli.command("filter")
@_config_option
@_output_option
@click.option("--components", default="ST,LT,MKT", show_default=True,
              help="Comma-separated factor kinds fed to the filter.")
@_guarded
def filter_cmd(config_path, output, components):
    """Decode time-varying exposures of the benchmark."""
    cfg = _config(config_path, output=output)
    kinds = tuple(k.strip().upper() for k in components.split(",") if k.strip())
    _, panel = compute_panel(cfg)
    panel, bench = align_panel(panel, load_benchmark(cfg))
    x, labels = panel.design(kinds)
    model = cfg.filter_settings.model_for(labels, bench.values, panel.label_groups(kinds), x)
    post = decode_exposures(model, panel, bench, kinds)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_posterior(post, out / "posterior.csv")
    write_returns(replicate_returns(post, x), out / "replication.csv")
    _write_manifest(out, "filter", cfg, ["posterior.csv", "replication.csv"],
                    {"sigma_beta": repr(model.sigma_beta), "sigma_eps": repr(model.sigma_eps),
                     "loglik": repr(post.loglik)})
    click.echo(f"K={model.k} T={len(post)} loglik={post.loglik:.6g}")


@cli.command()
@_config_option
@_output_option
@click.option("--sleeves", help="Comma-separated sleeve names (default: all seven).")
@click.option("--start")
@click.option("--end")
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default=None,
              help="Echo format; both text and CSV files are always written.")
@_guarded
def backtest(config_path, output, sleeves, start, end, fmt):
    """Table-style sleeve reports, gross and net of costs."""
    cfg = _config(config_path, output=output, start=start, end=end)
    names = cfg.sleeves if sleeves is None else [s for s in sleeves.split(",") if s.strip()]
    if not names:
        raise click.UsageError("empty sleeve list")
    specs = [SleeveSpec.of(n, cfg.benchmark) for n in names]
    res = run_backtest(cfg, specs)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for tag, reports, matrix in (("gross", res.gross, res.correlation), ("net", res.net, res.net_correlation)):
        for kind in ("text", "csv"):
            ext = "txt" if kind == "text" else "csv"
            (out / f"report_{tag}.{ext}").write_text(report_tables(reports, None, kind))
            (out / f"correlation_{tag}.{ext}").write_text(report_tables(None, matrix, kind))
            files += [f"report_{tag}.{ext}", f"correlation_{tag}.{ext}"]
    _write_returns_table(res.streams, out / "sleeve_returns.csv")
    files.append("sleeve_returns.csv")
    _write_manifest(out, "backtest", cfg, files, {"annual_cost_bp": repr(res.drag_bp)})
    if fmt:
        click.echo(report_tables(res.gross, res.correlation, fmt))
    else:
        click.echo(f"{len(specs)} sleeves, net drag {res.drag_bp:g} bp/yr, reports in {out}")


def _write_returns_table(streams, path):
    labels = list(streams)
    dates = streams[labels[0]].dates
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + labels)
        cols = [streams[l].align(dates).values for l in labels]
        for i, d in enumerate(dates):
            w.writerow([str(d)] + [repr(float(c[i])) for c in cols])


@cli.command()
@click.argument("points", type=click.Path(dir_okay=False))
@click.option("--alpha", "alphas", type=float, multiple=True, help="Cobb-Douglas weights (repeatable).")
@click.option("--exclude", multiple=True, help="Labels to drop before the frontier (e.g. the benchmark).")
@click.option("--rho-min", type=float, default=0.5, show_default=True)
@click.option("--n-grid", type=click.IntRange(min=2), default=101, show_default=True)
@_output_option
@_guarded
def frontier(points, alphas, exclude, rho_min, n_grid, output):
    """Iso-utility curves, Pareto frontier and indifference weight."""
    pts = [p for p in read_points(points) if p.label not in set(exclude)]
    if not pts:
        raise InputError("no points left after exclusions")
    if not 0 < rho_min < 1:
        raise InputError("--rho-min must be in (0, 1)")
    alphas = alphas or (0.30, 0.50, 0.70)
    out = Path(output or "frontier")
    out.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(rho_min, 1.0, n_grid)
    files = []
    for a in alphas:
        rows = []
        for p in pts:
            u = cobb_douglas(p, a)
            rows += [(r, y, p.label) for r, y in iso_utility_curve(u, a, grid)]
        name = f"curve_alpha_{a:.2f}.csv"
        write_curve(rows, out / name)
        files.append(name)
    front = pareto_frontier(pts)
    labels = {id(p) for p in front}
    with (out / "frontier.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho", "y", "label", "on_frontier"])
        for p in pts:
            w.writerow([repr(p.rho_corr), repr(p.y), p.label, int(id(p) in labels)])
    files.append("frontier.csv")
    if len(front) >= 2:
        p1, p2 = sorted(front, key=lambda p: -p.y)[:2]
        ind = indifference_alpha(p1, p2)
        text = (f"point_1: {p1.label} rho={p1.rho_corr:g} y={p1.y:g}\n"
                f"point_2: {p2.label} rho={p2.rho_corr:g} y={p2.y:g}\n"
                f"alpha: {ind.alpha:.6f}\n"
                f"utility: {ind.utility:.6f}\n"
                f"alpha_in_unit_interval: {ind.in_unit_interval}\n")
        (out / "indifference.txt").write_text(text)
        files.append("indifference.txt")
        click.echo(f"indifference alpha={ind.alpha:.4f} U={ind.utility:.4f} ({p1.label} vs {p2.label})")
    else:
        click.echo("fewer than 2 Pareto points; indifference report skipped")
    _write_manifest(out, "frontier", None, files, {"points": Path(points).name,
                                                   "alphas": ",".join(f"{a:g}" for a in alphas)})
    click.echo(f"frontier: {', '.join(p.label or f'({p.rho_corr:g},{p.y:g})' for p in front)}")


def main(argv=None):
    cli.main(args=argv, prog_name="ctarep")


if __name__ == "__main__":
    main()

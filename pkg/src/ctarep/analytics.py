"""Two-factor Sharpe blend and correlation/return-to-drawdown utility tools."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class BlendInputs:
    """Expected returns of two unit-variance factors and their correlation."""

    mu_st: float
    mu_lt: float
    rho: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise InputError(f"factor correlation must lie in (-1, 1), got {self.rho}")


@dataclass(frozen=True)
class OptimalWeight:
    w_st: float
    w_lt: float
    in_unit_interval: bool


def blend_variance(w_st, rho):
    return 1.0 + 2.0 * (rho - 1.0) * w_st * (1.0 - w_st)


def blend_sharpe(w_st, inputs: BlendInputs):
    var = blend_variance(w_st, inputs.rho)
    if np.any(np.asarray(var) <= 0):
        raise InputError("blend variance is not positive")
    return (w_st * inputs.mu_st + (1.0 - w_st) * inputs.mu_lt) / np.sqrt(var)


def optimal_weight(inputs: BlendInputs) -> OptimalWeight:
    """Unconstrained Sharpe-maximizing short-horizon weight.

    The result is not clipped to [0, 1]; ``in_unit_interval`` tells the caller
    whether the optimum implies a short position.
    """
    denom = (inputs.mu_st + inputs.mu_lt) * (1.0 - inputs.rho)
    if denom == 0:
        raise InputError("degenerate blend: mu_st + mu_lt == 0")
    w = (inputs.mu_st - inputs.rho * inputs.mu_lt) / denom
    return OptimalWeight(w, 1.0 - w, 0.0 <= w <= 1.0)


@dataclass(frozen=True)
class UtilityPoint:
    rho_corr: float
    y: float
    label: str = ""


def cobb_douglas(p: UtilityPoint, alpha: float) -> float:
    if p.rho_corr <= 0 or p.y <= 0:
        raise InputError(f"Cobb-Douglas needs positive coordinates, got ({p.rho_corr}, {p.y})")
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"alpha must be in [0, 1], got {alpha}")
    return p.rho_corr**alpha * p.y ** (1.0 - alpha)


def ces_utility(x1: float, x2: float, alpha: float, rho_ces: float) -> float:
    """CES aggregate; Cobb-Douglas is the ``rho_ces -> 0`` limit and must be called directly."""
    if x1 <= 0 or x2 <= 0:
        raise InputError("CES needs positive inputs")
    if rho_ces == 0:
        raise InputError("rho_ces == 0 is the Cobb-Douglas limit; use cobb_douglas")
    return (alpha * x1**rho_ces + (1.0 - alpha) * x2**rho_ces) ** (1.0 / rho_ces)


def iso_utility_curve(u: float, alpha: float, rho_grid) -> list[tuple[float, float]]:
    """Points (rho, y) with ``rho^alpha y^(1-alpha) = u``."""
    if u <= 0 or not 0.0 < alpha < 1.0:
        raise InputError("need u > 0 and alpha in (0, 1)")
    grid = np.asarray(rho_grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid > 1):
        raise InputError("correlation grid must lie in (0, 1]")
    y = u ** (1.0 / (1.0 - alpha)) * grid ** (-alpha / (1.0 - alpha))
    return list(zip(grid.tolist(), y.tolist()))


@dataclass(frozen=True)
class Indifference:
    alpha: float
    utility: float
    in_unit_interval: bool


def indifference_alpha(p1: UtilityPoint, p2: UtilityPoint) -> Indifference:
    """The Cobb-Douglas weight at which two points have equal utility."""
    if p1.rho_corr == p2.rho_corr or p1.y == p2.y:
        raise InputError("points must differ in both coordinates")
    ly = math.log(p2.y / p1.y)
    lr = math.log(p1.rho_corr / p2.rho_corr)
    if ly + lr == 0:
        raise InputError("coordinate ratios cancel; no Cobb-Douglas weight separates the points")
    alpha = ly / (ly + lr)
    ok = 0.0 < alpha < 1.0
    u = p1.rho_corr**alpha * p1.y ** (1.0 - alpha) if ok else math.nan
    return Indifference(alpha, u, ok)


def dominates(a: UtilityPoint, b: UtilityPoint) -> bool:
    return a.rho_corr >= b.rho_corr and a.y >= b.y and (a.rho_corr > b.rho_corr or a.y > b.y)


def pareto_frontier(points) -> list[UtilityPoint]:
    """Non-dominated points, sorted by increasing correlation.

    Sort by (rho desc, y desc) and sweep keeping a running best y; exact
    duplicates do not dominate each other and are all kept.
    """
    pts = list(points)
    order = sorted(range(len(pts)), key=lambda i: (-pts[i].rho_corr, -pts[i].y))
    keep = []
    best_y = -math.inf
    best_rho = math.nan
    for i in order:
        p = pts[i]
        if p.y > best_y:
            keep.append(i)
            best_y, best_rho = p.y, p.rho_corr
        elif p.y == best_y and p.rho_corr == best_rho:
            keep.append(i)
    return sorted((pts[i] for i in keep), key=lambda p: (p.rho_corr, -p.y))


def read_points(path) -> list[UtilityPoint]:
    """Read ``label,rho,y`` (label optional) CSV."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"points file not found: {path}")
    out = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"rho", "y"} <= set(reader.fieldnames):
            raise InputError(f"{path}: expected columns rho,y[,label]")
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(UtilityPoint(float(row["rho"]), float(row["y"]), (row.get("label") or "").strip()))
            except ValueError:
                raise InputError(f"{path}:{lineno}: bad number") from None
    if not out:
        raise InputError(f"{path}: no points")
    return out


def write_curve(points, path, label: str | None = None) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho", "y", "label"])
        for item in points:
            if isinstance(item, UtilityPoint):
                w.writerow([repr(item.rho_corr), repr(item.y), item.label])
            else:
                rho, y, *rest = item
                w.writerow([repr(float(rho)), repr(float(y)), rest[0] if rest else (label or "")])

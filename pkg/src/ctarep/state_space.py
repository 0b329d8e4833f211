"""Gaussian random-walk regression: forward filter, backward smoother, decoders.

State: K regression coefficients following ``beta_t = beta_{t-1} + eta_t`` with
``eta_t ~ N(0, Q)``. Observation: scalar ``y_t = x_t . beta_t + eps_t`` with
``eps_t ~ N(0, sigma_eps^2)``. ``Q = sigma_beta^2 * C`` where ``C`` is a prior
correlation matrix across regressors (identity gives the plain Kalman filter).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ModelError
from .factors import FactorPanel
from .market_data import PriceSeries, ReturnSeries, intersect_dates

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2 * np.pi)
RIDGE = 1e-12
DEFAULT_SIGMA_BETA = 0.01 / np.sqrt(252)


def constant_block_correlation(groups, rho: float) -> np.ndarray:
    """Correlation ``rho`` between regressors sharing a group key, 0 otherwise."""
    groups = list(groups)
    g = np.array([groups.index(x) for x in groups])
    c = np.where(g[:, None] == g[None, :], rho, 0.0)
    np.fill_diagonal(c, 1.0)
    return c


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    regressor_labels: tuple[str, ...]
    sigma_beta: float
    sigma_eps: float
    state_cov_prior: np.ndarray
    beta0_mean: np.ndarray
    beta0_cov: np.ndarray

    def __post_init__(self):
        k = len(self.regressor_labels)
        q = np.asarray(self.state_cov_prior, dtype=float)
        m0 = np.asarray(self.beta0_mean, dtype=float).reshape(-1)
        p0 = np.asarray(self.beta0_cov, dtype=float)
        if self.sigma_beta <= 0 or self.sigma_eps <= 0:
            raise InputError("sigma_beta and sigma_eps must be > 0")
        if q.shape != (k, k) or p0.shape != (k, k) or m0.shape != (k,):
            raise InputError(f"model dimensions do not match {k} regressors")
        if not np.allclose(q, q.T, atol=1e-12) or np.linalg.eigvalsh(q).min() < -1e-10:
            raise InputError("state_cov_prior must be symmetric PSD")
        if not np.allclose(p0, p0.T, atol=1e-12) or np.linalg.eigvalsh(p0).min() <= 0:
            raise InputError("beta0_cov must be symmetric positive definite")
        object.__setattr__(self, "state_cov_prior", q)
        object.__setattr__(self, "beta0_mean", m0)
        object.__setattr__(self, "beta0_cov", p0)

    @property
    def k(self) -> int:
        return len(self.regressor_labels)

    @classmethod
    def build(
        cls,
        labels,
        sigma_beta: float = DEFAULT_SIGMA_BETA,
        sigma_eps: float = 1e-2,
        corr: np.ndarray | None = None,
        beta0_mean=0.0,
        beta0_var: float = 1.0,
    ) -> StateSpaceModel:
        labels = tuple(labels)
        k = len(labels)
        corr = np.eye(k) if corr is None else np.asarray(corr, dtype=float)
        mean = np.broadcast_to(np.asarray(beta0_mean, dtype=float), (k,)).copy()
        return cls(labels, sigma_beta, sigma_eps, sigma_beta**2 * corr, mean, beta0_var * np.eye(k))

    def permuted(self, order) -> StateSpaceModel:
        order = np.asarray(order)
        ix = np.ix_(order, order)
        return StateSpaceModel(
            tuple(self.regressor_labels[i] for i in order), self.sigma_beta, self.sigma_eps,
            self.state_cov_prior[ix], self.beta0_mean[order], self.beta0_cov[ix],
        )


@dataclass(frozen=True, eq=False)
class Observation:
    date: np.datetime64
    y: float
    x: np.ndarray


@dataclass(eq=False)
class PosteriorPath:
    dates: np.ndarray
    labels: tuple[str, ...]
    filtered_mean: np.ndarray
    filtered_cov: np.ndarray
    loglik: float
    smoothed_mean: np.ndarray | None = None
    smoothed_cov: np.ndarray | None = None
    x: np.ndarray | None = field(default=None, repr=False)
    y: np.ndarray | None = field(default=None, repr=False)
    beta0_mean: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.dates)


def _as_arrays(obs):
    """Accept either a sequence of Observation or a (dates, x, y) triple."""
    if isinstance(obs, tuple) and len(obs) == 3:
        dates, x, y = obs
    else:
        obs = list(obs)
        dates = np.array([o.date for o in obs], dtype="datetime64[D]")
        x = np.array([np.asarray(o.x, dtype=float) for o in obs])
        y = np.array([o.y for o in obs], dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    return np.asarray(dates, dtype="datetime64[D]"), x, y


def filter_forward(model: StateSpaceModel, obs) -> PosteriorPath:
    """Predict/correct recursion with rank-one scalar updates (O(K^2) per day).

    The covariance update is written in Joseph form, which stays symmetric PSD
    for any gain; the result is then symmetrized to remove roundoff.
    """
    dates, x, y = _as_arrays(obs)
    t_len, k = x.shape
    if t_len < 1:
        raise InputError("need at least one observation")
    if k != model.k:
        raise InputError(f"observations have {k} regressors, model has {model.k}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("non-finite regressor or observation")

    q = model.state_cov_prior
    r = model.sigma_eps**2
    mean = model.beta0_mean.copy()
    cov = model.beta0_cov.copy()
    means = np.empty((t_len, k))
    covs = np.empty((t_len, k, k))
    loglik = 0.0
    for t in range(t_len):
        cov = cov + q
        xt = x[t]
        px = cov @ xt
        s = xt @ px + r
        if not s > 0:
            raise ModelError(f"innovation variance {s} <= 0 at {dates[t]}")
        v = y[t] - xt @ mean
        gain = px / s
        mean = mean + gain * v
        # Joseph form (I - g x')P(I - g x')' + r g g', expanded for a rank-one x
        a = cov - np.outer(gain, px)
        ax = a @ xt
        cov = a - np.outer(ax, gain) + r * np.outer(gain, gain)
        cov = 0.5 * (cov + cov.T)
        loglik -= 0.5 * (LOG_2PI + np.log(s) + v * v / s)
        means[t] = mean
        covs[t] = cov
    return PosteriorPath(dates, model.regressor_labels, means, covs, float(loglik),
                         x=x, y=y, beta0_mean=model.beta0_mean.copy())


def smooth_backward(model: StateSpaceModel, path: PosteriorPath) -> PosteriorPath:
    """Rauch-Tung-Striebel pass for the random-walk transition."""
    m_f, p_f = path.filtered_mean, path.filtered_cov
    t_len, k = m_f.shape
    q = model.state_cov_prior
    m_s = np.empty_like(m_f)
    p_s = np.empty_like(p_f)
    m_s[-1] = m_f[-1]
    p_s[-1] = p_f[-1]
    ridge = RIDGE * np.eye(k)
    for t in range(t_len - 2, -1, -1):
        pred = p_f[t] + q + ridge
        # G = P_t pred^-1, via a symmetric solve: G' = pred^-1 P_t
        g = np.linalg.solve(pred, p_f[t]).T
        m_s[t] = m_f[t] + g @ (m_s[t + 1] - m_f[t])
        c = p_f[t] + g @ (p_s[t + 1] - pred) @ g.T
        p_s[t] = 0.5 * (c + c.T)
    path.smoothed_mean = m_s
    path.smoothed_cov = p_s
    return path


def run_filter(model: StateSpaceModel, obs) -> PosteriorPath:
    return smooth_backward(model, filter_forward(model, obs))


def estimate_sigma_eps(y, burn_in: int = 250, fraction: float = 0.2) -> float:
    """``fraction * std(y)`` over the first ``burn_in`` observations."""
    head = np.asarray(y, dtype=float)[: max(burn_in, 2)]
    s = float(np.std(head, ddof=1)) if len(head) > 1 else 0.0
    if not s > 0:
        raise ModelError("cannot set sigma_eps from a constant burn-in window")
    return fraction * s


def fit_noise_scales(model: StateSpaceModel, obs, sigma_beta_grid, sigma_eps_grid) -> tuple[StateSpaceModel, float]:
    """Grid maximum likelihood over (sigma_beta, sigma_eps), keeping the prior correlation."""
    corr = model.state_cov_prior / model.sigma_beta**2
    best = None
    for sb in sigma_beta_grid:
        for se in sigma_eps_grid:
            cand = StateSpaceModel(model.regressor_labels, float(sb), float(se), sb**2 * corr,
                                   model.beta0_mean, model.beta0_cov)
            ll = filter_forward(cand, obs).loglik
            if best is None or ll > best[1]:
                best = (cand, ll)
    logger.info("grid MLE: sigma_beta=%.3g sigma_eps=%.3g loglik=%.6g",
                best[0].sigma_beta, best[0].sigma_eps, best[1])
    return best


def _aligned_benchmark(dates, benchmark: ReturnSeries):
    common = intersect_dates(dates, benchmark.dates)
    if len(common) != len(dates):
        raise InputError(
            f"benchmark covers {len(common)} of {len(dates)} panel dates; align the inputs first"
        )
    return benchmark.align(dates).values


def decode_exposures(model: StateSpaceModel, panel: FactorPanel, benchmark: ReturnSeries,
                     components=("ST", "LT", "MKT")) -> PosteriorPath:
    """Filter and smooth benchmark returns on the flattened panel.

    Regressor order is market-major, factor-kind-minor (ST, LT, MKT).
    """
    x, labels = panel.design(components)
    if tuple(labels) != model.regressor_labels:
        raise InputError("model regressor labels do not match the panel design")
    y = _aligned_benchmark(panel.dates, benchmark)
    return run_filter(model, (panel.dates, x, y))


def decode_nav_weights(model: StateSpaceModel, asset_returns: dict[str, ReturnSeries], nav: PriceSeries) -> PosteriorPath:
    """Recover lagged portfolio weights from a NAV path.

    ``NAV_t / NAV_{t-1} - 1`` is regressed on same-day asset-class returns, so
    the state at ``t`` is the weight vector held over ``(t-1, t]``.
    """
    if np.any(nav.values <= 0):
        raise InputError("non-positive NAV")
    classes = list(model.regressor_labels)
    missing = [c for c in classes if c not in asset_returns]
    if missing:
        raise InputError(f"missing asset-class returns for {missing}")
    nav_ret = nav.values[1:] / nav.values[:-1] - 1.0
    nav_dates = nav.dates[1:]
    dates = intersect_dates(nav_dates, *(asset_returns[c].dates for c in classes))
    if len(dates) != len(nav_dates):
        raise InputError("NAV and asset-class returns are not aligned")
    x = np.column_stack([asset_returns[c].align(dates).values for c in classes])
    return run_filter(model, (dates, x, nav_ret))


def nav_weight_model(classes, sigma_w: float, sigma_eps: float, cross_corr: float = 0.0) -> StateSpaceModel:
    """Default NAV-weight prior: mean 1/K, variance 0.25, constant cross correlation."""
    k = len(classes)
    corr = np.full((k, k), cross_corr)
    np.fill_diagonal(corr, 1.0)
    return StateSpaceModel.build(classes, sigma_w, sigma_eps, corr, beta0_mean=1.0 / k, beta0_var=0.25)


def replicate_returns(path: PosteriorPath, x: np.ndarray | None = None, name: str = "") -> ReturnSeries:
    """One-step-ahead replication ``x_t . filtered_mean_{t-1}`` (prior mean at t=0)."""
    x = path.x if x is None else np.asarray(x, dtype=float)
    lagged = np.vstack([path.beta0_mean[None, :], path.filtered_mean[:-1]])
    return ReturnSeries(path.dates, np.einsum("tk,tk->t", x, lagged), name)


def write_posterior(path: PosteriorPath, out) -> None:
    smoothed = path.smoothed_mean is not None
    with Path(out).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "regressor", "filtered_mean", "filtered_var", "smoothed_mean", "smoothed_var"])
        for t, d in enumerate(path.dates):
            for j, lab in enumerate(path.labels):
                row = [str(d), lab, repr(float(path.filtered_mean[t, j])), repr(float(path.filtered_cov[t, j, j]))]
                if smoothed:
                    row += [repr(float(path.smoothed_mean[t, j])), repr(float(path.smoothed_cov[t, j, j]))]
                else:
                    row += ["", ""]
                w.writerow(row)


@dataclass
class FilterSettings:
    """Model-config file contents (YAML). ``None`` scales are set from the data."""

    sigma_beta: float | None = DEFAULT_SIGMA_BETA
    sigma_eps: float | None = None
    eps_fraction: float = 0.2
    burn_in: int = 250
    prior_corr_within_class: float | None = None
    beta0_mean: float = 0.0
    beta0_var: float = 1.0
    mle: bool = False
    mle_grid_points: int = 5

    @classmethod
    def from_dict(cls, d: dict | None) -> FilterSettings:
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown filter settings {sorted(unknown)}")
        return cls(**d)

    def model_for(self, labels, y, groups=None, x=None) -> StateSpaceModel:
        """Build the model; with ``mle`` set and ``x`` given, grid-fit both noise scales."""
        sb = self.sigma_beta if self.sigma_beta is not None else DEFAULT_SIGMA_BETA
        se = self.sigma_eps if self.sigma_eps is not None else estimate_sigma_eps(y, self.burn_in, self.eps_fraction)
        corr = None
        if self.prior_corr_within_class is not None and groups is not None:
            corr = constant_block_correlation(groups, self.prior_corr_within_class)
        model = StateSpaceModel.build(labels, sb, se, corr, self.beta0_mean, self.beta0_var)
        if self.mle and x is not None:
            n = self.mle_grid_points
            y_std = estimate_sigma_eps(y, self.burn_in, 1.0)
            model, _ = fit_noise_scales(model, (np.arange(len(y)), x, y),
                                        sb * np.logspace(-1, 1, n), y_std * np.logspace(-1, 0, n))
        return model

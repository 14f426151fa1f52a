"""Comparison models: a frequency/dropout/amount probabilistic customer
model (maximum likelihood via derivative-free simplex over log-parameters,
conditional expectations via the Gaussian hypergeometric series) and a
lag-feature ridge regression.

Transactions are purchase days (same-day purchases merge into one record of
summed value); recency/length/horizon are measured in periods, one period
being a day or a week depending on the use case.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import betaln, gammaln

from .data import UserSeries
from .errors import DataError, FittingError, NumericError, UsageError
from .pipeline import calendar_features

__all__ = [
    "RfmSummary",
    "rfm_summarize",
    "BgnbdParams",
    "bgnbd_loglik",
    "fit_bgnbd",
    "bgnbd_expected_transactions",
    "GammaGammaParams",
    "gamma_gamma_loglik",
    "fit_gamma_gamma",
    "expected_monetary",
    "btyd_forecast",
    "hyp2f1_series",
    "ridge_lag_fit",
    "ridge_lag_predict",
    "build_lag_features",
    "RIDGE_LAGS",
]

RIDGE_LAGS = [1, 2, 4, 8, 13, 26]


# ---------------------------------------------------------------------------
# RFM summaries


@dataclass
class RfmSummary:
    user_id: int
    x: int  # repeat-transaction count
    t_x: float  # recency, periods from first purchase
    T: float  # observation length, periods from first purchase
    mean_value: float  # mean purchase-day value (nan when no purchases)
    n_purchases: int
    has_purchases: bool


def rfm_summarize(
    series: UserSeries, cutoff: dt.date | None = None, period_days: float = 1.0
) -> RfmSummary:
    """Summarize one user's history through the cutoff date.

    Users with no purchases get x = 0 and the observation clock anchored at
    the cohort date; downstream value estimates fall back to the population
    mean for them.
    """
    if cutoff is None:
        cutoff = series.cutoff_date
    cutoff_age = series.age_of(cutoff)
    if not 0 <= cutoff_age <= series.n_days - 1:
        raise UsageError(
            f"cutoff {cutoff} outside user {series.user_id}'s observation window"
        )
    z = series.values[: cutoff_age + 1]
    buy_days = np.flatnonzero(z > 0)
    if buy_days.size == 0:
        return RfmSummary(
            user_id=series.user_id,
            x=0,
            t_x=0.0,
            T=cutoff_age / period_days,
            mean_value=float("nan"),
            n_purchases=0,
            has_purchases=False,
        )
    first = int(buy_days[0])
    return RfmSummary(
        user_id=series.user_id,
        x=int(buy_days.size - 1),
        t_x=float(buy_days[-1] - first) / period_days,
        T=float(cutoff_age - first) / period_days,
        mean_value=float(z[buy_days].mean()),
        n_purchases=int(buy_days.size),
        has_purchases=True,
    )


# ---------------------------------------------------------------------------
# frequency/dropout model


@dataclass
class BgnbdParams:
    r: float
    alpha: float
    a: float
    b: float

    def validate(self):
        if min(self.r, self.alpha, self.a, self.b) <= 0:
            raise DataError(f"parameters must be positive: {self}")

    def to_dict(self):
        return {"family": "bgnbd", "version": 1, "r": self.r, "alpha": self.alpha,
                "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d):
        return cls(r=d["r"], alpha=d["alpha"], a=d["a"], b=d["b"])


def _rfm_arrays(summaries):
    x = np.array([s.x for s in summaries], dtype=np.float64)
    t_x = np.array([s.t_x for s in summaries], dtype=np.float64)
    T = np.array([s.T for s in summaries], dtype=np.float64)
    return x, t_x, T


def _bgnbd_loglik_terms(r, alpha, a, b, x, t_x, T):
    """Per-user log-likelihood of the two-term individual likelihood."""
    ln_common = (
        gammaln(r + x)
        - gammaln(r)
        + r * np.log(alpha)
        + betaln(a, b + x)
        - betaln(a, b)
    )
    ln_alive = ln_common - (r + x) * np.log(alpha + T)
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_dead = np.where(
            x > 0,
            gammaln(r + x)
            - gammaln(r)
            + r * np.log(alpha)
            + betaln(a + 1, np.maximum(b + x - 1, 1e-300))
            - betaln(a, b)
            - (r + x) * np.log(alpha + t_x),
            -np.inf,
        )
    return np.logaddexp(ln_alive, ln_dead)


def bgnbd_loglik(params: BgnbdParams, summaries) -> float:
    """Sum of per-user log-likelihoods, computed via log-gamma for
    stability."""
    params.validate()
    if not summaries:
        raise UsageError("no summaries given")
    x, t_x, T = _rfm_arrays(summaries)
    terms = _bgnbd_loglik_terms(params.r, params.alpha, params.a, params.b, x, t_x, T)
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        raise FittingError(f"non-finite likelihood term for user index {int(bad[0])}")
    return float(terms.sum())


def _simplex_fit(neg_loglik, x0_log, max_iter=4000):
    # convergence is the 1e-6 simplex diameter in log-parameter space; the
    # function tolerance merely has to sit above float evaluation noise.
    # The search restarts once from its own optimum, which rebuilds the
    # simplex and walks out of premature collapses.
    f0 = abs(float(neg_loglik(x0_log)))
    options = {
        "xatol": 1e-6,
        "fatol": max(1e-9, 1e-9 * f0),
        "maxiter": max_iter,
        "maxfev": max_iter,
    }
    res = minimize(neg_loglik, x0_log, method="Nelder-Mead", options=options)
    res2 = minimize(neg_loglik, res.x, method="Nelder-Mead", options=options)
    return res2 if res2.fun <= res.fun else res


def fit_bgnbd(
    summaries,
    init: tuple | None = None,
    max_iter: int = 4000,
) -> BgnbdParams:
    """Maximum likelihood over log-parameters with a Nelder-Mead simplex,
    converged when the simplex collapses below 1e-6 in log-space. The
    default start matches the observed repeat rate so the scale is sane."""
    if not summaries:
        raise UsageError("no summaries given")
    x, t_x, T = _rfm_arrays(summaries)
    if init is None:
        rate = max(x.sum() / max(T.sum(), 1e-9), 1e-3)
        init = (1.0, 1.0 / rate, 1.0, 1.0)

    def neg(log_params):
        r, alpha, a, b = np.exp(log_params)
        terms = _bgnbd_loglik_terms(r, alpha, a, b, x, t_x, T)
        if not np.all(np.isfinite(terms)):
            return 1e12
        return -float(terms.sum())

    res = _simplex_fit(neg, np.log(np.asarray(init, dtype=np.float64)), max_iter)
    r, alpha, a, b = np.exp(res.x)
    params = BgnbdParams(r=r, alpha=alpha, a=a, b=b)
    if not res.success:
        raise FittingError(
            f"simplex did not converge in {max_iter} iterations", best_params=params
        )
    return params


def hyp2f1_series(a1: float, b1: float, c1: float, z, rtol: float = 1e-12,
                  max_terms: int = 100000):
    """Gaussian hypergeometric 2F1 by its power series; terms are added
    until the next term's relative magnitude drops below rtol. Accepts a
    scalar or an array argument z with |z| < 1.
    """
    z = np.asarray(z, dtype=np.float64)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(np.abs(z) >= 1.0):
        raise NumericError(f"series argument must satisfy |z| < 1, got max {z.max()}")
    a1 = np.broadcast_to(np.asarray(a1, dtype=np.float64), z.shape).copy()
    b1 = np.broadcast_to(np.asarray(b1, dtype=np.float64), z.shape).copy()
    c1 = np.broadcast_to(np.asarray(c1, dtype=np.float64), z.shape).copy()
    if np.any(c1 <= 0):
        raise NumericError("series parameter c must be positive")
    term = np.ones_like(z)
    total = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    n = 0
    while np.any(active):
        ratio = (a1 + n) * (b1 + n) / ((c1 + n) * (n + 1.0)) * z
        term = term * ratio
        total = total + np.where(active, term, 0.0)
        n += 1
        if n > max_terms:
            raise NumericError(f"hypergeometric series did not converge in {max_terms} terms")
        active = np.abs(term) >= rtol * np.abs(total)
    return float(total[0]) if scalar else total


def bgnbd_expected_transactions(params: BgnbdParams, summary, horizon: float):
    """Conditional expected repeat transactions in (T, T + horizon] given a
    user's (x, t_x, T). Accepts one summary or a list; horizon in periods.
    """
    params.validate()
    if horizon < 0:
        raise UsageError(f"horizon must be >= 0, got {horizon}")
    summaries = summary if isinstance(summary, (list, tuple)) else [summary]
    x, t_x, T = _rfm_arrays(summaries)
    if horizon == 0:
        out = np.zeros(x.size)
        return float(out[0]) if not isinstance(summary, (list, tuple)) else out
    r, alpha, a, b = params.r, params.alpha, params.a, params.b
    h = float(horizon)
    z = h / (alpha + T + h)
    f21 = hyp2f1_series(r + x, b + x, a + b + x - 1.0, z)
    bracket = 1.0 - ((alpha + T) / (alpha + T + h)) ** (r + x) * f21
    lead = (a + b + x - 1.0) / (a - 1.0)
    denom = np.where(
        x > 0,
        1.0 + (a / np.maximum(b + x - 1.0, 1e-300))
        * ((alpha + T) / (alpha + t_x)) ** (r + x),
        1.0,
    )
    out = lead * bracket / denom
    return out if isinstance(summary, (list, tuple)) else float(out[0])


# ---------------------------------------------------------------------------
# amount model


@dataclass
class GammaGammaParams:
    p: float
    q: float
    gamma: float

    def validate(self):
        if min(self.p, self.q, self.gamma) <= 0:
            raise DataError(f"parameters must be positive: {self}")

    @property
    def population_mean(self) -> float:
        if self.q <= 1:
            raise FittingError(f"q must exceed 1 for a finite mean, got {self.q}")
        return self.p * self.gamma / (self.q - 1.0)

    def to_dict(self):
        return {"family": "gamma-gamma", "version": 1, "p": self.p, "q": self.q,
                "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d):
        return cls(p=d["p"], q=d["q"], gamma=d["gamma"])


def _gg_loglik_terms(p, q, g, n_purchases, mean_value):
    px = p * n_purchases
    return (
        gammaln(px + q)
        - gammaln(px)
        - gammaln(q)
        + q * np.log(g)
        + (px - 1.0) * np.log(mean_value)
        + px * np.log(n_purchases)
        - (px + q) * np.log(g + n_purchases * mean_value)
    )


def gamma_gamma_loglik(params: GammaGammaParams, summaries) -> float:
    params.validate()
    use = [s for s in summaries if s.has_purchases]
    if not use:
        raise UsageError("no purchasers to evaluate")
    n = np.array([s.n_purchases for s in use], dtype=np.float64)
    m = np.array([s.mean_value for s in use], dtype=np.float64)
    terms = _gg_loglik_terms(params.p, params.q, params.gamma, n, m)
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        raise FittingError(f"non-finite likelihood term for user index {int(bad[0])}")
    return float(terms.sum())


def fit_gamma_gamma(
    summaries, init: tuple | None = None, max_iter: int = 4000
) -> GammaGammaParams:
    """MLE of the amount model on repeat buyers (x >= 1). The default start
    anchors the population mean at the observed average value."""
    use = [s for s in summaries if s.has_purchases and s.x >= 1]
    if not use:
        raise UsageError("no repeat buyers to fit the amount model on")
    n = np.array([s.n_purchases for s in use], dtype=np.float64)
    m = np.array([s.mean_value for s in use], dtype=np.float64)
    if init is None:
        init = (1.0, 2.0, float(m.mean()))

    def neg(log_params):
        p, q, g = np.exp(log_params)
        terms = _gg_loglik_terms(p, q, g, n, m)
        if not np.all(np.isfinite(terms)):
            return 1e12
        return -float(terms.sum())

    res = _simplex_fit(neg, np.log(np.asarray(init, dtype=np.float64)), max_iter)
    p, q, g = np.exp(res.x)
    params = GammaGammaParams(p=p, q=q, gamma=g)
    if not res.success:
        raise FittingError(
            f"simplex did not converge in {max_iter} iterations", best_params=params
        )
    if params.q <= 1.0:
        raise FittingError(
            f"fitted q = {params.q:.4f} <= 1 leaves the conditional mean undefined",
            best_params=params,
        )
    return params


def expected_monetary(params: GammaGammaParams, summary: RfmSummary) -> float:
    """Posterior mean transaction value; the population mean for users with
    no purchase history."""
    params.validate()
    if params.q <= 1.0:
        raise FittingError(f"q must exceed 1 for a finite mean, got {params.q}")
    if not summary.has_purchases:
        return params.population_mean
    n = summary.n_purchases
    return (params.gamma + summary.mean_value * n) * params.p / (
        params.p * n + params.q - 1.0
    )


def btyd_forecast(
    bgnbd: BgnbdParams, gg: GammaGammaParams, summary: RfmSummary, horizon: float
) -> float:
    """Forecast value over the horizon: expected transactions times expected
    transaction value."""
    return float(
        bgnbd_expected_transactions(bgnbd, summary, horizon)
        * expected_monetary(gg, summary)
    )


def save_btyd_params(path, bgnbd: BgnbdParams, gg: GammaGammaParams) -> None:
    with open(path, "w") as fh:
        json.dump({"bgnbd": bgnbd.to_dict(), "gamma_gamma": gg.to_dict()}, fh, indent=2)


def load_btyd_params(path):
    with open(path) as fh:
        d = json.load(fh)
    return BgnbdParams.from_dict(d["bgnbd"]), GammaGammaParams.from_dict(d["gamma_gamma"])


# ---------------------------------------------------------------------------
# ridge on lag features


def build_lag_features(
    weekly_values: np.ndarray,
    steps,
    first_week: int,
    panel_start: dt.date,
    lags=RIDGE_LAGS,
) -> np.ndarray:
    """Feature rows for one user's weekly series: trailing sums over the lag
    windows (windows are clipped at the user's start), calendar week
    sine/cosine, and age in weeks."""
    weekly_values = np.asarray(weekly_values, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(weekly_values)])
    steps = np.asarray(steps, dtype=np.int64)
    rows = np.empty((steps.size, len(lags) + 3))
    for j, L in enumerate(lags):
        lo = np.maximum(steps - L + 1, 0)
        rows[:, j] = csum[steps + 1] - csum[lo]
    for i, s in enumerate(steps):
        week_start = panel_start + dt.timedelta(days=7 * (first_week + int(s)))
        cal = calendar_features(week_start)
        rows[i, len(lags)] = cal.week_sin
        rows[i, len(lags) + 1] = cal.week_cos
        rows[i, len(lags) + 2] = float(s)
    return rows


def log_lag_columns(X: np.ndarray, n_lags: int = len(RIDGE_LAGS)) -> np.ndarray:
    """log1p the trailing-sum columns; heavy-tailed currency sums fit a
    log-scale linear model far better than raw scale."""
    X = np.asarray(X, dtype=np.float64).copy()
    X[:, :n_lags] = np.log1p(X[:, :n_lags])
    return X


def ridge_lag_fit(X: np.ndarray, Y: np.ndarray, penalty: float,
                  mask: np.ndarray | None = None) -> np.ndarray:
    """Closed-form ridge per target column: normal equations with an
    unpenalized intercept. Returns coefficients of shape (K, F + 1) with
    the intercept first. mask selects the rows used per column."""
    if penalty < 0:
        raise UsageError(f"penalty must be >= 0, got {penalty}")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise UsageError(
            f"feature rows {X.shape[0]} do not match target rows {Y.shape[0]}"
        )
    n, F = X.shape
    K = Y.shape[1]
    coef = np.empty((K, F + 1))
    pen = np.eye(F + 1) * penalty
    pen[0, 0] = 0.0
    for k in range(K):
        rows = np.ones(n, dtype=bool) if mask is None else mask[:, k]
        A = np.concatenate([np.ones((int(rows.sum()), 1)), X[rows]], axis=1)
        y = Y[rows, k]
        try:
            coef[k] = np.linalg.solve(A.T @ A + pen, A.T @ y)
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                "singular normal equations; collinear features need penalty > 0"
            ) from exc
    return coef


def ridge_lag_predict(coef: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Predictions for rows of X; returns (n, K) (or (K,) for one row)."""
    X = np.asarray(X, dtype=np.float64)
    one = X.ndim == 1
    if one:
        X = X[None]
    A = np.concatenate([np.ones((X.shape[0], 1)), X], axis=1)
    preds = A @ np.asarray(coef, dtype=np.float64).T
    return preds[0] if one else preds

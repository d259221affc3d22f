"""Out-of-sample performance and welfare metrics.

All statistics are monthly (no annualization).  Empirical quantiles use the
lower order statistic ``Q_q = r_(k)`` with ``k = ceil(q N)``.
"""

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SdfError, ValidationError

DEFAULT_Q_GRID = (0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99)
DEFAULT_GAMMAS = (1.0, 2.0, 5.0)
HJD_RCOND = 1e-10


class SharpeStats(NamedTuple):
    mean: float
    vol: float
    sharpe: float  # nan when vol == 0
    defined: bool


class TailCurves(NamedTuple):
    q: np.ndarray
    var: np.ndarray
    es: np.ndarray   # nan for q > 0.5
    utm: np.ndarray  # nan for q <= 0.5


class DominanceReport(NamedTuple):
    pathwise_rate: float
    quantile_rate: float


def _series(returns, min_len=1, name="returns"):
    r = np.asarray(returns, dtype=float).ravel()
    if r.size < min_len:
        raise ValidationError(f"{name} needs at least {min_len} observations, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise ValidationError(f"{name} contains non-finite values")
    return r


def sharpe(returns):
    """Sample mean, volatility (N-1 denominator) and their ratio."""
    r = _series(returns, 2)
    mean = float(r.mean())
    vol = float(np.sqrt(np.sum((r - mean) ** 2) / (r.size - 1)))
    if vol == 0.0:
        return SharpeStats(mean, 0.0, float("nan"), False)
    return SharpeStats(mean, vol, mean / vol, True)


def gram_basis(F_oos, rcond=HJD_RCOND):
    """Left singular vectors spanning the range of the sample second-moment
    matrix ``F'F/N``; singular values of that matrix below ``rcond`` times the
    largest are discarded."""
    F = np.asarray(F_oos, dtype=float)
    if F.ndim != 2:
        raise ValidationError("F_oos must be 2-d")
    if not np.all(np.isfinite(F)):
        raise ValidationError("F_oos contains non-finite values")
    U, s, _ = np.linalg.svd(F, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0]
    keep = s ** 2 > rcond * s[0] ** 2
    return U[:, keep]


def hj_distance(M_hat, F_oos, rcond=HJD_RCOND, basis=None):
    """``E[M F]' pinv(E[F F']) E[M F]`` with sample means over the N rows.

    With ``F/sqrt(N) = U S V'`` this equals ``||U_r' M||^2 / N``, so only a
    thin SVD of the (N, P) factor sample is needed.  ``basis`` may pass a
    precomputed :func:`gram_basis` when several SDFs share one ``F_oos``.
    """
    M = _series(M_hat, 1, "M_hat")
    if basis is None:
        F = np.asarray(F_oos, dtype=float)
        if F.ndim != 2 or F.shape[0] != M.size:
            raise ValidationError(f"F_oos shape {F.shape} does not match {M.size} SDF values")
        U = gram_basis(F, rcond)
    else:
        U = basis
        if U.shape[0] != M.size:
            raise ValidationError("basis rows do not match the SDF series")
    proj = U.T @ M
    return float(max(proj @ proj / M.size, 0.0))


def quantile_index(q, n):
    """0-based index of the ``ceil(q n)``-th order statistic."""
    k = math.ceil(q * n - 1e-9)
    return min(max(k, 1), n) - 1


def tail_curves(returns, q_grid=DEFAULT_Q_GRID):
    """VaR, expected shortfall (q <= 0.5) and upper-tail mean (q > 0.5)."""
    r = _series(returns, 5)
    q = np.asarray(q_grid, dtype=float)
    if np.any((q <= 0) | (q >= 1)):
        raise ValidationError("quantile levels must lie in (0, 1)")
    srt = np.sort(r)
    var = np.empty(q.size)
    es = np.full(q.size, np.nan)
    utm = np.full(q.size, np.nan)
    for i, qi in enumerate(q):
        Q = srt[quantile_index(qi, r.size)]
        var[i] = Q
        if qi <= 0.5:
            tail = r[r <= Q]
            if tail.size == 0:
                raise SdfError("empty lower tail")
            es[i] = tail.mean()
        else:
            tail = r[r >= Q]
            if tail.size == 0:
                raise SdfError("empty upper tail")
            utm[i] = tail.mean()
    return TailCurves(q, var, es, utm)


def certainty_equivalent(returns, gamma):
    """CRRA certainty-equivalent net return; ``gamma = 1`` is log utility."""
    r = _series(returns, 1)
    if gamma < 0:
        raise ValidationError("gamma must be >= 0")
    gross = 1.0 + r
    bad = np.flatnonzero(gross <= 0)
    if bad.size:
        raise DomainError(
            f"gross return {gross[bad[0]]:.6g} <= 0 at observation {int(bad[0])}")
    logs = np.log(gross)
    if gamma == 1:
        return float(np.expm1(logs.mean()))
    k = 1.0 - gamma
    # log-mean-exp written with expm1/log1p so the gamma -> 1 limit stays accurate
    x = k * logs
    shift = x.max()
    log_mean = shift + np.log(np.mean(np.exp(x - shift)))
    if abs(k) < 1e-3:
        log_mean = math.log1p(float(np.mean(np.expm1(x))))
    return float(np.expm1(log_mean / k))


def dominance_summary(a, b, q_grid=DEFAULT_Q_GRID):
    """Share of months with ``a > b`` and share of quantile levels with
    ``Q_q(a) >= Q_q(b)``."""
    a = _series(a, 1, "a")
    b = _series(b, 1, "b")
    if a.size != b.size:
        raise ValidationError(f"series lengths differ ({a.size} vs {b.size})")
    sa, sb = np.sort(a), np.sort(b)
    hits = [sa[quantile_index(q, a.size)] >= sb[quantile_index(q, b.size)] for q in q_grid]
    return DominanceReport(float(np.mean(a > b)), float(np.mean(hits)))


@dataclass
class MetricsReport:
    mean: float
    vol: float
    sharpe: float
    sharpe_defined: bool
    hjd: float
    q_grid: list
    var_curve: list
    es_curve: list
    utm_curve: list
    gammas: list
    ce_curve: list
    n_obs: int

    def to_dict(self):
        return asdict(self)

    def flat(self):
        """Scalar fields keyed for one row of a curves table."""
        row = {"mean": self.mean, "vol": self.vol, "sharpe": self.sharpe, "hjd": self.hjd}
        for q, v in zip(self.q_grid, self.var_curve):
            row[f"var_{q:g}"] = v
        for q, v in zip(self.q_grid, self.es_curve):
            if q <= 0.5:
                row[f"es_{q:g}"] = v
        for q, v in zip(self.q_grid, self.utm_curve):
            if q > 0.5:
                row[f"utm_{q:g}"] = v
        for g, v in zip(self.gammas, self.ce_curve):
            row[f"ce_{g:g}"] = v
        return row


def metrics_report(returns, q_grid=DEFAULT_Q_GRID, gammas=DEFAULT_GAMMAS, F_oos=None,
                   basis=None):
    """All metrics of one return series.

    The HJ distance needs the factor sample ``F_oos`` (rows aligned with
    ``returns``) and is nan without it.  CE values are nan when some gross
    return is non-positive.
    """
    r = _series(returns, 5)
    st = sharpe(r)
    tc = tail_curves(r, q_grid)
    ces = []
    for g in gammas:
        try:
            ces.append(certainty_equivalent(r, g))
        except DomainError:
            ces.append(float("nan"))
    hjd = float("nan")
    if F_oos is not None or basis is not None:
        hjd = hj_distance(1.0 - r, F_oos, basis=basis)
    return MetricsReport(
        mean=st.mean, vol=st.vol, sharpe=st.sharpe, sharpe_defined=st.defined, hjd=hjd,
        q_grid=[float(q) for q in q_grid], var_curve=tc.var.tolist(),
        es_curve=tc.es.tolist(), utm_curve=tc.utm.tolist(),
        gammas=[float(g) for g in gammas], ce_curve=ces, n_obs=int(r.size),
    )


def average_reports(reports):
    """Field-wise mean of per-draw reports (nan-aware for CE and Sharpe)."""
    if not reports:
        raise ValidationError("no reports to average")

    def avg(values):
        arr = np.asarray(values, dtype=float)
        cols = arr.reshape(arr.shape[0], -1)
        out = [float(np.mean(c[~np.isnan(c)])) if (~np.isnan(c)).any() else float("nan")
               for c in cols.T]
        return out[0] if arr.ndim == 1 else out

    first = reports[0]
    return MetricsReport(
        mean=avg([r.mean for r in reports]),
        vol=avg([r.vol for r in reports]),
        sharpe=avg([r.sharpe for r in reports]),
        sharpe_defined=any(r.sharpe_defined for r in reports),
        hjd=avg([r.hjd for r in reports]),
        q_grid=first.q_grid,
        var_curve=avg([r.var_curve for r in reports]),
        es_curve=avg([r.es_curve for r in reports]),
        utm_curve=avg([r.utm_curve for r in reports]),
        gammas=first.gammas,
        ce_curve=avg([r.ce_curve for r in reports]),
        n_obs=int(sum(r.n_obs for r in reports) / len(reports)),
    )

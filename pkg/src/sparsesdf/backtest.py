"""Rolling-window out-of-sample complexity sweep.

For every complexity ratio ``c`` (``P = round(c T)``), feature draw and
formation month ``t`` the SDF coefficients are estimated on the ``T`` most
recent managed-factor rows and evaluated on the factor realized after ``t``:
``r_{t+1} = lam_t' F_{t+1}``.  Feature draws are nested across ``c``: one
``P_max`` draw per ``draw_index`` is computed once and every ``P`` uses its
first ``P`` features with the ``sqrt(2/P)`` scaling.
"""

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import DivergedError, InfeasibleError, SdfError, ValidationError
from .factors import unscaled_factor_series
from .features import DEFAULT_BANDWIDTHS, FeatureSpec, draw_features
from .metrics import (DEFAULT_GAMMAS, DEFAULT_Q_GRID, HJD_RCOND, MetricsReport,
                      average_reports, dominance_summary, gram_basis, metrics_report)
from .panel import month_sequence
from .simplex import SimplexOptions
from .solvers import BASIS_PURSUIT, RIDGELESS, SUPPORT_TOL, basis_pursuit, l1_path, ridgeless

log = logging.getLogger(__name__)

METHODS = (BASIS_PURSUIT, RIDGELESS)
DEFAULT_C_GRID = tuple(float(f"{c:.4g}") for c in np.geomspace(0.1, 5000, 12))
MAX_FAILED_SHARE = 0.5

CONVENTIONS = {
    "quantile": "lower order statistic k = ceil(q N)",
    "ce_gamma_1": "log-utility limit (geometric mean)",
    "ce_nonpositive_gross": "nan",
    "hjd_pinv_cutoff": f"eigenvalues of E[FF'] below {HJD_RCOND:g} x largest dropped",
    "draw_averaging": "metric per draw, then mean across draws",
    "low_c_basis_pursuit": "lasso (1/2T)||1-F lam||^2 + alpha||lam||_1 for P < T",
    "low_c_ridgeless": "minimum-norm least squares for P < T",
    "p_rounding": "P = round(c T), round-half-to-even",
    "support_tol": SUPPORT_TOL,
    "dominance_ties": "pathwise strict (a > b), quantile weak (>=)",
    "failed_windows": "excluded from averages, counted in n_failed",
}


@dataclass
class SweepConfig:
    T: int = 60
    c_grid: tuple = DEFAULT_C_GRID
    n_draws: int = 20
    methods: tuple = METHODS
    oos_start: int | None = None
    oos_end: int | None = None
    seed: int = 0
    bandwidth_grid: tuple = DEFAULT_BANDWIDTHS
    q_grid: tuple = DEFAULT_Q_GRID
    gammas: tuple = DEFAULT_GAMMAS
    low_c_alpha: float = 1e-8
    pivot_rule: str = "dantzig"
    feas_tol: float = 1e-8
    opt_tol: float = 1e-9
    warm_start: bool = True
    spot_checks: int = 2
    threads: int = 1

    def __post_init__(self):
        for name in ("c_grid", "methods", "bandwidth_grid", "q_grid", "gammas"):
            setattr(self, name, tuple(getattr(self, name)))
        self.c_grid = tuple(float(c) for c in self.c_grid)
        self.validate()

    def validate(self):
        if self.T < 2:
            raise ValidationError("T must be >= 2")
        if not self.c_grid or min(self.c_grid) <= 0:
            raise ValidationError("c_grid must be non-empty and positive")
        if any(b <= a for a, b in zip(self.c_grid, self.c_grid[1:])):
            raise ValidationError("c_grid must be strictly increasing")
        if self.n_draws < 1:
            raise ValidationError("n_draws must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValidationError(f"methods must be a non-empty subset of {METHODS}, got {bad}")
        if min(self.P_values) < 1:
            raise ValidationError("every c must give P = round(c T) >= 1")

    @property
    def P_values(self):
        return [int(round(c * self.T)) for c in self.c_grid]

    def simplex_options(self):
        return SimplexOptions(pivot_rule=self.pivot_rule, feas_tol=self.feas_tol,
                              opt_tol=self.opt_tol)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ValidationError(f"unknown sweep settings: {unknown}")
        return cls(**known)


@dataclass
class CellResult:
    """One (c, draw, method) series across all evaluation months."""
    c: float
    P: int
    draw: int
    method: str
    branch: str
    bandwidth: float
    months: list
    returns: np.ndarray
    support_sizes: np.ndarray
    l1_norms: np.ndarray
    l2_norms: np.ndarray
    iterations: list
    failures: list = field(default_factory=list)
    spot: dict = field(default_factory=dict)
    seconds: float = 0.0
    metrics: MetricsReport | None = None

    @property
    def ok(self):
        return np.isfinite(self.returns)


@dataclass
class SweepResult:
    config: SweepConfig
    cells: list
    summary: list
    dominance: list
    meta: dict

    def cell(self, c, draw, method):
        for x in self.cells:
            if x.c == c and x.draw == draw and x.method == method:
                return x
        raise KeyError((c, draw, method))

    def summary_for(self, c, method):
        for s in self.summary:
            if s["c"] == c and s["method"] == method:
                return s
        raise KeyError((c, method))


def _month_range(start, end):
    """Calendar months ``start..end`` (yyyymm, inclusive)."""
    for m in (start, end):
        if not 1 <= m % 100 <= 12:
            raise ValidationError(f"{m} is not a yyyymm month")
    if end < start:
        raise ValidationError("oos_end precedes oos_start")
    count = (end // 100 - start // 100) * 12 + end % 100 - start % 100 + 1
    return month_sequence(start, count)


def evaluation_indices(panel, config):
    """Panel indices of the formation months evaluated out of sample."""
    ids = panel.month_ids
    T = config.T
    start = config.oos_start if config.oos_start is not None else (ids[T] if len(ids) > T else None)
    end = config.oos_end if config.oos_end is not None else ids[-1]
    if start is None:
        raise ValidationError(f"panel has {len(ids)} months; at least T+1={T + 1} needed")
    wanted = _month_range(start, end)
    present = set(ids)
    missing = [m for m in wanted if m not in present]
    if missing:
        shown = missing if len(missing) <= 24 else missing[:12] + ["..."] + missing[-12:]
        raise ValidationError(
            f"out-of-sample range {start}..{end} not covered by panel "
            f"{ids[0]}..{ids[-1]}; {len(missing)} missing months: {shown}")
    i0, i1 = ids.index(start), ids.index(end)
    if i1 < i0:
        raise ValidationError("oos_end precedes oos_start")
    if i0 < T:
        raise ValidationError(
            f"oos_start {start} leaves only {i0} training months before it; need T={T} "
            f"(missing {T - i0} months before {ids[0]})")
    return list(range(i0, i1 + 1))


def _draw_spec(config, draw_index, P):
    return FeatureSpec(P=P, D=1, bandwidth_grid=config.bandwidth_grid,
                       seed=config.seed, draw_index=draw_index)


def feature_draw(config, D, draw_index, P=None):
    """The feature draw used by the sweep for ``draw_index`` (``P_max`` features by default)."""
    P = P or max(config.P_values)
    return draw_features(FeatureSpec(P=P, D=D, bandwidth_grid=config.bandwidth_grid,
                                     seed=config.seed, draw_index=draw_index))


def _solve(method, F, config, warm):
    T, P = F.shape
    if method == RIDGELESS:
        sol = ridgeless(F)
        return sol, sol.diagnostics.get("branch", ""), None
    if P < T:
        sol = l1_path(F, config.low_c_alpha)
        return sol, "low_c_l1", None
    sol = basis_pursuit(F, config.simplex_options(), warm_start=warm)
    return sol, "interpolation", (sol.diagnostics["basis"] if config.warm_start else None)


def _cell_metrics(rets, F_oos, config, basis_cache):
    """Metrics over the successful windows; HJD bases are shared across methods."""
    ok = np.isfinite(rets)
    if ok.sum() < 5:
        return None
    key = tuple(np.flatnonzero(ok))
    if key not in basis_cache:
        basis_cache[key] = gram_basis(F_oos[ok])
    return metrics_report(rets[ok], config.q_grid, config.gammas, basis=basis_cache[key])


def _run_draw(panel, config, draw_index):
    idx = evaluation_indices(panel, config)
    T = config.T
    draw = feature_draw(config, panel.D, draw_index)
    U = unscaled_factor_series(panel, draw)
    months = [panel.month_ids[i] for i in idx]
    spot_idx = set(idx[:config.spot_checks // 2] + idx[len(idx) - (config.spot_checks + 1) // 2:]) \
        if config.spot_checks else set()
    cells = []
    for c, P in zip(config.c_grid, config.P_values):
        scale = np.sqrt(2.0 / P)
        F_oos = scale * U[idx, :P]
        basis_cache = {}
        for method in config.methods:
            t0 = time.perf_counter()
            n = len(idx)
            rets = np.full(n, np.nan)
            supp = np.full(n, -1, dtype=int)
            l1s = np.full(n, np.nan)
            l2s = np.full(n, np.nan)
            iters, failures, spot = [], [], {}
            warm = None
            branch = ""
            for k, i in enumerate(idx):
                F = scale * U[i - T:i, :P]
                try:
                    sol, branch, warm = _solve(method, F, config, warm)
                except (InfeasibleError, DivergedError, ValidationError,
                        np.linalg.LinAlgError) as exc:
                    failures.append([months[k], f"{type(exc).__name__}: {exc}"])
                    warm = None
                    continue
                rets[k] = float(sol.lam @ F_oos[k])
                supp[k] = len(sol.support)
                l1s[k] = sol.l1_norm
                l2s[k] = sol.l2_norm
                iters.append(int(sol.diagnostics.get("iterations",
                                                     sol.diagnostics.get("homotopy_steps", 0))))
                if i in spot_idx:
                    spot[months[k]] = sol.lam.tolist()
            cell = CellResult(c=c, P=P, draw=draw_index, method=method, branch=branch,
                              bandwidth=draw.bandwidth, months=months, returns=rets,
                              support_sizes=supp, l1_norms=l1s, l2_norms=l2s,
                              iterations=iters, failures=failures, spot=spot)
            cell.metrics = _cell_metrics(rets, F_oos, config, basis_cache)
            cell.seconds = time.perf_counter() - t0
            log.debug("c=%g draw=%d %s: %.2fs, %d failures", c, draw_index, method,
                      cell.seconds, len(failures))
            cells.append(cell)
    return cells


def _summarize(config, cells):
    summary, dominance = [], []
    for c, P in zip(config.c_grid, config.P_values):
        for method in config.methods:
            group = [x for x in cells if x.c == c and x.method == method]
            reports = [x.metrics for x in group if x.metrics is not None]
            n_windows = sum(len(x.returns) for x in group)
            n_failed = sum(len(x.failures) for x in group)
            entry = {
                "c": c, "P": P, "method": method,
                "branch": sorted({x.branch for x in group if x.branch}),
                "n_draws": len(group), "n_draws_ok": len(reports),
                "n_windows": n_windows, "n_failed": n_failed,
                "degraded": bool(n_failed) or len(reports) < len(group),
                "metrics": average_reports(reports).to_dict() if reports else None,
                "per_draw_mean": [x.metrics.mean if x.metrics else None for x in group],
            }
            sizes = np.concatenate([x.support_sizes[x.support_sizes >= 0] for x in group])
            if method == BASIS_PURSUIT and sizes.size:
                entry["support"] = {"mean": float(sizes.mean()), "std": float(sizes.std()),
                                    "min": int(sizes.min()), "max": int(sizes.max())}
            summary.append(entry)
        if BASIS_PURSUIT in config.methods and RIDGELESS in config.methods:
            rates = []
            for d in range(config.n_draws):
                a = [x for x in cells if x.c == c and x.draw == d and x.method == BASIS_PURSUIT]
                b = [x for x in cells if x.c == c and x.draw == d and x.method == RIDGELESS]
                if not a or not b:
                    continue
                ok = a[0].ok & b[0].ok
                if ok.any():
                    rates.append(dominance_summary(a[0].returns[ok], b[0].returns[ok], config.q_grid))
            if rates:
                dominance.append({
                    "c": c, "P": P, "n_draws": len(rates),
                    "pathwise_rate": float(np.mean([r.pathwise_rate for r in rates])),
                    "quantile_rate": float(np.mean([r.quantile_rate for r in rates])),
                })
    return summary, dominance


class SweepError(SdfError):
    """More than half of the windows failed at some complexity level."""


def run_sweep(panel, config):
    """Run the full (c, draw, method, window) sweep; deterministic given the config."""
    config.validate()
    evaluation_indices(panel, config)
    t0 = time.perf_counter()
    draws = range(config.n_draws)
    if config.threads > 1 and config.n_draws > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(_run_draw, [panel] * config.n_draws, [config] * config.n_draws,
                                  draws))
    else:
        parts = [_run_draw(panel, config, d) for d in draws]
    cells = [x for part in parts for x in part]
    for c in config.c_grid:
        group = [x for x in cells if x.c == c]
        total = sum(len(x.returns) for x in group)
        failed = sum(len(x.failures) for x in group)
        if total and failed / total > MAX_FAILED_SHARE:
            raise SweepError(f"{failed}/{total} windows failed at c={c:g}")
    summary, dominance = _summarize(config, cells)
    meta = {
        "code_version": __version__,
        "config": config.to_dict(),
        "conventions": CONVENTIONS,
        "bandwidths": {str(d): feature_draw(config, panel.D, d, P=1).bandwidth
                       for d in range(config.n_draws)},
        "panel": {"months": len(panel), "first": panel.month_ids[0],
                  "last": panel.month_ids[-1], "D": panel.D},
        "n_cells": len(cells),
        "n_windows": sum(len(x.returns) for x in cells),
        "cell_seconds": [[x.c, x.draw, x.method, round(x.seconds, 4)] for x in cells],
        "wall_seconds": round(time.perf_counter() - t0, 3),
    }
    return SweepResult(config=config, cells=cells, summary=summary, dominance=dominance,
                       meta=meta)


def recompute_metrics(panel, config, stored):
    """Rebuild all metric summaries from stored return series.

    ``stored`` is the output of :func:`read_returns`.  Factor realizations
    for the HJ distance are regenerated from the panel and the draws, so the
    result matches the original sweep's summaries exactly.
    """
    idx = evaluation_indices(panel, config)
    months = [panel.month_ids[i] for i in idx]
    cells = []
    for d in range(config.n_draws):
        draw = feature_draw(config, panel.D, d)
        U = unscaled_factor_series(panel, draw)
        for c, P in zip(config.c_grid, config.P_values):
            F_oos = np.sqrt(2.0 / P) * U[idx, :P]
            basis_cache = {}
            for method in config.methods:
                key = (c, method)
                if key not in stored or d not in stored[key]:
                    raise ValidationError(f"no stored returns for c={c:g} {method} draw {d}")
                m, rets = stored[key][d]
                if list(m) != months:
                    raise ValidationError(
                        f"stored months for c={c:g} {method} draw {d} do not match the panel")
                n = len(rets)
                cell = CellResult(c=c, P=P, draw=d, method=method, branch="", bandwidth=draw.bandwidth,
                                  months=months, returns=rets, support_sizes=np.full(n, -1),
                                  l1_norms=np.full(n, np.nan), l2_norms=np.full(n, np.nan),
                                  iterations=[],
                                  failures=[[mm, "stored nan"] for mm, r in zip(months, rets)
                                            if not np.isfinite(r)])
                cell.metrics = _cell_metrics(rets, F_oos, config, basis_cache)
                cells.append(cell)
    summary, dominance = _summarize(config, cells)
    return SweepResult(config=config, cells=cells, summary=summary, dominance=dominance,
                       meta={"recomputed": True})


def support_curve(result):
    """Mean and spread of basis pursuit support sizes per complexity level."""
    bp = [x for x in result.cells if x.method == BASIS_PURSUIT]
    if not bp:
        raise ValidationError("sweep result has no BasisPursuit cells")
    out = []
    for c, P in zip(result.config.c_grid, result.config.P_values):
        sizes = np.concatenate([x.support_sizes[x.support_sizes >= 0] for x in bp if x.c == c])
        if sizes.size == 0:
            out.append({"c": c, "P": P, "n": 0, "mean": float("nan"), "std": float("nan"),
                        "min": None, "max": None})
            continue
        out.append({"c": c, "P": P, "n": int(sizes.size), "mean": float(sizes.mean()),
                    "std": float(sizes.std()), "min": int(sizes.min()), "max": int(sizes.max())})
    return out


def recompute_return(panel, config, cell, month):
    """``lam' F`` for a stored spot-check solution, rebuilt from the panel."""
    if month not in cell.spot:
        raise KeyError(f"no stored solution for month {month}")
    i = panel.index_of(month)
    draw = feature_draw(config, panel.D, cell.draw)
    U = unscaled_factor_series(panel.__class__(panel.months[i:i + 1], panel.D), draw)
    f = np.sqrt(2.0 / cell.P) * U[0, :cell.P]
    return float(np.asarray(cell.spot[month]) @ f)


# -- persistence ------------------------------------------------------------

def _num(x):
    return "nan" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if np.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def curve_rows(result):
    rows = []
    for s in result.summary:
        row = {"c": s["c"], "P": s["P"], "method": s["method"]}
        if s["metrics"] is not None:
            row.update(MetricsReport(**s["metrics"]).flat())
        rows.append(row)
    return rows


def write_curves(rows, path):
    """One row per (c, method): mean, vol, sharpe, hjd and every grid point."""
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r.get(k) if k in ("method", "P") else
                        (f"{r[k]:g}" if k == "c" else _num(r.get(k))) for k in cols])


def write_sweep(result, out_dir):
    """Persist a sweep as ``summary.json``, ``returns_<c>_<method>.csv``,
    ``supports.csv``, ``meta.json`` and ``curves.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    write_json({"conventions": CONVENTIONS, "cells": result.summary,
           "dominance_bp_over_rl": result.dominance}, os.path.join(out_dir, "summary.json"))
    write_json(result.meta, os.path.join(out_dir, "meta.json"))
    paths = ["summary.json", "meta.json"]
    for c in result.config.c_grid:
        for method in result.config.methods:
            name = f"returns_{c:g}_{method}.csv"
            with open(os.path.join(out_dir, name), "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["month", "draw", "ret"])
                for x in result.cells:
                    if x.c == c and x.method == method:
                        for m, r in zip(x.months, x.returns):
                            w.writerow([m, x.draw, _num(r)])
            paths.append(name)
    with open(os.path.join(out_dir, "supports.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c", "P", "method", "draw", "month", "support_size", "l1_norm", "l2_norm"])
        for x in result.cells:
            for m, s, a, b in zip(x.months, x.support_sizes, x.l1_norms, x.l2_norms):
                w.writerow([f"{x.c:g}", x.P, x.method, x.draw, m, int(s), _num(a), _num(b)])
    paths.append("supports.csv")
    write_curves(curve_rows(result), os.path.join(out_dir, "curves.csv"))
    paths.append("curves.csv")
    return paths


def read_returns(out_dir):
    """Stored return series: ``{(c, method): {draw: (months, returns)}}``."""
    out = {}
    for name in sorted(os.listdir(out_dir)):
        if not (name.startswith("returns_") and name.endswith(".csv")):
            continue
        c_text, method = name[len("returns_"):-len(".csv")].split("_", 1)
        series = {}
        with open(os.path.join(out_dir, name), newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                m, r = series.setdefault(int(row["draw"]), ([], []))
                m.append(int(row["month"]))
                r.append(float(row["ret"]))
        out[(float(c_text), method)] = {d: (m, np.array(r)) for d, (m, r) in series.items()}
    return out

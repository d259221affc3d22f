"""Interpolating SDF estimators.

Two selection rules pick a coefficient vector from the interpolation set
``{lam : F @ lam = 1}``:

* :func:`basis_pursuit` -- minimum l1 norm (sparse SDF), solved exactly as a
  linear program by the revised simplex in :mod:`sparsesdf.simplex`;
* :func:`ridgeless` -- minimum l2 norm (dense SDF), ``F'(FF')^{-1} 1``.

:func:`ridge` and :func:`l1_path` solve the penalized problems

    (1/2T) ||1 - F lam||^2 + alpha * penalty(lam)

and exist to check the two interpolators as ``alpha -> 0`` limits.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DivergedError, InfeasibleError, ValidationError
from .simplex import SimplexOptions, independent_rows, solve_split_lp

BASIS_PURSUIT = "BasisPursuit"
RIDGELESS = "Ridgeless"
RIDGE = "Ridge"
L1 = "L1"

SUPPORT_TOL = 1e-9
FEAS_TOL = 1e-8
RIDGELESS_COND_LIMIT = 1e12


@dataclass(frozen=True)
class SdfSolution:
    lam: np.ndarray
    method: str
    alpha: float | None = None
    support_tol: float = SUPPORT_TOL
    residual_inf: float = float("nan")
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @property
    def support(self):
        return np.flatnonzero(np.abs(self.lam) > self.support_tol)

    @property
    def l1_norm(self):
        return float(np.abs(self.lam).sum())

    @property
    def l2_norm(self):
        return float(np.sqrt(np.dot(self.lam, self.lam)))

    @property
    def label(self):
        if self.alpha is None:
            return self.method
        return f"{self.method}({self.alpha:g})"

    def to_dict(self):
        return {
            "method": self.method,
            "alpha": self.alpha,
            "support": self.support.tolist(),
            "l1_norm": self.l1_norm,
            "l2_norm": self.l2_norm,
            "residual_inf": self.residual_inf,
            "diagnostics": self.diagnostics,
        }


def _as_matrix(F):
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
        raise ValidationError(f"F must be a non-empty 2-d array, got shape {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValidationError("F contains non-finite entries")
    return F


def _residual(F, lam):
    return float(np.max(np.abs(F @ lam - 1.0)))


def ridgeless(F, cond_limit=RIDGELESS_COND_LIMIT):
    """Minimum l2-norm interpolator ``F'(FF')^{-1} 1``.

    Computed from a thin QR factorization ``F' = QR`` as ``Q R^{-T} 1``, which
    never forms ``FF'``.  If ``R`` is too ill-conditioned the pseudoinverse is
    used instead and ``diagnostics['pinv_fallback']`` is set.  With more rows
    than columns no interpolator exists; the minimum-norm least-squares fit is
    returned, tagged ``Ridge`` with ``alpha=0``.
    """
    F = _as_matrix(F)
    T, P = F.shape
    ones = np.ones(T)
    if T > P:
        lam, *_ = np.linalg.lstsq(F, ones, rcond=None)
        return SdfSolution(lam, RIDGE, alpha=0.0, residual_inf=_residual(F, lam),
                           diagnostics={"branch": "least_squares"})
    Q, R = np.linalg.qr(F.T)
    rdiag = np.abs(np.diag(R))
    cond = rdiag.max() / rdiag.min() if rdiag.min() > 0 else np.inf
    diag = {"branch": "interpolation", "cond_estimate": float(cond) ** 2}
    if cond ** 2 > cond_limit:
        lam = np.linalg.pinv(F, rcond=1e-12) @ ones
        diag["pinv_fallback"] = True
    else:
        lam = Q @ sla.solve_triangular(R, ones, trans="T")
    return SdfSolution(lam, RIDGELESS, residual_inf=_residual(F, lam), diagnostics=diag)


def basis_pursuit(F, options=None, warm_start=None, support_tol=SUPPORT_TOL):
    """Minimum l1-norm interpolator, as a basic optimal solution.

    Solves ``min ||lam||_1  s.t.  F lam = 1`` through the split LP
    ``lam = u - v``.  Linearly dependent rows of ``F`` are dropped first
    (``diagnostics['rows_dropped']``); the solution is then checked against
    every original row.

    Ties between optimal vertices are resolved by the lowest-index rules of the
    crash basis and the pricing step, so ``F = [[1, 1]]`` gives ``(1, 0)``.

    Raises
    ------
    InfeasibleError
        If ``F lam = 1`` has no solution.
    DivergedError
        If the simplex iteration cap is reached.
    """
    F = _as_matrix(F)
    opts = options or SimplexOptions()
    rows = independent_rows(F)
    if rows.size == 0:
        raise InfeasibleError("F is identically zero")
    F_red = F[rows]
    res = solve_split_lp(F_red, opts, warm_start=warm_start)
    lam = res.x
    resid = _residual(F, lam)
    scale = max(1.0, float(np.abs(F).max()) * float(np.abs(lam).max()))
    if resid > opts.feas_tol * scale:
        raise InfeasibleError(f"interpolation system is inconsistent (residual {resid:.3e})")
    diag = dict(res.diagnostics)
    diag["rows_dropped"] = int(F.shape[0] - rows.size)
    diag["basis"] = res.basis.tolist()
    return SdfSolution(lam, BASIS_PURSUIT, support_tol=support_tol,
                       residual_inf=resid, diagnostics=diag)


def ridge(F, alpha):
    """Closed-form minimizer of ``(1/2T)||1 - F lam||^2 + alpha ||lam||_2^2``."""
    F = _as_matrix(F)
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    T, P = F.shape
    ones = np.ones(T)
    shift = 2.0 * T * alpha
    if T <= P:
        K = F @ F.T
        K[np.diag_indices_from(K)] += shift
        lam = F.T @ sla.cho_solve(sla.cho_factor(K), ones)
    else:
        K = F.T @ F
        K[np.diag_indices_from(K)] += shift
        lam = sla.cho_solve(sla.cho_factor(K), F.T @ ones)
    return SdfSolution(lam, RIDGE, alpha=float(alpha), residual_inf=_residual(F, lam))


def _lasso_homotopy(F, target, max_steps):
    """Exact lasso path for ``min 0.5||1 - F lam||^2 + target ||lam||_1``.

    Follows the piecewise-linear solution from ``lam = 0`` down to the
    penalty ``target`` (LARS with the lasso drop step).
    """
    T, P = F.shape
    y = np.ones(T)
    lam = np.zeros(P)
    corr = F.T @ y
    level = float(np.max(np.abs(corr)))
    if target >= level:
        return lam, 0
    active = [int(np.argmax(np.abs(corr)))]
    signs = [float(np.sign(corr[active[0]]))]
    steps = 0
    eps = 1e-12
    while True:
        steps += 1
        if steps > max_steps:
            raise DivergedError("lasso homotopy step limit reached",
                                {"steps": steps, "active": len(active)})
        FA = F[:, active]
        s = np.array(signs)
        G = FA.T @ FA
        try:
            d = sla.solve(G, s, assume_a="sym")
        except np.linalg.LinAlgError as exc:
            raise DivergedError("singular active set in lasso homotopy",
                                {"steps": steps, "active": len(active)}) from exc
        a = F.T @ (FA @ d)

        best, event, who = level - target, "end", -1
        inactive = np.ones(P, dtype=bool)
        inactive[active] = False
        idx = np.flatnonzero(inactive)
        c_in, a_in = corr[idx], a[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = np.where(1 - a_in > eps, (level - c_in) / (1 - a_in), np.inf)
            d2 = np.where(1 + a_in > eps, (level + c_in) / (1 + a_in), np.inf)
        dj = np.minimum(np.where(d1 > eps * level, d1, np.inf),
                        np.where(d2 > eps * level, d2, np.inf))
        if dj.size and dj.min() < best:
            k = int(np.argmin(dj))
            best, event, who = float(dj[k]), "join", int(idx[k])
        lamA = lam[active]
        with np.errstate(divide="ignore", invalid="ignore"):
            dd = np.where(d != 0, -lamA / d, np.inf)
        dd = np.where(dd > eps * level, dd, np.inf)
        if dd.size and dd.min() < best:
            k = int(np.argmin(dd))
            best, event, who = float(dd[k]), "drop", k

        lam[active] = lamA + best * d
        level -= best
        corr = F.T @ (y - F @ lam)
        if event == "end":
            return lam, steps
        if event == "join":
            if len(active) >= T:
                raise DivergedError("active set would exceed T",
                                    {"steps": steps, "active": len(active)})
            active.append(who)
            signs.append(float(np.sign(corr[who])))
        else:
            lam[active[who]] = 0.0
            del active[who]
            del signs[who]
            if not active:
                # restart from the current most correlated column
                j = int(np.argmax(np.abs(corr)))
                level = float(np.abs(corr[j]))
                active, signs = [j], [float(np.sign(corr[j]))]


def _coordinate_descent(F, alpha, lam, tol, max_sweeps):
    """Cyclic coordinate descent for ``(1/2T)||1 - F lam||^2 + alpha||lam||_1``."""
    T, P = F.shape
    col_sq = np.einsum("ij,ij->j", F, F) / T
    resid = 1.0 - F @ lam
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(P):
            if col_sq[j] == 0.0:
                continue
            old = lam[j]
            z = F[:, j] @ resid / T + col_sq[j] * old
            new = np.sign(z) * max(abs(z) - alpha, 0.0) / col_sq[j]
            if new != old:
                resid -= F[:, j] * (new - old)
                lam[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change <= tol * max(1.0, float(np.abs(lam).max())):
            return lam, sweep
    raise DivergedError("coordinate descent sweep limit reached",
                        {"sweeps": max_sweeps, "max_change": max_change})


def l1_path(F, alpha, tol=1e-10, max_sweeps=1_000, support_tol=SUPPORT_TOL):
    """Minimizer of ``(1/2T)||1 - F lam||^2 + alpha ||lam||_1``.

    The exact homotopy path is followed from ``alpha = inf`` down to
    ``alpha``; coordinate descent is then run from that point until the
    largest coordinate change in a sweep is at most ``tol``.  As
    ``alpha -> 0`` the solution tends to the basis pursuit interpolator.
    """
    F = _as_matrix(F)
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    T, P = F.shape
    lam, steps = _lasso_homotopy(F, T * alpha, max_steps=20 * (T + P) + 100)
    lam, sweeps = _coordinate_descent(F, alpha, lam, tol, max_sweeps)
    return SdfSolution(lam, L1, alpha=float(alpha), support_tol=support_tol,
                       residual_inf=_residual(F, lam),
                       diagnostics={"homotopy_steps": steps, "cd_sweeps": sweeps})

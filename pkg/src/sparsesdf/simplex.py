"""Revised simplex for the split-variable basis pursuit linear program.

The problem solved is::

    minimize    sum(u) + sum(v)
    subject to  F u - F v = 1,   u, v >= 0

with ``F`` of shape (T, P).  Signed column index ``j < P`` is ``u_j`` (column
``F[:, j]``) and ``P <= j < 2P`` is ``v_{j-P}`` (column ``-F[:, j-P]``).

Since the columns of ``u_j`` and ``v_j`` differ only in sign, any ``T``
linearly independent columns of ``F`` give a primal feasible basis once each
basic variable takes the sign of ``B^{-1} 1``.  The solver therefore needs no
artificial phase: it starts from a crash basis (pivoted QR of ``F``) or from a
caller-supplied warm start and runs phase two directly.  The returned point is
basic, so at most ``T`` coordinates of ``u - v`` are nonzero.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DivergedError, InfeasibleError

PIVOT_RULES = ("devex", "dantzig", "bland")


@dataclass
class SimplexOptions:
    pivot_rule: str = "dantzig"
    feas_tol: float = 1e-8
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-11
    max_iter: int | None = None
    degenerate_limit: int = 50


@dataclass
class SimplexResult:
    x: np.ndarray
    basis: np.ndarray  # signed column indices in [0, 2P)
    objective: float
    diagnostics: dict = field(default_factory=dict)


def independent_rows(F, tol=1e-10):
    """Indices of a maximal linearly independent subset of rows of ``F``.

    Uses QR with column pivoting on ``F.T``; rows are returned in original order.
    """
    F = np.asarray(F, dtype=float)
    if F.shape[0] == 0 or F.shape[1] == 0:
        return np.arange(0)
    _, R, piv = sla.qr(F.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0:
        return np.arange(0)
    rank = int(np.sum(diag > tol * diag[0]))
    return np.sort(piv[:rank])


def crash_columns(F, tol=1e-10):
    """Pick ``T`` well-conditioned columns of ``F`` by pivoted QR."""
    T = F.shape[0]
    _, R, piv = sla.qr(F, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size < T or diag[0] == 0.0 or diag[T - 1] <= tol * diag[0]:
        raise InfeasibleError("F does not have full row rank")
    return np.sort(piv[:T])


def _signed_basis(F, cols):
    """Attach signs to unsigned columns so that the basic solution is >= 0."""
    P = F.shape[1]
    B = F[:, cols]
    try:
        lu = sla.lu_factor(B, check_finite=False)
    except (ValueError, np.linalg.LinAlgError):
        return None
    x = sla.lu_solve(lu, np.ones(F.shape[0]), check_finite=False)
    if not np.all(np.isfinite(x)):
        return None
    rc = 1.0 / np.linalg.cond(B)
    if rc < 1e-13:
        return None
    return np.where(x >= 0, cols, cols + P)


def _basis_matrix(F, basis):
    P = F.shape[1]
    cols = basis % P
    sign = np.where(basis < P, 1.0, -1.0)
    return F[:, cols] * sign


def solve_split_lp(F, options=None, warm_start=None):
    """Phase-two revised simplex on the split basis pursuit LP.

    Parameters
    ----------
    F : ndarray, shape (T, P)
        Must have linearly independent rows (see :func:`independent_rows`).
    options : SimplexOptions, optional
    warm_start : array of int, optional
        Candidate column indices (signed or unsigned) for the initial basis,
        typically the optimal basis of a neighbouring problem.  Ignored if it
        does not yield ``T`` independent columns.

    Returns
    -------
    SimplexResult
        ``x`` holds ``lambda = u - v``.
    """
    opts = options or SimplexOptions()
    if opts.pivot_rule not in PIVOT_RULES:
        raise ValueError(f"unknown pivot rule {opts.pivot_rule!r}")
    F = np.ascontiguousarray(F, dtype=float)
    T, P = F.shape
    if T > P:
        raise InfeasibleError(f"T={T} rows exceed P={P} columns")
    max_iter = opts.max_iter or 20 * (T + 2 * P) + 1000

    basis = None
    warm_used = False
    if warm_start is not None:
        cols = np.unique(np.asarray(warm_start, dtype=int) % P)
        if cols.size == T:
            basis = _signed_basis(F, cols)
            warm_used = basis is not None
    if basis is None:
        basis = _signed_basis(F, crash_columns(F))
        if basis is None:
            raise InfeasibleError("crash basis is numerically singular")

    diag = {
        "iterations": 0,
        "degenerate_pivots": 0,
        "bland_activations": 0,
        "pivot_rule": opts.pivot_rule,
        "warm_start": warm_used,
    }

    b = np.ones(T)
    weights = np.ones(P)
    basic = np.zeros(2 * P, dtype=bool)
    basic[basis] = True
    B = _basis_matrix(F, basis)
    degenerate_run = 0
    bland = False

    while True:
        lu = sla.lu_factor(B, check_finite=False)
        xB = sla.lu_solve(lu, b, check_finite=False)
        y = sla.lu_solve(lu, np.ones(T), trans=1, check_finite=False)
        g = F.T @ y
        # reduced costs: u_j -> 1 - g_j, v_j -> 1 + g_j
        viol = np.abs(g) - 1.0
        signed = np.where(g > 0, np.arange(P), np.arange(P) + P)
        eligible = (viol > opts.opt_tol) & ~basic[signed]
        cand = np.flatnonzero(eligible)
        if cand.size == 0:
            break
        if diag["iterations"] >= max_iter:
            raise DivergedError(f"simplex iteration limit {max_iter} reached", diag)

        if bland or opts.pivot_rule == "bland":
            # smallest signed index among improving columns
            q = int(np.min(signed[cand]))
        elif opts.pivot_rule == "dantzig":
            q = int(signed[cand[np.argmax(viol[cand])]])
        else:
            score = viol[cand] ** 2 / weights[cand]
            q = int(signed[cand[np.argmax(score)]])
        col = q % P
        aq = F[:, col] if q < P else -F[:, col]
        alpha = sla.lu_solve(lu, aq, check_finite=False)

        pos = np.flatnonzero(alpha > opts.pivot_tol)
        if pos.size == 0:
            # objective is bounded below by zero, so this is numerical trouble
            raise DivergedError("unbounded ray in a bounded LP", diag)
        ratios = np.maximum(xB[pos], 0.0) / alpha[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-14 * max(1.0, best)]
        if not (bland or opts.pivot_rule == "bland"):
            amax = alpha[ties].max()
            ties = ties[alpha[ties] >= amax * (1 - 1e-12)]
        r = int(ties[np.argmin(basis[ties])])

        step = best
        if step <= 1e-12:
            diag["degenerate_pivots"] += 1
            degenerate_run += 1
            if degenerate_run > opts.degenerate_limit and not bland:
                bland = True
                diag["bland_activations"] += 1
        else:
            degenerate_run = 0
            bland = False

        if opts.pivot_rule == "devex":
            e_r = np.zeros(T)
            e_r[r] = 1.0
            rho = sla.lu_solve(lu, e_r, trans=1, check_finite=False)
            ratio = (F.T @ rho) / alpha[r]
            wq = weights[col]
            np.maximum(weights, ratio ** 2 * wq, out=weights)
            weights[basis[r] % P] = max(wq / alpha[r] ** 2, 1.0)
            weights[col] = 1.0
            if weights.max() > 1e8:
                weights[:] = 1.0

        basic[basis[r]] = False
        basic[q] = True
        basis[r] = q
        B[:, r] = aq
        diag["iterations"] += 1

    # one step of iterative refinement on the final basis
    xB = xB + sla.lu_solve(lu, b - B @ xB, check_finite=False)
    lam = np.zeros(P)
    cols = basis % P
    lam[cols] = np.where(basis < P, xB, -xB)
    order = np.argsort(basis)
    return SimplexResult(
        x=lam,
        basis=basis[order],
        objective=float(np.abs(lam).sum()),
        diagnostics=diag,
    )

"""Characteristic-managed factor returns.

Month slice ``m`` of a panel holds characteristics observed at ``m`` and the
returns realized over the following month, so its managed factor
``S_m' R_next / sqrt(N_m)`` is known at ``m + 1``.  A formation month ``t``
may use factor rows ``< t`` for estimation; row ``t`` is its out-of-sample
return.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import cosines, expand


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    F_in: np.ndarray  # (T, P), row j realized at month t_start + j + 1
    F_oos: np.ndarray  # (P,) factor realized after the formation month
    formation_month: int
    train_months: tuple
    T: int
    P: int


def managed_factor(S, R_next):
    """``S' R / sqrt(N)`` for an (N, P) feature matrix and length-N returns."""
    S = np.asarray(S, dtype=float)
    R = np.asarray(R_next, dtype=float)
    if S.ndim != 2 or R.ndim != 1 or S.shape[0] != R.shape[0]:
        raise ValidationError(f"S {S.shape} and R {R.shape} are not conformable")
    if S.shape[0] < 1:
        raise ValidationError("managed factor needs at least one asset")
    return S.T @ R / np.sqrt(S.shape[0])


def factor_series(panel, draw, start=0, stop=None):
    """Managed factors of every month slice in ``[start, stop)``, shape (n, P)."""
    months = panel.months[start:stop]
    out = np.empty((len(months), draw.P))
    for k, m in enumerate(months):
        out[k] = managed_factor(expand(draw, m.Z), m.R_next)
    return out


def unscaled_factor_series(panel, draw):
    """Factor series built from ``cos(.)`` features without the sqrt(2/P) factor.

    Column prefixes rescaled by ``sqrt(2/P)`` give the factors of the nested
    ``P``-feature expansion, so one pass serves a whole complexity sweep.
    """
    out = np.empty((len(panel), draw.P))
    for k, m in enumerate(panel.months):
        out[k] = cosines(draw, m.Z).T @ m.R_next / np.sqrt(m.N)
    return out


def build_window(panel, draw, t_start, T):
    """Training matrix over slices ``t_start .. t_start+T-1`` and the factor of
    formation month ``t_start + T``."""
    if T < 1:
        raise ValidationError("window length T must be >= 1")
    if t_start < 0:
        raise ValidationError("t_start must be >= 0")
    need = t_start + T + 1
    if need > len(panel):
        raise ValidationError(
            f"window needs {need} months but panel has {len(panel)} "
            f"(short by {need - len(panel)})")
    F = factor_series(panel, draw, t_start, t_start + T + 1)
    ids = panel.month_ids
    return FactorMatrix(
        F_in=F[:T],
        F_oos=F[T],
        formation_month=ids[t_start + T],
        train_months=tuple(ids[t_start:t_start + T]),
        T=T,
        P=draw.P,
    )

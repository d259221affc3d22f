"""Characteristic/return panels: CSV ingestion, rank standardization and a
synthetic generator with a planted sparse kernel.

Panel CSV schema (UTF-8, comma separated, one row per asset-month)::

    month,asset_id,ret_next,c1,...,cD

``month`` is an integer ``yyyymm``; empty characteristic cells are missing.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ParseError, ValidationError
from .features import FeatureSpec, cosines, draw_features

DEFAULT_MAX_MISSING = 0.30


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MonthSlice:
    month_id: int
    Z: np.ndarray
    R_next: np.ndarray
    asset_ids: tuple = ()

    def __post_init__(self):
        Z = _frozen(self.Z)
        R = _frozen(self.R_next)
        if Z.ndim != 2 or R.ndim != 1 or Z.shape[0] != R.shape[0]:
            raise ValidationError(
                f"month {self.month_id}: Z {Z.shape} and R_next {R.shape} disagree")
        if Z.shape[0] < 1:
            raise ValidationError(f"month {self.month_id}: no assets")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "R_next", R)
        ids = tuple(self.asset_ids) or tuple(str(i) for i in range(Z.shape[0]))
        if len(ids) != Z.shape[0]:
            raise ValidationError(f"month {self.month_id}: asset id count mismatch")
        object.__setattr__(self, "asset_ids", ids)

    @property
    def N(self):
        return self.Z.shape[0]

    def equals(self, other):
        return (self.month_id == other.month_id and self.asset_ids == other.asset_ids
                and np.array_equal(self.Z, other.Z) and np.array_equal(self.R_next, other.R_next))


@dataclass(frozen=True, eq=False)
class CharacteristicPanel:
    months: tuple
    D: int
    standardized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "months", tuple(self.months))
        ids = [m.month_id for m in self.months]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValidationError("months must be strictly increasing")
        for m in self.months:
            if m.Z.shape[1] != self.D:
                raise ValidationError(f"month {m.month_id}: expected D={self.D} characteristics")
            if not (np.all(np.isfinite(m.Z)) and np.all(np.isfinite(m.R_next))):
                raise ValidationError(f"month {m.month_id}: non-finite values")

    def __len__(self):
        return len(self.months)

    @property
    def month_ids(self):
        return [m.month_id for m in self.months]

    def index_of(self, month_id):
        try:
            return self.month_ids.index(month_id)
        except ValueError:
            raise ValidationError(f"month {month_id} not in panel") from None

    def equals(self, other):
        return (self.D == other.D and len(self) == len(other)
                and all(a.equals(b) for a, b in zip(self.months, other.months)))


@dataclass(frozen=True)
class PlantedKernelSpec:
    """Synthetic data-generating process.

    Expected returns are a sparse combination of ``k_true`` random Fourier
    features drawn from a ``P_max``-feature expansion with bandwidth
    ``bandwidth``.  ``signal_scale`` is the mean absolute expected-return
    loading of one planted feature (return units, before the ``sqrt(2/P_max)``
    feature scaling); ``noise_vol`` is the idiosyncratic return volatility.
    """
    k_true: int = 5
    P_max: int = 2000
    bandwidth: float = 1.0
    signal_scale: float = 0.02
    noise_vol: float = 0.1
    seed: int = 0
    support: tuple | None = field(default=None)

    def validate(self, T_total=None):
        if self.k_true < 1:
            raise ValidationError("k_true must be >= 1")
        if self.k_true > self.P_max:
            raise ValidationError(f"k_true={self.k_true} exceeds P_max={self.P_max}")
        if T_total is not None and self.k_true > T_total:
            raise ValidationError(f"k_true={self.k_true} exceeds T={T_total}")
        if self.signal_scale <= 0:
            raise ValidationError("signal_scale must be positive")
        if self.noise_vol < 0:
            raise ValidationError("noise_vol must be non-negative")
        if self.bandwidth <= 0:
            raise ValidationError("bandwidth must be positive")
        if self.support is not None:
            s = np.asarray(self.support)
            if len(s) != self.k_true or len(set(s.tolist())) != len(s):
                raise ValidationError("support must list k_true distinct indices")
            if s.min() < 0 or s.max() >= self.P_max:
                raise ValidationError("support index out of range")


def _parse_float(text, line, what):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"cannot parse {what} {text!r}", line) from None


def load_panel(path, D=None, max_missing=DEFAULT_MAX_MISSING):
    """Read a panel CSV.

    Asset-months with more than ``max_missing`` of their characteristics
    missing are dropped; remaining gaps are filled with that month's
    cross-sectional median of the characteristic.  No standardization.
    """
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        header = [h.strip() for h in header]
        if header[:3] != ["month", "asset_id", "ret_next"] or len(header) < 4:
            raise ParseError("header must start with month,asset_id,ret_next,c1,...", 1)
        n_char = len(header) - 3
        if D is not None and D != n_char:
            raise ValidationError(f"expected D={D} characteristic columns, found {n_char}")
        D = n_char
        for line, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != D + 3:
                raise ParseError(f"expected {D + 3} fields, got {len(rec)}", line)
            try:
                month = int(rec[0])
            except ValueError:
                raise ParseError(f"month {rec[0]!r} is not an integer", line) from None
            asset = rec[1].strip()
            if not asset:
                raise ParseError("empty asset_id", line)
            if not rec[2].strip():
                raise ParseError("missing ret_next", line)
            ret = _parse_float(rec[2], line, "ret_next")
            z = np.array([np.nan if not c.strip() else _parse_float(c, line, "characteristic")
                          for c in rec[3:]])
            if not np.isfinite(ret) or np.any(np.isinf(z)):
                raise ParseError("non-finite value", line)
            bucket = rows.setdefault(month, {})
            if asset in bucket:
                raise ParseError(f"duplicate asset {asset!r} in month {month}", line)
            bucket[asset] = (ret, z)

    months = []
    for month in sorted(rows):
        kept = [(a, r, z) for a, (r, z) in rows[month].items()
                if np.isnan(z).sum() / D <= max_missing]
        if not kept:
            raise ValidationError(f"month {month}: no assets survive the missing-data filter")
        ids = tuple(a for a, _, _ in kept)
        R = np.array([r for _, r, _ in kept])
        Z = np.vstack([z for _, _, z in kept])
        if np.isnan(Z).any():
            empty = np.isnan(Z).all(axis=0)
            if empty.any():
                raise ValidationError(
                    f"month {month}: characteristic column(s) "
                    f"{(np.flatnonzero(empty) + 1).tolist()} entirely missing")
            Z = np.where(np.isnan(Z), np.nanmedian(Z, axis=0), Z)
        months.append(MonthSlice(month, Z, R, ids))
    if not months:
        raise ValidationError("panel file has no data rows")
    return CharacteristicPanel(tuple(months), D)


def save_panel(panel, path):
    """Write ``panel`` in the CSV schema read by :func:`load_panel`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "asset_id", "ret_next"] + [f"c{d + 1}" for d in range(panel.D)])
        for m in panel.months:
            for i, asset in enumerate(m.asset_ids):
                w.writerow([m.month_id, asset, repr(float(m.R_next[i]))]
                           + [repr(float(v)) for v in m.Z[i]])


def standardize_column(x):
    """Average-rank scaling to ``[-0.5, 0.5]``; a single value maps to 0."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n == 1:
        return np.zeros(1)
    return (rankdata(x, method="average") - 1.0) / (n - 1.0) - 0.5


def rank_standardize(panel):
    """Cross-sectionally rank-standardize every characteristic, month by month."""
    months = []
    for m in panel.months:
        Z = np.column_stack([standardize_column(m.Z[:, d]) for d in range(panel.D)])
        months.append(MonthSlice(m.month_id, Z, m.R_next, m.asset_ids))
    return CharacteristicPanel(tuple(months), panel.D, standardized=True)


def month_sequence(start, count):
    """``count`` consecutive ``yyyymm`` integers starting at ``start``."""
    y, mth = divmod(int(start), 100)
    out = []
    for _ in range(count):
        out.append(y * 100 + mth)
        mth += 1
        if mth > 12:
            y, mth = y + 1, 1
    return out


def planted_kernel(spec, D):
    """Planted support, loadings and feature draw of the synthetic process.

    Returns ``(support, lam_true, draw)`` with ``lam_true`` of length
    ``P_max`` expressed on the ``sqrt(2/P_max)``-scaled features.
    """
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 7919]))
    if spec.support is None:
        support = np.sort(rng.choice(spec.P_max, size=spec.k_true, replace=False))
    else:
        support = np.sort(np.asarray(spec.support, dtype=int))
    mags = spec.signal_scale * rng.uniform(0.5, 1.5, spec.k_true)
    signs = rng.choice([-1.0, 1.0], spec.k_true)
    lam = np.zeros(spec.P_max)
    lam[support] = signs * mags / np.sqrt(2.0 / spec.P_max)
    fspec = FeatureSpec(P=spec.P_max, D=D, bandwidth_grid=(spec.bandwidth,),
                        seed=spec.seed, draw_index=1_000_003)
    return support, lam, draw_features(fspec)


def synth_panel(spec, T_total, N, D, start_month=200001):
    """Simulate a standardized panel with returns ``S_max lam_true + noise``.

    Characteristics are i.i.d. uniform and then rank-standardized, so every
    month's columns are permutations of the same grid.  The output is a pure
    function of the arguments.
    """
    if T_total < 2:
        raise ValidationError("T_total must be >= 2")
    if N < D:
        raise ValidationError(f"N={N} must be >= D={D}")
    spec.validate(T_total)
    support, lam, draw = planted_kernel(spec, D)
    scale = np.sqrt(2.0 / spec.P_max)
    om = draw.omegas[support]
    ph = draw.phases[support]
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 104729]))
    ids = tuple(f"A{i:05d}" for i in range(N))
    months = []
    for month in month_sequence(start_month, T_total):
        raw = rng.uniform(size=(N, D))
        Z = np.column_stack([standardize_column(raw[:, d]) for d in range(D)])
        mean = scale * np.cos(Z @ om.T + ph) @ lam[support]
        R = mean + spec.noise_vol * rng.standard_normal(N)
        months.append(MonthSlice(month, Z, R, ids))
    return CharacteristicPanel(tuple(months), D, standardized=True), lam


def true_features(spec, Z):
    """The ``P_max`` scaled features of the planted process evaluated at ``Z``."""
    _, _, draw = planted_kernel(spec, Z.shape[1])
    return np.sqrt(2.0 / spec.P_max) * cosines(draw, Z)

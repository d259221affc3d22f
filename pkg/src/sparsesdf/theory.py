"""Executable checks of the sparse-versus-dense interpolation theory.

* support of a basic minimum-l1 interpolator is at most ``T``;
* every interpolator is ``ridgeless + h`` with ``h`` in ``ker(F)``, so the
  mean-return gap between any two interpolators only sees the kernel
  component of the mean vector;
* the l1 value ``v_P`` is nonincreasing along nested feature dictionaries,
  and bounds the SDF volatility through ``sqrt(eig_max(Sigma)) * v_P``.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import SdfError, ValidationError
from .features import FeatureSpec, draw_features
from .factors import unscaled_factor_series
from .panel import PlantedKernelSpec, planted_kernel, synth_panel
from .solvers import basis_pursuit, ridgeless

MATERIALIZE_LIMIT = 2000
NORM_FLOOR = 1e-12
INTERP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ProjectorDecomposition:
    """Orthogonal split of ``R^P`` into ``row(F)`` and ``ker(F)``.

    ``basis`` is a (P, T) orthonormal basis of ``row(F)`` from a thin QR of
    ``F'``; projectors are applied as operators and only materialized on
    request for ``P <= MATERIALIZE_LIMIT``.
    """
    basis: np.ndarray
    mu: np.ndarray
    mu_par: np.ndarray
    mu_perp: np.ndarray

    @property
    def P(self):
        return self.basis.shape[0]

    def apply_row(self, x):
        return self.basis @ (self.basis.T @ x)

    def apply_kernel(self, x):
        return x - self.apply_row(x)

    @property
    def row_projector(self):
        if self.P > MATERIALIZE_LIMIT:
            raise ValidationError(f"P={self.P} too large to materialize the projector")
        return self.basis @ self.basis.T

    @property
    def kernel_projector(self):
        return np.eye(self.P) - self.row_projector


def decompose(F, mu, rank_tol=1e-10):
    """Project ``mu`` onto ``row(F)`` and ``ker(F)``; ``F`` must have full row rank."""
    F = np.asarray(F, dtype=float)
    mu = np.asarray(mu, dtype=float)
    T, P = F.shape
    if mu.shape != (P,):
        raise ValidationError(f"mu must have length {P}")
    if T > P:
        raise ValidationError(f"rank T={T} impossible with P={P}")
    Q, R = np.linalg.qr(F.T)
    d = np.abs(np.diag(R))
    if d.min() <= rank_tol * d.max():
        raise ValidationError("F is rank deficient; exact-rank projector required")
    mu_par = Q @ (Q.T @ mu)
    return ProjectorDecomposition(basis=Q, mu=mu, mu_par=mu_par, mu_perp=mu - mu_par)


@dataclass
class GapReport:
    gap_direct: float
    gap_identity: float
    h_norm: float
    mu_perp_norm: float
    cos_theta: float
    kernel_residual: float
    degenerate_angle: bool = False

    @property
    def identity_error(self):
        return abs(self.gap_direct - self.gap_identity)

    @property
    def identity_holds(self):
        return self.identity_error <= 1e-10 * max(1.0, abs(self.gap_direct))

    @property
    def cosine_holds(self):
        if self.degenerate_angle:
            return True
        rhs = self.mu_perp_norm * self.h_norm * self.cos_theta
        return abs(self.gap_identity - rhs) <= 1e-10 * max(abs(rhs), abs(self.gap_identity), 1e-300)

    @property
    def holds(self):
        return self.kernel_residual <= INTERP_TOL and self.identity_holds and self.cosine_holds

    def to_dict(self):
        d = asdict(self)
        d["identity_error"] = self.identity_error
        d["holds"] = self.holds
        return d


def mean_gap(F, mu, bp, rl, decomposition=None, fault=None):
    """Mean-return gap between two interpolators, computed two ways.

    ``gap_direct = mu'(lam_bp - lam_rl)`` and ``gap_identity = mu_perp' h``
    with ``h = lam_bp - lam_rl``.  ``fault='zero_kernel_move'`` replaces the
    sparse solution by the dense one in the direct computation only; it exists
    to demonstrate that the check can fail.
    """
    F = np.asarray(F, dtype=float)
    for sol in (bp, rl):
        resid = float(np.max(np.abs(F @ sol.lam - 1.0)))
        if resid > INTERP_TOL:
            raise ValidationError(f"{sol.method} solution does not interpolate (residual {resid:.2e})")
    dec = decomposition or decompose(F, mu)
    h = bp.lam - rl.lam
    lam_bp = rl.lam if fault == "zero_kernel_move" else bp.lam
    gap_direct = float(dec.mu @ lam_bp - dec.mu @ rl.lam)
    gap_identity = float(dec.mu_perp @ h)
    h_norm = float(np.linalg.norm(h))
    mp_norm = float(np.linalg.norm(dec.mu_perp))
    degenerate = h_norm < NORM_FLOOR or mp_norm < NORM_FLOOR
    cos = 0.0 if degenerate else gap_identity / (h_norm * mp_norm)
    return GapReport(
        gap_direct=gap_direct,
        gap_identity=gap_identity,
        h_norm=h_norm,
        mu_perp_norm=mp_norm,
        cos_theta=float(cos),
        kernel_residual=float(np.max(np.abs(F @ h))),
        degenerate_angle=degenerate,
    )


class ScaleChain(NamedTuple):
    vol: float
    bound: float


def scale_chain(bp, Sigma):
    """Volatility ``sqrt(lam' Sigma lam)`` and its bound ``sqrt(eig_max) ||lam||_1``."""
    lam = np.asarray(getattr(bp, "lam", bp), dtype=float)
    S = np.asarray(Sigma, dtype=float)
    if S.shape != (lam.size, lam.size):
        raise ValidationError(f"Sigma must be {lam.size}x{lam.size}")
    if not np.allclose(S, S.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(S).max())):
        raise ValidationError("Sigma is not symmetric")
    top = max(float(np.linalg.eigvalsh(S)[-1]), 0.0)
    vol = float(np.sqrt(max(lam @ S @ lam, 0.0)))
    bound = float(np.sqrt(top) * np.abs(lam).sum())
    if vol > bound + 1e-10 * max(1.0, bound):
        raise SdfError(f"scale chain violated: vol {vol} > bound {bound}")
    return ScaleChain(vol, bound)


# -- mean providers ---------------------------------------------------------

class SampleMeanOracle:
    """``mu_P`` as the sample mean of nested factors.

    ``unscaled`` holds factor rows built from ``cos`` features without the
    ``sqrt(2/P)`` factor; ``scale`` is ``'rff'`` (``sqrt(2/P)`` per ``P``) or a
    fixed float applied to every ``P``.
    """
    name = "sample_mean"

    def __init__(self, unscaled, scale="rff"):
        self.colmean = np.asarray(unscaled, dtype=float).mean(axis=0)
        self.scale = scale

    def __call__(self, P):
        s = np.sqrt(2.0 / P) if self.scale == "rff" else float(self.scale)
        return s * self.colmean[:P]


def _grid_charfn(w, N):
    """``E exp(i w z)`` for ``z`` uniform on the rank grid of ``N`` assets."""
    g = np.zeros(1) if N == 1 else np.arange(N) / (N - 1.0) - 0.5
    return np.exp(1j * np.multiply.outer(w, g)).mean(axis=-1)


class PlantedMeanOracle:
    """Exact ``mu_P = E[F_P]`` under :func:`sparsesdf.panel.synth_panel`.

    Each rank-standardized characteristic of an asset is uniform on the grid
    ``{k/(N-1) - 1/2}`` and independent across characteristics, so
    ``E[cos(w'z + phi)] = Re(exp(i phi) prod_d E exp(i w_d z_d))``.
    """
    name = "planted_analytic"

    def __init__(self, spec, draw, N, scale="rff"):
        support, lam, true_draw = planted_kernel(spec, draw.D)
        amp = lam[support] * np.sqrt(2.0 / spec.P_max)
        nu = true_draw.omegas[support]
        c = true_draw.phases[support]
        om, b = draw.omegas, draw.phases
        # E[cos(A) cos(B)] = (E cos(A - B) + E cos(A + B)) / 2
        diff = om[:, None, :] - nu[None, :, :]
        summ = om[:, None, :] + nu[None, :, :]
        e_minus = np.real(np.exp(1j * (b[:, None] - c[None, :]))
                          * np.prod(_grid_charfn(diff, N), axis=-1))
        e_plus = np.real(np.exp(1j * (b[:, None] + c[None, :]))
                         * np.prod(_grid_charfn(summ, N), axis=-1))
        self.colmean = np.sqrt(N) * 0.5 * (e_minus + e_plus) @ amp
        self.scale = scale

    def __call__(self, P):
        s = np.sqrt(2.0 / P) if self.scale == "rff" else float(self.scale)
        return s * self.colmean[:P]


@dataclass
class ComplexityRecord:
    P: int
    mu_perp_norm: float
    h_norm: float
    cos_theta: float
    gap: float
    v_P: float
    bound: float | None = None


@dataclass
class ComplexityReport:
    records: list
    provider: str
    cond_i: bool
    cond_ii: bool
    cond_iii: bool
    h_lower: float
    rho_lower: float
    bound_claimed: bool
    bound_holds: bool | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def complexity_gap_bound(instances, mu_oracle, tol=1e-12):
    """Track ``(||mu_perp||, ||h||, cos theta, gap)`` along increasing ``P``.

    ``instances`` is a sequence of (T, P) factor matrices from one nested
    feature draw, ordered by ``P``; ``mu_oracle(P)`` supplies ``mu_P``.  The
    lower bound ``h_lower * rho_lower * ||mu_perp||`` is reported only when all
    three monotonicity / positivity conditions hold on the sequence.
    """
    instances = list(instances)
    if len(instances) < 2:
        raise ValidationError("need at least two complexity levels")
    recs = []
    for F in instances:
        F = np.asarray(F, dtype=float)
        P = F.shape[1]
        mu = np.asarray(mu_oracle(P), dtype=float)
        bp, rl = basis_pursuit(F), ridgeless(F)
        g = mean_gap(F, mu, bp, rl)
        recs.append(ComplexityRecord(P=P, mu_perp_norm=g.mu_perp_norm, h_norm=g.h_norm,
                                     cos_theta=g.cos_theta, gap=g.gap_direct, v_P=bp.l1_norm))
    Ps = [r.P for r in recs]
    if any(b <= a for a, b in zip(Ps, Ps[1:])):
        raise ValidationError("instances must have strictly increasing P")
    norms = [r.mu_perp_norm for r in recs]
    cond_i = all(b >= a - tol * max(1.0, a) for a, b in zip(norms, norms[1:]))
    h_lower = min(r.h_norm for r in recs)
    rho_lower = min(r.cos_theta for r in recs)
    cond_ii = h_lower > 0
    cond_iii = rho_lower > 0
    notes = []
    if not cond_iii:
        notes.append("condition (iii) violated: some cos(theta) <= 0, no bound claimed")
    if not cond_ii:
        notes.append("condition (ii) violated: zero kernel move")
    if not cond_i:
        notes.append("condition (i) violated: ||mu_perp|| not increasing")
    claimed = cond_ii and cond_iii
    holds = None
    if all(n < NORM_FLOOR for n in norms):
        # no kernel mean at any P: every gap is zero and so is the bound
        notes.append("mu_perp = 0 at every P: gap and bound are 0")
        for r in recs:
            r.bound = 0.0
        claimed = True
        holds = all(abs(r.gap) <= 1e-10 for r in recs)
    elif claimed:
        for r in recs:
            r.bound = h_lower * rho_lower * r.mu_perp_norm
        holds = all(r.gap >= r.bound - 1e-10 * max(1.0, abs(r.gap)) for r in recs)
    return ComplexityReport(records=recs, provider=getattr(mu_oracle, "name", "custom"),
                            cond_i=cond_i, cond_ii=cond_ii, cond_iii=cond_iii,
                            h_lower=float(h_lower), rho_lower=float(rho_lower),
                            bound_claimed=claimed, bound_holds=holds, notes=notes)


# -- randomized verification suite -----------------------------------------

@dataclass
class VerifySettings:
    n_instances: int = 60
    T_values: tuple = (5, 20, 60)
    max_ratio: int = 20
    n_kernel_vectors: int = 50
    n_nested_seeds: int = 20
    nested_T: int = 10
    nested_multipliers: tuple = (2, 4, 8, 16)
    seed: int = 20240601


def _random_instance(rng, T, P):
    return rng.standard_normal((T, P))


def _nested_unscaled(seed, T, P_max, D=3, N=50):
    spec = PlantedKernelSpec(k_true=2, P_max=64, signal_scale=0.05, noise_vol=0.1, seed=seed)
    panel, _ = synth_panel(spec, T + 1, N, D)
    draw = draw_features(FeatureSpec(P=P_max, D=D, seed=seed, draw_index=0))
    return panel, draw, unscaled_factor_series(panel, draw)


def run_suite(settings=None, fault=None):
    """Randomized check of every structural property; returns a JSON-able dict.

    Each failing property records the seed of its first failing instance so
    that it can be replayed.
    """
    s = settings or VerifySettings()
    props = {}

    def record(name, ok, worst, seed):
        p = props.setdefault(name, {"passed": True, "checked": 0, "worst": 0.0,
                                    "failing_seed": None})
        p["checked"] += 1
        p["worst"] = max(p["worst"], float(worst))
        if not ok and p["passed"]:
            p["passed"] = False
            p["failing_seed"] = int(seed)

    for i in range(s.n_instances):
        seed = s.seed + i
        rng = np.random.default_rng(seed)
        T = int(s.T_values[i % len(s.T_values)])
        P = int(rng.integers(T + 1, s.max_ratio * T + 1))
        F = _random_instance(rng, T, P)
        bp, rl = basis_pursuit(F), ridgeless(F)
        record("bp_support_le_T", len(bp.support) <= T, len(bp.support) - T, seed)
        record("interpolation_bp", bp.residual_inf <= INTERP_TOL, bp.residual_inf, seed)
        record("interpolation_rl", rl.residual_inf <= INTERP_TOL, rl.residual_inf, seed)
        record("l2_le_l1", bp.l2_norm <= bp.l1_norm + 1e-10, bp.l2_norm - bp.l1_norm, seed)
        record("bp_le_rl_l1", bp.l1_norm <= rl.l1_norm + 1e-9, bp.l1_norm - rl.l1_norm, seed)
        record("rl_le_bp_l2", rl.l2_norm <= bp.l2_norm + 1e-9, rl.l2_norm - bp.l2_norm, seed)

        mu = rng.standard_normal(P)
        dec = decompose(F, mu)
        gap = mean_gap(F, mu, bp, rl, decomposition=dec, fault=fault)
        record("mean_gap_identity", gap.holds, gap.identity_error, seed)
        mu_row = F.T @ rng.standard_normal(T)
        gz = mean_gap(F, mu_row, bp, rl, fault=fault)
        zero_ok = gz.identity_holds and abs(gz.gap_direct) <= 1e-10 * max(1.0, np.abs(mu_row).sum())
        record("mean_gap_rowspace_zero", zero_ok, abs(gz.gap_direct), seed)
        record("row_space_membership",
               np.linalg.norm(dec.apply_kernel(rl.lam)) <= 1e-8 * max(1.0, rl.l2_norm),
               np.linalg.norm(dec.apply_kernel(rl.lam)), seed)

        worst_feas, worst_orth, worst_opt = 0.0, 0.0, 0.0
        for _ in range(s.n_kernel_vectors):
            h = dec.apply_kernel(rng.standard_normal(P))
            lam = rl.lam + h
            worst_feas = max(worst_feas, float(np.max(np.abs(F @ lam - 1.0))))
            worst_orth = max(worst_orth, abs(float(dec.mu_par @ h))
                             / max(1.0, np.linalg.norm(dec.mu_par) * np.linalg.norm(h)))
            worst_opt = max(worst_opt, bp.l1_norm - float(np.abs(lam).sum()))
        record("feasible_set_parameterization", worst_feas <= INTERP_TOL, worst_feas, seed)
        record("gap_channel_orthogonality", worst_orth <= 1e-8, worst_orth, seed)
        record("bp_optimal_vs_kernel_moves", worst_opt <= 1e-9, worst_opt, seed)

        A = rng.standard_normal((P, P + 3))
        Sigma = A @ A.T / (P + 3)
        sc = scale_chain(bp, Sigma)
        record("scale_chain", sc.vol <= sc.bound + 1e-10, sc.vol - sc.bound, seed)

    # v_P along nested dictionaries: features are shared prefixes with one
    # fixed normalization across the sequence
    table = None
    for k in range(s.n_nested_seeds):
        seed = s.seed + 10_000 + k
        T = s.nested_T
        Ps = [m * T for m in s.nested_multipliers]
        panel, draw, U = _nested_unscaled(seed, T, max(Ps))
        F_full = np.sqrt(2.0 / max(Ps)) * U[:T]
        vals = [basis_pursuit(F_full[:, :P]).l1_norm for P in Ps]
        inc = max(b - a for a, b in zip(vals, vals[1:]))
        record("v_P_nonincreasing", inc <= 1e-9, max(inc, 0.0), seed)
        if table is None:
            oracle = SampleMeanOracle(U, scale=np.sqrt(2.0 / max(Ps)))
            rep = complexity_gap_bound([F_full[:, :P] for P in Ps], oracle)
            table = rep.to_dict()

    return {
        "passed": all(p["passed"] for p in props.values()),
        "fault": fault,
        "settings": asdict(s),
        "properties": props,
        "complexity_table": table,
    }


def write_report(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")

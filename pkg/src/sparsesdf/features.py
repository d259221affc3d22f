"""Random Fourier feature expansions of standardized characteristics.

A feature draw is fully determined by ``(seed, draw_index)``.  Frequencies
and phases come from separate streams filled in (feature, dimension) order,
so the draw with ``P`` features is an exact prefix of the draw with any
``P' >= P`` features.  The bandwidth is fixed per ``draw_index``.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_BANDWIDTHS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

_BANDWIDTH_STREAM = 0
_OMEGA_STREAM = 1
_PHASE_STREAM = 2


@dataclass(frozen=True)
class FeatureSpec:
    P: int
    D: int
    bandwidth_grid: tuple = DEFAULT_BANDWIDTHS
    seed: int = 0
    draw_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bandwidth_grid", tuple(float(b) for b in self.bandwidth_grid))
        if self.P < 1:
            raise ValidationError(f"P must be >= 1, got {self.P}")
        if self.D < 1:
            raise ValidationError(f"D must be >= 1, got {self.D}")
        if not self.bandwidth_grid or min(self.bandwidth_grid) <= 0:
            raise ValidationError("bandwidth_grid must be non-empty and positive")


@dataclass(frozen=True, eq=False)
class FeatureDraw:
    spec: FeatureSpec
    omegas: np.ndarray  # (P, D)
    phases: np.ndarray  # (P,)
    bandwidth: float

    @property
    def P(self):
        return self.omegas.shape[0]

    @property
    def D(self):
        return self.omegas.shape[1]

    def to_json(self):
        """Sidecar sufficient to regenerate the draw; matrices are not stored."""
        s = self.spec
        return json.dumps({
            "seed": s.seed,
            "draw_index": s.draw_index,
            "P": s.P,
            "D": s.D,
            "bandwidth": self.bandwidth,
            "bandwidth_grid": list(s.bandwidth_grid),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        spec = FeatureSpec(P=d["P"], D=d["D"], bandwidth_grid=tuple(d["bandwidth_grid"]),
                           seed=d["seed"], draw_index=d["draw_index"])
        draw = draw_features(spec)
        if draw.bandwidth != d["bandwidth"]:
            raise ValidationError("sidecar bandwidth does not match regenerated draw")
        return draw


def _stream(seed, draw_index, which):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(draw_index), which]))


def draw_bandwidth(bandwidth_grid, seed, draw_index):
    """Bandwidth for one draw, uniform over the grid."""
    rng = _stream(seed, draw_index, _BANDWIDTH_STREAM)
    return float(bandwidth_grid[int(rng.integers(len(bandwidth_grid)))])


def draw_features(spec):
    """Sample frequencies ``omega_p ~ N(0, sigma^2 I)`` and phases ``b_p ~ U[0, 2pi)``."""
    sigma = draw_bandwidth(spec.bandwidth_grid, spec.seed, spec.draw_index)
    z = _stream(spec.seed, spec.draw_index, _OMEGA_STREAM).standard_normal((spec.P, spec.D))
    phases = _stream(spec.seed, spec.draw_index, _PHASE_STREAM).uniform(0.0, 2 * np.pi, spec.P)
    omegas = sigma * z
    omegas.setflags(write=False)
    phases.setflags(write=False)
    return FeatureDraw(spec=spec, omegas=omegas, phases=phases, bandwidth=sigma)


def prefix(draw, P):
    """The first ``P`` features of ``draw``, equal to a direct draw at ``P``."""
    if not 1 <= P <= draw.P:
        raise ValidationError(f"prefix size {P} outside [1, {draw.P}]")
    s = draw.spec
    spec = FeatureSpec(P=P, D=s.D, bandwidth_grid=s.bandwidth_grid,
                       seed=s.seed, draw_index=s.draw_index)
    return FeatureDraw(spec=spec, omegas=draw.omegas[:P], phases=draw.phases[:P],
                       bandwidth=draw.bandwidth)


def cosines(draw, Z):
    """Unscaled features ``cos(Z omega' + b)``, shape (N, P)."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != draw.D:
        raise ValidationError(f"Z must have {draw.D} columns, got shape {Z.shape}")
    return np.cos(Z @ draw.omegas.T + draw.phases)


def expand(draw, Z):
    """Feature matrix ``S`` with ``S[i, p] = sqrt(2/P) cos(omega_p' Z_i + b_p)``."""
    return np.sqrt(2.0 / draw.P) * cosines(draw, Z)


def nest(draw_small, draw_big):
    """True iff ``draw_small`` is the leading block of ``draw_big``."""
    if draw_small.P > draw_big.P or draw_small.D != draw_big.D:
        return False
    if draw_small.bandwidth != draw_big.bandwidth:
        return False
    k = draw_small.P
    return bool(np.array_equal(draw_small.omegas, draw_big.omegas[:k])
                and np.array_equal(draw_small.phases, draw_big.phases[:k]))

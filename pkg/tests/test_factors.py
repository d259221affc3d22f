import math

import numpy as np
import pytest

from sparsesdf.errors import ValidationError
from sparsesdf.factors import build_window, factor_series, managed_factor, unscaled_factor_series
from sparsesdf.features import FeatureSpec, draw_features, expand
from sparsesdf.panel import CharacteristicPanel, MonthSlice


def test_identity_features():
    np.testing.assert_allclose(managed_factor(np.eye(2), [1.0, 4.0]),
                               [1 / math.sqrt(2), 4 / math.sqrt(2)], rtol=1e-15)


def test_zero_returns():
    assert np.all(managed_factor(np.ones((3, 2)), np.zeros(3)) == 0)


def test_triple_loop_oracle():
    rng = np.random.default_rng(0)
    S, R = rng.standard_normal((5, 3)), rng.standard_normal(5)
    f = managed_factor(S, R)
    for p in range(3):
        assert abs(f[p] - sum(S[i, p] * R[i] for i in range(5)) / math.sqrt(5)) <= 1e-14


def test_linearity():
    rng = np.random.default_rng(1)
    S, R1, R2 = rng.standard_normal((8, 4)), rng.standard_normal(8), rng.standard_normal(8)
    np.testing.assert_allclose(managed_factor(S, 2 * R1 - 3 * R2),
                               2 * managed_factor(S, R1) - 3 * managed_factor(S, R2), atol=1e-12)


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        managed_factor(np.ones((3, 2)), np.ones(4))


@pytest.fixture
def draw():
    return draw_features(FeatureSpec(P=6, D=3, seed=2))


def test_window_composition_oracle(small_panel, draw):
    w = build_window(small_panel, draw, 4, 2)
    for j in range(2):
        m = small_panel.months[4 + j]
        np.testing.assert_allclose(w.F_in[j], managed_factor(expand(draw, m.Z), m.R_next),
                                   rtol=1e-15)
    m = small_panel.months[6]
    np.testing.assert_allclose(w.F_oos, managed_factor(expand(draw, m.Z), m.R_next))
    assert w.formation_month == m.month_id
    assert w.train_months == tuple(small_panel.month_ids[4:6])


def test_window_asset_permutation(small_panel, draw):
    perm = np.random.default_rng(3).permutation(small_panel.months[0].N)
    months = tuple(MonthSlice(m.month_id, m.Z[perm], m.R_next[perm],
                              tuple(m.asset_ids[i] for i in perm)) for m in small_panel.months)
    shuffled = CharacteristicPanel(months, small_panel.D)
    np.testing.assert_allclose(build_window(shuffled, draw, 0, 5).F_in,
                               build_window(small_panel, draw, 0, 5).F_in, atol=1e-14)


def test_window_rolling_overlap(small_panel, draw):
    a, b = build_window(small_panel, draw, 2, 4), build_window(small_panel, draw, 3, 4)
    np.testing.assert_array_equal(a.F_in[1:], b.F_in[:-1])


def test_window_no_look_ahead(small_panel, draw):
    w = build_window(small_panel, draw, 0, 5)
    months = list(small_panel.months)
    months[5] = MonthSlice(months[5].month_id, months[5].Z, months[5].R_next + 99.0,
                           months[5].asset_ids)
    w2 = build_window(CharacteristicPanel(tuple(months), small_panel.D), draw, 0, 5)
    np.testing.assert_array_equal(w.F_in, w2.F_in)
    assert not np.array_equal(w.F_oos, w2.F_oos)


def test_window_shortfall(small_panel, draw):
    with pytest.raises(ValidationError, match="short by 3"):
        build_window(small_panel, draw, 10, 12)


def test_unscaled_prefix_scaling(small_panel):
    big = draw_features(FeatureSpec(P=40, D=3, seed=7))
    small = draw_features(FeatureSpec(P=10, D=3, seed=7))
    U = unscaled_factor_series(small_panel, big)
    np.testing.assert_allclose(math.sqrt(2 / 10) * U[:, :10], factor_series(small_panel, small),
                               rtol=1e-13, atol=1e-15)

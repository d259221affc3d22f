import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsesdf.errors import ParseError, ValidationError
from sparsesdf.panel import (CharacteristicPanel, MonthSlice, PlantedKernelSpec, load_panel,
                             month_sequence, planted_kernel, rank_standardize, save_panel,
                             standardize_column, synth_panel, true_features)

HEADER = "month,asset_id,ret_next,c1,c2\n"


def _write(tmp_path, body, header=HEADER):
    path = tmp_path / "panel.csv"
    path.write_text(header + body, encoding="utf-8")
    return str(path)


def test_load_identity(tmp_path):
    path = _write(tmp_path, "200001,A,0.01,1.5,2.0\n200001,B,0.02,-1,3\n200001,C,-0.01,0,4\n")
    panel = load_panel(path, D=2)
    m = panel.months[0]
    assert (len(panel), m.N, panel.D) == (1, 3, 2)
    np.testing.assert_array_equal(m.Z, [[1.5, 2.0], [-1, 3], [0, 4]])
    np.testing.assert_array_equal(m.R_next, [0.01, 0.02, -0.01])
    assert not panel.standardized


def test_load_drops_half_missing(tmp_path):
    path = _write(tmp_path, "200001,A,0.01,1,\n200001,B,0.02,2,3\n")
    m = load_panel(path).months[0]
    assert m.asset_ids == ("B",)


def test_load_imputes_month_median(tmp_path):
    # five assets, four characteristics so one gap (25%) is kept
    body = "".join(f"200001,A{i},0.0,{v},1,1,1\n" for i, v in enumerate(["7", "", "1", "4", "10"]))
    path = _write(tmp_path, body, "month,asset_id,ret_next,c1,c2,c3,c4\n")
    m = load_panel(path).months[0]
    # median of {7, 1, 4, 10} by hand: (4 + 7) / 2
    assert m.Z[1, 0] == 5.5
    assert m.N == 5


def test_month_with_no_survivors(tmp_path):
    path = _write(tmp_path, "200001,A,0.01,1,2\n200002,A,0.01,,\n")
    with pytest.raises(ValidationError, match="200002"):
        load_panel(path)


@pytest.mark.parametrize("body,line", [
    ("200001,A,0.01,1\n", 2),
    ("200001,A,0.01,1,2\n2000x1,B,0.0,1,2\n", 3),
    ("200001,A,abc,1,2\n", 2),
    ("200001,A,0.01,1,2\n200001,A,0.02,1,2\n", 3),
    ("200001,A,,1,2\n", 2),
])
def test_parse_errors_carry_line(tmp_path, body, line):
    with pytest.raises(ParseError) as info:
        load_panel(_write(tmp_path, body))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_bad_header(tmp_path):
    with pytest.raises(ParseError):
        load_panel(_write(tmp_path, "200001,A,0.1,1\n", "month,id,ret,c1\n"))


def test_wrong_D(tmp_path):
    with pytest.raises(ValidationError):
        load_panel(_write(tmp_path, "200001,A,0.01,1,2\n"), D=3)


def test_standardize_examples():
    np.testing.assert_allclose(standardize_column([3.0, 1.0, 2.0]), [0.5, -0.5, 0.0])
    np.testing.assert_allclose(standardize_column([5.0, 5.0]), [0.0, 0.0])
    np.testing.assert_array_equal(standardize_column([42.0]), [0.0])


def test_standardize_sort_oracle():
    x = np.array([0.3, -2.0, 9.0, 1.1, 4.4, -0.7, 2.5])
    order = sorted(range(7), key=lambda i: x[i])
    expect = np.empty(7)
    for rank, i in enumerate(order):
        expect[i] = rank / 6 - 0.5
    np.testing.assert_allclose(standardize_column(x), expect, atol=1e-15)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_standardize_properties(values):
    x = np.array(values)
    s = standardize_column(x)
    assert np.all((s >= -0.5) & (s <= 0.5))
    np.testing.assert_allclose(standardize_column(s), s, atol=1e-12)
    # exact strictly monotone transform leaves ranks unchanged
    np.testing.assert_allclose(standardize_column(-0.25 * x), -s, rtol=0, atol=1e-15)


def test_standardize_monotone_invariance():
    x = np.array([0.3, -2.0, 9.0, 1.1, 4.4, -0.7, 2.5, 1.1])
    s = standardize_column(x)
    for f in (np.exp, np.arctan, lambda v: v ** 3 - 10):
        np.testing.assert_array_equal(standardize_column(f(x)), s)


def test_rank_standardize_idempotent(small_panel):
    raw = CharacteristicPanel(tuple(MonthSlice(m.month_id, np.exp(m.Z), m.R_next, m.asset_ids)
                                    for m in small_panel.months), small_panel.D)
    once = rank_standardize(raw)
    assert once.standardized
    assert rank_standardize(once).equals(once)
    assert once.equals(small_panel)


def test_synth_deterministic():
    spec = PlantedKernelSpec(k_true=3, P_max=100, seed=4)
    a, la = synth_panel(spec, 6, 20, 2)
    b, lb = synth_panel(spec, 6, 20, 2)
    assert a.equals(b) and np.array_equal(la, lb)
    c, _ = synth_panel(PlantedKernelSpec(k_true=3, P_max=100, seed=5), 6, 20, 2)
    assert not a.equals(c)


def test_synth_noiseless_recovery():
    spec = PlantedKernelSpec(k_true=1, P_max=100, noise_vol=0.0, seed=2)
    panel, lam = synth_panel(spec, 3, 40, 2)
    support, _, _ = planted_kernel(spec, 2)
    for m in panel.months:
        x = true_features(spec, m.Z)[:, support]
        coef, *_ = np.linalg.lstsq(x, m.R_next, rcond=None)
        assert np.max(np.abs(x @ coef - m.R_next)) <= 1e-10
        np.testing.assert_allclose(coef, lam[support], rtol=1e-9)


def test_synth_ols_within_three_se():
    spec = PlantedKernelSpec(k_true=5, P_max=400, noise_vol=0.05, seed=8)
    panel, lam = synth_panel(spec, 40, 100, 3)
    support, _, _ = planted_kernel(spec, 3)
    X = np.vstack([true_features(spec, m.Z)[:, support] for m in panel.months])
    y = np.concatenate([m.R_next for m in panel.months])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    s2 = resid @ resid / (len(y) - 5)
    se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    assert np.all(np.abs(coef - lam[support]) <= 3 * se)


@pytest.mark.parametrize("kwargs,T_total", [(dict(k_true=10), 5), (dict(k_true=0), 5),
                                            (dict(k_true=3, P_max=2), 5),
                                            (dict(signal_scale=0.0), 5),
                                            (dict(noise_vol=-1.0), 5)])
def test_planted_spec_validation(kwargs, T_total):
    with pytest.raises(ValidationError):
        synth_panel(PlantedKernelSpec(**kwargs), T_total, 10, 2)


def test_save_load_round_trip(tmp_path):
    panel, _ = synth_panel(PlantedKernelSpec(k_true=2, P_max=50), 4, 12, 3)
    save_panel(panel, str(tmp_path / "p.csv"))
    back = load_panel(str(tmp_path / "p.csv"), D=3)
    assert back.month_ids == panel.month_ids
    for a, b in zip(back.months, panel.months):
        assert np.array_equal(a.Z, b.Z) and np.array_equal(a.R_next, b.R_next)


def test_month_sequence_wraps_year():
    assert month_sequence(200011, 4) == [200011, 200012, 200101, 200102]


def test_slice_validation():
    with pytest.raises(ValidationError):
        MonthSlice(200001, np.zeros((2, 1)), np.zeros(3), ("a", "b"))
    with pytest.raises(ValidationError):
        CharacteristicPanel((MonthSlice(200001, np.array([[np.nan]]), np.zeros(1), ("a",)),), 1)
    m = MonthSlice(200001, np.zeros((1, 1)), np.zeros(1), ("a",))
    with pytest.raises(ValidationError):
        CharacteristicPanel((m, m), 1)

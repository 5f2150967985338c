import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcselect.errors import (
    DimensionMismatchError,
    NonFiniteEntryError,
    NonPositiveHyperparameterError,
    ValidationError,
    ZeroVarianceColumnError,
)
from dcselect.model_core import (
    BoxBounds,
    ConstraintSpec,
    build_instance,
    load_design_csv,
    load_response_csv,
    standardize,
    standardize_columns,
    validate_precision,
)


def test_build_instance_tiny():
    inst = build_instance([[1.0], [1.0]], [1.0, 1.0], 1.0, 1.0)
    assert inst.gram.shape == (1, 1) and inst.gram[0, 0] == 2.0
    assert inst.xty[0] == 2.0
    assert inst.yty == 2.0
    assert not inst.wide


def test_build_instance_rejects_nan():
    X = np.ones((3, 2))
    X[1, 0] = np.nan
    with pytest.raises(NonFiniteEntryError):
        build_instance(X, np.ones(3), 1.0, 1.0)


def test_build_instance_rejects_bad_hyperparameters():
    X = np.ones((3, 2))
    with pytest.raises(NonPositiveHyperparameterError):
        build_instance(X, np.ones(3), 0.0, 1.0)
    with pytest.raises(NonPositiveHyperparameterError):
        build_instance(X, np.ones(3), 1.0, -2.0)


def test_build_instance_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        build_instance(np.ones((3, 2)), np.ones(4), 1.0, 1.0)


def test_wide_regime_caches_row_gram():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 500))
    y = rng.standard_normal(200)
    inst = build_instance(X, y, 1.0, 1.0)
    assert inst.wide
    assert inst.gram.shape == (200, 200)
    direct = X @ X.T
    assert np.max(np.abs(inst.gram - direct)) <= 1e-12 * np.max(np.abs(direct))


@pytest.mark.parametrize("n,p", [(5, 3), (12, 12), (7, 20), (50, 50), (30, 49)])
def test_cached_stats_match_direct_products(n, p):
    rng = np.random.default_rng(n * 100 + p)
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    inst = build_instance(X, y, 2.0, 3.0)
    gram_direct = X.T @ X if p <= n else X @ X.T
    for cached, direct in ((inst.gram, gram_direct), (inst.xty, X.T @ y)):
        assert np.max(np.abs(cached - direct)) <= 1e-12 * (1 + np.max(np.abs(direct)))
    assert abs(inst.yty - y @ y) <= 1e-12 * (1 + abs(y @ y))


def test_standardize_column_moments():
    X = np.array([[1.0], [2.0], [3.0]])
    Xs = standardize_columns(X)
    assert abs(Xs.mean()) < 1e-14
    assert abs(Xs.std(ddof=1) - 1.0) < 1e-14


def test_standardize_idempotent():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 6)) * 3.0 + 1.0
    y = rng.standard_normal(40) * 2.0
    Xs, ys = standardize(X, y)
    Xs2, ys2 = standardize(Xs, ys)
    assert np.max(np.abs(Xs2 - Xs)) < 1e-10
    assert np.max(np.abs(ys2 - ys)) < 1e-10


def test_standardize_constant_column_names_index():
    X = np.ones((3, 2))
    X[:, 0] = [1.0, 2.0, 3.0]
    with pytest.raises(ZeroVarianceColumnError) as err:
        standardize_columns(X)
    assert err.value.column == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=3, max_value=20), st.integers(min_value=1, max_value=5),
       st.integers(min_value=0, max_value=10_000))
def test_standardize_moments_property(n, p, seed):
    X = np.random.default_rng(seed).standard_normal((n, p)) * 5 + 2
    Xs = standardize_columns(X)
    assert np.max(np.abs(Xs.mean(axis=0))) < 1e-10
    assert np.max(np.abs(Xs.std(axis=0, ddof=1) - 1)) < 1e-10


def test_validate_precision():
    with pytest.raises(ValidationError):
        validate_precision(np.array([1.0, -1.0]), 2)
    with pytest.raises(NonFiniteEntryError):
        validate_precision(np.array([1.0, np.inf]), 2)
    with pytest.raises(DimensionMismatchError):
        validate_precision(np.array([1.0]), 2)


def test_box_bounds_validation():
    with pytest.raises(ValidationError):
        BoxBounds(0.0, 1.0)
    with pytest.raises(ValidationError):
        BoxBounds(2.0, 1.0)


def test_constraint_spec_validation():
    with pytest.raises(ValidationError):
        ConstraintSpec(structure="score-monotone")
    spec = ConstraintSpec(structure="disjoint-groups", groups=((0, 1), (2,)))
    spec.validate_for_dim(3)
    with pytest.raises(ValidationError):
        spec.validate_for_dim(4)


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    X = rng.standard_normal((6, 3))
    y = rng.standard_normal(6)
    xp = tmp_path / "x.csv"
    yp = tmp_path / "y.csv"
    np.savetxt(xp, X, delimiter=",")
    np.savetxt(yp, y, delimiter=",")
    assert np.allclose(load_design_csv(xp), X)
    assert np.allclose(load_response_csv(yp), y)
    with open(tmp_path / "xh.csv", "w") as fh:
        fh.write("a,b,c\n")
        np.savetxt(fh, X, delimiter=",")
    assert np.allclose(load_design_csv(tmp_path / "xh.csv", header=True), X)

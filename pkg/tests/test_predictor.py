"""Rating predictor: ridge closed form, forest behavior, CV, importance,
serialization."""

import numpy as np
import pytest

from abeval.errors import (
    DataError,
    DimensionMismatchError,
    SchemaMismatchError,
    TooFewRowsError,
)
from abeval.features import ENCODED_LENGTH, ENCODING_SCHEMA_HASH
from abeval.predictor import (
    ForestModel,
    RidgeModel,
    cross_validate,
    feature_importance,
    load_model,
    make_model,
    model_from_json,
    model_to_json,
    pearson,
    save_model,
)


def linear_data(n=60, seed=0, slope=0.5, intercept=2.0, noise=0.0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 4, size=(n, 1))
    y = intercept + slope * x[:, 0] + (rng.normal(0, noise, n) if noise else 0.0)
    return x, y


# ── ridge ────────────────────────────────────────────────────────────


def test_ols_recovers_line_exactly():
    X, y = linear_data()
    model = RidgeModel(penalty=0.0).fit(X, y)
    coef, intercept = model.coefficients()
    assert coef[0] == pytest.approx(0.5, abs=1e-10)
    assert intercept == pytest.approx(2.0, abs=1e-10)
    assert model.predict(X) == pytest.approx(y, abs=1e-8)


def test_penalty_shrinks_coefficients():
    X, y = linear_data(noise=0.1, seed=3)
    loose, _ = RidgeModel(penalty=0.0).fit(X, y).coefficients()
    tight, _ = RidgeModel(penalty=50.0).fit(X, y).coefficients()
    assert abs(tight[0]) < abs(loose[0])


def test_constant_labels_predict_constant():
    X = np.random.default_rng(1).normal(size=(20, 3))
    y = np.full(20, 4.0)
    for model in (RidgeModel(penalty=1.0), ForestModel(n_trees=10, max_depth=3)):
        model.fit(X, y, seed=0)
        assert model.predict(X) == pytest.approx(np.full(20, 4.0), abs=1e-9)


def test_collinear_one_hot_columns_are_handled():
    # x0 + x1 = 1 exactly (complementary one-hot) — OLS via lstsq must not blow up
    rng = np.random.default_rng(4)
    flag = rng.integers(0, 2, size=40).astype(float)
    X = np.column_stack([flag, 1.0 - flag, rng.normal(size=40)])
    y = 3.0 + 0.8 * flag + 0.1 * X[:, 2]
    model = RidgeModel(penalty=0.0).fit(X, y)
    assert model.predict(X) == pytest.approx(y, abs=1e-8)


def test_predictions_clipped_to_rating_range():
    X = np.array([[0.0], [1.0], [10.0], [-10.0]])
    y = np.array([1.0, 5.0, 5.0, 1.0])
    model = RidgeModel(penalty=0.0).fit(X[:2], y[:2])  # slope 4: extrapolates wildly
    preds = model.predict(X)
    assert preds.min() >= 1.0
    assert preds.max() <= 5.0


def test_predict_before_fit_and_dimension_mismatch():
    model = RidgeModel()
    with pytest.raises(DataError):
        model.predict(np.zeros((2, 3)))
    X, y = linear_data(n=10)
    model.fit(X, y)
    with pytest.raises(DimensionMismatchError):
        model.predict(np.zeros((2, 3)))


# ── forest ───────────────────────────────────────────────────────────


def step_data(n=200, seed=2):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(n, 4))
    y = np.where(X[:, 1] > 0.5, 4.5, 2.0) + rng.normal(0, 0.05, n)
    return X, np.clip(y, 1, 5)


def test_forest_learns_step_function():
    X, y = step_data()
    model = ForestModel(n_trees=60, max_depth=6, min_leaf=3).fit(X, y, seed=0)
    preds = model.predict(X)
    # step height is 2.5; anything near the noise floor confirms the split
    assert float(np.mean((preds - y) ** 2)) < 0.15
    assert preds.min() >= 1.0 and preds.max() <= 5.0


def test_forest_seed_determinism():
    X, y = step_data()
    a = ForestModel(n_trees=20, max_depth=5).fit(X, y, seed=7).predict(X)
    b = ForestModel(n_trees=20, max_depth=5).fit(X, y, seed=7).predict(X)
    c = ForestModel(n_trees=20, max_depth=5).fit(X, y, seed=8).predict(X)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forest_beats_ridge_on_step():
    X, y = step_data()
    forest = cross_validate(lambda: ForestModel(n_trees=40, max_depth=6), X, y, seed=1)
    ridge = cross_validate(lambda: RidgeModel(penalty=1.0), X, y, seed=1)
    assert forest.mse < ridge.mse


# ── cross-validation ─────────────────────────────────────────────────


def test_cv_exact_linear():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(100, 4))
    w = np.array([0.3, -0.2, 0.1, 0.4])
    y = np.clip(3.0 + X @ w, 1, 5)
    report = cross_validate(lambda: RidgeModel(penalty=0.0), X, y, k=5, seed=0)
    assert report.mse < 1e-6
    assert report.pearson > 0.999
    assert len(report.folds) == 5
    assert sum(f.n for f in report.folds) == 100


def test_cv_deterministic_and_seed_sensitive():
    X, y = step_data(n=80)
    a = cross_validate(lambda: ForestModel(n_trees=10, max_depth=4), X, y, seed=3)
    b = cross_validate(lambda: ForestModel(n_trees=10, max_depth=4), X, y, seed=3)
    c = cross_validate(lambda: ForestModel(n_trees=10, max_depth=4), X, y, seed=4)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != c.to_dict()


def test_cv_too_few_rows():
    X = np.zeros((3, 2))
    y = np.zeros(3)
    with pytest.raises(TooFewRowsError):
        cross_validate(lambda: RidgeModel(), X, y, k=5, seed=0)


def test_pearson_zero_variance_is_zero():
    assert pearson(np.array([1.0, 1.0, 1.0]), np.array([1.0, 2.0, 3.0])) == 0.0


# ── feature importance ───────────────────────────────────────────────


def test_importance_finds_dominant_group():
    rng = np.random.default_rng(5)
    n = 300
    X = np.zeros((n, ENCODED_LENGTH))
    # fill one-hot groups uniformly
    s = rng.integers(0, 3, n)
    t = rng.integers(3, 11, n)
    X[np.arange(n), s] = 1.0
    X[np.arange(n), t] = 1.0
    X[:, 11:23] = rng.integers(0, 2, size=(n, 12)).astype(float)
    count = rng.integers(0, 20, n).astype(float)
    X[:, 23] = count
    X[:, 24] = np.log1p(count)
    push = X[:, 19]  # git_push column
    y = np.clip(2.0 + 2.5 * push + rng.normal(0, 0.1, n), 1, 5)
    model = ForestModel(n_trees=40, max_depth=8).fit(X, y, seed=0)
    ranked = feature_importance(model, X, y, repeats=5, seed=0)
    assert ranked[0][0] == "git_push"
    assert ranked[0][1] > 0
    names = [name for name, _ in ranked]
    assert set(names) == {
        "sentiment", "task_category", "user_message_count",
        "misunderstood_intention", "did_not_follow_instruction",
        "insufficient_analysis", "insufficient_testing", "insufficient_debugging",
        "incomplete_implementation", "scope_creep",
        "git_commit", "git_push", "git_pull", "git_reset", "git_rebase",
    }


def test_importance_deterministic():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(60, ENCODED_LENGTH))
    y = np.clip(3 + X[:, 0], 1, 5)
    model = RidgeModel(penalty=1.0).fit(X, y)
    a = feature_importance(model, X, y, repeats=3, seed=2)
    b = feature_importance(model, X, y, repeats=3, seed=2)
    assert a == b


# ── serialization ────────────────────────────────────────────────────


@pytest.mark.parametrize("kind", ["ridge", "forest"])
def test_model_json_round_trip(tmp_path, kind):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(50, ENCODED_LENGTH))
    y = np.clip(3 + 0.4 * X[:, 2], 1, 5)
    hyper = {"penalty": 0.5} if kind == "ridge" else {"n_trees": 8, "max_depth": 4}
    model = make_model(kind, **hyper).fit(X, y, seed=1)
    text = model_to_json(model)
    back = model_from_json(text)
    assert np.array_equal(back.predict(X), model.predict(X))
    assert back.hyperparameters() == model.hyperparameters()
    path = tmp_path / "model.json"
    save_model(model, str(path))
    assert np.array_equal(load_model(str(path)).predict(X), model.predict(X))


def test_model_json_schema_mismatch():
    X = np.random.default_rng(0).normal(size=(10, 3))
    y = np.clip(3 + X[:, 0], 1, 5)
    model = RidgeModel(penalty=1.0).fit(X, y)
    text = model_to_json(model)
    with pytest.raises(SchemaMismatchError):
        model_from_json(text, expected_schema_hash="0123456789abcdef")
    bad_version = text.replace('"format_version": 1', '"format_version": 99')
    with pytest.raises(SchemaMismatchError):
        model_from_json(bad_version, expected_schema_hash=None)


def test_model_json_carries_current_schema_hash():
    X = np.random.default_rng(0).normal(size=(10, ENCODED_LENGTH))
    y = np.clip(3 + X[:, 0], 1, 5)
    model = RidgeModel(penalty=1.0).fit(X, y)
    assert f'"schema_hash": "{ENCODING_SCHEMA_HASH}"' in model_to_json(model)


def test_make_model_rejects_unknown_kind():
    with pytest.raises(DataError):
        make_model("boosted")

"""Rating predictors: ridge regression and a bagged regression-tree ensemble.

Both are deterministic given a seed, predict on the 1..5 rating scale
(outputs clipped), and serialize to versioned JSON stamped with the feature
encoding schema hash so a model never silently predicts on drifted columns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    DimensionMismatchError,
    SchemaMismatchError,
    TooFewRowsError,
)
from .features import ENCODING_SCHEMA_HASH, FEATURE_GROUPS
from .seeds import rng_for

RATING_MIN = 1.0
RATING_MAX = 5.0
MODEL_FORMAT_VERSION = 1


def _check_matrix(X: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError(f"feature matrix must be 2-D, got shape {X.shape}")
    if y is not None:
        y = np.asarray(y, dtype=float)
        if y.shape != (X.shape[0],):
            raise DimensionMismatchError(
                f"labels shape {y.shape} does not match {X.shape[0]} rows"
            )
        if not np.all(np.isfinite(y)):
            raise DataError("labels contain non-finite values")
    if not np.all(np.isfinite(X)):
        raise DataError("feature matrix contains non-finite values")
    return X


class RidgeModel:
    """Least squares on standardized columns with an L2 penalty.

    Standardization statistics come from the training rows only. penalty=0
    degrades to ordinary least squares via a minimum-norm solve, so exactly
    collinear columns (one-hot groups) and constant labels stay well defined
    instead of failing on a singular system.
    """

    kind = "ridge"

    def __init__(self, penalty: float = 1.0):
        if penalty < 0:
            raise DataError("ridge penalty must be >= 0")
        self.penalty = float(penalty)
        self.weights: np.ndarray | None = None
        self.intercept: float = 0.0
        self.means: np.ndarray | None = None
        self.stds: np.ndarray | None = None
        self.schema_hash: str = ENCODING_SCHEMA_HASH

    def fit(self, X, y, seed: int = 0) -> "RidgeModel":
        X = _check_matrix(X, np.asarray(y, dtype=float))
        y = np.asarray(y, dtype=float)
        if X.shape[0] < 1:
            raise TooFewRowsError("ridge needs at least one row")
        self.means = X.mean(axis=0)
        stds = X.std(axis=0)
        stds[stds < 1e-12] = 1.0  # constant columns carry no signal
        self.stds = stds
        Z = (X - self.means) / self.stds
        yc = y - y.mean()
        if self.penalty > 0:
            p = Z.shape[1]
            A = np.vstack([Z, np.sqrt(self.penalty) * np.eye(p)])
            b = np.concatenate([yc, np.zeros(p)])
        else:
            A, b = Z, yc
        self.weights, *_ = np.linalg.lstsq(A, b, rcond=None)
        self.intercept = float(y.mean())
        return self

    def _require_fit(self):
        if self.weights is None:
            raise DataError("model is not fitted")

    def predict(self, X) -> np.ndarray:
        self._require_fit()
        X = _check_matrix(X)
        if X.shape[1] != self.weights.shape[0]:
            raise DimensionMismatchError(
                f"model expects {self.weights.shape[0]} columns, got {X.shape[1]}"
            )
        Z = (X - self.means) / self.stds
        return np.clip(Z @ self.weights + self.intercept, RATING_MIN, RATING_MAX)

    def coefficients(self) -> tuple[np.ndarray, float]:
        """Weights and intercept mapped back to the original column scale."""
        self._require_fit()
        coef = self.weights / self.stds
        return coef, float(self.intercept - coef @ self.means)

    def to_params(self) -> dict:
        self._require_fit()
        return {
            "penalty": self.penalty,
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @classmethod
    def from_params(cls, params: dict) -> "RidgeModel":
        model = cls(penalty=params["penalty"])
        model.weights = np.array(params["weights"], dtype=float)
        model.intercept = float(params["intercept"])
        model.means = np.array(params["means"], dtype=float)
        model.stds = np.array(params["stds"], dtype=float)
        return model

    def hyperparameters(self) -> dict:
        return {"penalty": self.penalty}


@dataclass
class _Tree:
    """Flat-array regression tree. feature[i] == -1 marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def grow(self, X, y, rng, max_depth, min_leaf, max_features) -> None:
        stack = [(self._new_node(), np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            ys = y[idx]
            self.value[node] = float(ys.mean())
            if depth >= max_depth or len(idx) < 2 * min_leaf or np.ptp(ys) == 0.0:
                continue
            split = self._best_split(X, ys, idx, rng, min_leaf, max_features)
            if split is None:
                continue
            f, thr, left_idx, right_idx = split
            self.feature[node] = f
            self.threshold[node] = thr
            left = self._new_node()
            right = self._new_node()
            self.left[node] = left
            self.right[node] = right
            stack.append((right, right_idx, depth + 1))
            stack.append((left, left_idx, depth + 1))

    def _best_split(self, X, ys, idx, rng, min_leaf, max_features):
        n_features = X.shape[1]
        k = min(max_features, n_features)
        candidates = np.sort(rng.choice(n_features, size=k, replace=False))
        n = len(idx)
        best = None  # (score, feature, threshold)
        for f in candidates:
            xs = X[idx, f]
            order = np.argsort(xs, kind="stable")
            xv = xs[order]
            yv = ys[order]
            # split after position i (1-based left size), only between
            # distinct x values and only where both children are big enough
            csum = np.cumsum(yv)[:-1]
            total = csum[-1] + yv[-1] if n > 1 else yv.sum()
            sizes = np.arange(1, n)
            valid = (xv[1:] > xv[:-1]) & (sizes >= min_leaf) & ((n - sizes) >= min_leaf)
            if not valid.any():
                continue
            # maximize sum of squared child sums over sizes, which minimizes
            # the within-children squared error
            score = csum**2 / sizes + (total - csum) ** 2 / (n - sizes)
            score[~valid] = -np.inf
            pos = int(np.argmax(score))
            if not np.isfinite(score[pos]):
                continue
            if best is None or score[pos] > best[0] + 1e-12:
                thr = float((xv[pos] + xv[pos + 1]) / 2.0)
                left_mask = xs <= thr
                best = (score[pos], int(f), thr, idx[left_mask], idx[~left_mask])
        if best is None:
            return None
        return best[1], best[2], best[3], best[4]

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.array(self.feature)
        threshold = np.array(self.threshold)
        left = np.array(self.left)
        right = np.array(self.right)
        value = np.array(self.value)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = feature[node]
            active = f >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            fa = f[rows]
            go_left = X[rows, fa] <= threshold[node[rows]]
            node[rows] = np.where(go_left, left[node[rows]], right[node[rows]])
        return value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "_Tree":
        return cls(
            feature=list(raw["feature"]),
            threshold=[float(v) for v in raw["threshold"]],
            left=list(raw["left"]),
            right=list(raw["right"]),
            value=[float(v) for v in raw["value"]],
        )


class ForestModel:
    """Bagged regression trees with random feature subsets.

    Each tree draws a bootstrap sample of rows and grows greedily on
    variance reduction. Tree t uses the RNG stream (seed, t), so fitting is
    reproducible and trees could be built in parallel without changing the
    result.
    """

    kind = "forest"

    def __init__(
        self,
        n_trees: int = 400,
        max_depth: int = 12,
        min_leaf: int = 5,
        max_features: int | None = None,
    ):
        if n_trees < 1:
            raise DataError("forest needs at least one tree")
        if max_depth < 1 or min_leaf < 1:
            raise DataError("max_depth and min_leaf must be >= 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.trees: list[_Tree] = []
        self.schema_hash: str = ENCODING_SCHEMA_HASH

    def fit(self, X, y, seed: int = 0) -> "ForestModel":
        X = _check_matrix(X, np.asarray(y, dtype=float))
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        if n < 1:
            raise TooFewRowsError("forest needs at least one row")
        k = self.max_features if self.max_features is not None else max(1, p // 3)
        self.trees = []
        for t in range(self.n_trees):
            rng = rng_for(seed, t)
            rows = rng.integers(0, n, size=n)
            tree = _Tree()
            tree.grow(X[rows], y[rows], rng, self.max_depth, self.min_leaf, k)
            self.trees.append(tree)
        self._n_columns = p
        return self

    def predict(self, X) -> np.ndarray:
        if not self.trees:
            raise DataError("model is not fitted")
        X = _check_matrix(X)
        if X.shape[1] != self._n_columns:
            raise DimensionMismatchError(
                f"model expects {self._n_columns} columns, got {X.shape[1]}"
            )
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return np.clip(total / len(self.trees), RATING_MIN, RATING_MAX)

    def to_params(self) -> dict:
        if not self.trees:
            raise DataError("model is not fitted")
        return {
            "n_columns": self._n_columns,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_params(cls, params: dict, hyper: dict) -> "ForestModel":
        model = cls(
            n_trees=hyper["n_trees"],
            max_depth=hyper["max_depth"],
            min_leaf=hyper["min_leaf"],
            max_features=hyper.get("max_features"),
        )
        model.trees = [_Tree.from_dict(t) for t in params["trees"]]
        model._n_columns = int(params["n_columns"])
        return model

    def hyperparameters(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "max_features": self.max_features,
        }


def make_model(kind: str, **hyper):
    if kind == "ridge":
        return RidgeModel(**hyper)
    if kind == "forest":
        return ForestModel(**hyper)
    raise DataError(f"unknown model kind {kind!r}")


# ── evaluation ───────────────────────────────────────────────────────


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation, defined as 0.0 when either side has no variance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sa, sb = a.std(), b.std()
    if sa < 1e-12 or sb < 1e-12:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class FoldMetrics:
    fold: int
    n: int
    mse: float
    mae: float
    pearson: float

    def to_dict(self) -> dict:
        return {"fold": self.fold, "n": self.n, "mse": self.mse, "mae": self.mae,
                "pearson": self.pearson}


@dataclass
class CVReport:
    folds: list[FoldMetrics]
    mse: float
    mae: float
    pearson: float

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "mae": self.mae,
            "pearson": self.pearson,
            "folds": [f.to_dict() for f in self.folds],
        }


def cross_validate(model_factory, X, y, *, k: int = 5, seed: int = 0) -> CVReport:
    """Seeded k-fold CV: shuffle once, split into k contiguous folds, train
    on the rest, score each fold. Aggregates are plain means over folds."""
    X = _check_matrix(X, np.asarray(y, dtype=float))
    y = np.asarray(y, dtype=float)
    n = len(y)
    if k < 2:
        raise DataError("cross-validation needs k >= 2")
    if n < k:
        raise TooFewRowsError(f"cannot split {n} rows into {k} folds")
    order = rng_for(seed).permutation(n)
    folds = np.array_split(order, k)
    metrics = []
    for i, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(order, test_idx, assume_unique=True)
        model = model_factory()
        model.fit(X[train_idx], y[train_idx], seed=seed + i)
        pred = model.predict(X[test_idx])
        err = pred - y[test_idx]
        metrics.append(
            FoldMetrics(
                fold=i,
                n=len(test_idx),
                mse=float(np.mean(err**2)),
                mae=float(np.mean(np.abs(err))),
                pearson=pearson(pred, y[test_idx]),
            )
        )
    return CVReport(
        folds=metrics,
        mse=float(np.mean([m.mse for m in metrics])),
        mae=float(np.mean([m.mae for m in metrics])),
        pearson=float(np.mean([m.pearson for m in metrics])),
    )


def feature_importance(
    model,
    X,
    y,
    *,
    groups: dict[str, tuple[int, ...]] | None = None,
    repeats: int = 10,
    seed: int = 0,
) -> list[tuple[str, float]]:
    """Grouped permutation importance: mean MSE increase over seeded shuffles
    of each readable feature's encoded columns (one-hot groups move as one).
    Sorted by importance descending, ties broken by feature name."""
    X = _check_matrix(X, np.asarray(y, dtype=float))
    y = np.asarray(y, dtype=float)
    if groups is None:
        groups = FEATURE_GROUPS
    base_mse = float(np.mean((model.predict(X) - y) ** 2))
    rng = rng_for(seed)
    results = []
    for name in groups:
        cols = list(groups[name])
        increases = []
        for _ in range(repeats):
            perm = rng.permutation(len(y))
            Xp = X.copy()
            Xp[:, cols] = X[np.ix_(perm, cols)]
            mse = float(np.mean((model.predict(Xp) - y) ** 2))
            increases.append(mse - base_mse)
        results.append((name, float(np.mean(increases))))
    results.sort(key=lambda item: (-item[1], item[0]))
    return results


# ── serialization ────────────────────────────────────────────────────


def model_to_json(model) -> str:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "schema_hash": model.schema_hash,
        "hyperparameters": model.hyperparameters(),
        "parameters": model.to_params(),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def model_from_json(text: str, *, expected_schema_hash: str | None = ENCODING_SCHEMA_HASH):
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from exc
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise SchemaMismatchError(
            f"unsupported model format_version {payload.get('format_version')!r}"
        )
    if expected_schema_hash is not None and payload.get("schema_hash") != expected_schema_hash:
        raise SchemaMismatchError(
            "model was fit against a different feature encoding "
            f"(model {payload.get('schema_hash')!r}, current {expected_schema_hash!r})"
        )
    kind = payload.get("kind")
    if kind == "ridge":
        model = RidgeModel.from_params(payload["parameters"])
    elif kind == "forest":
        model = ForestModel.from_params(payload["parameters"], payload["hyperparameters"])
    else:
        raise DataError(f"unknown model kind {kind!r}")
    model.schema_hash = payload["schema_hash"]
    return model


def save_model(model, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path: str, *, expected_schema_hash: str | None = ENCODING_SCHEMA_HASH):
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read(), expected_schema_hash=expected_schema_hash)

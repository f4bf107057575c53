"""Effect-size estimation between two conditions.

Two estimators over session-level ratings:

* naive: difference of labeled means, with a seeded two-sided permutation
  test and a percentile bootstrap CI;
* augmented: a prediction-augmented mean per condition that corrects the
  labeled mean with predictor output on unlabeled sessions,

      mu_hat(lam) = mean(Y) + lam * (mean(f_unlabeled) - mean(f_labeled))

  with the variance-minimizing plug-in

      lam_hat = Cov(Y, f_labeled) / ((1 + n/N) * Var(f_labeled))

  and the per-condition variance proxy

      sigma2(lam) = Var(Y - lam * f_labeled) + (n/N) * lam^2 * Var(f_labeled)

  which is n * Var(mu_hat). The effect gets a Wald CI and a two-sided
  normal p-value. All sample moments use n-1 denominators.

Permutation p-values use add-one smoothing, (1 + exceed) / (draws + 1).
When the number of distinct group-size-preserving splits is at most the
requested draw budget the test enumerates them all (an exact test) instead
of sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .errors import (
    ConfigError,
    DataError,
    DegenerateColumnError,
    DimensionMismatchError,
    InsufficientDataError,
    LambdaWithoutUnlabeledError,
)
from .seeds import rng_for

LAMBDA_MODES = ("ppi++", "plain")
_VAR_FLOOR = 1e-12
_CHUNK = 2048


@dataclass
class ConditionData:
    """Per-condition inputs: ratings for labeled sessions, predictor values
    for the same labeled sessions, predictor values for unlabeled sessions."""

    condition: str
    labels: np.ndarray
    f_labeled: np.ndarray
    f_unlabeled: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=float)
        self.f_labeled = np.asarray(self.f_labeled, dtype=float)
        self.f_unlabeled = np.asarray(self.f_unlabeled, dtype=float)
        if self.labels.ndim != 1 or self.f_labeled.ndim != 1 or self.f_unlabeled.ndim != 1:
            raise DimensionMismatchError("condition arrays must be 1-D")
        if len(self.labels) != len(self.f_labeled):
            raise DimensionMismatchError(
                f"condition {self.condition!r}: {len(self.labels)} labels but "
                f"{len(self.f_labeled)} labeled predictions"
            )
        if len(self.labels) < 2:
            raise InsufficientDataError(
                f"condition {self.condition!r} needs >= 2 labeled sessions"
            )
        for name, arr in (("labels", self.labels), ("f_labeled", self.f_labeled),
                          ("f_unlabeled", self.f_unlabeled)):
            if not np.all(np.isfinite(arr)):
                raise DataError(
                    f"condition {self.condition!r}: non-finite values in {name}"
                )

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n_unlabeled(self) -> int:
        return len(self.f_unlabeled)


@dataclass
class EffectEstimate:
    """One estimator's verdict on the effect condition_a minus condition_b."""

    method: str  # "naive" | "augmented"
    condition_a: str
    condition_b: str
    delta: float
    ci_low: float
    ci_high: float
    p_value: float
    alpha: float
    per_condition: dict = field(default_factory=dict)

    @property
    def significant(self) -> bool:
        return not (self.ci_low <= 0.0 <= self.ci_high)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "condition_a": self.condition_a,
            "condition_b": self.condition_b,
            "delta": self.delta,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "significant": self.significant,
            "per_condition": self.per_condition,
        }


def _labels(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatchError("label arrays must be 1-D")
    if len(arr) < 2:
        raise InsufficientDataError("each group needs >= 2 labeled sessions")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatchError("labels contain non-finite values")
    return arr


def naive_effect(labels_a, labels_b) -> float:
    """Difference of group means, a minus b."""
    return float(_labels(labels_a).mean() - _labels(labels_b).mean())


def permutation_test(labels_a, labels_b, *, draws: int = 10000, seed: int = 0) -> float:
    """Two-sided permutation p-value for the mean difference.

    Pools both groups, reassigns group labels preserving group sizes, and
    counts resampled |delta| >= observed |delta|. Exact enumeration replaces
    sampling whenever C(n_a + n_b, n_a) <= draws.
    """
    a = _labels(labels_a)
    b = _labels(labels_b)
    if draws < 1:
        raise ConfigError("permutation test needs draws >= 1")
    pooled = np.concatenate([a, b])
    n, na = len(pooled), len(a)
    nb = n - na
    observed = abs(a.mean() - b.mean())
    threshold = observed - 1e-12  # tolerate float noise on ties
    total = pooled.sum()

    n_splits = math.comb(n, na)
    if n_splits <= draws:
        exceed = 0
        for combo in combinations(range(n), na):
            s = pooled[list(combo)].sum()
            delta = s / na - (total - s) / nb
            if abs(delta) >= threshold:
                exceed += 1
        return (1 + exceed) / (n_splits + 1)

    rng = rng_for(seed)
    exceed = 0
    remaining = draws
    while remaining > 0:
        chunk = min(_CHUNK, remaining)
        mat = rng.permuted(np.tile(pooled, (chunk, 1)), axis=1)
        s = mat[:, :na].sum(axis=1)
        deltas = s / na - (total - s) / nb
        exceed += int((np.abs(deltas) >= threshold).sum())
        remaining -= chunk
    return (1 + exceed) / (draws + 1)


def bootstrap_ci(
    labels_a, labels_b, *, draws: int = 2000, alpha: float = 0.05, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap CI for the mean difference a minus b.

    Each group is resampled with replacement at its own size; the interval
    is the (alpha/2, 1 - alpha/2) quantile pair over paired resamples.
    """
    a = _labels(labels_a)
    b = _labels(labels_b)
    _check_alpha(alpha)
    if draws < 2:
        raise ConfigError("bootstrap needs draws >= 2")
    rng = rng_for(seed)
    deltas = np.empty(draws)
    done = 0
    while done < draws:
        chunk = min(_CHUNK, draws - done)
        idx_a = rng.integers(0, len(a), size=(chunk, len(a)))
        idx_b = rng.integers(0, len(b), size=(chunk, len(b)))
        deltas[done : done + chunk] = a[idx_a].mean(axis=1) - b[idx_b].mean(axis=1)
        done += chunk
    low, high = np.quantile(deltas, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(low), float(high)


def lambda_hat(cond: ConditionData, *, mode: str = "ppi++") -> float:
    """Variance-minimizing interpolation weight for one condition.

    mode "ppi++" scales the predictor variance by (1 + n/N); mode "plain"
    drops that factor. Returns 0 when the predictor is (near) constant on
    the labeled set or there are no unlabeled sessions. Not clamped: a
    predictor anticorrelated with ratings earns a negative weight.
    """
    _check_mode(mode)
    if cond.n_unlabeled == 0:
        return 0.0
    var_f = float(np.var(cond.f_labeled, ddof=1))
    if var_f < _VAR_FLOOR:
        return 0.0
    cov = float(np.cov(cond.labels, cond.f_labeled, ddof=1)[0, 1])
    scale = 1.0 + cond.n / cond.n_unlabeled if mode == "ppi++" else 1.0
    return cov / (scale * var_f)


def ppi_mean(cond: ConditionData, lam: float) -> tuple[float, float]:
    """Augmented mean and its variance proxy sigma2 = n * Var(mu_hat)."""
    if lam != 0.0 and cond.n_unlabeled == 0:
        raise LambdaWithoutUnlabeledError(
            f"condition {cond.condition!r}: lambda={lam} requires unlabeled sessions"
        )
    if lam == 0.0:
        mu = float(cond.labels.mean())
        sigma2 = float(np.var(cond.labels, ddof=1))
        return mu, sigma2
    mu = float(
        cond.labels.mean() + lam * (cond.f_unlabeled.mean() - cond.f_labeled.mean())
    )
    resid_var = float(np.var(cond.labels - lam * cond.f_labeled, ddof=1))
    var_f = float(np.var(cond.f_labeled, ddof=1))
    sigma2 = resid_var + (cond.n / cond.n_unlabeled) * lam**2 * var_f
    return mu, sigma2


def augmented_effect(
    cond_a: ConditionData,
    cond_b: ConditionData,
    *,
    alpha: float = 0.05,
    mode: str = "ppi++",
    lambda_override: tuple[float | None, float | None] = (None, None),
) -> EffectEstimate:
    """Prediction-augmented effect estimate with Wald CI and normal p-value.

    lambda_override pins either condition's lambda (used for diagnostics and
    for the naive-reduction identity at lambda = 0); None means plug-in.
    """
    _check_alpha(alpha)
    _check_mode(mode)
    lam_a = lambda_hat(cond_a, mode=mode) if lambda_override[0] is None else lambda_override[0]
    lam_b = lambda_hat(cond_b, mode=mode) if lambda_override[1] is None else lambda_override[1]
    mu_a, sigma2_a = ppi_mean(cond_a, lam_a)
    mu_b, sigma2_b = ppi_mean(cond_b, lam_b)
    delta = mu_a - mu_b
    se = math.sqrt(sigma2_a / cond_a.n + sigma2_b / cond_b.n)
    z = float(norm.ppf(1.0 - alpha / 2.0))
    if se == 0.0:
        ci_low = ci_high = delta
        p = 1.0 if delta == 0.0 else 0.0
    else:
        ci_low, ci_high = delta - z * se, delta + z * se
        p = float(2.0 * norm.sf(abs(delta) / se))
    return EffectEstimate(
        method="augmented",
        condition_a=cond_a.condition,
        condition_b=cond_b.condition,
        delta=delta,
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        p_value=p,
        alpha=alpha,
        per_condition={
            cond_a.condition: _condition_summary(cond_a, lam_a, mu_a, sigma2_a),
            cond_b.condition: _condition_summary(cond_b, lam_b, mu_b, sigma2_b),
        },
    )


def naive_estimate(
    cond_a: ConditionData,
    cond_b: ConditionData,
    *,
    alpha: float = 0.05,
    permutation_draws: int = 10000,
    bootstrap_draws: int = 2000,
    seed: int = 0,
) -> EffectEstimate:
    """Labeled-only estimate: difference of means, permutation p-value,
    percentile bootstrap CI. Uses only each condition's ratings."""
    a, b = cond_a.labels, cond_b.labels
    delta = naive_effect(a, b)
    p = permutation_test(a, b, draws=permutation_draws, seed=seed)
    ci_low, ci_high = bootstrap_ci(a, b, draws=bootstrap_draws, alpha=alpha, seed=seed + 1)
    return EffectEstimate(
        method="naive",
        condition_a=cond_a.condition,
        condition_b=cond_b.condition,
        delta=delta,
        ci_low=ci_low,
        ci_high=ci_high,
        p_value=p,
        alpha=alpha,
        per_condition={
            cond_a.condition: _condition_summary(cond_a, None, float(a.mean()),
                                                 float(np.var(a, ddof=1))),
            cond_b.condition: _condition_summary(cond_b, None, float(b.mean()),
                                                 float(np.var(b, ddof=1))),
        },
    )


def _condition_summary(cond: ConditionData, lam, mu: float, sigma2: float) -> dict:
    return {
        "mu_hat": mu,
        "sigma2": sigma2,
        "lambda": lam,
        "n": cond.n,
        "n_unlabeled": cond.n_unlabeled,
    }


# ── per-feature comparison ───────────────────────────────────────────


@dataclass
class FeatureComparison:
    """Mean of one readable feature per condition, with a permutation test
    on the difference (b minus a)."""

    feature: str
    mean_a: float
    mean_b: float
    diff: float
    p_value: float

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "diff": self.diff,
            "p_value": self.p_value,
        }


# Comparable readable features: booleans as 0/1 rates plus the count.
# Sentiment and task category are categorical and reported elsewhere.
def comparable_feature_names(issue_names: Sequence[str], git_subs: Sequence[str]) -> list[str]:
    return [*issue_names, "user_message_count", *(f"git_{s}" for s in git_subs)]


def compare_features(
    values_a: dict[str, np.ndarray],
    values_b: dict[str, np.ndarray],
    *,
    draws: int = 10000,
    seed: int = 0,
) -> list[FeatureComparison]:
    """Compare per-session feature values between conditions.

    values_a / values_b map feature name -> per-session numeric array. The
    p-value per feature is the same seeded two-sided permutation test used
    for ratings, on that feature's values.
    """
    if set(values_a) != set(values_b):
        raise DimensionMismatchError("feature comparison needs matching feature sets")
    rows = []
    for i, name in enumerate(values_a):
        a = np.asarray(values_a[name], dtype=float)
        b = np.asarray(values_b[name], dtype=float)
        p = permutation_test(a, b, draws=draws, seed=seed + i)
        rows.append(
            FeatureComparison(
                feature=name,
                mean_a=float(a.mean()),
                mean_b=float(b.mean()),
                diff=float(b.mean() - a.mean()),
                p_value=p,
            )
        )
    return rows


def correlate_deltas(pairs: Sequence[tuple[float, float]]) -> float:
    """Pearson correlation across (delta_x, delta_y) pairs.

    Needs >= 3 pairs and nonzero variance in both columns."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DimensionMismatchError("pairs must be (n, 2)")
    if arr.shape[0] < 3:
        raise InsufficientDataError("correlation needs >= 3 pairs")
    x, y = arr[:, 0], arr[:, 1]
    if float(x.std()) < _VAR_FLOOR or float(y.std()) < _VAR_FLOOR:
        raise DegenerateColumnError("correlation input column has zero variance")
    return float(np.corrcoef(x, y)[0, 1])


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")


def _check_mode(mode: str) -> None:
    if mode not in LAMBDA_MODES:
        raise ConfigError(f"lambda mode must be one of {LAMBDA_MODES}, got {mode!r}")

"""Synthetic studies with known ground truth, for validating the estimators.

The generator draws, per condition, a latent satisfaction L = mu + sd * eps
and a correlated predictor value f = mu + sd * (rho * eps +
sqrt(1 - rho^2) * eps'), both clamped to the 1..5 rating range; labels are
optionally rounded to whole stars. The Monte Carlo driver replays the full
naive and augmented analyses over many trials and reports coverage, CI
widths, rejection rates, and the average fitted lambda.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import ConfigError
from .inference import ConditionData, augmented_effect, bootstrap_ci, permutation_test
from .seeds import derive_seed, rng_for

RATING_MIN = 1.0
RATING_MAX = 5.0


@dataclass(frozen=True)
class SimConfig:
    """Two-condition study shape. mean_a / mean_b are the true condition
    means (the true effect is mean_a - mean_b); predictor_corr is the latent
    correlation between label noise and predictor noise, before clamping."""

    n_labeled: int = 150
    n_unlabeled: int = 3000
    mean_a: float = 3.0
    mean_b: float = 3.0
    noise_sd: float = 1.0
    predictor_corr: float = 0.0
    discretize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_labeled < 2:
            raise ConfigError("n_labeled must be >= 2")
        if self.n_unlabeled < 0:
            raise ConfigError("n_unlabeled must be >= 0")
        for name, mu in (("mean_a", self.mean_a), ("mean_b", self.mean_b)):
            if not RATING_MIN <= mu <= RATING_MAX:
                raise ConfigError(f"{name} must be within [1, 5], got {mu}")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if not -1.0 <= self.predictor_corr <= 1.0:
            raise ConfigError("predictor_corr must be within [-1, 1]")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @property
    def true_delta(self) -> float:
        return self.mean_a - self.mean_b

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimulatedStudy:
    config: SimConfig
    cond_a: ConditionData
    cond_b: ConditionData

    @property
    def true_delta(self) -> float:
        return self.config.true_delta


def _draw_condition(cfg: SimConfig, name: str, mu: float, arm: int) -> ConditionData:
    rng = rng_for(cfg.seed, arm)
    total = cfg.n_labeled + cfg.n_unlabeled
    eps = rng.standard_normal(total)
    eps2 = rng.standard_normal(total)
    rho = cfg.predictor_corr
    labels = np.clip(mu + cfg.noise_sd * eps, RATING_MIN, RATING_MAX)
    if cfg.discretize:
        labels = np.rint(labels)
    f = np.clip(
        mu + cfg.noise_sd * (rho * eps + math.sqrt(1.0 - rho**2) * eps2),
        RATING_MIN,
        RATING_MAX,
    )
    n = cfg.n_labeled
    return ConditionData(
        condition=name,
        labels=labels[:n],
        f_labeled=f[:n],
        f_unlabeled=f[n:],
    )


def generate(cfg: SimConfig) -> SimulatedStudy:
    """Draw one study. Conditions use independent streams derived from the
    config seed, so the same config reproduces the same study exactly."""
    return SimulatedStudy(
        config=cfg,
        cond_a=_draw_condition(cfg, "A", cfg.mean_a, arm=0),
        cond_b=_draw_condition(cfg, "B", cfg.mean_b, arm=1),
    )


@dataclass
class MonteCarloReport:
    """Aggregates over trials. Coverage is the fraction of CIs containing
    the true effect; widths are mean CI widths; width_reduction is
    1 - mean_width_augmented / mean_width_naive; rejection rates count
    p <= alpha (permutation and Wald) and 0 outside the bootstrap CI."""

    trials: int
    alpha: float
    lambda_mode: str
    true_delta: float
    coverage_naive: float
    coverage_augmented: float
    mean_width_naive: float
    mean_width_augmented: float
    width_reduction: float
    rejection_rate_naive: float
    rejection_rate_naive_ci: float
    rejection_rate_augmented: float
    mean_lambda_a: float
    mean_lambda_b: float
    permutation_draws: int
    bootstrap_draws: int
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)


def monte_carlo(
    cfg: SimConfig,
    trials: int,
    *,
    alpha: float = 0.05,
    lambda_mode: str = "ppi++",
    permutation_draws: int = 499,
    bootstrap_draws: int = 500,
) -> MonteCarloReport:
    """Run both estimators on fresh studies and aggregate their behavior.

    Trial t rebuilds the study from stream (cfg.seed, t) and derives its
    resampling seeds from the same path, so any evaluation order (or a
    parallel map over trials) yields the identical report.
    """
    if trials < 1:
        raise ConfigError("monte_carlo needs trials >= 1")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")

    cover_n = cover_a = 0
    width_n = width_a = 0.0
    reject_perm = reject_nci = reject_aug = 0
    lam_a_total = lam_b_total = 0.0
    truth = cfg.true_delta

    for t in range(trials):
        study = generate(replace(cfg, seed=derive_seed(cfg.seed, t)))
        a, b = study.cond_a, study.cond_b

        p_perm = permutation_test(
            a.labels, b.labels, draws=permutation_draws, seed=derive_seed(cfg.seed, t, 1)
        )
        ci_n = bootstrap_ci(
            a.labels, b.labels, draws=bootstrap_draws, alpha=alpha,
            seed=derive_seed(cfg.seed, t, 2),
        )
        est = augmented_effect(a, b, alpha=alpha, mode=lambda_mode)

        cover_n += ci_n[0] <= truth <= ci_n[1]
        cover_a += est.ci_low <= truth <= est.ci_high
        width_n += ci_n[1] - ci_n[0]
        width_a += est.ci_high - est.ci_low
        reject_perm += p_perm <= alpha
        reject_nci += not (ci_n[0] <= 0.0 <= ci_n[1])
        reject_aug += est.p_value <= alpha
        lam_a_total += est.per_condition["A"]["lambda"]
        lam_b_total += est.per_condition["B"]["lambda"]

    mean_width_n = width_n / trials
    mean_width_a = width_a / trials
    return MonteCarloReport(
        trials=trials,
        alpha=alpha,
        lambda_mode=lambda_mode,
        true_delta=truth,
        coverage_naive=cover_n / trials,
        coverage_augmented=cover_a / trials,
        mean_width_naive=mean_width_n,
        mean_width_augmented=mean_width_a,
        width_reduction=1.0 - mean_width_a / mean_width_n if mean_width_n > 0 else 0.0,
        rejection_rate_naive=reject_perm / trials,
        rejection_rate_naive_ci=reject_nci / trials,
        rejection_rate_augmented=reject_aug / trials,
        mean_lambda_a=lam_a_total / trials,
        mean_lambda_b=lam_b_total / trials,
        permutation_draws=permutation_draws,
        bootstrap_draws=bootstrap_draws,
        config=cfg.to_dict(),
    )

"""Estimate A/B effects on user satisfaction from logged agent sessions.

The pipeline: parse JSONL event logs into sessions and work segments,
judge each session's messages with an LLM annotator, assemble a fixed
feature vector per session, train a rating predictor on the labeled
subset, and estimate the between-condition effect two ways — from labels
alone, and with a prediction-augmented estimator that borrows strength
from unlabeled sessions. A seeded Monte Carlo simulator validates the
estimators' coverage and power.
"""

from .annotator import (
    AnnotatorConfig,
    FixtureAnnotator,
    HttpAnnotator,
    MockAnnotator,
    extract_json,
)
from .errors import (
    AbevalError,
    AnnotatorError,
    AnnotatorUnavailableError,
    AuthError,
    ConfigError,
    DataError,
    DimensionMismatchError,
    EmptySessionError,
    InsufficientDataError,
    InvalidRatingError,
    MalformedLineError,
    OrphanRatingError,
    ResponseParseError,
    SchemaError,
    SchemaMismatchError,
    TooFewRowsError,
    UnbalancedStatesError,
)
from .events import (
    Dataset,
    Event,
    EventKind,
    ParsedLog,
    Session,
    WorkSegment,
    parse_event_log,
    segment_session,
    session_rating,
    split_by_condition,
)
from .features import (
    ENCODED_COLUMNS,
    ENCODED_LENGTH,
    ENCODING_SCHEMA_HASH,
    FEATURE_NAMES,
    AnnotationStore,
    FeatureVector,
    JudgedFeatures,
    annotate_sessions,
    build_feature_rows,
    encoded_matrix,
    read_feature_csv,
    write_feature_csv,
)
from .inference import (
    ConditionData,
    EffectEstimate,
    augmented_effect,
    bootstrap_ci,
    compare_features,
    correlate_deltas,
    lambda_hat,
    naive_effect,
    naive_estimate,
    permutation_test,
    ppi_mean,
)
from .predictor import (
    ForestModel,
    RidgeModel,
    cross_validate,
    feature_importance,
    load_model,
    make_model,
    model_from_json,
    model_to_json,
    save_model,
)
from .seeds import derive_seed, rng_for
from .simulate import MonteCarloReport, SimConfig, SimulatedStudy, generate, monte_carlo

__version__ = "0.1.0"

__all__ = [
    "AbevalError",
    "AnnotationStore",
    "AnnotatorConfig",
    "AnnotatorError",
    "AnnotatorUnavailableError",
    "AuthError",
    "ConditionData",
    "ConfigError",
    "DataError",
    "Dataset",
    "DimensionMismatchError",
    "EffectEstimate",
    "EmptySessionError",
    "ENCODED_COLUMNS",
    "ENCODED_LENGTH",
    "ENCODING_SCHEMA_HASH",
    "Event",
    "EventKind",
    "FEATURE_NAMES",
    "FeatureVector",
    "FixtureAnnotator",
    "ForestModel",
    "HttpAnnotator",
    "InsufficientDataError",
    "InvalidRatingError",
    "JudgedFeatures",
    "MalformedLineError",
    "MockAnnotator",
    "MonteCarloReport",
    "OrphanRatingError",
    "ParsedLog",
    "ResponseParseError",
    "RidgeModel",
    "SchemaError",
    "SchemaMismatchError",
    "Session",
    "SimConfig",
    "SimulatedStudy",
    "TooFewRowsError",
    "UnbalancedStatesError",
    "WorkSegment",
    "annotate_sessions",
    "augmented_effect",
    "bootstrap_ci",
    "build_feature_rows",
    "compare_features",
    "correlate_deltas",
    "cross_validate",
    "derive_seed",
    "encoded_matrix",
    "extract_json",
    "feature_importance",
    "generate",
    "lambda_hat",
    "load_model",
    "make_model",
    "model_from_json",
    "model_to_json",
    "monte_carlo",
    "naive_effect",
    "naive_estimate",
    "parse_event_log",
    "permutation_test",
    "ppi_mean",
    "read_feature_csv",
    "rng_for",
    "save_model",
    "segment_session",
    "session_rating",
    "split_by_condition",
    "write_feature_csv",
]

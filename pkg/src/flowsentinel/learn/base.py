"""One estimator contract over the eight classifier kinds.

`fit` dispatches on EstimatorSpec.kind, bakes the preprocessing chain
(standardizer, optional PCA) into the returned TrainedModel, and records
fit wall-clock plus the per-epoch training log. TrainedModel is immutable;
evaluation results are attached by constructing a stamped copy.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from ..errors import (InsufficientDataError, InvalidHyperparameterError,
                      NonFiniteInputError, SchemaMismatchError)
from ..features import PcaModel, transform_vector
from ..flowdata import CLASS_COUNT, ClassLabel, Dataset, FeatureSchema, FlowRecord
from ..preprocess import StandardizationParams, apply_standardizer, fit_standardizer, standardize_vector
from .bayes import fit_gaussian_nb
from .linear import fit_linear_svm, fit_logistic
from .neighbors import fit_knn
from .tree_models import fit_adaboost, fit_forest, fit_gbt, fit_tree

KINDS = ("LR", "NB", "KNN", "DT", "RF", "ADABOOST", "GBT", "SVM")

DEFAULT_HYPERPARAMETERS: dict[str, dict] = {
    "LR": {"learning_rate": 0.1, "l2": 1e-4, "max_epochs": 500, "tol": 1e-7},
    "NB": {"var_smoothing": 1e-9},
    "KNN": {"k": 5},
    "DT": {"max_depth": 20, "min_samples_leaf": 1, "min_impurity_decrease": 0.0},
    "RF": {"trees": 100, "bootstrap": True, "max_features": "sqrt",
           "max_depth": 20, "min_samples_leaf": 1},
    "ADABOOST": {"rounds": 50},
    "GBT": {"rounds": 100, "learning_rate": 0.1, "max_depth": 6, "l2": 1.0},
    "SVM": {"l2": 1e-4, "epochs": 50, "tol": 1e-4},
}

_FIT_DISPATCH = {
    "LR": fit_logistic,
    "NB": fit_gaussian_nb,
    "KNN": fit_knn,
    "DT": fit_tree,
    "RF": fit_forest,
    "ADABOOST": fit_adaboost,
    "GBT": fit_gbt,
    "SVM": fit_linear_svm,
}

# validator: name -> (predicate, description); every value must also be the
# right type, checked first
_POSITIVE = ("a number > 0", lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0)
_NON_NEGATIVE = ("a number >= 0", lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0)
_POSITIVE_INT = ("an integer >= 1", lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1)
_COUNT = ("an integer >= 0", lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0)
_BOOL = ("a boolean", lambda v: isinstance(v, bool))


def _max_features_ok(v) -> bool:
    if isinstance(v, str):
        return v in ("sqrt", "all")
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


_VALIDATORS: dict[str, dict[str, tuple]] = {
    "LR": {"learning_rate": _POSITIVE, "l2": _NON_NEGATIVE,
           "max_epochs": _POSITIVE_INT, "tol": _NON_NEGATIVE},
    "NB": {"var_smoothing": _POSITIVE},
    "KNN": {"k": _POSITIVE_INT},
    "DT": {"max_depth": _POSITIVE_INT, "min_samples_leaf": _POSITIVE_INT,
           "min_impurity_decrease": _NON_NEGATIVE},
    "RF": {"trees": _POSITIVE_INT, "bootstrap": _BOOL,
           "max_features": ('"sqrt", "all", or an integer >= 1', _max_features_ok),
           "max_depth": _POSITIVE_INT, "min_samples_leaf": _POSITIVE_INT},
    "ADABOOST": {"rounds": _POSITIVE_INT},
    "GBT": {"rounds": _COUNT, "learning_rate": _POSITIVE,
            "max_depth": _POSITIVE_INT, "l2": _NON_NEGATIVE},
    "SVM": {"l2": _POSITIVE, "epochs": _POSITIVE_INT, "tol": _NON_NEGATIVE},
}


def validate_hyperparameters(kind: str, hyperparameters: Mapping) -> dict:
    """Merge user values over the kind's defaults and range-check them."""
    if kind not in KINDS:
        raise InvalidHyperparameterError(f"unknown estimator kind {kind!r}")
    merged = dict(DEFAULT_HYPERPARAMETERS[kind])
    rules = _VALIDATORS[kind]
    for name, value in dict(hyperparameters or {}).items():
        if name not in rules:
            raise InvalidHyperparameterError(f"{kind} does not accept hyperparameter {name!r}")
        merged[name] = value
    for name, value in merged.items():
        expect, ok = rules[name]
        if not ok(value):
            raise InvalidHyperparameterError(
                f"{kind} hyperparameter {name!r} must be {expect}, got {value!r}")
    return merged


@dataclass(frozen=True)
class EstimatorSpec:
    """Which classifier to train, with what settings, from what seed."""

    kind: str
    hyperparameters: Mapping = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        merged = validate_hyperparameters(self.kind, self.hyperparameters)
        object.__setattr__(self, "hyperparameters", merged)


@dataclass(frozen=True)
class TrainedModel:
    """Immutable fitted classifier plus its baked preprocessing chain.

    `stored_accuracy` and `stored_eval_seconds` are offline evaluation
    results stamped onto the artifact for the detection service to report.
    """

    spec: EstimatorSpec
    class_count: int
    input_schema: FeatureSchema
    standardizer: StandardizationParams
    pca: PcaModel | None
    estimator: object
    fit_seconds: float
    training_log: tuple
    converged: bool
    model_id: str
    stored_accuracy: float | None = None
    stored_eval_seconds: float | None = None

    def with_stored_metrics(self, accuracy: float, eval_seconds: float) -> "TrainedModel":
        return replace(self, stored_accuracy=float(accuracy),
                       stored_eval_seconds=float(eval_seconds))

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Raw canonical-space rows -> the space the estimator scores in."""
        p = self.standardizer
        safe = np.where(p.stds > 0.0, p.stds, 1.0)
        Z = (X - p.means) / safe
        Z[:, p.stds == 0.0] = 0.0
        if self.pca is not None:
            Z = (Z - self.pca.means) @ self.pca.components.T
        return Z

    def transform_one(self, x: np.ndarray) -> np.ndarray:
        z = standardize_vector(x, self.standardizer)
        if self.pca is not None:
            z = transform_vector(z, self.pca)
        return z

    def predict_proba_one(self, x: np.ndarray) -> np.ndarray:
        return self.estimator.proba_one(self.transform_one(x))

    def metadata(self) -> dict:
        return {
            "kind": self.spec.kind,
            "seed": self.spec.seed,
            "model_id": self.model_id,
            "fit_seconds": self.fit_seconds,
            "converged": self.converged,
            "stored_accuracy": self.stored_accuracy,
            "stored_eval_seconds": self.stored_eval_seconds,
            "input_features": list(self.input_schema.names),
            "pca_components": self.pca.k if self.pca is not None else None,
        }


def _check_fit_preconditions(kind: str, train: Dataset, hp: dict) -> None:
    if not train.labeled:
        raise InsufficientDataError("training data must be labeled")
    if len(train) == 0:
        raise InsufficientDataError("training data is empty")
    if not np.isfinite(train.X).all():
        raise NonFiniteInputError("training data contains non-finite values")
    counts = train.class_counts()
    if kind in ("LR", "GBT") and (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise InsufficientDataError(
            f"{kind} requires at least one record of every class; class {missing} is absent")
    if kind == "KNN" and len(train) < hp["k"]:
        raise InsufficientDataError(
            f"KNN needs at least k={hp['k']} training records, got {len(train)}")


def _fingerprint(spec: EstimatorSpec, state: dict) -> str:
    """Stable content tag used to detect mixed-model responses."""
    from .model_io import encode_value
    crc = zlib.crc32(encode_value(state))
    return f"{spec.kind.lower()}-{spec.seed}-{crc:08x}"


def fit(spec: EstimatorSpec, train: Dataset, *,
        standardizer: StandardizationParams | None = None,
        pca: PcaModel | None = None) -> TrainedModel:
    """Train one classifier, baking the preprocessing chain into the model.

    When no standardizer is supplied one is fitted on `train`. A supplied
    standardizer/PCA pair lets several models share one data view. `train`
    is always raw canonical-space data, never pre-transformed.
    """
    _check_fit_preconditions(spec.kind, train, spec.hyperparameters)
    if standardizer is None:
        standardizer = fit_standardizer(train)
    elif standardizer.schema.names != train.schema.names:
        raise SchemaMismatchError("standardizer schema does not match the training data")

    started = time.perf_counter()
    Z = apply_standardizer(train, standardizer).X
    if pca is not None:
        Z = (Z - pca.means) @ pca.components.T
    estimator, log, converged = _FIT_DISPATCH[spec.kind](Z, train.y, spec.hyperparameters, spec.seed)
    fit_seconds = time.perf_counter() - started

    model_id = _fingerprint(spec, estimator.to_state())
    return TrainedModel(
        spec=spec,
        class_count=CLASS_COUNT,
        input_schema=train.schema,
        standardizer=standardizer,
        pca=pca,
        estimator=estimator,
        fit_seconds=fit_seconds,
        training_log=tuple(log),
        converged=converged,
        model_id=model_id,
    )


def _record_values(x) -> np.ndarray:
    if isinstance(x, FlowRecord):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _check_predict_input(m: TrainedModel, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != m.input_schema.count:
        raise SchemaMismatchError(
            f"record has {v.shape[0]} features, model expects {m.input_schema.count}")
    if not np.isfinite(v).all():
        raise NonFiniteInputError("record contains non-finite values")
    return v


def predict_proba(m: TrainedModel, x) -> np.ndarray:
    v = _check_predict_input(m, _record_values(x))
    return m.predict_proba_one(v)


def predict(m: TrainedModel, x) -> ClassLabel:
    return ClassLabel.from_id(int(np.argmax(predict_proba(m, x))))


def predict_proba_matrix(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.input_schema.count:
        raise SchemaMismatchError(
            f"matrix width {X.shape[-1] if X.ndim == 2 else '?'} does not match "
            f"model input width {m.input_schema.count}")
    if not np.isfinite(X).all():
        raise NonFiniteInputError("matrix contains non-finite values")
    return m.estimator.proba_matrix(m.transform(X))


def predict_matrix(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    return predict_proba_matrix(m, X).argmax(axis=1)

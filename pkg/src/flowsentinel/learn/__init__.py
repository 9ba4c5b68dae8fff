"""Native classifiers behind one estimator contract, plus persistence."""

from .base import (DEFAULT_HYPERPARAMETERS, KINDS, EstimatorSpec, TrainedModel, fit,
                   predict, predict_matrix, predict_proba, predict_proba_matrix,
                   validate_hyperparameters)
from .bayes import GaussianNbEstimator, fit_gaussian_nb
from .linear import (LinearSvmEstimator, LogisticEstimator, fit_linear_svm,
                     fit_logistic, logistic_objective, svm_objective)
from .model_io import FORMAT_VERSION, MAGIC, load_model, save_model
from .neighbors import KnnEstimator, fit_knn
from .tree_models import (AdaBoostEstimator, ForestEstimator, GbtEstimator,
                          TreeEstimator, fit_adaboost, fit_forest, fit_gbt,
                          fit_tree, splitmix64_sequence)
from .trees import (ClassificationTreeBuilder, RegressionTreeBuilder, StackedTrees,
                    Tree, gini_impurity)

__all__ = [
    "DEFAULT_HYPERPARAMETERS", "KINDS", "EstimatorSpec", "TrainedModel",
    "fit", "predict", "predict_matrix", "predict_proba", "predict_proba_matrix",
    "validate_hyperparameters",
    "GaussianNbEstimator", "fit_gaussian_nb",
    "LinearSvmEstimator", "LogisticEstimator", "fit_linear_svm", "fit_logistic",
    "logistic_objective", "svm_objective",
    "FORMAT_VERSION", "MAGIC", "load_model", "save_model",
    "KnnEstimator", "fit_knn",
    "AdaBoostEstimator", "ForestEstimator", "GbtEstimator", "TreeEstimator",
    "fit_adaboost", "fit_forest", "fit_gbt", "fit_tree", "splitmix64_sequence",
    "ClassificationTreeBuilder", "RegressionTreeBuilder", "StackedTrees",
    "Tree", "gini_impurity",
]

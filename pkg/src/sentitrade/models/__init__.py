"""The four classifier families behind one train/predict contract."""

from .base import (
    BinarySvm,
    KMeansParams,
    LogRegParams,
    MnbParams,
    ModelFamily,
    ModelSpec,
    NonConvergence,
    NonNegativeRequired,
    SingleClass,
    SvmParams,
    TooManyClusters,
    TrainedModel,
    Weighting,
    decision_values,
    equal_class_weights,
    predict,
)
from .kmeans import farthest_point_init, train_kmeans_classifier
from .logreg import logreg_gradient, logreg_objective, train_logreg
from .naive_bayes import train_mnb
from .svm import rbf_kernel, smo_solve, train_rbf_svm

__all__ = [
    "BinarySvm",
    "KMeansParams",
    "LogRegParams",
    "MnbParams",
    "ModelFamily",
    "ModelSpec",
    "NonConvergence",
    "NonNegativeRequired",
    "SingleClass",
    "SvmParams",
    "TooManyClusters",
    "TrainedModel",
    "Weighting",
    "decision_values",
    "equal_class_weights",
    "farthest_point_init",
    "logreg_gradient",
    "logreg_objective",
    "predict",
    "rbf_kernel",
    "smo_solve",
    "train_kmeans_classifier",
    "train_logreg",
    "train_mnb",
    "train_rbf_svm",
]

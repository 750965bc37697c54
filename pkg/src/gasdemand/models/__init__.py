"""Base forecasters sharing a scikit-learn style fit/predict contract."""

from ._base import BaseForecaster, forecaster_class, load_model, make_forecaster, save_model
from .forest import RandomForestForecaster
from .gp import GPForecaster
from .knn import KNNForecaster
from .linear import ElasticNetForecaster, LassoForecaster, RidgeForecaster
from .mlp import MLPForecaster
from .svr import SVRForecaster

BASE_MODELS = ("ridge", "lasso", "elastic_net", "svr", "gp", "knn", "random_forest", "mlp")

__all__ = [
    "BASE_MODELS",
    "BaseForecaster",
    "ElasticNetForecaster",
    "GPForecaster",
    "KNNForecaster",
    "LassoForecaster",
    "MLPForecaster",
    "RandomForestForecaster",
    "RidgeForecaster",
    "SVRForecaster",
    "forecaster_class",
    "load_model",
    "make_forecaster",
    "save_model",
]

"""Shared estimator plumbing: validation, feature scaling, JSON persistence."""

from __future__ import annotations

import json
import os

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

FORMAT_VERSION = 1

_REGISTRY: dict[str, type] = {}


def register(name: str):
    def deco(cls):
        cls.model_name = name
        _REGISTRY[name] = cls
        return cls

    return deco


def forecaster_class(name: str) -> type:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; known: {sorted(_REGISTRY)}") from None


def make_forecaster(name: str, **params):
    return forecaster_class(name)(**params)


def binary_columns(X: np.ndarray) -> np.ndarray:
    """Mask of columns whose values are all 0 or 1 (indicator columns)."""
    return np.all((X == 0.0) | (X == 1.0), axis=0)


class BaseForecaster(RegressorMixin, BaseEstimator):
    """Common fit/predict scaffolding.

    With ``standardize=True`` continuous columns are scaled to zero mean and
    unit variance using statistics of the fitting data; 0/1 indicator
    columns are passed through unchanged.
    """

    model_name = "base"

    def _validate_fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        if X.shape[0] < 1:
            raise ValueError("need at least one sample")
        self._fit_scaler(X)
        return X, np.asarray(y, dtype=np.float64)

    def _fit_scaler(self, X):
        n_features = X.shape[1]
        mean = np.zeros(n_features)
        scale = np.ones(n_features)
        if getattr(self, "standardize", False):
            cont = ~binary_columns(X)
            mean[cont] = X[:, cont].mean(axis=0)
            sd = X[:, cont].std(axis=0)
            sd[sd <= 1e-12 * np.maximum(1.0, np.abs(mean[cont]))] = 1.0
            scale[cont] = sd
        self.x_mean_ = mean
        self.x_scale_ = scale

    def _scale(self, X):
        return (X - self.x_mean_) / self.x_scale_

    def _validate_predict(self, X):
        check_is_fitted(self)
        return validate_data(self, X, dtype=np.float64, reset=False)

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        check_is_fitted(self)
        state = {k: _encode(v) for k, v in vars(self).items() if k.endswith("_") and not k.startswith("_")}
        return {
            "format_version": FORMAT_VERSION,
            "model": self.model_name,
            "params": _encode(self.get_params(deep=False)),
            "state": state,
        }

    @classmethod
    def from_dict(cls, blob: dict):
        if blob.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {blob.get('format_version')!r}")
        klass = forecaster_class(blob["model"]) if cls is BaseForecaster else cls
        model = klass(**_decode(blob["params"]))
        for k, v in blob["state"].items():
            setattr(model, k, _decode(v))
        return model


def _encode(value):
    if isinstance(value, np.ndarray):
        return {"__ndarray__": value.ravel().tolist(), "dtype": value.dtype.str, "shape": list(value.shape)}
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, tuple):
        return {"__tuple__": [_encode(v) for v in value]}
    if isinstance(value, list):
        return [_encode(v) for v in value]
    if isinstance(value, BaseForecaster):
        return {"__forecaster__": value.to_dict()}
    return value


def _decode(value):
    if isinstance(value, dict):
        if "__ndarray__" in value:
            return np.array(value["__ndarray__"], dtype=np.dtype(value["dtype"])).reshape(value["shape"])
        if "__tuple__" in value:
            return tuple(_decode(v) for v in value["__tuple__"])
        if "__forecaster__" in value:
            return BaseForecaster.from_dict(value["__forecaster__"])
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def save_model(model: BaseForecaster, path) -> None:
    """Write a fitted forecaster as a versioned JSON blob (lossless floats)."""
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, allow_nan=False)


def load_model(path) -> BaseForecaster:
    with open(os.fspath(path), encoding="utf-8") as fh:
        return BaseForecaster.from_dict(json.load(fh))

"""Contract shared by every forecaster: sklearn params, validation, persistence."""

import json

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gasdemand.ensemble import ENSEMBLE_MODELS
from gasdemand.models import BASE_MODELS, BaseForecaster, load_model, make_forecaster, save_model

FAST = {"random_forest": {"n_trees": 5}, "mlp": {"epochs": 5}}


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(120, 6))
    X[:, 5] = rng.integers(0, 2, size=120)  # an indicator column
    y = X[:, 0] - 2 * X[:, 1] + X[:, 5] + 0.1 * rng.normal(size=120)
    return X, y


def fitted(name, X, y):
    return make_forecaster(name, **FAST.get(name, {})).fit(X, y)


@pytest.mark.parametrize("name", BASE_MODELS + ENSEMBLE_MODELS)
def test_params_clone_and_registry(name):
    m = make_forecaster(name)
    assert m.model_name == name
    assert clone(m).get_params() == m.get_params()


@pytest.mark.parametrize("name", BASE_MODELS + ENSEMBLE_MODELS)
def test_round_trip_is_lossless(name, data, tmp_path):
    X, y = data
    m = fitted(name, X, y)
    path = tmp_path / f"{name}.json"
    save_model(m, path)
    blob = json.loads(path.read_text())
    assert blob["format_version"] == 1 and blob["model"] == name
    back = load_model(path)
    assert type(back) is type(m)
    assert back.predict(X).tobytes() == m.predict(X).tobytes()


def test_unknown_format_version(data):
    blob = fitted("ridge", *data).to_dict()
    blob["format_version"] = 99
    with pytest.raises(ValueError, match="format version"):
        BaseForecaster.from_dict(blob)


@pytest.mark.parametrize("name", BASE_MODELS)
def test_duplicated_query_row_gives_identical_outputs(name, data):
    X, y = data
    m = fitted(name, X, y)
    for r in range(5):
        for k in (2, 3, 7, 64):
            assert np.ptp(m.predict(np.repeat(X[r:r + 1], k, axis=0))) == 0.0


@pytest.mark.parametrize("name", BASE_MODELS)
def test_column_mismatch_and_unfitted(name, data):
    X, y = data
    with pytest.raises(NotFittedError):
        make_forecaster(name).predict(X)
    m = fitted(name, X, y)
    with pytest.raises(ValueError):
        m.predict(X[:, :4])


@pytest.mark.parametrize("name", BASE_MODELS)
def test_rejects_non_finite(name, data):
    X, y = data
    X = X.copy()
    X[3, 2] = np.nan
    with pytest.raises(ValueError):
        make_forecaster(name).fit(X, y)


@pytest.mark.parametrize("name", BASE_MODELS)
def test_refit_is_bitwise_deterministic(name, data):
    X, y = data
    assert fitted(name, X, y).predict(X).tobytes() == fitted(name, X, y).predict(X).tobytes()


def test_indicator_columns_are_not_scaled(data):
    X, y = data
    m = fitted("ridge", X, y)
    assert m.x_mean_[5] == 0.0 and m.x_scale_[5] == 1.0
    assert m.x_scale_[0] != 1.0


def test_scaler_uses_fit_data_only(data):
    X, y = data
    m = fitted("knn", X[:60], y[:60])
    np.testing.assert_allclose(m.x_mean_[:5], X[:60, :5].mean(axis=0))


def test_unknown_model_name():
    with pytest.raises(ValueError, match="unknown model"):
        make_forecaster("torus")

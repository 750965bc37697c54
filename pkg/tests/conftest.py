import datetime as dt

import numpy as np
import pytest

from gasdemand.dataset import DailySeries, DateInterval, SeriesKind
from gasdemand.synthgen import SynthSpec, generate

SYNTH_RANGE = DateInterval(dt.date(2007, 1, 1), dt.date(2018, 12, 31))


@pytest.fixture(scope="session")
def synth_series():
    """Default synthetic RGD/IGD/TGD series over 2007-2018."""
    return {k: generate(SynthSpec.default(k, seed=11 + i), SYNTH_RANGE) for i, k in enumerate(SeriesKind)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def make_series(kind, start, demand, temperature=None):
    demand = np.asarray(demand, dtype=float)
    if temperature is None:
        temperature = np.full(demand.size, 10.0)
    return DailySeries(SeriesKind(kind), start, np.asarray(temperature, dtype=float), demand)

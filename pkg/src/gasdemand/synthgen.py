"""Synthetic demand/temperature series with known structure.

Temperature is a yearly sinusoid with its minimum in late January plus
Gaussian noise. Demand is::

    base_level * weekday_multiplier
               * (1 + yearly_amplitude * c1 + summer_amplitude * c2)
               * holiday_multiplier (holidays only)
    + weather_gain * degree_days(T) + noise

with ``c1 = cos(2 pi (d - d0) / 365.25)`` peaking in winter, ``c2`` its
second harmonic (peaks in winter and summer), degree days HDD for
RGD/IGD-like series and HCDD for TGD-like ones, and the result clipped at 0.

Noise comes from ``numpy.random.Generator(PCG64(seed))``: ``n`` standard
normals for temperature are drawn first, then ``n`` for demand, where
``n`` is the number of days in the requested range.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .calendar import is_holiday
from .dataset import DailySeries, DateInterval, SeriesKind
from .features import hcdd, hdd

__all__ = ["SynthSpec", "SynthSpecError", "generate", "oracle_forecast", "periodogram", "spectral_peaks"]

YEAR_DAYS = 365.25
# Phase origin: temperature minimum / heating-demand maximum on 20 January.
PHASE_ORIGIN = dt.date(2000, 1, 20)

_DEFAULTS = {
    SeriesKind.RGD: dict(base_level=80.0, weekly_amplitudes=(1.0, 1.0, 1.0, 1.0, 1.0, 0.95, 0.92),
                         yearly_amplitude=0.35, summer_amplitude=0.0, weather_gain=5.0,
                         holiday_multiplier=0.8, noise_std=3.0),
    SeriesKind.IGD: dict(base_level=60.0, weekly_amplitudes=(1.0, 1.02, 1.02, 1.02, 1.0, 0.8, 0.68),
                         yearly_amplitude=0.06, summer_amplitude=0.0, weather_gain=0.3,
                         holiday_multiplier=0.6, noise_std=1.0),
    SeriesKind.TGD: dict(base_level=70.0, weekly_amplitudes=(1.0, 1.03, 1.03, 1.03, 1.0, 0.85, 0.75),
                         yearly_amplitude=0.05, summer_amplitude=0.08, weather_gain=1.2,
                         holiday_multiplier=0.8, noise_std=3.5),
}


class SynthSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters; see the module docstring for the model."""

    kind: SeriesKind
    seed: int
    base_level: float = 60.0
    weekly_amplitudes: tuple = (1.0,) * 7
    yearly_amplitude: float = 0.0
    summer_amplitude: float = 0.0
    weather_gain: float = 0.0
    holiday_multiplier: float = 1.0
    noise_std: float = 0.0
    temp_mean: float = 13.0
    temp_amplitude: float = 9.0
    temp_noise_std: float = 2.5

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", SeriesKind(self.kind))
        except ValueError:
            raise SynthSpecError(f"kind must be one of RGD, IGD, TGD, got {self.kind!r}") from None
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise SynthSpecError(f"seed must be a non-negative integer, got {self.seed!r}")
        weekly = tuple(float(v) for v in self.weekly_amplitudes)
        object.__setattr__(self, "weekly_amplitudes", weekly)
        if len(weekly) != 7 or min(weekly) <= 0:
            raise SynthSpecError("weekly_amplitudes must be 7 positive multipliers (Monday first)")
        if not self.base_level > 0:
            raise SynthSpecError("base_level must be > 0")
        if not 0 < self.holiday_multiplier <= 1:
            raise SynthSpecError("holiday_multiplier must be in (0, 1]")
        if self.noise_std < 0 or self.temp_noise_std < 0:
            raise SynthSpecError("noise standard deviations must be >= 0")

    @classmethod
    def default(cls, kind, seed: int = 0, **overrides) -> "SynthSpec":
        params = dict(_DEFAULTS[SeriesKind(kind)])
        params.update(overrides)
        return cls(kind=kind, seed=seed, **params)

    @classmethod
    def from_dict(cls, blob: dict) -> "SynthSpec":
        """Build from a JSON-like dict; ``kind`` and ``seed`` are required,
        other fields default to the per-kind defaults."""
        if not isinstance(blob, dict):
            raise SynthSpecError("spec must be a JSON object")
        for required in ("kind", "seed"):
            if required not in blob:
                raise SynthSpecError(f"missing required field '{required}'")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(blob) - known)
        if unknown:
            raise SynthSpecError(f"unknown field(s): {', '.join(unknown)}")
        try:
            kind = SeriesKind(blob["kind"])
        except ValueError:
            raise SynthSpecError(f"kind must be one of RGD, IGD, TGD, got {blob['kind']!r}") from None
        rest = {k: v for k, v in blob.items() if k not in ("kind", "seed")}
        return cls.default(kind, blob["seed"], **rest)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["kind"] = self.kind.value
        out["weekly_amplitudes"] = list(self.weekly_amplitudes)
        return out


def _components(spec: SynthSpec, interval: DateInterval):
    n = len(interval)
    dates = list(interval)
    rng = np.random.Generator(np.random.PCG64(int(spec.seed)))
    temp_noise = rng.standard_normal(n)
    demand_noise = rng.standard_normal(n)

    offset = (interval.start - PHASE_ORIGIN).days
    phase = 2.0 * np.pi * (offset + np.arange(n)) / YEAR_DAYS
    c1 = np.cos(phase)
    c2 = np.cos(2.0 * phase)
    temperature = spec.temp_mean - spec.temp_amplitude * c1 + spec.temp_noise_std * temp_noise
    temperature = np.clip(temperature, -30.0, 50.0)

    weekly = np.array(spec.weekly_amplitudes)[[d.weekday() for d in dates]]
    holiday = np.array([spec.holiday_multiplier if is_holiday(d) else 1.0 for d in dates])
    degree_days = hcdd(temperature) if spec.kind is SeriesKind.TGD else hdd(temperature)
    mean = (spec.base_level * weekly * (1.0 + spec.yearly_amplitude * c1 + spec.summer_amplitude * c2) * holiday
            + spec.weather_gain * degree_days)
    return temperature, mean, spec.noise_std * demand_noise


def generate(spec: SynthSpec, interval: DateInterval) -> DailySeries:
    """Synthetic series over ``interval`` (a pure function of its arguments)."""
    temperature, mean, noise = _components(spec, interval)
    demand = np.maximum(mean + noise, 0.0)
    return DailySeries(spec.kind, interval.start, temperature, demand)


def oracle_forecast(spec: SynthSpec, interval: DateInterval) -> np.ndarray:
    """Noise-free demand of :func:`generate` over the same ``interval``."""
    _, mean, _ = _components(spec, interval)
    return np.maximum(mean, 0.0)


def periodogram(x):
    """``(periods, power)`` of the mean-removed series for frequencies ``k/n``, ``k >= 1``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    spec = np.fft.rfft(x - x.mean())
    power = (np.abs(spec) ** 2) / n
    k = np.arange(1, power.size)
    return n / k, power[1:]


def spectral_peaks(x, min_period=2.0, count=2):
    """Periods of the ``count`` largest local maxima of the periodogram above ``min_period``."""
    periods, power = periodogram(x)
    keep = periods > min_period
    periods, power = periods[keep], power[keep]
    inner = np.arange(1, power.size - 1)
    is_peak = (power[inner] > power[inner - 1]) & (power[inner] >= power[inner + 1])
    idx = inner[is_peak]
    order = idx[np.argsort(power[idx], kind="stable")[::-1]]
    return [float(periods[i]) for i in order[:count]]

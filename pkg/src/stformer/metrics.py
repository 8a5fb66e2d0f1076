"""Forecast accuracy measures: MAE, RMSE, MAPE, and per-horizon reports.

Metrics are computed on denormalized speeds. MAPE divides by the measured
speed, so entries at or below a small floor are excluded and counted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, StformerError

MAPE_FLOOR = 1e-3

DEFAULT_HORIZON_LABELS = {"15min": 3, "30min": 6, "60min": 12}


class UndefinedMetricError(StformerError):
    """Every entry was excluded, leaving the metric undefined."""


def _pair(actual, predicted):
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape:
        raise ValueError(f"shape mismatch: {actual.shape} vs {predicted.shape}")
    if not np.all(np.isfinite(actual)):
        raise DataError("actual values contain non-finite entries")
    return actual, predicted


def mae(actual, predicted) -> float:
    actual, predicted = _pair(actual, predicted)
    return float(np.mean(np.abs(actual - predicted)))


def rmse(actual, predicted) -> float:
    actual, predicted = _pair(actual, predicted)
    diff = actual - predicted
    return float(np.sqrt(np.mean(diff * diff)))


def mape(actual, predicted, floor: float = MAPE_FLOOR, return_excluded: bool = False):
    """Mean absolute percentage error over entries with |actual| > floor."""
    actual, predicted = _pair(actual, predicted)
    include = np.abs(actual) > floor
    excluded = int(actual.size - include.sum())
    if excluded == actual.size:
        raise UndefinedMetricError("every entry is at or below the MAPE floor")
    ratio = np.abs(actual[include] - predicted[include]) / np.abs(actual[include])
    value = float(ratio.mean() * 100.0)
    if return_excluded:
        return value, excluded
    return value


@dataclass(frozen=True)
class HorizonMetrics:
    mae: float
    rmse: float
    mape_pct: float
    mape_excluded: int

    def to_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "mape_pct": self.mape_pct,
                "mape_excluded": self.mape_excluded}


@dataclass(frozen=True)
class MetricReport:
    """Per-horizon-label metrics plus the all-steps aggregate."""

    horizons: dict

    def to_dict(self) -> dict:
        return {label: hm.to_dict() for label, hm in self.horizons.items()}

    def __getitem__(self, label: str) -> HorizonMetrics:
        return self.horizons[label]


def _metrics_of(actual, predicted) -> HorizonMetrics:
    value, excluded = mape(actual, predicted, return_excluded=True)
    return HorizonMetrics(mae=mae(actual, predicted), rmse=rmse(actual, predicted),
                          mape_pct=value, mape_excluded=excluded)


def horizon_report(actual, predicted, horizon_labels=None,
                   cumulative: bool = False) -> MetricReport:
    """Metrics at each labeled step (default 3/6/12 = 15/30/60 min at 5-minute
    resolution) plus an 'all' aggregate.

    Inputs are (..., n, N); leading dimensions enumerate samples. With
    `cumulative` the label covers steps 1..step instead of the single step.
    """
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape:
        raise ValueError(f"shape mismatch: {actual.shape} vs {predicted.shape}")
    if actual.ndim < 2:
        raise ValueError("expected at least (n, N) arrays")
    n = actual.shape[-2]
    labels = dict(DEFAULT_HORIZON_LABELS) if horizon_labels is None else dict(horizon_labels)
    for label, step in labels.items():
        if not 1 <= step <= n:
            raise ConfigError(f"horizon label {label!r} wants step {step}, n={n}")
    horizons = {}
    for label, step in labels.items():
        if cumulative:
            a, p = actual[..., :step, :], predicted[..., :step, :]
        else:
            a, p = actual[..., step - 1, :], predicted[..., step - 1, :]
        horizons[label] = _metrics_of(a, p)
    horizons["all"] = _metrics_of(actual, predicted)
    return MetricReport(horizons=horizons)

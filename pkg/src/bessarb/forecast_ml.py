"""Machine-learning correction of operator price forecasts.

A bootstrap forest maps six features (operator price, lead time and the
sine/cosine of time of day and day of week) to the realised price. Its
output replaces the operator prices in the look-ahead weighting, giving an
alternative forecast source for the optimiser.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import accuracy
from .market_data import AlignedDataset, ForecastRecord, ForecastTable
from .trees import Forest, ForestParams, RegressionTree, fit_forest
from .weighting import ForecastSource

MODEL_FORMAT = "bessarb-forest"
MODEL_VERSION = 1
FEATURES = ("operator_price", "hours_ahead", "tod_sin", "tod_cos", "dow_sin", "dow_cos")


class LeakageError(ValueError):
    """Training and evaluation periods overlap."""


@dataclass(frozen=True)
class FeatureVector:
    operator_price: float
    hours_ahead: float
    tod_sin: float
    tod_cos: float
    dow_sin: float
    dow_cos: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURES])


def engineer_features(record: ForecastRecord) -> FeatureVector:
    t = record.settlement_time
    f = (t.hour + t.minute / 60.0) / 24.0
    d = t.weekday()
    return FeatureVector(
        record.predicted_price,
        record.hours_ahead,
        math.sin(2 * math.pi * f),
        math.cos(2 * math.pi * f),
        math.sin(2 * math.pi * d / 7),
        math.cos(2 * math.pi * d / 7),
    )


def feature_matrix(forecasts: ForecastTable, prices=None) -> np.ndarray:
    """Vectorised :func:`engineer_features` over a whole table."""
    minutes = forecasts.settlement_times.astype(np.int64)
    tod = (minutes % 1440) / 1440.0
    dow = ((minutes // 1440) + 3) % 7  # Monday = 0
    prices = forecasts.prices if prices is None else prices
    return np.column_stack(
        [
            prices,
            forecasts.hours_ahead,
            np.sin(2 * np.pi * tod),
            np.cos(2 * np.pi * tod),
            np.sin(2 * np.pi * dow / 7),
            np.cos(2 * np.pi * dow / 7),
        ]
    )


def training_rows(dataset: AlignedDataset):
    """One row per matched forecast; the target is the realised price."""
    matched = dataset.matched_forecasts()
    return feature_matrix(matched), dataset.matched_actuals(), matched.settlement_times


def _as_range(value):
    if value is None:
        return None
    lo, hi = value
    return np.datetime64(lo, "m"), np.datetime64(hi, "m")


def check_disjoint(train_range, test_range) -> None:
    """Raise :class:`LeakageError` if half-open ranges ``[lo, hi)`` overlap."""
    if train_range is None or test_range is None:
        return
    (a0, a1), (b0, b1) = _as_range(train_range), _as_range(test_range)
    if a0 < b1 and b0 < a1:
        raise LeakageError(f"training range {a0}..{a1} overlaps test range {b0}..{b1}")


def train(dataset: AlignedDataset, params: ForestParams = ForestParams(), seed: int = 0, test_range=None) -> Forest:
    """Fit the forest on every matched forecast of ``dataset``.

    ``test_range`` (half-open) is guarded: no training row may fall in it.
    Training RMSE is stored in ``model.meta["train_rmse"]``.
    """
    X, y, times = training_rows(dataset)
    if test_range is not None:
        lo, hi = _as_range(test_range)
        if np.any((times >= lo) & (times < hi)):
            raise LeakageError("training rows fall inside the test range")
    model = fit_forest(X, y, params, seed)
    resid = model.predict(X) - y
    model.meta = {
        "train_rmse": float(np.sqrt(np.mean(resid**2))),
        "train_rows": int(len(y)),
        "train_start": str(times.min()),
        "train_end": str(times.max() + np.timedelta64(30, "m")),
        "features": list(FEATURES),
    }
    return model


def train_range(model: Forest):
    if "train_start" not in model.meta:
        return None
    return model.meta["train_start"], model.meta["train_end"]


def predict(model: Forest, features) -> np.ndarray:
    """Price predictions for rows of features (or one :class:`FeatureVector`)."""
    if isinstance(features, FeatureVector):
        return model.predict(features.as_array()[None, :])
    return model.predict(np.atleast_2d(features))


def enhanced_prices(model: Forest, forecasts: ForecastTable) -> np.ndarray:
    return model.predict(feature_matrix(forecasts))


def enhanced_source(model: Forest, dataset: AlignedDataset) -> ForecastSource:
    """Forecast source whose prices are the model's corrections.

    Each forecast record maps to a prediction independently of the decision
    time, so predicting the whole table once is the same as predicting the
    records visible at every step.
    """
    return ForecastSource(dataset.forecasts, enhanced_prices(model, dataset.forecasts), name="ml")


def accuracy_report(model: Forest, test: AlignedDataset, out_dir=None, metric="abs") -> dict:
    """Error profiles of the model forecasts on a held-out dataset."""
    span = (test.settlements.times.min(), test.settlements.times.max() + np.timedelta64(30, "m"))
    check_disjoint(train_range(model), span)
    predicted = enhanced_prices(model, test.forecasts)
    errors = accuracy.compute_errors(test, predicted)
    report = {
        "errors": errors,
        "horizon": accuracy.horizon_profile(errors, metric),
        "hour": accuracy.temporal_profile(errors, "hour", metric),
        "weekday": accuracy.temporal_profile(errors, "weekday", metric),
        "month": accuracy.temporal_profile(errors, "month", metric),
    }
    if out_dir is not None:
        report["files"] = accuracy.export_all(test, out_dir, predicted, metric)
    return report


# ---------------------------------------------------------- persistence


def save_model(model: Forest, path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "hyperparams": asdict(model.params),
        "seed": model.seed,
        "meta": model.meta,
        "trees": [t.to_dict() for t in model.trees],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def load_model(path) -> Forest:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: not a version {MODEL_VERSION} forest model")
    trees = [RegressionTree.from_dict(t) for t in payload["trees"]]
    return Forest(trees, ForestParams(**payload["hyperparams"]), payload["seed"], payload.get("meta", {}))

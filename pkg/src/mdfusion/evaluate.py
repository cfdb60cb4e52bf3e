"""Test-set metrics: RMSE and argmax classification accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CorpusError

METRICS = ("rmse", "accuracy")


@dataclass(frozen=True)
class EvaluationReport:
    metric: str
    value: float
    per_target: list
    estimator: dict = field(default_factory=dict)
    cardinalities: dict = field(default_factory=dict)
    seconds: float = 0.0
    n_test: int = 0
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.metric == "rmse" and self.value < 0:
            raise ValueError("rmse must be non-negative")
        if self.metric == "accuracy" and not 0.0 <= self.value <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")

    def to_dict(self, include_timing: bool = False) -> dict:
        """JSON-ready dict; wall-clock time is left out unless asked for, keeping reports reproducible."""
        out = {
            "metric": self.metric,
            "value": self.value,
            "per_target": list(self.per_target),
            "n_test": self.n_test,
            "cardinalities": dict(self.cardinalities),
            "estimator": self.estimator,
            "notes": list(self.notes),
        }
        if include_timing:
            out["seconds"] = self.seconds
        return out


def rmse(y, y_hat) -> tuple[float, list[float]]:
    """``sqrt(mean ||y - y_hat||^2)`` and the per-coordinate RMSE."""
    y, y_hat = _pair(y, y_hat)
    sq = (y - y_hat) ** 2
    return float(np.sqrt(np.mean(np.sum(sq, axis=1)))), [float(v) for v in np.sqrt(sq.mean(axis=0))]


def accuracy(y, y_hat) -> tuple[float, list[float]]:
    """Fraction of rows whose argmax agrees (ties go to the lowest index), and per-class recall.

    Classes absent from the targets get a recall of ``None``.
    """
    y, y_hat = _pair(y, y_hat)
    truth = np.argmax(y, axis=1)
    guess = np.argmax(y_hat, axis=1)
    hit = truth == guess
    per_class = []
    for k in range(y.shape[1]):
        mask = truth == k
        per_class.append(float(hit[mask].mean()) if mask.any() else None)
    return float(hit.mean()), per_class


def _pair(y, y_hat):
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y_hat.ndim == 1:
        y_hat = y_hat[:, None]
    if y.shape != y_hat.shape:
        raise CorpusError(f"targets {y.shape} and predictions {y_hat.shape} differ in shape")
    if y.shape[0] == 0:
        raise CorpusError("empty test set")
    return y, y_hat


def score(y, y_hat, metric: str) -> tuple[float, list[float]]:
    if metric == "rmse":
        return rmse(y, y_hat)
    if metric == "accuracy":
        return accuracy(y, y_hat)
    raise ConfigError(f"unknown metric '{metric}'")


def evaluate(predictor, inputs, y, metric: str = "rmse", **meta) -> EvaluationReport:
    """Score ``predictor(*inputs)`` against ``y``."""
    y_hat = predictor.predict(*inputs)
    value, per = score(y, np.atleast_2d(y_hat) if np.ndim(y_hat) < 2 else y_hat, metric)
    return EvaluationReport(
        metric, value, per, estimator=predictor.describe(), n_test=int(np.asarray(y).shape[0]), **meta
    )

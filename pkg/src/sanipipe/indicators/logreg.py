"""Batch gradient-descent logistic regression and the two classifier indicators."""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .decisions import RiskDecision
from .features import PROB, Layout

logger = logging.getLogger(__name__)

MASK, NO_MASK = "MASK", "NO_MASK"


@dataclass
class LogRegModel:
    layout: Layout
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.weights) != self.layout.width:
            raise ValueError(f"{len(self.weights)} weights for a layout of width {self.layout.width}")

    def standardize(self, X):
        X = np.array(X, dtype=np.float64, ndmin=2)
        k = self.layout.n_numeric
        X[:, :k] = (X[:, :k] - self.mean) / self.std
        return X

    def predict_proba(self, X):
        z = self.standardize(X) @ self.weights + self.bias
        return np.exp(-np.logaddexp(0.0, -z))

    def to_json(self):
        return {
            "layout": {"name": self.layout.name, "n_numeric": self.layout.n_numeric, "text_dim": self.layout.text_dim},
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(Layout(**obj["layout"]), np.array(obj["weights"]), float(obj["bias"]),
                   np.array(obj["mean"]), np.array(obj["std"]), obj.get("meta", {}))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def loss_and_grad(X, y, w, b, l2):
    """Regularised mean log-loss and its gradient ``(loss, dw, db)``."""
    return kernels.logreg_loss_grad(X, y, w, b, l2)


def train_logreg(X, y, layout, lr=0.5, iters=1000, l2=1e-4):
    """Fit on raw rows ``X`` (layout columns) and 0/1 labels ``y`` (1 = MASK).

    Numeric columns are standardised with the training mean/std; weights
    start at zero. A single-class input yields a constant model.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != layout.width:
        raise ValueError(f"expected rows of width {layout.width}, got shape {X.shape}")
    k = layout.n_numeric
    mean = X[:, :k].mean(axis=0) if len(X) else np.zeros(k)
    std = X[:, :k].std(axis=0) if len(X) else np.ones(k)
    std = np.where(std > 0, std, 1.0)
    w = np.zeros(layout.width)
    n_pos = int(y.sum())
    if n_pos in (0, len(y)):
        warnings.warn("single-class training data: fitting a constant model", stacklevel=2)
        bias = math.log((n_pos + 1) / (len(y) - n_pos + 1))
        return LogRegModel(layout, w, bias, mean, std, {"iterations": 0, "constant": True, "rows": len(y)})
    model = LogRegModel(layout, w, 0.0, mean, std)
    Z = model.standardize(X)
    b = 0.0
    loss = math.nan
    for _ in range(iters):
        loss, gw, gb = loss_and_grad(Z, y, w, b, l2)
        w = w - lr * gw
        b = b - lr * gb
    model.weights, model.bias = w, float(b)
    model.meta = {"iterations": iters, "learning_rate": lr, "l2": l2, "final_loss": loss,
                  "rows": len(y), "backend": kernels.BACKEND}
    logger.debug("logreg %s: loss %.4f after %d iterations", layout.name, loss, iters)
    return model


def train_from_rows(rows, layout=PROB, **kw):
    """``rows``: ``(FeatureVector, "MASK" | "NO_MASK")`` pairs."""
    X = np.array([fv.row(layout) for fv, _ in rows]).reshape(len(rows), layout.width)
    y = np.array([1.0 if label == MASK else 0.0 for _, label in rows])
    return train_logreg(X, y, layout, **kw)


def _decide(model, fv, layout_name, threshold, span, indicator):
    if model.layout.name != layout_name:
        raise ValueError(f"model layout {model.layout.name} cannot serve the {indicator} indicator")
    p = float(model.predict_proba(fv.row(model.layout))[0])
    doc_id, start, end = span
    return RiskDecision(doc_id, start, end, indicator, p > threshold, p)


def prob_indicator(model, fv, threshold=0.5, span=("", 0, 0)):
    """Risky when the predicted masking probability is strictly above ``threshold``."""
    return _decide(model, fv, "PROB", threshold, span, "PROB")


def spancls_indicator(model, fv, threshold=0.5, span=("", 0, 0)):
    return _decide(model, fv, "SPANCLS", threshold, span, "SPANCLS")

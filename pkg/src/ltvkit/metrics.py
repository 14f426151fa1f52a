"""Forecast accuracy metrics and the model comparison report.

The headline metric is floored symmetric MAPE: the actual in the
denominator is floored at a currency amount a, so near-zero actuals cannot
blow the relative error up while the metric stays bounded by 2.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

__all__ = ["rmse", "smape", "asmape", "mdape", "compare", "MetricsReport"]


def _pair(actuals, forecasts):
    a = np.asarray(actuals, dtype=np.float64)
    f = np.asarray(forecasts, dtype=np.float64)
    if a.shape != f.shape:
        raise UsageError(f"actuals shape {a.shape} != forecasts shape {f.shape}")
    if a.size == 0:
        raise UsageError("metrics need at least one pair")
    return a.ravel(), f.ravel()


def rmse(actuals, forecasts) -> float:
    """Root mean squared error."""
    a, f = _pair(actuals, forecasts)
    return float(np.sqrt(np.mean((a - f) ** 2)))


def smape(actuals, forecasts) -> float:
    """Symmetric MAPE, (2/N) sum |A-F| / (|A|+|F|); pairs with A = F = 0
    contribute 0 (limit convention)."""
    a, f = _pair(actuals, forecasts)
    denom = np.abs(a) + np.abs(f)
    terms = np.where(denom > 0, np.abs(a - f) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(2.0 * terms.mean())


def asmape(actuals, forecasts, floor: float = 1.0) -> float:
    """Floored symmetric MAPE, (2/N) sum |A-F| / |max(A, floor) + F|.

    Forecasts must be nonnegative and the floor positive, which keeps the
    value in [0, 2].
    """
    if floor <= 0:
        raise UsageError(f"floor must be positive, got {floor}")
    a, f = _pair(actuals, forecasts)
    if np.any(f < 0):
        raise UsageError("negative forecasts are not allowed")
    return float(2.0 * np.mean(np.abs(a - f) / np.abs(np.maximum(a, floor) + f)))


def mdape(actuals, forecasts) -> float:
    """Median absolute percent error over pairs with a nonzero actual."""
    a, f = _pair(actuals, forecasts)
    valid = a != 0
    if not valid.any():
        raise UsageError("no pairs with nonzero actuals for mdape")
    return float(np.median(np.abs(a[valid] - f[valid]) / np.abs(a[valid])))


def _mdape_excluded(actuals) -> int:
    return int(np.sum(np.asarray(actuals) == 0))


@dataclass
class MetricsReport:
    """Per-model, per-horizon accuracy table with the winning model per
    horizon flagged (lowest floored-SMAPE)."""

    floor: float
    horizon_labels: list[str]
    n_users: int
    seed: int
    config_fingerprint: str
    models: dict = field(default_factory=dict)
    best: dict = field(default_factory=dict)
    version: int = 1

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "floor": self.floor,
            "horizon_labels": self.horizon_labels,
            "n_users": self.n_users,
            "seed": self.seed,
            "config_fingerprint": self.config_fingerprint,
            "models": self.models,
            "best": self.best,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            floor=d["floor"],
            horizon_labels=list(d["horizon_labels"]),
            n_users=d["n_users"],
            seed=d["seed"],
            config_fingerprint=d["config_fingerprint"],
            models=d["models"],
            best=d["best"],
            version=d.get("version", 1),
        )

    def save(self, path) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "MetricsReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def compare(
    model_forecasts: dict,
    actuals: np.ndarray,
    horizon_labels,
    floor: float = 1.0,
    seed: int = 0,
    config_fingerprint: str = "",
    mask: np.ndarray | None = None,
) -> MetricsReport:
    """Score every model on the same (user, horizon) grid.

    model_forecasts maps a model name to an (N, K) forecast array aligned
    with the (N, K) actuals; masked entries are excluded identically for
    all models. The lowest floored-SMAPE per horizon is flagged best.
    """
    actuals = np.asarray(actuals, dtype=np.float64)
    horizon_labels = [str(h) for h in horizon_labels]
    if actuals.ndim != 2 or actuals.shape[1] != len(horizon_labels):
        raise UsageError(
            f"actuals must be (N, {len(horizon_labels)}), got {actuals.shape}"
        )
    if mask is None:
        mask = np.ones(actuals.shape, dtype=bool)
    if mask.shape != actuals.shape:
        raise UsageError(f"mask shape {mask.shape} != actuals shape {actuals.shape}")
    for name, fc in model_forecasts.items():
        if np.asarray(fc).shape != actuals.shape:
            raise UsageError(
                f"model {name!r} forecast grid {np.asarray(fc).shape} does not "
                f"match actuals {actuals.shape}"
            )

    report = MetricsReport(
        floor=floor,
        horizon_labels=horizon_labels,
        n_users=int(actuals.shape[0]),
        seed=seed,
        config_fingerprint=config_fingerprint,
    )
    for name in sorted(model_forecasts):
        fc = np.asarray(model_forecasts[name], dtype=np.float64)
        per_h = {}
        for k, label in enumerate(horizon_labels):
            rows = mask[:, k]
            if not rows.any():
                raise UsageError(f"horizon {label}: no unmasked entries")
            a, f = actuals[rows, k], fc[rows, k]
            entry = {
                "rmse": rmse(a, f),
                "smape": smape(a, f),
                "asmape": asmape(a, f, floor),
                "mdape_excluded": _mdape_excluded(a),
            }
            entry["mdape"] = mdape(a, f) if (a != 0).any() else None
            per_h[label] = entry
        report.models[name] = per_h
    for label in horizon_labels:
        report.best[label] = min(
            report.models, key=lambda m: report.models[m][label]["asmape"]
        )
    return report

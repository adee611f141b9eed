"""Landmark-based histogram standardization.

A standard intensity scale is learned from training volumes: each
volume's percentile landmarks are rescaled onto a common reference
interval and averaged position-wise. Any volume is then mapped onto the
scale piecewise-linearly, with linear extrapolation beyond the outermost
landmarks so the mapping stays strictly monotone.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateHistogramError, MaskError, ParameterError
from .volume import Volume

DEFAULT_PERCENTILES = (1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 99.0)
REFERENCE_RANGE = (0.0, 100.0)

FOREGROUND_MODES = ("none", "mean-threshold")


@dataclass(frozen=True)
class LandmarkModel:
    """Learned percentile landmarks and their target standard scale."""

    percentiles: tuple[float, ...]
    standard_scale: tuple[float, ...]

    def __post_init__(self):
        p = self.percentiles
        s = self.standard_scale
        if len(p) != len(s) or len(p) < 2:
            raise ParameterError("need at least two matched percentiles and scale values")
        if any(not 0.0 < v < 100.0 for v in p):
            raise ParameterError("percentiles must lie strictly inside (0, 100)")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ParameterError("percentiles must be strictly increasing")
        if any(b < a for a, b in zip(s, s[1:])):
            raise ParameterError("standard scale must be nondecreasing")

    @property
    def value_range(self) -> tuple[float, float]:
        return (self.standard_scale[0], self.standard_scale[-1])

    def to_json(self) -> str:
        return json.dumps(
            {
                "percentiles": list(self.percentiles),
                "standard_scale": list(self.standard_scale),
                "version": 1,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "LandmarkModel":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ParameterError(f"unsupported landmark model version {doc.get('version')!r}")
        return cls(
            percentiles=tuple(float(v) for v in doc["percentiles"]),
            standard_scale=tuple(float(v) for v in doc["standard_scale"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "LandmarkModel":
        return cls.from_json(Path(path).read_text())


def _foreground_values(vol: Volume, foreground: str) -> np.ndarray:
    if foreground not in FOREGROUND_MODES:
        raise ParameterError(f"unknown foreground mode {foreground!r}")
    values = np.asarray(vol.data, dtype=np.float64).ravel()
    if foreground == "mean-threshold":
        values = values[values > values.mean()]
        if values.size == 0:
            raise MaskError("mean-threshold foreground selected no voxels")
    if values.size == 0:
        raise MaskError("volume has no voxels to standardize")
    if values.max() == values.min():
        raise DegenerateHistogramError(
            "constant-intensity volume cannot define landmarks"
        )
    return values


def fit_landmarks(
    train_volumes: Iterable[Volume],
    percentiles: Sequence[float] = DEFAULT_PERCENTILES,
    foreground: str = "none",
) -> LandmarkModel:
    """Learn a standard scale from training volumes.

    Each volume contributes its percentile landmark values, linearly
    rescaled so the outermost landmarks land on the reference interval;
    the standard scale is the position-wise average.
    """
    percs = np.asarray(percentiles, dtype=np.float64)
    ref_lo, ref_hi = REFERENCE_RANGE
    rescaled = []
    for vol in train_volumes:
        values = _foreground_values(vol, foreground)
        landmarks = np.percentile(values, percs)
        lo, hi = landmarks[0], landmarks[-1]
        if hi <= lo:
            raise DegenerateHistogramError(
                "outermost percentile landmarks coincide; histogram too flat"
            )
        rescaled.append((landmarks - lo) * (ref_hi - ref_lo) / (hi - lo) + ref_lo)
    if not rescaled:
        raise ParameterError("need at least one training volume")
    scale = np.mean(rescaled, axis=0)
    return LandmarkModel(
        percentiles=tuple(float(p) for p in percs),
        standard_scale=tuple(float(s) for s in scale),
    )


def _piecewise_linear(values: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Monotone piecewise-linear map with linear tail extrapolation."""
    if x.size >= 2 and np.any(np.diff(x) <= 0):
        # merge duplicate landmark positions (heavily quantized data)
        ux, inverse = np.unique(x, return_inverse=True)
        uy = np.zeros_like(ux)
        counts = np.zeros_like(ux)
        np.add.at(uy, inverse, y)
        np.add.at(counts, inverse, 1.0)
        x, y = ux, uy / counts
        if x.size < 2:
            raise DegenerateHistogramError("fewer than two distinct landmarks")
    out = np.interp(values, x, y)
    lo_slope = (y[1] - y[0]) / (x[1] - x[0])
    hi_slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
    below = values < x[0]
    above = values > x[-1]
    out[below] = y[0] + (values[below] - x[0]) * lo_slope
    out[above] = y[-1] + (values[above] - x[-1]) * hi_slope
    return out


def standardize(vol: Volume, model: LandmarkModel, foreground: str = "none") -> Volume:
    """Map a volume onto the learned standard scale.

    The volume's own landmark values at the model percentiles are pinned
    exactly onto the standard scale; everything between is interpolated
    linearly and the tails extend with the outermost segment slopes.
    """
    values = _foreground_values(vol, foreground)
    landmarks = np.percentile(values, np.asarray(model.percentiles))
    mapped = _piecewise_linear(
        np.asarray(vol.data, dtype=np.float64).ravel(),
        landmarks,
        np.asarray(model.standard_scale, dtype=np.float64),
    )
    return vol.replace(data=mapped.reshape(vol.shape))


class HistogramStandardizer(TransformerMixin, BaseEstimator):
    """Scikit-learn style estimator wrapping fit_landmarks/standardize.

    ``fit`` expects a sequence of volumes; ``transform`` accepts a single
    volume or a sequence and returns the same kind.
    """

    def __init__(self, percentiles: Sequence[float] = DEFAULT_PERCENTILES,
                 foreground: str = "none"):
        self.percentiles = percentiles
        self.foreground = foreground

    def fit(self, X: Sequence[Volume], y=None) -> "HistogramStandardizer":
        self.model_ = fit_landmarks(X, percentiles=self.percentiles,
                                    foreground=self.foreground)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        if isinstance(X, Volume):
            return standardize(X, self.model_, foreground=self.foreground)
        return [standardize(v, self.model_, foreground=self.foreground) for v in X]

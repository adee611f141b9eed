"""The four scan-artifact transforms applied to short-axis slices.

Each transform comes in two layers: a frozen parameter record plus a pure
``apply_*`` function (deterministic, replayable bit for bit), and a
sampler class with scikit-learn style ``get_params`` that draws parameters
from an explicit generator.

k-space conventions: a "line" is a hyperplane of the centered spectrum
indexed along ``axis`` (the phase-encode axis).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator

from ..errors import ParameterError
from ..volume import Slice2D
from .fourier import dc_index, fft2_centered, ifft2_centered


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MotionParams:
    """Piecewise-rigid motion during acquisition.

    ``times`` are breakpoints in (0, 1) splitting the k-space line sweep
    into ``num_transforms + 1`` intervals; interval ``s`` is acquired from
    the image under transform ``s`` (0 = no motion). Rotations are
    in-plane degrees, translations millimetres along the in-plane axes.
    """

    num_transforms: int = 2
    rotations: tuple[float, ...] = ()
    translations: tuple[tuple[float, float], ...] = ()
    times: tuple[float, ...] = ()
    axis: int = 0

    def __post_init__(self):
        if self.num_transforms < 0:
            raise ParameterError("num_transforms must be >= 0")
        if self.axis not in (0, 1):
            raise ParameterError(f"axis must be 0 or 1, got {self.axis}")
        n = self.num_transforms
        if not (len(self.rotations) == len(self.translations) == len(self.times) == n):
            raise ParameterError(
                "rotations, translations and times must each have "
                f"num_transforms={n} entries"
            )
        for t in self.times:
            if not 0.0 < t < 1.0:
                raise ParameterError(f"times must lie in (0, 1), got {t}")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ParameterError("times must be strictly increasing")


@dataclass(frozen=True)
class GhostingParams:
    """Periodic k-space line attenuation producing ghost replicas."""

    num_ghosts: int
    intensity: float
    axis: int = 0
    restore_center: float = 0.02

    def __post_init__(self):
        if self.num_ghosts < 0:
            raise ParameterError("num_ghosts must be >= 0")
        if self.axis not in (0, 1):
            raise ParameterError(f"axis must be 0 or 1, got {self.axis}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ParameterError("intensity must lie in [0, 1]")
        if not 0.0 <= self.restore_center < 1.0:
            raise ParameterError("restore_center must lie in [0, 1)")


@dataclass(frozen=True)
class BiasFieldParams:
    """Multiplicative low-order polynomial intensity field.

    ``coefficients`` hold one value per monomial ``x**p * y**q`` with
    ``p + q <= order``, enumerated as ``p`` ascending and, within each
    ``p``, ``q`` ascending. ``x`` spans axis 0 and ``y`` axis 1, both
    normalized to [-1, 1].
    """

    coefficients: tuple[float, ...]
    order: int = 3

    def __post_init__(self):
        if self.order < 0:
            raise ParameterError("order must be >= 0")
        expected = (self.order + 1) * (self.order + 2) // 2
        if len(self.coefficients) != expected:
            raise ParameterError(
                f"order {self.order} needs {expected} coefficients, "
                f"got {len(self.coefficients)}"
            )


@dataclass(frozen=True)
class GammaParams:
    """Contrast change raising normalized intensities to ``exp(log_gamma)``."""

    log_gamma: float

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)


# ---------------------------------------------------------------------------
# pure transforms
# ---------------------------------------------------------------------------

def rigid_transform_2d(
    image: np.ndarray,
    spacing: tuple[float, float],
    rotation_deg: float,
    translation_mm: tuple[float, float],
) -> np.ndarray:
    """Rotate about the slice center and translate, bilinear, clamp-to-edge."""
    theta = math.radians(rotation_deg)
    rot = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    scale = np.diag(spacing)
    scale_inv = np.diag([1.0 / spacing[0], 1.0 / spacing[1]])
    center_mm = scale @ ((np.array(image.shape, dtype=np.float64) - 1.0) / 2.0)
    t_mm = np.asarray(translation_mm, dtype=np.float64)
    # affine_transform computes in_idx = matrix @ out_idx + offset
    matrix = scale_inv @ rot.T @ scale
    offset = scale_inv @ (center_mm - rot.T @ (center_mm + t_mm))
    return ndimage.affine_transform(
        image.astype(np.float64), matrix, offset=offset, order=1, mode="nearest"
    )


def compose_time_segments(
    spectra: list[np.ndarray],
    times: tuple[float, ...],
    axis: int,
    keep_center: bool = True,
) -> np.ndarray:
    """Fill contiguous k-space line segments from per-interval spectra.

    Segment ``s`` (lines ``[round(t_s * n), round(t_{s+1} * n))``) comes
    from ``spectra[s]``. With ``keep_center`` the segment containing the
    central line is always taken from ``spectra[0]`` so the uncorrupted
    anatomy stays dominant.
    """
    n_lines = spectra[0].shape[axis]
    breaks = [0] + [int(round(t * n_lines)) for t in times] + [n_lines]
    sources = list(range(len(spectra)))
    if keep_center:
        center = n_lines // 2
        for s in range(len(spectra)):
            if breaks[s] <= center < breaks[s + 1]:
                sources[s] = 0
                break
    out = np.empty_like(spectra[0])
    for s, src in enumerate(sources):
        segment = [slice(None), slice(None)]
        segment[axis] = slice(breaks[s], breaks[s + 1])
        out[tuple(segment)] = spectra[src][tuple(segment)]
    return out


def apply_motion(slc: Slice2D, params: MotionParams, keep_center: bool = True) -> Slice2D:
    """Simulate through-acquisition motion by mixing k-space segments.

    Builds the original image plus one rigidly transformed copy per
    (rotation, translation) pair, acquires each time interval from the
    matching spectrum, and returns the real part of the inverse transform.
    """
    image = slc.data.astype(np.float64)
    if params.num_transforms == 0:
        return slc.with_data(ifft2_centered(fft2_centered(image)).real)
    images = [image]
    for rot, trans in zip(params.rotations, params.translations):
        images.append(rigid_transform_2d(image, slc.spacing, rot, trans))
    spectra = [fft2_centered(im) for im in images]
    k = compose_time_segments(spectra, params.times, params.axis, keep_center)
    return slc.with_data(ifft2_centered(k).real)


def apply_ghosting(slc: Slice2D, params: GhostingParams) -> Slice2D:
    """Attenuate every ``num_ghosts``-th k-space line along the ghost axis.

    Lines are counted from the central line; a central window of
    ``restore_center * n`` lines is left untouched and the DC coefficient
    is always restored, which preserves the mean intensity.
    """
    image = slc.data.astype(np.float64)
    if params.num_ghosts == 0 or params.intensity == 0.0:
        return slc.with_data(image)
    k = fft2_centered(image)
    n = k.shape[params.axis]
    center = n // 2
    offsets = np.arange(n) - center
    selected = (offsets % params.num_ghosts) == 0
    half_width = params.restore_center * n / 2.0
    selected &= np.abs(offsets) >= half_width
    dc = dc_index(k.shape)
    dc_value = k[dc]
    scale = np.ones(n)
    scale[selected] = 1.0 - params.intensity
    k *= scale[:, None] if params.axis == 0 else scale[None, :]
    k[dc] = dc_value
    return slc.with_data(ifft2_centered(k).real)


def bias_field_image(shape: tuple[int, int], params: BiasFieldParams) -> np.ndarray:
    """The strictly positive multiplicative field on the slice grid."""
    x = np.linspace(-1.0, 1.0, shape[0])[:, None]
    y = np.linspace(-1.0, 1.0, shape[1])[None, :]
    log_field = np.zeros(shape, dtype=np.float64)
    idx = 0
    for p in range(params.order + 1):
        for q in range(params.order + 1 - p):
            log_field += params.coefficients[idx] * (x ** p) * (y ** q)
            idx += 1
    return np.exp(log_field)


def apply_bias_field(slc: Slice2D, params: BiasFieldParams) -> Slice2D:
    """Multiply the slice by an exponentiated polynomial field."""
    field = bias_field_image(slc.shape, params)
    return slc.with_data(slc.data.astype(np.float64) * field)


def apply_gamma(slc: Slice2D, params: GammaParams) -> Slice2D:
    """Remap contrast via a power law on min-max normalized intensities.

    The slice [min, max] range is preserved. A constant slice is returned
    unchanged (the normalization is undefined there).
    """
    image = slc.data.astype(np.float64)
    lo = float(image.min())
    hi = float(image.max())
    if hi == lo:
        return slc.with_data(image)
    normalized = (image - lo) / (hi - lo)
    return slc.with_data(normalized ** params.gamma * (hi - lo) + lo)


# ---------------------------------------------------------------------------
# parameter samplers
# ---------------------------------------------------------------------------

class RandomMotion(BaseEstimator):
    """Samples :class:`MotionParams`.

    Draw order per call: axis, then (rotation, tx, ty) per transform, then
    the time breakpoints (redrawn together in the unlikely event of ties).
    """

    def __init__(self, num_transforms: int = 2, degrees: float = 10.0,
                 translation: float = 10.0):
        self.num_transforms = num_transforms
        self.degrees = degrees
        self.translation = translation

    def sample(self, rng: np.random.Generator) -> MotionParams:
        n = int(self.num_transforms)
        axis = int(rng.integers(0, 2))
        rotations = []
        translations = []
        for _ in range(n):
            rotations.append(float(rng.uniform(-self.degrees, self.degrees)))
            translations.append(
                (float(rng.uniform(-self.translation, self.translation)),
                 float(rng.uniform(-self.translation, self.translation)))
            )
        while True:
            times = np.sort(rng.uniform(0.0, 1.0, size=n))
            if n == 0 or (np.all(np.diff(times) > 0) and 0.0 < times[0] and times[-1] < 1.0):
                break
        return MotionParams(
            num_transforms=n,
            rotations=tuple(rotations),
            translations=tuple(translations),
            times=tuple(float(t) for t in times),
            axis=axis,
        )

    def transform(self, slc: Slice2D, rng: np.random.Generator) -> Slice2D:
        return apply_motion(slc, self.sample(rng))


class RandomGhosting(BaseEstimator):
    """Samples :class:`GhostingParams`.

    Draw order: num_ghosts (uniform integer, bounds inclusive), axis,
    intensity.
    """

    def __init__(self, num_ghosts: tuple[int, int] = (4, 10),
                 intensity: tuple[float, float] = (0.5, 1.0),
                 restore_center: float = 0.02):
        self.num_ghosts = num_ghosts
        self.intensity = intensity
        self.restore_center = restore_center

    def sample(self, rng: np.random.Generator) -> GhostingParams:
        lo, hi = self.num_ghosts
        return GhostingParams(
            num_ghosts=int(rng.integers(lo, hi + 1)),
            axis=int(rng.integers(0, 2)),
            intensity=float(rng.uniform(*self.intensity)),
            restore_center=float(self.restore_center),
        )

    def transform(self, slc: Slice2D, rng: np.random.Generator) -> Slice2D:
        return apply_ghosting(slc, self.sample(rng))


class RandomBiasField(BaseEstimator):
    """Samples :class:`BiasFieldParams` with i.i.d. uniform coefficients."""

    def __init__(self, order: int = 3, coefficient_range: float = 0.5):
        self.order = order
        self.coefficient_range = coefficient_range

    def sample(self, rng: np.random.Generator) -> BiasFieldParams:
        n = (self.order + 1) * (self.order + 2) // 2
        c = self.coefficient_range
        coeffs = tuple(float(v) for v in rng.uniform(-c, c, size=n))
        return BiasFieldParams(coefficients=coeffs, order=int(self.order))

    def transform(self, slc: Slice2D, rng: np.random.Generator) -> Slice2D:
        return apply_bias_field(slc, self.sample(rng))


class RandomGamma(BaseEstimator):
    """Samples :class:`GammaParams` with log-gamma uniform in +-range."""

    def __init__(self, log_gamma_range: float = 0.3):
        self.log_gamma_range = log_gamma_range

    def sample(self, rng: np.random.Generator) -> GammaParams:
        r = self.log_gamma_range
        return GammaParams(log_gamma=float(rng.uniform(-r, r)))

    def transform(self, slc: Slice2D, rng: np.random.Generator) -> Slice2D:
        return apply_gamma(slc, self.sample(rng))

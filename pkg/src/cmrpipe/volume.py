"""Core value types: 3-D volumes with world geometry and 2-D slices.

All types are immutable after construction (arrays are marked read-only),
which makes them safe to share across threads without copying.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .errors import GeometryError, ParameterError

DEFAULT_LABEL_CODES = (0, 1, 2, 3)  # background, LV, MYO, RV


def _frozen_array(arr, dtype=None) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Volume:
    """A 3-D scalar grid with a voxel-to-world affine.

    ``affine`` maps homogeneous voxel indices ``(i, j, k, 1)`` to world
    coordinates in millimetres. Spacing is derived from the Euclidean
    norms of the first three affine columns.
    """

    data: np.ndarray
    affine: np.ndarray
    name: str | None = None
    provenance: Mapping[str, Any] | None = None

    def __post_init__(self):
        data = _frozen_array(self.data)
        affine = _frozen_array(self.affine, dtype=np.float64)
        if data.ndim != 3:
            raise GeometryError(f"volume data must be 3-D, got {data.ndim}-D")
        if data.size == 0:
            raise GeometryError("volume data must be non-empty")
        if affine.shape != (4, 4):
            raise GeometryError(f"affine must be 4x4, got {affine.shape}")
        if not np.allclose(affine[3], (0.0, 0.0, 0.0, 1.0)):
            raise GeometryError("affine bottom row must be [0, 0, 0, 1]")
        norms = np.linalg.norm(affine[:3, :3], axis=0)
        if np.any(norms <= 0.0) or abs(np.linalg.det(affine[:3, :3])) < 1e-12:
            raise GeometryError("affine must be invertible with nonzero column norms")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "affine", affine)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def spacing(self) -> tuple[float, float, float]:
        norms = np.linalg.norm(self.affine[:3, :3], axis=0)
        return (float(norms[0]), float(norms[1]), float(norms[2]))

    def replace(self, **changes) -> "Volume":
        """Return a copy of this volume with the given fields replaced."""
        return replace(self, **changes)

    def world_coordinates(self) -> np.ndarray:
        """World coordinates of every voxel center, shape ``(*shape, 3)``."""
        ii, jj, kk = np.meshgrid(*(np.arange(n) for n in self.shape), indexing="ij")
        idx = np.stack([ii, jj, kk], axis=-1).astype(np.float64)
        return idx @ self.affine[:3, :3].T + self.affine[:3, 3]


@dataclass(frozen=True, eq=False)
class LabelVolume(Volume):
    """A volume whose voxels are integer structure codes."""

    allowed_codes: tuple[int, ...] = DEFAULT_LABEL_CODES

    def __post_init__(self):
        super().__post_init__()
        if not np.issubdtype(self.data.dtype, np.integer):
            raise ParameterError(
                f"label volume requires an integer dtype, got {self.data.dtype}"
            )
        present = np.unique(self.data)
        extra = set(int(v) for v in present) - set(self.allowed_codes)
        if extra:
            raise ParameterError(f"label volume contains unknown codes {sorted(extra)}")


@dataclass(frozen=True, eq=False)
class SliceProvenance:
    volume_name: str | None
    index: int


@dataclass(frozen=True, eq=False)
class Slice2D:
    """A single in-plane slice with its pixel spacing in millimetres."""

    data: np.ndarray
    spacing: tuple[float, float]
    source: SliceProvenance | None = None

    def __post_init__(self):
        data = _frozen_array(self.data)
        if data.ndim != 2:
            raise GeometryError(f"slice data must be 2-D, got {data.ndim}-D")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise GeometryError("slice must have positive extent")
        spacing = (float(self.spacing[0]), float(self.spacing[1]))
        if spacing[0] <= 0.0 or spacing[1] <= 0.0:
            raise GeometryError(f"slice spacing must be positive, got {spacing}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    def with_data(self, data: np.ndarray) -> "Slice2D":
        return Slice2D(data=data, spacing=self.spacing, source=self.source)


def check_same_geometry(a: Volume, b: Volume, atol: float = 1e-6) -> None:
    """Raise :class:`GeometryError` unless both volumes share shape and affine."""
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not np.allclose(a.affine, b.affine, atol=atol):
        raise GeometryError("affine mismatch between volumes")


def check_finite(arr: np.ndarray, what: str = "input") -> None:
    from .errors import NumericError

    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{what} contains non-finite values")

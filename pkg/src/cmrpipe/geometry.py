"""Geometry operations on volumes: reorientation, resampling, crop/pad, slicing.

All functions are pure: they never mutate their inputs and return new
volumes whose affines keep every retained voxel at its original world
position.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DominanceError, GeometryError, ParameterError, UsageError
from .volume import LabelVolume, Slice2D, SliceProvenance, Volume

_OBLIQUE_TOL = 1e-6


def _dominant_axes(rotation: np.ndarray) -> list[int]:
    """Map each voxel axis to the world axis it mostly points along.

    Rejects affines where the assignment is ambiguous (45-degree ties) or
    not a permutation.
    """
    cols = np.abs(rotation) / np.linalg.norm(rotation, axis=0)
    dominant = []
    for j in range(3):
        order = np.argsort(cols[:, j])[::-1]
        if cols[order[0], j] - cols[order[1], j] < _OBLIQUE_TOL:
            raise DominanceError(
                "affine is too oblique: no unique dominant world axis "
                f"for voxel axis {j}"
            )
        dominant.append(int(order[0]))
    if sorted(dominant) != [0, 1, 2]:
        raise DominanceError(
            f"dominant world axes {dominant} do not form a permutation"
        )
    return dominant


def reorient_to_canonical(vol: Volume) -> Volume:
    """Permute and flip axes so the affine is RAS+ (positive dominant diagonal).

    Voxel values are only rearranged, never interpolated, and every voxel
    center keeps its world coordinate. Applying the function twice gives
    the same result as applying it once.
    """
    rotation = vol.affine[:3, :3]
    dominant = _dominant_axes(rotation)
    # perm[i] = input voxel axis that becomes output axis i
    perm = [dominant.index(i) for i in range(3)]

    data = vol.data.transpose(perm)
    affine = vol.affine.copy()
    affine[:3, :3] = vol.affine[:3, [perm[0], perm[1], perm[2]]]

    for i in range(3):
        if affine[i, i] < 0.0:
            data = np.flip(data, axis=i)
            affine[:3, 3] += affine[:3, i] * (data.shape[i] - 1)
            affine[:3, i] = -affine[:3, i]

    return vol.replace(data=np.ascontiguousarray(data), affine=affine)


def _require_canonical(vol: Volume) -> None:
    rot = vol.affine[:3, :3]
    norms = np.linalg.norm(rot, axis=0)
    off_diag = rot - np.diag(np.diag(rot))
    if np.any(np.abs(off_diag) > _OBLIQUE_TOL * norms.max()) or np.any(np.diag(rot) <= 0):
        raise GeometryError(
            "volume is not canonical (axis-aligned RAS+); "
            "run reorient_to_canonical first, oblique affines are unsupported"
        )


def resample(
    vol: Volume,
    target_spacing: Sequence[float],
    interp: str = "trilinear",
) -> Volume:
    """Resample a canonical volume onto a grid with the given spacing.

    ``interp`` is ``"trilinear"`` for image volumes and ``"nearest"`` for
    label volumes. The origin voxel keeps its world position and the field
    of view is preserved to within one voxel. Samples beyond the input
    grid are clamped to the edge.
    """
    target = tuple(float(s) for s in target_spacing)
    if len(target) != 3 or any(s <= 0.0 for s in target):
        raise ParameterError(f"target spacing must be three positive values, got {target}")
    if interp not in ("trilinear", "nearest"):
        raise ParameterError(f"unknown interpolation {interp!r}")
    is_label = isinstance(vol, LabelVolume)
    if is_label and interp == "trilinear":
        raise UsageError("trilinear interpolation would invent label codes; use nearest")
    _require_canonical(vol)

    current = vol.spacing
    new_shape = tuple(
        max(1, int(round(n * cur / tgt)))
        for n, cur, tgt in zip(vol.shape, current, target)
    )
    if new_shape == vol.shape and np.allclose(current, target, rtol=1e-9):
        return vol.replace()

    # output index -> input continuous index, per axis
    axes_coords = [
        np.arange(n_new, dtype=np.float64) * (tgt / cur)
        for n_new, tgt, cur in zip(new_shape, target, current)
    ]
    grid = np.meshgrid(*axes_coords, indexing="ij")
    order = 0 if interp == "nearest" else 1
    out = ndimage.map_coordinates(vol.data, grid, order=order, mode="nearest")

    affine = vol.affine.copy()
    for i in range(3):
        affine[:3, i] *= target[i] / current[i]
    return vol.replace(data=out, affine=affine)


def center_crop_or_pad(
    vol: Volume,
    target_inplane: Sequence[int],
    pad_value: float = 0.0,
) -> Volume:
    """Center-crop or pad the first two axes to ``(h, w)``.

    The through-plane axis is untouched. The affine translation is updated
    so retained voxels keep their world coordinates; the applied offsets
    are recorded under ``provenance["crop_offset"]`` (input index of the
    output origin voxel, negative when padding).
    """
    h, w = (int(v) for v in target_inplane)
    if h <= 0 or w <= 0:
        raise ParameterError(f"target in-plane shape must be positive, got {(h, w)}")

    offsets = []
    slices_in = []
    slices_out = []
    out_shape = (h, w, vol.shape[2])
    for axis, target in enumerate((h, w)):
        n = vol.shape[axis]
        if target <= n:
            start = (n - target) // 2
            offsets.append(start)
            slices_in.append(slice(start, start + target))
            slices_out.append(slice(0, target))
        else:
            before = (target - n) // 2
            offsets.append(-before)
            slices_in.append(slice(0, n))
            slices_out.append(slice(before, before + n))

    if isinstance(vol, LabelVolume):
        pad_cast = vol.data.dtype.type(pad_value)
        if pad_cast not in vol.allowed_codes:
            raise ParameterError(f"pad value {pad_value!r} is not a valid label code")
        fill = pad_cast
    else:
        fill = vol.data.dtype.type(pad_value)

    out = np.full(out_shape, fill, dtype=vol.data.dtype)
    out[slices_out[0], slices_out[1], :] = vol.data[slices_in[0], slices_in[1], :]

    affine = vol.affine.copy()
    shift = np.array([offsets[0], offsets[1], 0], dtype=np.float64)
    affine[:3, 3] = affine[:3, :3] @ shift + affine[:3, 3]

    prov = dict(vol.provenance or {})
    prov["crop_offset"] = (offsets[0], offsets[1])
    prov["crop_source_shape"] = (vol.shape[0], vol.shape[1])
    return vol.replace(data=out, affine=affine, provenance=prov)


def restore_from_crop(cropped: Volume) -> np.ndarray:
    """Recover the source-grid region from a crop/pad result.

    Uses the offsets recorded in provenance to slice out the part of
    ``cropped`` that overlaps the original grid. After a pure pad this is
    exactly the original in-plane data.
    """
    prov = cropped.provenance or {}
    if "crop_offset" not in prov:
        raise UsageError("volume carries no crop offsets in provenance")
    region = []
    for axis, (offset, n_src) in enumerate(
        zip(prov["crop_offset"], prov["crop_source_shape"])
    ):
        start = max(0, -offset)
        stop = min(cropped.shape[axis], n_src - offset)
        region.append(slice(start, stop))
    return cropped.data[region[0], region[1], :]


def extract_slices(vol: Volume) -> list[Slice2D]:
    """Split a volume into its through-plane slices in index order."""
    sx, sy, _ = vol.spacing
    return [
        Slice2D(
            data=vol.data[:, :, k],
            spacing=(sx, sy),
            source=SliceProvenance(volume_name=vol.name, index=k),
        )
        for k in range(vol.shape[2])
    ]


def stack_slices(slices: Sequence[Slice2D], like: Volume) -> Volume:
    """Reassemble slices into a volume with ``like``'s geometry."""
    if len(slices) != like.shape[2]:
        raise GeometryError(
            f"expected {like.shape[2]} slices, got {len(slices)}"
        )
    for s in slices:
        if s.shape != like.shape[:2]:
            raise GeometryError(f"slice shape {s.shape} does not match {like.shape[:2]}")
    data = np.stack([s.data for s in slices], axis=2)
    return like.replace(data=data)

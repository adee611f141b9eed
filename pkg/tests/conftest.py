"""Shared fixtures and independent oracle helpers.

Oracles here are deliberately naive (direct summation, all-pairs
distances) so they cannot share bugs with the library implementations.
"""
from __future__ import annotations

import numpy as np
import pytest

from cmrpipe import LabelVolume, Volume


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_volume(rng, shape=(9, 7, 4), spacing=(1.0, 1.0, 1.0), offset=(0.0, 0.0, 0.0)):
    affine = np.diag([*spacing, 1.0])
    affine[:3, 3] = offset
    return Volume(rng.normal(size=shape), affine, name="rand")


def random_axis_aligned_affine(rng, spacing=(1.2, 0.9, 3.0)):
    """Random permutation-and-flip affine with the given (unsigned) spacings."""
    perm = rng.permutation(3)
    signs = rng.choice([-1.0, 1.0], size=3)
    rot = np.zeros((3, 3))
    for j in range(3):
        rot[perm[j], j] = signs[j] * spacing[j]
    affine = np.eye(4)
    affine[:3, :3] = rot
    affine[:3, 3] = rng.uniform(-20, 20, size=3)
    return affine


def world_points(vol):
    """Multiset of (world position, value) rows for orientation oracles."""
    idx = np.indices(vol.shape).reshape(3, -1)
    homo = np.vstack([idx.astype(np.float64), np.ones(idx.shape[1])])
    world = (vol.affine @ homo)[:3].T
    rows = np.column_stack([world, vol.data.reshape(-1)])
    order = np.lexsort(rows.T[::-1])
    return np.round(rows[order], 9)


def dft2_direct(image):
    """Centered orthonormal 2-D DFT by explicit double summation."""
    h, w = image.shape
    out = np.zeros((h, w), dtype=np.complex128)
    ys = np.arange(h) - h // 2
    xs = np.arange(w) - w // 2
    for ki in range(h):
        for kj in range(w):
            ku = ki - h // 2
            kv = kj - w // 2
            phase = np.exp(-2j * np.pi * (np.outer(ys * ku / h, np.ones(w))
                                          + np.outer(np.ones(h), xs * kv / w)))
            out[ki, kj] = np.sum(image * phase)
    return out / np.sqrt(h * w)


def surface_points_oracle(mask, spacing):
    """Face-connected boundary voxels, scaled to millimeters."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, constant_values=False)
    pts = []
    for idx in np.argwhere(mask):
        i, j, k = idx + 1
        neighborhood = [
            padded[i - 1, j, k], padded[i + 1, j, k],
            padded[i, j - 1, k], padded[i, j + 1, k],
            padded[i, j, k - 1], padded[i, j, k + 1],
        ]
        if not all(neighborhood):
            pts.append(idx)
    return np.asarray(pts, dtype=np.float64) * np.asarray(spacing)


def hd95_oracle(pred_mask, gt_mask, spacing):
    """All-pairs symmetric 95th-percentile surface distance."""
    a = surface_points_oracle(pred_mask, spacing)
    b = surface_points_oracle(gt_mask, spacing)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    forward = d.min(axis=1)
    backward = d.min(axis=0)
    return max(float(np.percentile(forward, 95.0, method="linear")),
               float(np.percentile(backward, 95.0, method="linear")))


def dice_oracle(pred_mask, gt_mask):
    a = np.asarray(pred_mask, dtype=bool)
    b = np.asarray(gt_mask, dtype=bool)
    total = a.sum() + b.sum()
    if total == 0:
        return 1.0
    return 2.0 * np.logical_and(a, b).sum() / total


def random_label_volume(rng, shape=(8, 8, 4), codes=(0, 1, 2, 3), p_zero=0.55):
    probs = [p_zero] + [(1.0 - p_zero) / (len(codes) - 1)] * (len(codes) - 1)
    data = rng.choice(codes, size=shape, p=probs).astype(np.int16)
    return LabelVolume(data, np.eye(4))

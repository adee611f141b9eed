"""PNG montages for eyeballing augmentations (original row, augmented row)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .artifacts import SliceAugmenter, derive_seed
from .geometry import extract_slices
from .volume import Volume

_GAP = 2


def _to_uint8(image: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi <= lo:
        return np.zeros(image.shape, dtype=np.uint8)
    scaled = (np.clip(image, lo, hi) - lo) / (hi - lo)
    return np.round(scaled * 255.0).astype(np.uint8)


def write_preview_montage(
    vol: Volume,
    augmenter: SliceAugmenter,
    *,
    master_seed: int,
    case_id: str,
    path: str | Path,
    max_slices: int = 6,
) -> Path:
    """Render up to ``max_slices`` evenly spaced slices, before over after.

    Both rows of a column share one display window so intensity-only
    artifacts stay visible. Uses the same per-slice seed derivation as
    volume augmentation, so the montage shows exactly what training sees.
    """
    slices = extract_slices(vol)
    if not slices:
        raise ValueError("volume has no slices to preview")
    n = min(max_slices, len(slices))
    picks = np.unique(np.round(np.linspace(0, len(slices) - 1, n)).astype(int))

    columns = []
    for k in picks:
        slc = slices[k]
        seed = derive_seed(master_seed, case_id, int(k))
        aug, _ = augmenter.augment(slc, seed=seed, case_id=case_id)
        lo = float(min(slc.data.min(), aug.data.min()))
        hi = float(max(slc.data.max(), aug.data.max()))
        top = _to_uint8(slc.data, lo, hi)
        bottom = _to_uint8(aug.data, lo, hi)
        gap_row = np.zeros((_GAP, top.shape[1]), dtype=np.uint8)
        columns.append(np.concatenate([top, gap_row, bottom], axis=0))

    height = columns[0].shape[0]
    gap_col = np.zeros((height, _GAP), dtype=np.uint8)
    strips = []
    for i, col in enumerate(columns):
        if i:
            strips.append(gap_col)
        strips.append(col)
    montage = np.concatenate(strips, axis=1)

    path = Path(path)
    Image.fromarray(montage, mode="L").save(path)
    return path

"""Centered, orthonormal 2-D Fourier transforms.

The DC coefficient sits at ``(h // 2, w // 2)`` and the forward/inverse
pair is an exact round trip up to floating-point error.
"""
from __future__ import annotations

import numpy as np

from ..volume import check_finite


def fft2_centered(image: np.ndarray) -> np.ndarray:
    """Image to centered k-space (orthonormal scaling)."""
    check_finite(image, "fft2 input")
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(image), norm="ortho"))


def ifft2_centered(kspace: np.ndarray) -> np.ndarray:
    """Centered k-space back to (complex) image space."""
    check_finite(kspace, "ifft2 input")
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(kspace), norm="ortho"))


def dc_index(shape: tuple[int, int]) -> tuple[int, int]:
    """Array index of the DC coefficient in centered k-space."""
    return (shape[0] // 2, shape[1] // 2)

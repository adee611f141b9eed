"""Respiratory/scan-artifact augmentations on short-axis slices."""

from .fourier import dc_index, fft2_centered, ifft2_centered
from .policy import (
    KINDS,
    PolicyWeights,
    SliceAugmenter,
    TransformRecord,
    augment_slice,
    replay,
    sample_one_of,
)
from .rng import derive_seed, make_rng
from .transforms import (
    BiasFieldParams,
    GammaParams,
    GhostingParams,
    MotionParams,
    RandomBiasField,
    RandomGamma,
    RandomGhosting,
    RandomMotion,
    apply_bias_field,
    apply_gamma,
    apply_ghosting,
    apply_motion,
    bias_field_image,
    compose_time_segments,
    rigid_transform_2d,
)

__all__ = [
    "KINDS",
    "BiasFieldParams",
    "GammaParams",
    "GhostingParams",
    "MotionParams",
    "PolicyWeights",
    "RandomBiasField",
    "RandomGamma",
    "RandomGhosting",
    "RandomMotion",
    "SliceAugmenter",
    "TransformRecord",
    "apply_bias_field",
    "apply_gamma",
    "apply_ghosting",
    "apply_motion",
    "augment_slice",
    "bias_field_image",
    "compose_time_segments",
    "dc_index",
    "derive_seed",
    "fft2_centered",
    "ifft2_centered",
    "make_rng",
    "replay",
    "rigid_transform_2d",
    "sample_one_of",
]

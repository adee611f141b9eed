"""cmrpipe: deterministic cardiac MRI preprocessing, augmentation, and evaluation."""

__version__ = "0.1.0"

from .errors import (
    CmrPipeError,
    ConfigError,
    DegenerateHistogramError,
    DominanceError,
    FormatError,
    GeometryError,
    ManifestError,
    MaskError,
    NumericError,
    ParameterError,
    UsageError,
)
from .volume import LabelVolume, Slice2D, SliceProvenance, Volume
from .geometry import (
    center_crop_or_pad,
    extract_slices,
    reorient_to_canonical,
    resample,
    restore_from_crop,
    stack_slices,
)
from .histnorm import (
    DEFAULT_PERCENTILES,
    HistogramStandardizer,
    LandmarkModel,
    fit_landmarks,
    standardize,
)
from .metrics import (
    DEFAULT_LABEL_MAP,
    CohortSummary,
    MetricsReport,
    StructureMetrics,
    aggregate,
    dice,
    evaluate_case,
    hd95,
)
from .artifacts import (
    BiasFieldParams,
    GammaParams,
    GhostingParams,
    MotionParams,
    PolicyWeights,
    RandomBiasField,
    RandomGamma,
    RandomGhosting,
    RandomMotion,
    SliceAugmenter,
    TransformRecord,
    apply_bias_field,
    apply_gamma,
    apply_ghosting,
    apply_motion,
    augment_slice,
    derive_seed,
    replay,
    sample_one_of,
)
from .io import (
    Manifest,
    SplitSpec,
    build_manifest,
    read_nifti,
    split_subjects,
    write_nifti,
)

__all__ = [
    "__version__",
    "CmrPipeError", "ConfigError", "DegenerateHistogramError", "DominanceError",
    "FormatError", "GeometryError", "ManifestError", "MaskError", "NumericError",
    "ParameterError", "UsageError",
    "LabelVolume", "Slice2D", "SliceProvenance", "Volume",
    "center_crop_or_pad", "extract_slices", "reorient_to_canonical", "resample",
    "restore_from_crop", "stack_slices",
    "DEFAULT_PERCENTILES", "HistogramStandardizer", "LandmarkModel",
    "fit_landmarks", "standardize",
    "DEFAULT_LABEL_MAP", "CohortSummary", "MetricsReport", "StructureMetrics",
    "aggregate", "dice", "evaluate_case", "hd95",
    "BiasFieldParams", "GammaParams", "GhostingParams", "MotionParams",
    "PolicyWeights", "RandomBiasField", "RandomGamma", "RandomGhosting",
    "RandomMotion", "SliceAugmenter", "TransformRecord",
    "apply_bias_field", "apply_gamma", "apply_ghosting", "apply_motion",
    "augment_slice", "derive_seed", "replay", "sample_one_of",
    "Manifest", "SplitSpec", "build_manifest", "read_nifti", "split_subjects",
    "write_nifti",
]

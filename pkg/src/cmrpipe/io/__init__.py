"""File formats: NIfTI-1 volumes, dataset manifests, split specs."""

from .manifest import (
    DEFAULT_PATTERN,
    Case,
    Manifest,
    ManifestScan,
    SkippedFile,
    SplitSpec,
    Subject,
    build_manifest,
    filter_manifest,
    split_subjects,
)
from .nifti import quaternion_to_rotation, read_nifti, write_nifti

__all__ = [
    "DEFAULT_PATTERN",
    "Case",
    "Manifest",
    "ManifestScan",
    "SkippedFile",
    "SplitSpec",
    "Subject",
    "build_manifest",
    "filter_manifest",
    "quaternion_to_rotation",
    "read_nifti",
    "split_subjects",
    "write_nifti",
]

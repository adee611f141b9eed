"""Per-structure Dice and 95th-percentile Hausdorff distance.

Surfaces are the centers of foreground voxels with at least one
background face-neighbor (6-connectivity, outside the grid counts as
background). Distances are Euclidean in millimetres; the percentile uses
linear interpolation between order statistics.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import ConfigError, GeometryError, UsageError
from .volume import LabelVolume, check_same_geometry

DEFAULT_LABEL_MAP = {1: "LV", 2: "MYO", 3: "RV"}


def _binary_mask(vol: LabelVolume, label: int) -> np.ndarray:
    return np.asarray(vol.data) == label


def dice(pred: LabelVolume, gt: LabelVolume, label: int) -> float:
    """Overlap ratio 2|A&B| / (|A|+|B|); 1.0 when both masks are empty."""
    if pred.shape != gt.shape:
        raise GeometryError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    a = _binary_mask(pred, label)
    b = _binary_mask(gt, label)
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / denom


def surface_points(mask: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Millimetre coordinates of boundary voxel centers, shape (n, 3)."""
    structure = ndimage.generate_binary_structure(3, 1)
    eroded = ndimage.binary_erosion(mask, structure=structure, border_value=0)
    boundary = np.logical_and(mask, np.logical_not(eroded))
    return np.argwhere(boundary).astype(np.float64) * np.asarray(spacing, dtype=np.float64)


def _percentile_linear(values: np.ndarray, q: float) -> float:
    """Linear-interpolated percentile of an unsorted sample.

    Uses the two-sided lerp so results are bit-identical to
    ``np.percentile(..., method="linear")``.
    """
    ordered = np.sort(values)
    h = (ordered.size - 1) * (q / 100.0)
    lo = int(np.floor(h))
    hi = min(lo + 1, ordered.size - 1)
    t = h - lo
    a = float(ordered[lo])
    b = float(ordered[hi])
    if t >= 0.5:
        return b - (b - a) * (1.0 - t)
    return a + (b - a) * t


def hd95(
    pred: LabelVolume,
    gt: LabelVolume,
    label: int,
    spacing: Sequence[float] | None = None,
) -> float:
    """Symmetric 95th-percentile surface distance in millimetres.

    Both masks must be nonempty for the label; batch evaluation treats
    empty masks as an undefined metric instead (see evaluate_case).
    """
    if pred.shape != gt.shape:
        raise GeometryError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    spacing = tuple(spacing) if spacing is not None else gt.spacing
    surf_a = surface_points(_binary_mask(pred, label), spacing)
    surf_b = surface_points(_binary_mask(gt, label), spacing)
    if surf_a.shape[0] == 0 or surf_b.shape[0] == 0:
        raise UsageError(f"hd95 undefined: empty mask for label {label}")
    d_ab = cKDTree(surf_b).query(surf_a)[0]
    d_ba = cKDTree(surf_a).query(surf_b)[0]
    return max(_percentile_linear(d_ab, 95.0), _percentile_linear(d_ba, 95.0))


@dataclass(frozen=True)
class StructureMetrics:
    dice: float
    hd95: float | None  # None when either mask is empty


@dataclass(frozen=True)
class MetricsReport:
    """Per-case metrics for every configured structure."""

    case_id: str
    structures: Mapping[str, StructureMetrics]

    @property
    def mean_dice(self) -> float:
        return float(np.mean([m.dice for m in self.structures.values()]))


def evaluate_case(
    pred: LabelVolume,
    gt: LabelVolume,
    label_map: Mapping[int, str] | None = None,
    case_id: str = "",
) -> MetricsReport:
    """Dice and HD95 for each structure in the label map, plus mean Dice."""
    label_map = dict(label_map or DEFAULT_LABEL_MAP)
    check_same_geometry(pred, gt)
    known = set(label_map) | {0}
    present = set(int(v) for v in np.unique(pred.data)) | set(
        int(v) for v in np.unique(gt.data)
    )
    unknown = present - known
    if unknown:
        raise ConfigError(
            f"label codes {sorted(unknown)} present in data but absent from label map"
        )
    structures = {}
    for code in sorted(label_map):
        name = label_map[code]
        d = dice(pred, gt, code)
        try:
            h = hd95(pred, gt, code)
        except UsageError:
            h = None
        structures[name] = StructureMetrics(dice=d, hd95=h)
    return MetricsReport(case_id=case_id, structures=structures)


@dataclass(frozen=True)
class CohortSummary:
    """Aggregated metrics over a cohort of cases."""

    n_cases: int
    mean_dice: Mapping[str, float]
    mean_hd95: Mapping[str, float | None]
    hd95_undefined: Mapping[str, int]
    mean_dice_all: float

    def to_dict(self) -> dict:
        return {
            "n_cases": self.n_cases,
            "mean_dice": dict(self.mean_dice),
            "mean_hd95": dict(self.mean_hd95),
            "hd95_undefined": dict(self.hd95_undefined),
            "mean_dice_all": self.mean_dice_all,
        }


def aggregate(reports: Sequence[MetricsReport]) -> CohortSummary:
    """Per-structure means over cases; undefined HD95 cases are counted."""
    if not reports:
        raise UsageError("cannot aggregate an empty list of reports")
    reports = sorted(reports, key=lambda r: r.case_id)
    names = list(reports[0].structures)
    mean_dice = {}
    mean_hd95: dict[str, float | None] = {}
    undefined = {}
    for name in names:
        dices = [r.structures[name].dice for r in reports]
        hds = [r.structures[name].hd95 for r in reports if r.structures[name].hd95 is not None]
        mean_dice[name] = float(np.mean(dices))
        mean_hd95[name] = float(np.mean(hds)) if hds else None
        undefined[name] = sum(1 for r in reports if r.structures[name].hd95 is None)
    return CohortSummary(
        n_cases=len(reports),
        mean_dice=mean_dice,
        mean_hd95=mean_hd95,
        hd95_undefined=undefined,
        mean_dice_all=float(np.mean([r.mean_dice for r in reports])),
    )


def write_metrics_csv(reports: Sequence[MetricsReport], path: str | Path) -> None:
    """One row per (case, structure): case_id, structure, dice, hd95_mm."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["case_id", "structure", "dice", "hd95_mm"])
        for report in sorted(reports, key=lambda r: r.case_id):
            for name, m in report.structures.items():
                writer.writerow([
                    report.case_id,
                    name,
                    repr(m.dice),
                    "" if m.hd95 is None else repr(m.hd95),
                ])


def write_summary_json(summary: CohortSummary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True))


def format_summary_table(summary: CohortSummary) -> str:
    """Cohort table with DICE and Hausdorff 95 columns per structure."""
    names = list(summary.mean_dice)
    header_groups = f"{'':12s}  {'DICE':^{8 * len(names)}s}  {'Hausdorff 95 (mm)':^{8 * len(names)}s}"
    header_cols = f"{'':12s}  " + "".join(f"{n:>8s}" for n in names)
    header_cols += "  " + "".join(f"{n:>8s}" for n in names)
    dice_cells = "".join(f"{summary.mean_dice[n]:8.3f}" for n in names)
    hd_cells = "".join(
        "     n/a" if summary.mean_hd95[n] is None else f"{summary.mean_hd95[n]:8.2f}"
        for n in names
    )
    row = f"{'cohort':12s}  {dice_cells}  {hd_cells}"
    return "\n".join([header_groups, header_cols, row])

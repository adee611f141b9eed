"""Dataset manifests mirroring the cohort structure and subject-level splits.

Each subject is scanned under four breath-hold grades, with labelled ED
and ES phases per scan, so filenames carry a (subject, intensity, phase)
triple. Splitting is always by subject so no subject leaks across the
train/validation boundary.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import ManifestError, ParameterError

PHASES = ("ED", "ES")
INTENSITIES = (1, 2, 3, 4)

# stem convention: <subject>-<intensity>-<phase>[_stage][-label]
DEFAULT_PATTERN = (
    r"^(?P<subject>[^-]+)-(?P<intensity>\d)-(?P<phase>ED|ES)"
    r"(?P<stage>_[A-Za-z0-9]+)?(?P<label>-label)?$"
)


@dataclass(frozen=True)
class Case:
    subject: str
    intensity: int
    phase: str
    image: str
    label: str | None = None

    @property
    def case_id(self) -> str:
        return f"{self.subject}-{self.intensity}-{self.phase}"


@dataclass(frozen=True)
class Subject:
    id: str
    cases: tuple[Case, ...]


@dataclass(frozen=True)
class Manifest:
    subjects: tuple[Subject, ...]

    def __post_init__(self):
        ids = [s.id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ManifestError("duplicate subject ids in manifest")
        triples = [(c.subject, c.intensity, c.phase) for c in self.cases()]
        if len(set(triples)) != len(triples):
            raise ManifestError("duplicate (subject, intensity, phase) triples")
        for case in self.cases():
            if case.intensity not in INTENSITIES:
                raise ManifestError(
                    f"breath intensity must be one of {INTENSITIES}, "
                    f"got {case.intensity} for {case.subject}"
                )
            if case.phase not in PHASES:
                raise ManifestError(f"phase must be ED or ES, got {case.phase!r}")

    def cases(self) -> list[Case]:
        return [c for s in self.subjects for c in s.cases]

    def subject_ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    def to_dict(self) -> dict:
        return {
            "subjects": [
                {
                    "id": s.id,
                    "cases": [
                        {
                            "intensity": c.intensity,
                            "phase": c.phase,
                            "image": c.image,
                            "label": c.label,
                        }
                        for c in s.cases
                    ],
                }
                for s in self.subjects
            ]
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Manifest":
        subjects = []
        for s in doc["subjects"]:
            cases = tuple(
                Case(
                    subject=s["id"],
                    intensity=int(c["intensity"]),
                    phase=c["phase"],
                    image=c["image"],
                    label=c.get("label"),
                )
                for c in s["cases"]
            )
            subjects.append(Subject(id=s["id"], cases=cases))
        return cls(subjects=tuple(subjects))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SkippedFile:
    path: str
    reason: str


@dataclass(frozen=True)
class ManifestScan:
    manifest: Manifest
    skipped: tuple[SkippedFile, ...] = ()


def _stem(path: Path) -> str:
    name = path.name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


def build_manifest(data_root: str | Path, pattern: str = DEFAULT_PATTERN) -> ManifestScan:
    """Scan a directory tree for NIfTI files and group cases by subject.

    Files whose stem does not match the pattern, whose intensity grade is
    out of range, or which are labels without a matching image are listed
    in the skipped-files report instead of raising.
    """
    root = Path(data_root)
    regex = re.compile(pattern)
    images: dict[tuple[str, int, str], str] = {}
    labels: dict[tuple[str, int, str], str] = {}
    skipped: list[SkippedFile] = []

    paths = sorted(p for p in root.rglob("*") if p.is_file()
                   and (p.name.endswith(".nii") or p.name.endswith(".nii.gz")))
    for path in paths:
        match = regex.match(_stem(path))
        if not match:
            skipped.append(SkippedFile(str(path), "filename does not match pattern"))
            continue
        intensity = int(match.group("intensity"))
        if intensity not in INTENSITIES:
            skipped.append(SkippedFile(str(path), f"intensity {intensity} out of range"))
            continue
        key = (match.group("subject"), intensity, match.group("phase"))
        target = labels if match.group("label") else images
        if key in target:
            raise ManifestError(
                f"duplicate {'label' if target is labels else 'image'} for case {key}"
            )
        target[key] = str(path)

    for key, path in sorted(labels.items()):
        if key not in images:
            skipped.append(SkippedFile(path, "label without matching image"))

    subjects: dict[str, list[Case]] = {}
    for (subject, intensity, phase), image in sorted(images.items()):
        subjects.setdefault(subject, []).append(
            Case(
                subject=subject,
                intensity=intensity,
                phase=phase,
                image=image,
                label=labels.get((subject, intensity, phase)),
            )
        )
    manifest = Manifest(
        subjects=tuple(
            Subject(id=sid, cases=tuple(cases)) for sid, cases in sorted(subjects.items())
        )
    )
    return ManifestScan(manifest=manifest, skipped=tuple(skipped))


@dataclass(frozen=True)
class SplitSpec:
    """Subject-level train/validation split."""

    seed: int
    fraction: float
    train: tuple[str, ...]
    val: tuple[str, ...]

    def __post_init__(self):
        if set(self.train) & set(self.val):
            raise ParameterError("train and validation subjects overlap")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "fraction": self.fraction,
            "train": list(self.train),
            "val": list(self.val),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SplitSpec":
        return cls(
            seed=int(doc["seed"]),
            fraction=float(doc["fraction"]),
            train=tuple(doc["train"]),
            val=tuple(doc["val"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "SplitSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def split_subjects(manifest: Manifest, fraction: float = 0.2, seed: int = 0) -> SplitSpec:
    """Assign round(fraction * N) subjects to validation by seeded shuffle.

    The shuffle runs over the sorted subject ids so the split depends only
    on (ids, fraction, seed). All cases of a subject stay on one side.
    """
    if not 0.0 < fraction < 1.0:
        raise ParameterError(f"fraction must lie in (0, 1), got {fraction}")
    ids = sorted(manifest.subject_ids())
    n_val = int(round(fraction * len(ids)))
    if n_val == 0 or n_val == len(ids):
        raise ParameterError(
            f"fraction {fraction} with {len(ids)} subjects leaves an empty side"
        )
    rng = np.random.default_rng(seed)
    shuffled = list(rng.permutation(ids))
    return SplitSpec(
        seed=seed,
        fraction=fraction,
        train=tuple(sorted(shuffled[n_val:])),
        val=tuple(sorted(shuffled[:n_val])),
    )


def filter_manifest(manifest: Manifest, subject_ids: Iterable[str]) -> Manifest:
    """Restrict a manifest to the given subjects (order preserved)."""
    wanted = set(subject_ids)
    return Manifest(subjects=tuple(s for s in manifest.subjects if s.id in wanted))

"""Weighted one-of augmentation policy with full replay provenance.

Exactly one of the four artifact transforms is applied per slice, drawn
with configurable weights (motion is three times as likely by default).
Every application emits a :class:`TransformRecord` from which the output
can be reproduced bit for bit.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import ParameterError
from ..geometry import extract_slices, stack_slices
from ..volume import Slice2D, Volume
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
)

KINDS = ("motion", "ghosting", "bias", "gamma")

_PARAM_TYPES = {
    "motion": MotionParams,
    "ghosting": GhostingParams,
    "bias": BiasFieldParams,
    "gamma": GammaParams,
}

_APPLY = {
    "motion": apply_motion,
    "ghosting": apply_ghosting,
    "bias": apply_bias_field,
    "gamma": apply_gamma,
}


@dataclass(frozen=True)
class PolicyWeights:
    """Relative draw weights for the one-of policy."""

    motion: float = 3.0
    ghosting: float = 1.0
    bias: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        w = self.as_tuple()
        if any(v < 0 for v in w):
            raise ParameterError("policy weights must be nonnegative")
        if sum(w) <= 0:
            raise ParameterError("policy weights must not all be zero")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.motion, self.ghosting, self.bias, self.gamma)

    def probabilities(self) -> tuple[float, ...]:
        w = self.as_tuple()
        total = sum(w)
        return tuple(v / total for v in w)


def sample_one_of(weights: PolicyWeights, rng: np.random.Generator) -> str:
    """Draw one transform kind; spends exactly one uniform variate."""
    cumulative = np.cumsum(weights.probabilities())
    u = rng.random()
    return KINDS[int(np.searchsorted(cumulative, u, side="right"))]


@dataclass(frozen=True)
class TransformRecord:
    """Everything needed to replay one augmentation bit for bit."""

    kind: str
    seed: int
    params: object
    source: Mapping[str, object] | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "params": dataclasses.asdict(self.params),
            "source": dict(self.source) if self.source is not None else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TransformRecord":
        kind = d["kind"]
        if kind not in _PARAM_TYPES:
            raise ParameterError(f"unknown transform kind {kind!r}")
        raw = dict(d["params"])
        if kind == "motion":
            raw["rotations"] = tuple(raw["rotations"])
            raw["translations"] = tuple(tuple(t) for t in raw["translations"])
            raw["times"] = tuple(raw["times"])
        elif kind == "bias":
            raw["coefficients"] = tuple(raw["coefficients"])
        params = _PARAM_TYPES[kind](**raw)
        return cls(kind=kind, seed=int(d["seed"]), params=params, source=d.get("source"))


def replay(record: TransformRecord, slc: Slice2D) -> Slice2D:
    """Re-apply a recorded transform; identical input gives identical output."""
    return _APPLY[record.kind](slc, record.params)


def _default_samplers() -> dict[str, BaseEstimator]:
    return {
        "motion": RandomMotion(),
        "ghosting": RandomGhosting(),
        "bias": RandomBiasField(),
        "gamma": RandomGamma(),
    }


def augment_slice(
    slc: Slice2D,
    weights: PolicyWeights | None = None,
    seed: int = 0,
    samplers: Mapping[str, BaseEstimator] | None = None,
    case_id: str | None = None,
) -> tuple[Slice2D, TransformRecord]:
    """Apply exactly one weighted-random transform to a slice.

    All randomness comes from a fresh PCG64 generator seeded with ``seed``,
    so the same (slice, seed, config) always produces the same output.
    """
    weights = weights or PolicyWeights()
    samplers = samplers or _default_samplers()
    rng = make_rng(seed)
    kind = sample_one_of(weights, rng)
    params = samplers[kind].sample(rng)
    out = _APPLY[kind](slc, params)
    source = {
        "case_id": case_id if case_id is not None
        else (slc.source.volume_name if slc.source else None),
        "slice": slc.source.index if slc.source else None,
    }
    record = TransformRecord(kind=kind, seed=int(seed), params=params, source=source)
    return out, record


class SliceAugmenter(BaseEstimator):
    """One-of artifact augmentation policy over slices and volumes."""

    def __init__(self, weights: PolicyWeights | None = None,
                 motion: RandomMotion | None = None,
                 ghosting: RandomGhosting | None = None,
                 bias: RandomBiasField | None = None,
                 gamma: RandomGamma | None = None):
        self.weights = weights
        self.motion = motion
        self.ghosting = ghosting
        self.bias = bias
        self.gamma = gamma

    def _samplers(self) -> dict[str, BaseEstimator]:
        defaults = _default_samplers()
        for kind in KINDS:
            configured = getattr(self, kind)
            if configured is not None:
                defaults[kind] = configured
        return defaults

    def augment(self, slc: Slice2D, seed: int,
                case_id: str | None = None) -> tuple[Slice2D, TransformRecord]:
        return augment_slice(
            slc,
            weights=self.weights or PolicyWeights(),
            seed=seed,
            samplers=self._samplers(),
            case_id=case_id,
        )

    def augment_volume(
        self,
        vol: Volume,
        master_seed: int,
        case_id: str,
    ) -> tuple[Volume, list[TransformRecord]]:
        """Augment every slice with a per-slice derived seed.

        Seeds depend only on (master_seed, case_id, slice index), so batch
        parallelism cannot change the outputs.
        """
        out_slices = []
        records = []
        for k, slc in enumerate(extract_slices(vol)):
            slice_seed = derive_seed(master_seed, case_id, k)
            aug, record = self.augment(slc, seed=slice_seed, case_id=case_id)
            out_slices.append(aug)
            records.append(record)
        return stack_slices(out_slices, like=vol), records

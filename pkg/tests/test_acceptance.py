"""Acceptance gate: property-based oracle checks with explicit budgets.

Each test prints one PASS line (visible on the live terminal) and
enforces its own runtime budget. Oracles are independent routes:
direct DFT summation, spatial-domain shifts, all-pairs distances,
hand-built comb spectra, and world-coordinate multisets.
"""
import hashlib
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from cmrpipe import (
    BiasFieldParams,
    GammaParams,
    GhostingParams,
    LabelVolume,
    MotionParams,
    PolicyWeights,
    Slice2D,
    Volume,
    apply_bias_field,
    apply_gamma,
    apply_ghosting,
    apply_motion,
    augment_slice,
    dice,
    fit_landmarks,
    hd95,
    reorient_to_canonical,
    resample,
    sample_one_of,
    standardize,
    write_nifti,
)
from cmrpipe.artifacts import fft2_centered, ifft2_centered

from conftest import dft2_direct, random_axis_aligned_affine, world_points


def _report(capsys, name, detail):
    with capsys.disabled():
        print(f"[acceptance] {name}: PASS ({detail})")


# ---------------------------------------------------------------------------
# 1. neutral-parameter identities
# ---------------------------------------------------------------------------

def test_neutral_parameter_identity_suite(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    n_bias = (3 + 1) * (3 + 2) // 2
    for shape in [(16, 16), (33, 27), (64, 64), (128, 96)]:
        slc = Slice2D(rng.normal(size=shape) * 50.0 + 100.0, (1.25, 1.25))
        out = apply_motion(slc, MotionParams(num_transforms=0))
        assert np.allclose(out.data, slc.data, atol=1e-5)
        out = apply_ghosting(slc, GhostingParams(num_ghosts=7, intensity=0.0))
        assert np.allclose(out.data, slc.data, atol=1e-6)
        out = apply_ghosting(slc, GhostingParams(num_ghosts=0, intensity=0.9))
        assert np.allclose(out.data, slc.data, atol=1e-6)
        out = apply_bias_field(slc, BiasFieldParams(coefficients=(0.0,) * n_bias))
        assert np.allclose(out.data, slc.data, atol=1e-6)
        out = apply_gamma(slc, GammaParams(log_gamma=0.0))
        assert np.allclose(out.data, slc.data, atol=1e-6)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report(capsys, "neutral-parameter identities",
            f"4 shapes x 5 cases, {elapsed:.2f}s < 10s")


# ---------------------------------------------------------------------------
# 2. Fourier oracles
# ---------------------------------------------------------------------------

def test_fourier_oracles(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(202)

    # (a) round trip and agreement with direct DFT summation
    for shape in [(8, 8), (16, 16), (32, 24), (64, 64)]:
        image = rng.normal(size=shape)
        k = fft2_centered(image)
        assert np.allclose(k, dft2_direct(image), atol=1e-5)
        assert np.allclose(ifft2_centered(k).real, image, atol=1e-5)

    # (b) motion with every line acquired under one uniform translation
    # equals the spatially shifted image away from the clamped border
    for shape, shift in [((32, 32), (3, -2)), ((64, 64), (-5, 4))]:
        image = rng.normal(size=shape)
        params = MotionParams(
            num_transforms=1, rotations=(0.0,),
            translations=((float(shift[0]), float(shift[1])),), times=(1e-9,),
        )
        out = apply_motion(Slice2D(image, (1.0, 1.0)), params, keep_center=False)
        expected = np.roll(image, shift, axis=(0, 1))
        margin = 8
        interior = (slice(margin, -margin), slice(margin, -margin))
        assert np.max(np.abs(out.data[interior] - expected[interior])) <= 1e-3

    # (c) ghosted impulse vs a hand-built comb-modulated spectrum
    for axis in (0, 1):
        image = np.zeros((32, 32))
        image[16, 16] = 1.0
        params = GhostingParams(num_ghosts=4, intensity=0.65, axis=axis,
                                restore_center=0.0)
        out = apply_ghosting(Slice2D(image, (1.0, 1.0)), params)
        n = 32
        scale = np.ones(n)
        for line in range(n):
            offset = line - n // 2
            if offset % 4 == 0:
                scale[line] = 1.0 - 0.65
        k = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(image), norm="ortho"))
        k = k * (scale[:, None] if axis == 0 else scale[None, :])
        k[16, 16] = 1.0 / 32.0  # DC of the unit impulse, restored
        expected = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k), norm="ortho")).real
        assert np.max(np.abs(out.data - expected)) <= 1e-5

    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report(capsys, "Fourier oracles",
            f"DFT summation + translation + comb spectrum, {elapsed:.2f}s < 60s")


# ---------------------------------------------------------------------------
# 3. metric oracle equivalence
# ---------------------------------------------------------------------------

def _surface_points_shifted(mask, spacing):
    """Surface via six shifted copies: no scipy, pure slicing."""
    m = np.asarray(mask, dtype=bool)
    interior = np.ones(m.shape, dtype=bool)
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(1, None)
        hi[axis] = slice(None, -1)
        shifted = np.zeros_like(m)
        shifted[tuple(lo)] = m[tuple(hi)]
        interior &= shifted
        shifted = np.zeros_like(m)
        shifted[tuple(hi)] = m[tuple(lo)]
        interior &= shifted
    surface = m & ~interior
    return np.argwhere(surface).astype(np.float64) * np.asarray(spacing)


def _hd95_all_pairs(pred_mask, gt_mask, spacing):
    a = _surface_points_shifted(pred_mask, spacing)
    b = _surface_points_shifted(gt_mask, spacing)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return max(float(np.percentile(d.min(axis=1), 95.0, method="linear")),
               float(np.percentile(d.min(axis=0), 95.0, method="linear")))


def test_metric_oracle_equivalence(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    pairs = 0
    hd_checked = 0
    while pairs < 1000:
        shape = (int(rng.integers(4, 9)), int(rng.integers(4, 9)), 4)
        pred = LabelVolume(
            rng.choice([0, 1, 2, 3], size=shape, p=[0.55, 0.15, 0.15, 0.15]).astype(np.int16),
            np.eye(4))
        gt = LabelVolume(
            rng.choice([0, 1, 2, 3], size=shape, p=[0.55, 0.15, 0.15, 0.15]).astype(np.int16),
            np.eye(4))
        pairs += 1
        for label in (1, 2, 3):
            p = pred.data == label
            g = gt.data == label
            total = p.sum() + g.sum()
            expected_dice = 1.0 if total == 0 else 2.0 * (p & g).sum() / total
            assert dice(pred, gt, label=label) == expected_dice
            if p.any() and g.any():
                assert hd95(pred, gt, label=label) == _hd95_all_pairs(
                    p, g, (1.0, 1.0, 1.0))
                hd_checked += 1

    # spacing-scaling linearity, exact for power-of-two factors
    scaling_checked = 0
    while scaling_checked < 25:
        shape = (6, 6, 4)
        pred = LabelVolume(
            rng.choice([0, 1], size=shape, p=[0.6, 0.4]).astype(np.int16), np.eye(4))
        gt = LabelVolume(
            rng.choice([0, 1], size=shape, p=[0.6, 0.4]).astype(np.int16), np.eye(4))
        if not ((pred.data == 1).any() and (gt.data == 1).any()):
            continue
        base = hd95(pred, gt, label=1, spacing=(1.25, 0.75, 8.0))
        for factor in (0.5, 2.0, 4.0):
            scaled = hd95(pred, gt, label=1,
                          spacing=(1.25 * factor, 0.75 * factor, 8.0 * factor))
            assert scaled == factor * base
        scaling_checked += 1

    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    _report(capsys, "metric oracle equivalence",
            f"{pairs} pairs, {hd_checked} hd95 comparisons exact, "
            f"{scaling_checked} scaling checks, {elapsed:.2f}s < 120s")


# ---------------------------------------------------------------------------
# 4. policy frequencies
# ---------------------------------------------------------------------------

def test_policy_frequencies(capsys):
    start = time.perf_counter()
    weights = PolicyWeights(3.0, 1.0, 1.0, 1.0)
    rng = np.random.default_rng(404)
    n = 120_000
    counts = {"motion": 0, "ghosting": 0, "bias": 0, "gamma": 0}
    for _ in range(n):
        counts[sample_one_of(weights, rng)] += 1
    expected = {"motion": 0.5, "ghosting": 1 / 6, "bias": 1 / 6, "gamma": 1 / 6}
    freqs = {k: v / n for k, v in counts.items()}
    for kind, target in expected.items():
        assert abs(freqs[kind] - target) <= 0.01, (kind, freqs[kind], target)
    elapsed = time.perf_counter() - start
    _report(capsys, "policy frequencies",
            "motion %.4f ghosting %.4f bias %.4f gamma %.4f over %d draws "
            "(+-0.01 of 1/2,1/6,1/6,1/6), %.2fs"
            % (freqs["motion"], freqs["ghosting"], freqs["bias"], freqs["gamma"],
               n, elapsed))


# ---------------------------------------------------------------------------
# 5. standardization properties
# ---------------------------------------------------------------------------

def test_standardization_properties(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    train = [Volume(rng.gamma(2.0, 10.0 * (i + 2), size=(32, 32, 4)), np.eye(4))
             for i in range(4)]
    model = fit_landmarks(train)

    # monotonicity over 1e6 random value pairs
    n_pairs = 1_000_000
    values = rng.gamma(2.0, 35.0, size=2 * n_pairs)
    vol = Volume(values.reshape(200, 100, 100), np.eye(4))
    mapped = standardize(vol, model).data.reshape(-1)
    a, b = values[:n_pairs], values[n_pairs:]
    fa, fb = mapped[:n_pairs], mapped[n_pairs:]
    violations = np.sum((a - b) * (fa - fb) < 0)
    assert violations == 0

    # landmark pinning: voxel count 1 mod 100 makes integer percentiles
    # exact order statistics
    probe = Volume(rng.gamma(2.0, 60.0, size=(101, 101, 1)), np.eye(4))
    pinned = standardize(probe, model)
    for pct, target in zip(model.percentiles, model.standard_scale):
        assert abs(np.percentile(pinned.data, pct) - target) <= 1e-6

    # invariance under positive affine intensity changes
    base = Volume(rng.gamma(2.0, 25.0, size=(24, 24, 4)), np.eye(4))
    shifted = base.replace(data=base.data * 7.3 + 1234.5)
    out_base = standardize(base, model)
    out_shifted = standardize(shifted, model)
    max_dev = np.max(np.abs(out_base.data - out_shifted.data))
    assert max_dev <= 1e-4

    elapsed = time.perf_counter() - start
    _report(capsys, "standardization properties",
            f"0 monotonicity violations in {n_pairs} pairs, pinning <=1e-6, "
            f"affine invariance {max_dev:.2e} <= 1e-4, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 6. geometry suite
# ---------------------------------------------------------------------------

def test_geometry_suite(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(606)

    # reorientation: idempotent, world-coordinate multiset preserved
    for _ in range(50):
        affine = random_axis_aligned_affine(rng, spacing=(1.3, 0.8, 7.0))
        vol = Volume(rng.normal(size=(7, 6, 4)), affine)
        out = reorient_to_canonical(vol)
        again = reorient_to_canonical(out)
        assert np.array_equal(out.data, again.data)
        assert np.array_equal(out.affine, again.affine)
        assert np.max(np.abs(world_points(vol) - world_points(out))) <= 1e-6

    # trilinear exactness on affine intensity fields
    for spacing, target in [((2.0, 1.5, 3.0), (1.0, 1.0, 1.5)),
                            ((1.25, 1.25, 8.0), (2.5, 2.5, 8.0))]:
        shape = (11, 10, 5)
        ii, jj, kk = np.indices(shape).astype(np.float64)
        data = 5.0 + 1.3 * ii * spacing[0] - 0.7 * jj * spacing[1] + 0.2 * kk * spacing[2]
        vol = Volume(data, np.diag([*spacing, 1.0]))
        out = resample(vol, target, "trilinear")
        oi, oj, ok = np.indices(out.shape).astype(np.float64)
        expected = (5.0 + 1.3 * oi * target[0] - 0.7 * oj * target[1]
                    + 0.2 * ok * target[2])
        interior = (
            (oi * target[0] <= (shape[0] - 1) * spacing[0])
            & (oj * target[1] <= (shape[1] - 1) * spacing[1])
            & (ok * target[2] <= (shape[2] - 1) * spacing[2])
        )
        assert np.max(np.abs(out.data[interior] - expected[interior])) <= 1e-5

    # nearest-neighbour label resampling invents no labels
    for _ in range(20):
        data = rng.choice([0, 1, 2, 3], size=(9, 8, 4),
                          p=[0.4, 0.2, 0.2, 0.2]).astype(np.int16)
        vol = LabelVolume(data, np.diag([1.8, 1.8, 8.0, 1.0]))
        factor = float(rng.uniform(0.4, 2.5))
        out = resample(vol, (1.8 * factor, 1.8 * factor, 8.0), "nearest")
        assert set(np.unique(out.data)) <= set(np.unique(data))

    elapsed = time.perf_counter() - start
    _report(capsys, "geometry suite",
            f"50 reorientations <=1e-6mm, trilinear <=1e-5, 20 label "
            f"resamples closed, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 7. pipeline determinism under parallelism
# ---------------------------------------------------------------------------

def _make_cohort(root, n_subjects, intensities, shape, rng):
    root.mkdir(parents=True, exist_ok=True)
    affine = np.diag([1.8, 1.8, 8.0, 1.0])
    affine[:3, 3] = [-20.0, -18.0, 0.0]
    for s in range(1, n_subjects + 1):
        for intensity in intensities:
            for phase in ("ED", "ES"):
                img = rng.gamma(2.0, 30.0, size=shape).astype(np.float32)
                write_nifti(Volume(img, affine),
                            root / f"P{s:03d}-{intensity}-{phase}.nii")


def _run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "cmrpipe.cli", *[str(a) for a in args]],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
    return proc


def _tree_digest(directory):
    acc = hashlib.sha256()
    for path in sorted(Path(directory).rglob("*")):
        if path.is_file():
            acc.update(path.name.encode())
            acc.update(path.read_bytes())
    return acc.hexdigest()


def test_pipeline_determinism_across_jobs(capsys, tmp_path):
    start = time.perf_counter()
    rng = np.random.default_rng(707)
    raw = tmp_path / "raw"
    _make_cohort(raw, n_subjects=4, intensities=(1, 2), shape=(24, 20, 3), rng=rng)
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"preprocess": {"crop": [32, 32]}}))

    digests = {}
    for jobs in (1, 8):
        pre = tmp_path / f"pre_j{jobs}"
        _run_cli("preprocess", "--manifest", raw, "--output", pre,
                 "--config", config, "--jobs", jobs, "--seed", 5)
        digests[jobs] = _tree_digest(pre)
    assert digests[1] == digests[8]

    # augment both times from the same preprocessed tree so the recorded
    # input path cannot mask a real difference
    digests = {}
    for jobs in (1, 8):
        aug = tmp_path / f"aug_j{jobs}"
        _run_cli("augment", "--manifest", tmp_path / "pre_j1", "--output", aug,
                 "--config", config, "--jobs", jobs, "--seed", 5)
        digests[jobs] = _tree_digest(aug)
    assert digests[1] == digests[8]

    elapsed = time.perf_counter() - start
    _report(capsys, "pipeline determinism",
            f"preprocess+augment bitwise equal for --jobs 1 vs 8, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 8. performance
# ---------------------------------------------------------------------------

def test_performance_budgets(capsys, tmp_path):
    rng = np.random.default_rng(808)

    # single 256x256 slice augmentation under 20 ms (mean over mixed kinds)
    slc = Slice2D(rng.gamma(2.0, 30.0, size=(256, 256)), (1.25, 1.25))
    augment_slice(slc, seed=0)  # warm-up
    reps = 40
    t0 = time.perf_counter()
    for seed in range(reps):
        augment_slice(slc, seed=seed)
    per_slice_ms = (time.perf_counter() - t0) / reps * 1000.0
    assert per_slice_ms < 20.0

    # 160-case cohort (20 subjects x 4 intensities x ED/ES) preprocessed
    # in under two minutes
    raw = tmp_path / "cohort"
    _make_cohort(raw, n_subjects=20, intensities=(1, 2, 3, 4),
                 shape=(192, 180, 8), rng=rng)
    out = tmp_path / "pre"
    t0 = time.perf_counter()
    _run_cli("preprocess", "--manifest", raw, "--output", out, "--jobs", 4)
    cohort_s = time.perf_counter() - t0
    n_out = len(list(out.glob("*_preproc.nii.gz")))
    assert n_out == 160
    assert cohort_s < 120.0

    _report(capsys, "performance",
            f"augment {per_slice_ms:.1f}ms/slice < 20ms, 160-case cohort "
            f"{cohort_s:.1f}s < 120s")

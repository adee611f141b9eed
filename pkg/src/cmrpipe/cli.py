"""Command-line pipeline: preprocess, fit-histogram, split, augment, evaluate, preview.

Every command writes a provenance JSON (tool version, config hash, seeds,
inputs) next to its outputs, and all outputs are deterministic functions
of (inputs, config, seed) regardless of ``--jobs``.
"""
from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, Mapping

import click
import numpy as np

from . import __version__
from .artifacts import (
    PolicyWeights,
    RandomBiasField,
    RandomGamma,
    RandomGhosting,
    RandomMotion,
    SliceAugmenter,
)
from .config import config_hash, load_config
from .errors import CmrPipeError, ConfigError, ManifestError
from .geometry import center_crop_or_pad, reorient_to_canonical, resample
from .histnorm import LandmarkModel, fit_landmarks, standardize
from .io import (
    DEFAULT_PATTERN,
    Manifest,
    build_manifest,
    filter_manifest,
    read_nifti,
    split_subjects,
    write_nifti,
)
from .metrics import (
    DEFAULT_LABEL_MAP,
    aggregate,
    evaluate_case,
    format_summary_table,
    write_metrics_csv,
    write_summary_json,
)
from .volume import LabelVolume, Volume


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _load_manifest(manifest_path: str) -> Manifest:
    path = Path(manifest_path)
    if path.is_dir():
        return build_manifest(path).manifest
    return Manifest.load(path)


def _parse_labels(spec: str) -> dict[int, str]:
    label_map: dict[int, str] = {}
    for part in spec.split(","):
        name, _, code = part.partition("=")
        if not name or not code:
            raise ConfigError(f"bad --labels entry {part!r}; expected name=code")
        try:
            value = int(code)
        except ValueError as exc:
            raise ConfigError(f"label code {code!r} is not an integer") from exc
        if value in label_map or value == 0:
            raise ConfigError(f"label code {value} duplicated or reserved")
        label_map[value] = name.upper()
    if not label_map:
        raise ConfigError("--labels must define at least one structure")
    return label_map


def _make_augmenter(config: Mapping) -> SliceAugmenter:
    aug = config["augment"]
    return SliceAugmenter(
        weights=PolicyWeights(**aug["weights"]),
        motion=RandomMotion(**aug["motion"]),
        ghosting=RandomGhosting(
            num_ghosts=tuple(aug["ghosting"]["num_ghosts"]),
            intensity=tuple(aug["ghosting"]["intensity"]),
            restore_center=aug["ghosting"]["restore_center"],
        ),
        bias=RandomBiasField(**aug["bias"]),
        gamma=RandomGamma(**aug["gamma"]),
    )


def _target_spacing(vol: Volume, config: Mapping) -> tuple[float, float, float]:
    pp = config["preprocess"]
    sz = pp["spacing_z"] if pp["spacing_z"] is not None else vol.spacing[2]
    return (pp["spacing_inplane"], pp["spacing_inplane"], sz)


def _preprocess_image(
    img: Volume,
    config: Mapping,
    model: LandmarkModel | None,
) -> Volume:
    pp = config["preprocess"]
    foreground = config["histogram"]["foreground"]
    img = reorient_to_canonical(img)
    img = resample(img, _target_spacing(img, config), "trilinear")
    if model is not None and pp["standardize_before_crop"]:
        img = standardize(img, model, foreground=foreground)
    img = center_crop_or_pad(img, pp["crop"], pp["pad_value"])
    if model is not None and not pp["standardize_before_crop"]:
        img = standardize(img, model, foreground=foreground)
    return img


def _preprocess_label(lbl: LabelVolume, config: Mapping) -> LabelVolume:
    lbl = reorient_to_canonical(lbl)
    lbl = resample(lbl, _target_spacing(lbl, config), "nearest")
    return center_crop_or_pad(lbl, config["preprocess"]["crop"], 0)


def _histogram_stage_volume(img: Volume, config: Mapping) -> Volume:
    """The pipeline stage whose intensities the landmark fit sees."""
    pp = config["preprocess"]
    img = reorient_to_canonical(img)
    img = resample(img, _target_spacing(img, config), "trilinear")
    if not pp["standardize_before_crop"]:
        img = center_crop_or_pad(img, pp["crop"], pp["pad_value"])
    return img


def _run_cases(
    items: list[tuple[str, object]],
    worker: Callable[[object], object],
    jobs: int,
    keep_going: bool,
) -> tuple[dict, list[dict]]:
    """Run one worker call per case, optionally in parallel.

    Each case is independent and seeded by derivation, so scheduling
    cannot change any output.
    """
    done: dict = {}
    failures: list[dict] = []

    def record_failure(key: str, exc: Exception) -> None:
        failures.append({"case": key, "kind": type(exc).__name__, "message": str(exc)})

    if jobs <= 1:
        for key, payload in items:
            try:
                done[key] = worker(payload)
            except Exception as exc:  # noqa: BLE001 - reported per case
                record_failure(key, exc)
                if not keep_going:
                    break
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(worker, payload): key for key, payload in items}
            for future in as_completed(futures):
                key = futures[future]
                try:
                    done[key] = future.result()
                except Exception as exc:  # noqa: BLE001
                    record_failure(key, exc)
                    if not keep_going:
                        for other in futures:
                            other.cancel()
                        break
    failures.sort(key=lambda f: f["case"])
    return done, failures


def _write_provenance(
    target: Path,
    command: str,
    config: Mapping,
    seed: int | None,
    extra: Mapping,
) -> None:
    doc = {
        "tool": "cmrpipe",
        "version": __version__,
        "command": command,
        "config": dict(config),
        "config_hash": config_hash(config),
        "seed": seed,
    }
    doc.update(extra)
    if target.is_dir():
        path = target / "provenance.json"
    else:
        path = target.with_name(target.name + ".provenance.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))


def _finish(output: Path, failures: list[dict]) -> None:
    if failures:
        report = output / "errors.json" if output.is_dir() else output.with_name(
            output.name + ".errors.json"
        )
        report.write_text(json.dumps({"failures": failures}, indent=2, sort_keys=True))
        for failure in failures:
            click.echo(
                f"FAILED {failure['case']}: {failure['kind']}: {failure['message']}",
                err=True,
            )
        raise SystemExit(1)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(version=__version__, prog_name="cmrpipe")
def main() -> None:
    """Deterministic cardiac MRI preprocessing, augmentation, and evaluation."""


@main.command("build-manifest")
@click.option("--data-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--pattern", default=DEFAULT_PATTERN, show_default=False,
              help="Regex over file stems with subject/intensity/phase/label groups.")
def build_manifest_cmd(data_root: str, output: str, pattern: str) -> None:
    """Scan a directory tree into a dataset manifest JSON."""
    scan = build_manifest(data_root, pattern=pattern)
    scan.manifest.save(output)
    skipped = [{"path": s.path, "reason": s.reason} for s in scan.skipped]
    Path(output).with_name(Path(output).name + ".skipped.json").write_text(
        json.dumps({"skipped": skipped}, indent=2, sort_keys=True)
    )
    n_cases = len(scan.manifest.cases())
    click.echo(
        f"{len(scan.manifest.subjects)} subjects, {n_cases} cases, "
        f"{len(skipped)} skipped file(s)"
    )


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path(file_okay=False))
@click.option("--landmarks", type=click.Path(exists=True, dir_okay=False),
              help="LandmarkModel JSON; enables histogram standardization.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--keep-going", is_flag=True, help="Process remaining cases after a failure.")
def preprocess(manifest: str, output: str, landmarks: str | None,
               config_path: str | None, seed: int, jobs: int, keep_going: bool) -> None:
    """Reorient, resample, crop, and optionally standardize every case."""
    config = load_config(config_path)
    model = LandmarkModel.load(landmarks) if landmarks else None
    mani = _load_manifest(manifest)
    out_dir = Path(output)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(case):
        img = read_nifti(case.image)
        img = _preprocess_image(img, config, model)
        img_path = out_dir / f"{case.case_id}_preproc.nii.gz"
        write_nifti(img.replace(data=img.data.astype(np.float32)), img_path)
        written = [img_path.name]
        if case.label:
            lbl = read_nifti(case.label, as_label=True)
            lbl = _preprocess_label(lbl, config)
            lbl_path = out_dir / f"{case.case_id}_preproc-label.nii.gz"
            write_nifti(lbl, lbl_path)
            written.append(lbl_path.name)
        return written

    items = [(c.case_id, c) for c in mani.cases()]
    done, failures = _run_cases(items, work, jobs, keep_going)
    outputs = sorted(name for names in done.values() for name in names)
    _write_provenance(out_dir, "preprocess", config, seed, {
        "manifest": str(manifest),
        "landmarks": landmarks,
        "outputs": outputs,
    })
    _finish(out_dir, failures)
    click.echo(f"preprocessed {len(done)}/{len(items)} cases -> {out_dir}")


@main.command("fit-histogram")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--split", "split_path", type=click.Path(exists=True, dir_okay=False),
              help="SplitSpec JSON; restricts fitting to one side of the split.")
@click.option("--subset", type=click.Choice(["train", "val", "all"]), default="train",
              show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--jobs", default=1, show_default=True)
def fit_histogram(manifest: str, output: str, split_path: str | None, subset: str,
                  config_path: str | None, jobs: int) -> None:
    """Learn the standard intensity scale from training volumes."""
    config = load_config(config_path)
    mani = _load_manifest(manifest)
    if split_path and subset != "all":
        from .io import SplitSpec

        split = SplitSpec.load(split_path)
        mani = filter_manifest(mani, split.train if subset == "train" else split.val)
    cases = mani.cases()
    if not cases:
        raise click.ClickException("no cases left to fit on")

    def work(case):
        return _histogram_stage_volume(read_nifti(case.image), config)

    items = [(c.case_id, c) for c in cases]
    done, failures = _run_cases(items, work, jobs, keep_going=False)
    if failures:
        _finish(Path(output), failures)
    volumes = [done[c.case_id] for c in cases]  # fixed reduction order
    model = fit_landmarks(
        volumes,
        percentiles=config["histogram"]["percentiles"],
        foreground=config["histogram"]["foreground"],
    )
    model.save(output)
    _write_provenance(Path(output), "fit-histogram", config, None, {
        "manifest": str(manifest),
        "split": split_path,
        "subset": subset,
        "cases": [c.case_id for c in cases],
    })
    click.echo(f"fitted landmarks on {len(volumes)} volumes -> {output}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--fraction", default=0.2, show_default=True)
@click.option("--seed", default=0, show_default=True)
def split(manifest: str, output: str, fraction: float, seed: int) -> None:
    """Split subjects into train/validation sets (never splitting a subject)."""
    mani = _load_manifest(manifest)
    spec = split_subjects(mani, fraction=fraction, seed=seed)
    spec.save(output)
    _write_provenance(Path(output), "split", {}, seed, {
        "manifest": str(manifest),
        "fraction": fraction,
        "n_train": len(spec.train),
        "n_val": len(spec.val),
    })
    click.echo(f"{len(spec.train)} train / {len(spec.val)} val subjects -> {output}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--jobs", default=1, show_default=True)
@click.option("--keep-going", is_flag=True)
def augment(manifest: str, output: str, seed: int, config_path: str | None,
            jobs: int, keep_going: bool) -> None:
    """Apply one weighted-random artifact per slice; write volumes + replay records."""
    config = load_config(config_path)
    mani = _load_manifest(manifest)
    out_dir = Path(output)
    out_dir.mkdir(parents=True, exist_ok=True)
    augmenter = _make_augmenter(config)

    def work(case):
        img = read_nifti(case.image)
        aug, records = augmenter.augment_volume(img, master_seed=seed, case_id=case.case_id)
        img_path = out_dir / f"{case.case_id}_aug.nii.gz"
        write_nifti(aug.replace(data=aug.data.astype(np.float32)), img_path)
        records_path = out_dir / f"{case.case_id}_aug.records.json"
        records_path.write_text(json.dumps(
            {
                "case_id": case.case_id,
                "master_seed": seed,
                "records": [r.to_dict() for r in records],
            },
            indent=2, sort_keys=True,
        ))
        return [img_path.name, records_path.name]

    items = [(c.case_id, c) for c in mani.cases()]
    done, failures = _run_cases(items, work, jobs, keep_going)
    outputs = sorted(name for names in done.values() for name in names)
    _write_provenance(out_dir, "augment", config, seed, {
        "manifest": str(manifest),
        "outputs": outputs,
    })
    _finish(out_dir, failures)
    click.echo(f"augmented {len(done)}/{len(items)} cases -> {out_dir}")


def _collect_label_files(directory: Path, pattern: str) -> dict[tuple[str, int, str], Path]:
    """Map (subject, intensity, phase) to the best label file in a directory.

    Files with a -label suffix win over plain ones so an evaluation can
    point straight at a preprocess output directory.
    """
    import re

    regex = re.compile(pattern)
    chosen: dict[tuple[str, int, str], tuple[bool, Path]] = {}
    for path in sorted(directory.rglob("*")):
        if not path.is_file() or not (path.name.endswith(".nii") or path.name.endswith(".nii.gz")):
            continue
        stem = path.name
        for suffix in (".nii.gz", ".nii"):
            if stem.endswith(suffix):
                stem = stem[: -len(suffix)]
                break
        match = regex.match(stem)
        if not match:
            continue
        key = (match.group("subject"), int(match.group("intensity")), match.group("phase"))
        is_label = bool(match.group("label"))
        current = chosen.get(key)
        if current is None or (is_label and not current[0]):
            chosen[key] = (is_label, path)
    return {key: path for key, (_, path) in chosen.items()}


@main.command()
@click.option("--pred", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--gt", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--output", required=True, type=click.Path(file_okay=False))
@click.option("--labels", default="lv=1,myo=2,rv=3", show_default=True)
@click.option("--pattern", default=DEFAULT_PATTERN)
@click.option("--jobs", default=1, show_default=True)
@click.option("--keep-going", is_flag=True)
def evaluate(pred: str, gt: str, output: str, labels: str, pattern: str,
             jobs: int, keep_going: bool) -> None:
    """Per-structure Dice and HD95 for every case found in both directories."""
    label_map = _parse_labels(labels)
    allowed = (0, *label_map)
    pred_files = _collect_label_files(Path(pred), pattern)
    gt_files = _collect_label_files(Path(gt), pattern)
    shared = sorted(set(pred_files) & set(gt_files))
    if not shared:
        raise click.ClickException("no matching cases between --pred and --gt")
    out_dir = Path(output)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(key):
        case_id = f"{key[0]}-{key[1]}-{key[2]}"
        pred_vol = read_nifti(pred_files[key], as_label=True, allowed_codes=allowed)
        gt_vol = read_nifti(gt_files[key], as_label=True, allowed_codes=allowed)
        return evaluate_case(pred_vol, gt_vol, label_map=label_map, case_id=case_id)

    items = [(f"{k[0]}-{k[1]}-{k[2]}", k) for k in shared]
    done, failures = _run_cases(items, work, jobs, keep_going)
    reports = [done[key] for key, _ in items if key in done]
    if reports:
        write_metrics_csv(reports, out_dir / "metrics.csv")
        summary = aggregate(reports)
        write_summary_json(summary, out_dir / "summary.json")
        click.echo(format_summary_table(summary))
    _write_provenance(out_dir, "evaluate", {"labels": labels}, None, {
        "pred": str(pred),
        "gt": str(gt),
        "n_cases": len(reports),
    })
    _finish(out_dir, failures)


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path(file_okay=False))
@click.option("--case", "case_id", default=None, help="Case id; defaults to every case.")
@click.option("--seed", default=0, show_default=True)
@click.option("--max-slices", default=6, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def preview(manifest: str, output: str, case_id: str | None, seed: int,
            max_slices: int, config_path: str | None) -> None:
    """Write PNG montages of original vs augmented slices."""
    from .preview import write_preview_montage

    config = load_config(config_path)
    mani = _load_manifest(manifest)
    cases = [c for c in mani.cases() if case_id is None or c.case_id == case_id]
    if not cases:
        raise click.ClickException(f"case {case_id!r} not found in manifest")
    out_dir = Path(output)
    out_dir.mkdir(parents=True, exist_ok=True)
    augmenter = _make_augmenter(config)
    written = []
    for case in cases:
        img = read_nifti(case.image)
        path = out_dir / f"{case.case_id}_preview.png"
        write_preview_montage(img, augmenter, master_seed=seed, case_id=case.case_id,
                              path=path, max_slices=max_slices)
        written.append(path.name)
    _write_provenance(out_dir, "preview", config, seed, {
        "manifest": str(manifest),
        "outputs": sorted(written),
    })
    click.echo(f"wrote {len(written)} preview montage(s) -> {out_dir}")


if __name__ == "__main__":
    main()

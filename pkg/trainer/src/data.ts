/**
 * Slice dataset assembly from preprocessed / augmented NIfTI directories.
 *
 * Images and labels pair by case key — the filename stem with its stage
 * suffix (`_preproc`, `_aug`, ...) and `-label` marker stripped — so
 * augmented images reuse the label of the case they were derived from.
 * Each slice is z-scored independently at this boundary before it enters
 * the network.
 */

import { readdirSync } from "node:fs";
import { basename, join } from "node:path";
import { readNifti } from "./nifti.js";

export class DataError extends Error {}

/** `P001-1-ED_preproc-label.nii.gz` -> `P001-1-ED`. */
export function caseKeyFromFilename(path: string): string {
  let stem = basename(path);
  for (const ext of [".nii.gz", ".nii"]) {
    if (stem.endsWith(ext)) {
      stem = stem.slice(0, -ext.length);
      break;
    }
  }
  if (stem.endsWith("-label")) stem = stem.slice(0, -"-label".length);
  return stem.replace(/_[A-Za-z0-9]+$/, "");
}

export function subjectOfKey(key: string): string {
  return key.split("-")[0];
}

function listNifti(dir: string): string[] {
  return readdirSync(dir)
    .filter((f) => f.endsWith(".nii") || f.endsWith(".nii.gz"))
    .sort()
    .map((f) => join(dir, f));
}

function isLabelFile(path: string): boolean {
  return /-label\.nii(\.gz)?$/.test(basename(path));
}

export interface SliceSample {
  /** Case key of the source volume, e.g. P001-1-ED. */
  caseId: string;
  /** Directory the image came from (clean vs augmented provenance). */
  sourceDir: string;
  sliceIndex: number;
  /** z-scored slice, row-major [height=ny, width=nx]. */
  image: Float32Array;
  /** Integer labels, same layout. */
  labels: Int32Array;
}

export interface SliceDataset {
  height: number;
  width: number;
  numClasses: number;
  slices: SliceSample[];
}

export function zscoreSlice(slice: Float32Array): Float32Array {
  let mean = 0;
  for (let i = 0; i < slice.length; i++) mean += slice[i];
  mean /= slice.length;
  let variance = 0;
  for (let i = 0; i < slice.length; i++) {
    const d = slice[i] - mean;
    variance += d * d;
  }
  const std = Math.max(Math.sqrt(variance / slice.length), 1e-6);
  const out = new Float32Array(slice.length);
  for (let i = 0; i < slice.length; i++) out[i] = (slice[i] - mean) / std;
  return out;
}

export interface LoadOptions {
  /** Directories scanned for image volumes (non-label NIfTI files). */
  imageDirs: string[];
  /** Directory whose -label files provide the ground truth. */
  labelDir: string;
  /** Keep only cases whose subject is in this list (null = all). */
  subjects?: string[] | null;
  numClasses?: number;
}

export function loadSliceDataset(opts: LoadOptions): SliceDataset {
  const numClasses = opts.numClasses ?? 4;
  const subjectFilter = opts.subjects ? new Set(opts.subjects) : null;

  const labelPaths = new Map<string, string>();
  for (const path of listNifti(opts.labelDir)) {
    if (!isLabelFile(path)) continue;
    labelPaths.set(caseKeyFromFilename(path), path);
  }
  if (labelPaths.size === 0) {
    throw new DataError(`no -label NIfTI files found in ${opts.labelDir}`);
  }

  const labelCache = new Map<string, { dims: [number, number, number]; data: Float32Array }>();
  const slices: SliceSample[] = [];
  let height = 0;
  let width = 0;

  for (const dir of opts.imageDirs) {
    for (const path of listNifti(dir)) {
      if (isLabelFile(path)) continue;
      const key = caseKeyFromFilename(path);
      if (subjectFilter && !subjectFilter.has(subjectOfKey(key))) continue;
      const labelPath = labelPaths.get(key);
      if (!labelPath) {
        throw new DataError(`image ${path} has no matching label in ${opts.labelDir}`);
      }
      const img = readNifti(path);
      let lbl = labelCache.get(key);
      if (!lbl) {
        const vol = readNifti(labelPath);
        lbl = { dims: vol.dims, data: vol.data };
        labelCache.set(key, lbl);
      }
      const [nx, ny, nz] = img.dims;
      if (lbl.dims.join(",") !== img.dims.join(",")) {
        throw new DataError(
          `shape mismatch for ${key}: image ${img.dims.join("x")} vs label ${lbl.dims.join("x")}`,
        );
      }
      if (height === 0) {
        height = ny;
        width = nx;
      } else if (height !== ny || width !== nx) {
        throw new DataError(
          `inconsistent slice shapes: ${width}x${height} vs ${nx}x${ny} (${path})`,
        );
      }
      const plane = nx * ny;
      for (let k = 0; k < nz; k++) {
        const imgSlab = img.data.subarray(k * plane, (k + 1) * plane);
        const labels = new Int32Array(plane);
        for (let i = 0; i < plane; i++) {
          const v = Math.round(lbl.data[k * plane + i]);
          if (v < 0 || v >= numClasses) {
            throw new DataError(
              `label value ${v} in ${labelPath} outside [0, ${numClasses})`,
            );
          }
          labels[i] = v;
        }
        slices.push({
          caseId: key,
          sourceDir: dir,
          sliceIndex: k,
          image: zscoreSlice(imgSlab),
          labels,
        });
      }
    }
  }

  if (slices.length === 0) {
    throw new DataError(
      `no slices loaded from [${opts.imageDirs.join(", ")}] (subject filter: ${
        opts.subjects ? opts.subjects.join(",") : "none"
      })`,
    );
  }
  return { height, width, numClasses, slices };
}

/** Concatenate datasets with identical geometry. */
export function concatDatasets(...sets: SliceDataset[]): SliceDataset {
  const [first, ...rest] = sets;
  for (const s of rest) {
    if (s.height !== first.height || s.width !== first.width || s.numClasses !== first.numClasses) {
      throw new DataError("cannot concatenate datasets with different geometry");
    }
  }
  return {
    height: first.height,
    width: first.width,
    numClasses: first.numClasses,
    slices: sets.flatMap((s) => s.slices),
  };
}

/** Distinct case ids in a dataset, sorted. */
export function caseIds(ds: SliceDataset): string[] {
  return [...new Set(ds.slices.map((s) => s.caseId))].sort();
}

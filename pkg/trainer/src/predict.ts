/**
 * Volume prediction: per-slice z-score, centered zero padding up to the
 * model's divisor, batched forward passes, argmax, and a label NIfTI
 * written with the input volume's affine.
 */

import { join } from "node:path";
import { tf } from "./backend.js";
import { caseKeyFromFilename, zscoreSlice } from "./data.js";
import { readNifti, writeNifti, type Volume } from "./nifti.js";
import type { SegModel } from "./model.js";

export interface PredictOptions {
  batchSize?: number;
}

/** Segment every slice of a volume; returns a label volume (same grid). */
export function predictVolume(model: SegModel, vol: Volume, opts: PredictOptions = {}): Volume {
  const batchSize = opts.batchSize ?? 8;
  const [nx, ny, nz] = vol.dims;
  const plane = nx * ny;
  const div = model.divisor;
  const ph = Math.ceil(ny / div) * div;
  const pw = Math.ceil(nx / div) * div;
  const top = Math.floor((ph - ny) / 2);
  const left = Math.floor((pw - nx) / 2);

  const out = new Float32Array(nx * ny * nz);
  for (let at = 0; at < nz; at += batchSize) {
    const b = Math.min(batchSize, nz - at);
    const buf = new Float32Array(b * plane);
    for (let n = 0; n < b; n++) {
      buf.set(zscoreSlice(vol.data.subarray((at + n) * plane, (at + n + 1) * plane)), n * plane);
    }
    const preds = tf.tidy(() => {
      let x = tf.tensor4d(buf, [b, ny, nx, 1]);
      if (ph !== ny || pw !== nx) {
        x = tf.pad(x, [
          [0, 0],
          [top, ph - ny - top],
          [left, pw - nx - left],
          [0, 0],
        ]);
      }
      let logits = model.forward(x, false);
      if (ph !== ny || pw !== nx) {
        logits = tf.slice(logits, [0, top, left, 0], [b, ny, nx, model.numClasses]);
      }
      return tf.argMax(logits, 3).dataSync() as Int32Array;
    });
    for (let n = 0; n < b; n++) {
      for (let i = 0; i < plane; i++) out[(at + n) * plane + i] = preds[n * plane + i];
    }
  }
  return { dims: vol.dims, data: out, affine: vol.affine };
}

/**
 * Predict one image file and write `<caseKey>_pred-label.nii.gz` into
 * `outDir`, reusing the image's affine so downstream evaluation sees
 * matching geometry. Returns the output path.
 */
export function predictToFile(model: SegModel, imagePath: string, outDir: string): string {
  const vol = readNifti(imagePath);
  const labels = predictVolume(model, vol);
  const outPath = join(outDir, `${caseKeyFromFilename(imagePath)}_pred-label.nii.gz`);
  writeNifti(outPath, labels, "uint8");
  return outPath;
}

/**
 * Deterministic synthetic short-axis cardiac phantoms.
 *
 * Each phantom slice contains a nested-ellipse "heart": a circular
 * blood pool (label 1, LV-like) inside a myocardial ring (label 2), with
 * an adjacent elliptical second blood pool (label 3, RV-like), embedded
 * in a large body ellipse. Every phantom contains all three labels,
 * matching the evaluator's default label map (1=LV, 2=MYO, 3=RV).
 *
 * File naming follows the convention the preprocessing CLI expects:
 *   P{subject:03d}-{intensity}-{ED|ES}.nii.gz        (image)
 *   P{subject:03d}-{intensity}-{ED|ES}-label.nii.gz  (segmentation)
 *
 * Subject geometry is seeded per subject, so the same anatomy appears in
 * every intensity variant; variants differ by a global gain/offset and by
 * their noise realization. ED and ES phases differ by the inner blood-pool
 * radius (systolic contraction).
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { writeNifti, type Volume } from "./nifti.js";
import { mulberry32, uniform, type Rng } from "./rng.js";

export const MIN_PHANTOM_SIZE = 24;

export class PhantomError extends Error {}

export interface PhantomSpec {
  /** In-plane size in voxels (square). Minimum 24. */
  size?: number;
  /** Number of slices per volume. */
  slices?: number;
  /** Number of subjects. */
  subjects?: number;
  /** Intensity-variant indices, e.g. [1, 2]. */
  intensities?: number[];
  /** Master seed. */
  seed?: number;
  /** Additive Gaussian noise sigma. */
  noiseSigma?: number;
}

export interface PhantomCase {
  caseId: string;
  subject: string;
  intensity: number;
  phase: "ED" | "ES";
  imagePath: string;
  labelPath: string;
}

interface Geometry {
  cx: number;
  cy: number;
  rOut: number;
  rInED: number;
  rvA: number;
  rvB: number;
  rvAngle: number;
  bodyA: number;
  bodyB: number;
}

function combineSeed(...parts: number[]): number {
  let h = 0x9e3779b9;
  for (const p of parts) {
    h ^= Math.imul((p | 0) + 0x7f4a7c15, 0x85ebca6b);
    h = Math.imul(h ^ (h >>> 13), 0xc2b2ae35);
  }
  return h >>> 0;
}

function gaussian(rng: Rng): number {
  // Box-Muller; rejects u=0 to keep log finite.
  let u = 0;
  while (u === 0) u = rng();
  const v = rng();
  return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
}

function subjectGeometry(size: number, rng: Rng): Geometry {
  const jitter = () => uniform(rng, 0.92, 1.08);
  const cx = size * 0.55 + uniform(rng, -1.5, 1.5);
  const cy = size * 0.5 + uniform(rng, -1.5, 1.5);
  const rOut = size * 0.21 * jitter();
  const thick = Math.max(2.0, size * 0.07 * jitter());
  const rInED = Math.max(2.2, rOut - thick);
  const rvA = size * 0.16 * jitter();
  const rvB = size * 0.1 * jitter();
  const rvAngle = Math.PI + uniform(rng, -0.35, 0.35);
  return {
    cx,
    cy,
    rOut,
    rInED,
    rvA,
    rvB,
    rvAngle,
    bodyA: size * 0.46,
    bodyB: size * 0.42,
  };
}

/** Rasterize one case into image + label volumes (Fortran order). */
function rasterize(
  size: number,
  slices: number,
  geo: Geometry,
  phase: "ED" | "ES",
  gain: number,
  offset: number,
  noiseSigma: number,
  noiseRng: Rng,
): { image: Float32Array; label: Float32Array } {
  const n = size * size * slices;
  const image = new Float32Array(n);
  const label = new Float32Array(n);
  const rIn = phase === "ED" ? geo.rInED : Math.max(1.6, geo.rInED * 0.6);
  const cosT = Math.cos(geo.rvAngle);
  const sinT = Math.sin(geo.rvAngle);
  const rvD = geo.rOut + geo.rvA * 0.72;
  const rvCx = geo.cx + rvD * cosT;
  const rvCy = geo.cy + rvD * sinT;

  for (let k = 0; k < slices; k++) {
    // Taper toward the apex while keeping every label present per slice.
    const scale = slices > 1 ? 1 - 0.25 * (k / (slices - 1)) : 1;
    const rOutK = geo.rOut * scale;
    const rInK = Math.max(1.4, rIn * scale);
    const rvAK = geo.rvA * scale;
    const rvBK = geo.rvB * scale;
    for (let j = 0; j < size; j++) {
      for (let i = 0; i < size; i++) {
        const idx = i + size * (j + size * k);
        const dx = i - geo.cx;
        const dy = j - geo.cy;
        const r = Math.sqrt(dx * dx + dy * dy);
        const bx = (i - size / 2) / geo.bodyA;
        const by = (j - size / 2) / geo.bodyB;
        // Rotate into the second-pool ellipse frame.
        const ux = (i - rvCx) * cosT + (j - rvCy) * sinT;
        const uy = -(i - rvCx) * sinT + (j - rvCy) * cosT;
        const inRv = (ux / rvAK) ** 2 + (uy / rvBK) ** 2 <= 1;

        let lab = 0;
        let base: number;
        if (r <= rInK) {
          lab = 1;
          base = 0.9;
        } else if (r <= rOutK) {
          lab = 2;
          base = 0.45;
        } else if (inRv) {
          lab = 3;
          base = 0.85;
        } else if (bx * bx + by * by <= 1) {
          base = 0.25;
        } else {
          base = 0.05;
        }
        label[idx] = lab;
        const noisy = base * gain + offset + noiseSigma * gaussian(noiseRng);
        image[idx] = Math.max(0, noisy);
      }
    }
  }
  return { image, label };
}

export function makePhantoms(outDir: string, spec: PhantomSpec = {}): PhantomCase[] {
  const size = spec.size ?? 32;
  const slices = spec.slices ?? 6;
  const subjects = spec.subjects ?? 8;
  const intensities = spec.intensities ?? [1, 2];
  const seed = spec.seed ?? 0;
  const noiseSigma = spec.noiseSigma ?? 0.02;

  if (!Number.isInteger(size) || size < MIN_PHANTOM_SIZE) {
    throw new PhantomError(
      `phantom size ${size} is too small: the nested structures need at least ` +
        `${MIN_PHANTOM_SIZE} voxels per side`,
    );
  }
  if (slices < 1 || subjects < 1 || intensities.length < 1) {
    throw new PhantomError("slices, subjects, and intensities must all be >= 1");
  }

  mkdirSync(outDir, { recursive: true });
  const affine = [
    [1.0, 0, 0, -size / 2],
    [0, 1.0, 0, -size / 2],
    [0, 0, 8.0, 0],
    [0, 0, 0, 1],
  ];

  const cases: PhantomCase[] = [];
  for (let s = 1; s <= subjects; s++) {
    const geo = subjectGeometry(size, mulberry32(combineSeed(seed, s)));
    for (const v of intensities) {
      const gain = 0.75 + 0.12 * v;
      const offset = 0.015 * v;
      for (const phase of ["ED", "ES"] as const) {
        const subject = `P${String(s).padStart(3, "0")}`;
        const caseId = `${subject}-${v}-${phase}`;
        const noiseRng = mulberry32(combineSeed(seed, s, v, phase === "ED" ? 1 : 2));
        const { image, label } = rasterize(
          size,
          slices,
          geo,
          phase,
          gain,
          offset,
          noiseSigma,
          noiseRng,
        );
        const dims: [number, number, number] = [size, size, slices];
        const imagePath = join(outDir, `${caseId}.nii.gz`);
        const labelPath = join(outDir, `${caseId}-label.nii.gz`);
        const imgVol: Volume = { dims, data: image, affine };
        const labVol: Volume = { dims, data: label, affine };
        writeNifti(imagePath, imgVol, "float32");
        writeNifti(labelPath, labVol, "uint8");
        cases.push({ caseId, subject, intensity: v, phase, imagePath, labelPath });
      }
    }
  }

  writeFileSync(
    join(outDir, "cohort.json"),
    JSON.stringify(
      { size, slices, subjects, intensities, seed, cases: cases.map((c) => c.caseId) },
      null,
      2,
    ) + "\n",
  );
  return cases;
}

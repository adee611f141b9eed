/**
 * Directional augmentation ablation.
 *
 * Two training arms run from one master seed and identical weight init:
 * WITHOUT trains on clean preprocessed phantom slices only; WITH adds
 * artifact-augmented copies produced by the preprocessing CLI's weighted
 * one-of policy. Both arms are validated and evaluated on the *same*
 * artifact-corrupted validation volumes (same artifact severity config,
 * held-out augmentation seed), so the comparison isolates the value of
 * training-time augmentation under acquisition artifacts. Metrics come from the external `evaluate`
 * command, and the result is a paired per-structure DICE / Hausdorff-95
 * table plus the mean-Dice gain of the WITH arm.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { readdirSync } from "node:fs";
import { join } from "node:path";
import { cmrpipe } from "./cmrpipe.js";
import { concatDatasets, loadSliceDataset, subjectOfKey, type SliceDataset } from "./data.js";
import { buildModel, type SegModel } from "./model.js";
import { predictToFile } from "./predict.js";
import { trainModel, type TrainResult } from "./train.js";
import { makePhantoms } from "./phantom.js";

export class AblationError extends Error {}

export interface AblationOptions {
  workDir: string;
  seed?: number;
  subjects?: number;
  size?: number;
  slices?: number;
  intensities?: number[];
  epochs?: number;
  stepsPerEpoch?: number;
  batchSize?: number;
  /** Scratch U-Net widths; capped by default to keep CPU runtime low. */
  growth?: number[];
  /** Augmented copies of the training set for the WITH arm. */
  augCopies?: number;
  /** Fail unless (WITH - WITHOUT) mean Dice reaches this; null = report only. */
  assertMargin?: number | null;
  logEvery?: number;
}

export interface StructureTable {
  [structure: string]: number | null;
}

export interface ArmResult {
  name: string;
  meanDiceAll: number;
  meanDice: StructureTable;
  meanHd95: StructureTable;
  hd95Undefined: Record<string, number>;
  nCases: number;
  bestValLoss: number;
  bestEpoch: number;
  evalDir: string;
}

export interface AblationResult {
  options: Required<Omit<AblationOptions, "assertMargin" | "stepsPerEpoch">> & {
    assertMargin: number | null;
    stepsPerEpoch: number;
  };
  trainSubjects: string[];
  valSubjects: string[];
  withAug: ArmResult;
  withoutAug: ArmResult;
  diceGain: number;
  table: string;
  runtimeSeconds: number;
}

interface SummaryJson {
  n_cases: number;
  mean_dice: Record<string, number>;
  mean_hd95: Record<string, number | null>;
  hd95_undefined: Record<string, number>;
  mean_dice_all: number;
}

function listImages(dir: string, subjects: Set<string>): string[] {
  return readdirSync(dir)
    .filter((f) => (f.endsWith(".nii") || f.endsWith(".nii.gz")) && !/-label\.nii(\.gz)?$/.test(f))
    .filter((f) => subjects.has(subjectOfKey(f)))
    .sort()
    .map((f) => join(dir, f));
}

function runArm(
  name: string,
  workDir: string,
  trainSet: SliceDataset,
  valSet: SliceDataset,
  valImagePaths: string[],
  modelSeed: number,
  growth: number[],
  cfg: {
    epochs: number;
    stepsPerEpoch: number;
    batchSize: number;
    seed: number;
    logEvery: number;
  },
): { arm: ArmResult; trainResult: TrainResult } {
  const model: SegModel = buildModel({ variant: "scratch", growth, seed: modelSeed });
  let trainResult: TrainResult;
  try {
    trainResult = trainModel(model, trainSet, valSet, {
      epochs: cfg.epochs,
      stepsPerEpoch: cfg.stepsPerEpoch,
      batchSize: cfg.batchSize,
      seed: cfg.seed,
      logEvery: cfg.logEvery,
    });
    const predDir = join(workDir, `preds_${name}`);
    mkdirSync(predDir, { recursive: true });
    for (const imagePath of valImagePaths) {
      predictToFile(model, imagePath, predDir);
    }
    const evalDir = join(workDir, `eval_${name}`);
    cmrpipe([
      "evaluate",
      "--pred", predDir,
      "--gt", join(workDir, "pre"),
      "--output", evalDir,
    ]);
    const summary = JSON.parse(
      readFileSync(join(evalDir, "summary.json"), "utf8"),
    ) as SummaryJson;
    return {
      arm: {
        name,
        meanDiceAll: summary.mean_dice_all,
        meanDice: summary.mean_dice,
        meanHd95: summary.mean_hd95,
        hd95Undefined: summary.hd95_undefined,
        nCases: summary.n_cases,
        bestValLoss: trainResult.bestValLoss,
        bestEpoch: trainResult.bestEpoch,
        evalDir,
      },
      trainResult,
    };
  } finally {
    model.dispose();
  }
}

function formatTable(withAug: ArmResult, withoutAug: ArmResult): string {
  const names = Object.keys(withoutAug.meanDice);
  const diceWidth = 8 * (names.length + 1); // per-structure + mean
  const hdWidth = 8 * names.length;
  const center = (s: string, w: number) => {
    const left = Math.floor((w - s.length) / 2);
    return s.padStart(s.length + Math.max(0, left)).padEnd(w);
  };
  const cell = (s: string) => s.padStart(8);
  const label = (s: string) => s.padEnd(24);
  const lines: string[] = [];
  lines.push(`${label("")}  ${center("DICE", diceWidth)}  ${center("Hausdorff 95 (mm)", hdWidth)}`);
  lines.push(
    `${label("")}  ` +
      names.map((n) => cell(n)).join("") +
      cell("mean") +
      "  " +
      names.map((n) => cell(n)).join(""),
  );
  for (const arm of [withoutAug, withAug]) {
    const dice = names.map((n) => cell((arm.meanDice[n] ?? 0).toFixed(3))).join("");
    const mean = cell(arm.meanDiceAll.toFixed(3));
    const hd = names
      .map((n) => {
        const v = arm.meanHd95[n];
        return cell(v == null ? "n/a" : v.toFixed(2));
      })
      .join("");
    lines.push(`${label(arm.name)}  ${dice}${mean}  ${hd}`);
  }
  return lines.join("\n");
}

export function runAblation(opts: AblationOptions): AblationResult {
  const started = Date.now();
  const workDir = opts.workDir;
  const seed = opts.seed ?? 0;
  const subjects = opts.subjects ?? 10;
  const size = opts.size ?? 32;
  const slices = opts.slices ?? 6;
  const intensities = opts.intensities ?? [1, 2];
  const epochs = opts.epochs ?? 10;
  const batchSize = opts.batchSize ?? 8;
  const growth = opts.growth ?? [32, 64, 128, 128, 128];
  const augCopies = opts.augCopies ?? 2;
  const assertMargin = opts.assertMargin ?? null;
  const logEvery = opts.logEvery ?? 0;

  mkdirSync(workDir, { recursive: true });
  const rawDir = join(workDir, "raw");
  const preDir = join(workDir, "pre");

  // 1. Phantom cohort on disk.
  makePhantoms(rawDir, { subjects, size, slices, intensities, seed });

  // 2. External pipeline: manifest -> split -> landmarks -> preprocess.
  const manifestPath = join(workDir, "manifest.json");
  cmrpipe(["build-manifest", "--data-root", rawDir, "--output", manifestPath]);

  const splitPath = join(workDir, "split.json");
  cmrpipe([
    "split",
    "--manifest", manifestPath,
    "--output", splitPath,
    "--fraction", "0.2",
    "--seed", String(seed),
  ]);
  const split = JSON.parse(readFileSync(splitPath, "utf8")) as {
    train: string[];
    val: string[];
  };

  const preConfigPath = join(workDir, "pre_config.json");
  writeFileSync(
    preConfigPath,
    JSON.stringify(
      { preprocess: { spacing_inplane: 1.0, crop: [size, size] } },
      null,
      2,
    ) + "\n",
  );
  const landmarksPath = join(workDir, "landmarks.json");
  cmrpipe([
    "fit-histogram",
    "--manifest", manifestPath,
    "--output", landmarksPath,
    "--split", splitPath,
    "--subset", "train",
    "--config", preConfigPath,
  ]);
  cmrpipe([
    "preprocess",
    "--manifest", manifestPath,
    "--output", preDir,
    "--landmarks", landmarksPath,
    "--config", preConfigPath,
    "--seed", String(seed),
  ]);

  // 3. Augmented training copies and corrupted validation volumes, all
  //    via the external augment command (weighted one-of artifact policy).
  //    One severity config drives both, so the WITH arm trains on the same
  //    artifact distribution the validation set is corrupted with (under
  //    different seeds) while the WITHOUT arm never sees it. Severities are
  //    raised above the defaults: at phantom scale the default artifacts
  //    are mild enough that even an artifact-naive model shrugs them off.
  const augConfigPath = join(workDir, "aug_config.json");
  writeFileSync(
    augConfigPath,
    JSON.stringify(
      {
        augment: {
          motion: { num_transforms: 4, degrees: 25.0, translation: 12.0 },
          ghosting: { num_ghosts: [2, 5], intensity: [0.8, 1.0] },
          bias: { order: 3, coefficient_range: 1.1 },
          gamma: { log_gamma_range: 0.9 },
        },
      },
      null,
      2,
    ) + "\n",
  );
  const preManifestPath = join(workDir, "pre_manifest.json");
  cmrpipe(["build-manifest", "--data-root", preDir, "--output", preManifestPath]);
  const augDirs: string[] = [];
  for (let c = 1; c <= augCopies; c++) {
    const dir = join(workDir, `aug${c}`);
    cmrpipe([
      "augment",
      "--manifest", preManifestPath,
      "--output", dir,
      "--seed", String(seed * 1000 + c),
      "--config", augConfigPath,
    ]);
    augDirs.push(dir);
  }
  const valCorruptDir = join(workDir, "valcorrupt");
  cmrpipe([
    "augment",
    "--manifest", preManifestPath,
    "--output", valCorruptDir,
    "--seed", String(seed * 1000 + 777),
    "--config", augConfigPath,
  ]);

  // 4. Slice datasets (labels always come from the preprocessed tree).
  const trainClean = loadSliceDataset({
    imageDirs: [preDir],
    labelDir: preDir,
    subjects: split.train,
  });
  const trainWith = concatDatasets(
    trainClean,
    ...augDirs.map((dir) =>
      loadSliceDataset({ imageDirs: [dir], labelDir: preDir, subjects: split.train }),
    ),
  );
  const valCorrupt = loadSliceDataset({
    imageDirs: [valCorruptDir],
    labelDir: preDir,
    subjects: split.val,
  });
  const valSubjectSet = new Set(split.val);
  const valImagePaths = listImages(valCorruptDir, valSubjectSet);

  // Both arms take the same number of optimizer steps; the WITH arm's
  // advantage is data diversity, not extra compute.
  const stepsPerEpoch = opts.stepsPerEpoch ?? Math.ceil(trainClean.slices.length / batchSize);
  const armCfg = { epochs, stepsPerEpoch, batchSize, seed, logEvery };

  const withoutRun = runArm(
    "without_aug", workDir, trainClean, valCorrupt, valImagePaths, seed, growth, armCfg,
  );
  const withRun = runArm(
    "with_aug", workDir, trainWith, valCorrupt, valImagePaths, seed, growth, armCfg,
  );

  const diceGain = withRun.arm.meanDiceAll - withoutRun.arm.meanDiceAll;
  const namedWithout = { ...withoutRun.arm, name: "U-Net (scratch)" };
  const namedWith = { ...withRun.arm, name: "U-Net (scratch) Augs" };
  const table = formatTable(namedWith, namedWithout);

  const result: AblationResult = {
    options: {
      workDir, seed, subjects, size, slices, intensities, epochs,
      stepsPerEpoch, batchSize, growth, augCopies, assertMargin, logEvery,
    },
    trainSubjects: split.train,
    valSubjects: split.val,
    withAug: withRun.arm,
    withoutAug: withoutRun.arm,
    diceGain,
    table,
    runtimeSeconds: (Date.now() - started) / 1000,
  };
  writeFileSync(
    join(workDir, "results.json"),
    JSON.stringify(
      {
        ...result,
        curves: {
          with_aug: withRun.trainResult.logs,
          without_aug: withoutRun.trainResult.logs,
        },
      },
      null,
      2,
    ) + "\n",
  );
  writeFileSync(join(workDir, "table.txt"), table + "\n");

  if (assertMargin != null && !(diceGain >= assertMargin)) {
    throw new AblationError(
      `augmentation gain ${diceGain.toFixed(4)} below required margin ${assertMargin} ` +
        `(WITH ${withRun.arm.meanDiceAll.toFixed(4)} vs WITHOUT ${withoutRun.arm.meanDiceAll.toFixed(4)})`,
    );
  }
  return result;
}

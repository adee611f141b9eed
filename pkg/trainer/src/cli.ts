#!/usr/bin/env node
/**
 * cmr-trainer: phantom generation, training, prediction, and the
 * augmentation ablation, all on top of the preprocessing CLI's outputs.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { readdirSync } from "node:fs";
import { join } from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { initBackend } from "./backend.js";
import { makePhantoms } from "./phantom.js";
import { buildModel, saveWeights, loadWeights, type Variant } from "./model.js";
import { loadSliceDataset, subjectOfKey } from "./data.js";
import { trainModel } from "./train.js";
import { predictToFile } from "./predict.js";
import { runAblation } from "./ablation.js";

function parseIntList(s: string): number[] {
  return s.split(",").map((x) => {
    const v = Number.parseInt(x.trim(), 10);
    if (!Number.isFinite(v)) throw new Error(`bad integer list entry '${x}'`);
    return v;
  });
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .scriptName("cmr-trainer")
    .command(
      "make-phantoms",
      "Write a synthetic phantom cohort (images + labels)",
      (y) =>
        y
          .option("out", { type: "string", demandOption: true })
          .option("subjects", { type: "number", default: 8 })
          .option("size", { type: "number", default: 32 })
          .option("slices", { type: "number", default: 6 })
          .option("intensities", { type: "string", default: "1,2" })
          .option("seed", { type: "number", default: 0 }),
      (argv) => {
        const cases = makePhantoms(argv.out, {
          subjects: argv.subjects,
          size: argv.size,
          slices: argv.slices,
          intensities: parseIntList(argv.intensities),
          seed: argv.seed,
        });
        console.log(`wrote ${cases.length} cases -> ${argv.out}`);
      },
    )
    .command(
      "train",
      "Train a segmentation model on preprocessed slices",
      (y) =>
        y
          .option("images", { type: "string", array: true, demandOption: true,
            describe: "Training image dirs (clean first, augmented copies after)" })
          .option("labels", { type: "string", demandOption: true })
          .option("val-images", { type: "string", array: true, demandOption: true })
          .option("split", { type: "string", demandOption: true,
            describe: "Subject split JSON from the preprocessing CLI" })
          .option("variant", { type: "string", choices: ["scratch", "pretrained"], default: "scratch" })
          .option("growth", { type: "string", describe: "Scratch widths, e.g. 32,64,128,256,512" })
          .option("weights-in", { type: "string", describe: "Pretrained encoder weights file" })
          .option("epochs", { type: "number", default: 10 })
          .option("steps", { type: "number" })
          .option("batch", { type: "number", default: 8 })
          .option("base-lr", { type: "number", default: 1e-3 })
          .option("encoder-lr", { type: "number", default: 1e-4 })
          .option("patience", { type: "number", default: 100 })
          .option("factor", { type: "number", default: 0.5 })
          .option("seed", { type: "number", default: 0 })
          .option("log-every", { type: "number", default: 1 })
          .option("out", { type: "string", demandOption: true, describe: "Weights output file" })
          .option("curves", { type: "string", describe: "Optional metric-curves JSON output" }),
      async (argv) => {
        const backend = await initBackend();
        console.log(`backend: ${backend}`);
        const split = JSON.parse(readFileSync(argv.split, "utf8")) as {
          train: string[];
          val: string[];
        };
        const train = loadSliceDataset({
          imageDirs: argv.images,
          labelDir: argv.labels,
          subjects: split.train,
        });
        const val = loadSliceDataset({
          imageDirs: argv["val-images"],
          labelDir: argv.labels,
          subjects: split.val,
        });
        const model = buildModel({
          variant: argv.variant as Variant,
          growth: argv.growth ? parseIntList(argv.growth) : undefined,
          weightsPath: argv["weights-in"],
          seed: argv.seed,
        });
        const result = trainModel(model, train, val, {
          epochs: argv.epochs,
          stepsPerEpoch: argv.steps,
          batchSize: argv.batch,
          baseLr: argv["base-lr"],
          encoderLr: argv["encoder-lr"],
          patience: argv.patience,
          factor: argv.factor,
          seed: argv.seed,
          logEvery: argv["log-every"],
        });
        saveWeights(model.variables, argv.out);
        if (argv.curves) {
          writeFileSync(argv.curves, JSON.stringify(result.logs, null, 2) + "\n");
        }
        console.log(
          `best val loss ${result.bestValLoss.toFixed(4)} at epoch ${result.bestEpoch}; ` +
            `weights -> ${argv.out}`,
        );
        model.dispose();
      },
    )
    .command(
      "predict",
      "Segment every image volume in a directory",
      (y) =>
        y
          .option("weights", { type: "string", demandOption: true })
          .option("variant", { type: "string", choices: ["scratch", "pretrained"], default: "scratch" })
          .option("growth", { type: "string" })
          .option("images", { type: "string", demandOption: true })
          .option("subjects", { type: "string", describe: "Comma-separated subject filter" })
          .option("out", { type: "string", demandOption: true }),
      async (argv) => {
        await initBackend();
        const model = buildModel({
          variant: argv.variant as Variant,
          growth: argv.growth ? parseIntList(argv.growth) : undefined,
        });
        loadWeights(model.variables, argv.weights, { strict: true });
        mkdirSync(argv.out, { recursive: true });
        const wanted = argv.subjects ? new Set(argv.subjects.split(",")) : null;
        const files = readdirSync(argv.images)
          .filter((f) => (f.endsWith(".nii") || f.endsWith(".nii.gz")) && !/-label\.nii(\.gz)?$/.test(f))
          .filter((f) => !wanted || wanted.has(subjectOfKey(f)))
          .sort();
        for (const f of files) {
          const out = predictToFile(model, join(argv.images, f), argv.out);
          console.log(out);
        }
        model.dispose();
      },
    )
    .command(
      "ablation",
      "Run the paired with/without-augmentation experiment end to end",
      (y) =>
        y
          .option("work", { type: "string", demandOption: true })
          .option("seed", { type: "number", default: 0 })
          .option("subjects", { type: "number", default: 10 })
          .option("size", { type: "number", default: 32 })
          .option("slices", { type: "number", default: 6 })
          .option("epochs", { type: "number", default: 10 })
          .option("steps", { type: "number" })
          .option("batch", { type: "number", default: 8 })
          .option("growth", { type: "string", default: "32,64,128,128,128" })
          .option("aug-copies", { type: "number", default: 2 })
          .option("assert-margin", { type: "number",
            describe: "Fail unless the Dice gain reaches this (e.g. 0.02)" })
          .option("log-every", { type: "number", default: 1 }),
      async (argv) => {
        const backend = await initBackend();
        console.log(`backend: ${backend}`);
        const result = runAblation({
          workDir: argv.work,
          seed: argv.seed,
          subjects: argv.subjects,
          size: argv.size,
          slices: argv.slices,
          epochs: argv.epochs,
          stepsPerEpoch: argv.steps,
          batchSize: argv.batch,
          growth: parseIntList(argv.growth),
          augCopies: argv["aug-copies"],
          assertMargin: argv["assert-margin"] ?? null,
          logEvery: argv["log-every"],
        });
        console.log(result.table);
        console.log(
          `\nmean Dice gain from augmentation: ${result.diceGain >= 0 ? "+" : ""}${result.diceGain.toFixed(4)} ` +
            `(${result.runtimeSeconds.toFixed(0)}s)`,
        );
      },
    )
    .demandCommand(1)
    .strict()
    .help()
    .parseAsync();
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : err);
  process.exit(1);
});

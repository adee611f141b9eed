/**
 * Training loop: mini-batch Adam on CE + soft Dice, per-epoch validation
 * loss and Dice, reduce-on-plateau learning rates, best-checkpoint
 * tracking, and a hard abort on non-finite loss.
 */

import { tf } from "./backend.js";
import { segLoss, diceFromLabels } from "./loss.js";
import { GroupedAdam } from "./optim.js";
import { ReduceLROnPlateau } from "./scheduler.js";
import { makeOptimizer, snapshotWeights, restoreWeights, type SegModel } from "./model.js";
import { DataError, type SliceDataset, type SliceSample } from "./data.js";
import { mulberry32, shuffle } from "./rng.js";

export class TrainAbortError extends Error {}

export interface TrainConfig {
  epochs: number;
  /** Optimizer steps per epoch; defaults to ceil(trainSlices / batchSize). */
  stepsPerEpoch?: number;
  batchSize?: number;
  baseLr?: number;
  encoderLr?: number;
  patience?: number;
  factor?: number;
  minDelta?: number;
  seed?: number;
  /** Print one line every N epochs (0 = silent). */
  logEvery?: number;
  /** Reload the best-validation-loss weights after training (default true). */
  restoreBest?: boolean;
}

export interface EpochLog {
  epoch: number;
  trainLoss: number;
  valLoss: number;
  valDice: number;
  learningRates: Record<string, number>;
  reduced: boolean;
}

export interface TrainResult {
  logs: EpochLog[];
  bestEpoch: number;
  bestValLoss: number;
  finalValDice: number;
}

function batchTensors(
  slices: SliceSample[],
  indices: number[],
  height: number,
  width: number,
  numClasses: number,
): { x: tf.Tensor4D; y: tf.Tensor4D } {
  const b = indices.length;
  const plane = height * width;
  const xBuf = new Float32Array(b * plane);
  const yBuf = new Int32Array(b * plane);
  for (let n = 0; n < b; n++) {
    const s = slices[indices[n]];
    xBuf.set(s.image, n * plane);
    yBuf.set(s.labels, n * plane);
  }
  return tf.tidy(() => {
    const x = tf.tensor4d(xBuf, [b, height, width, 1]);
    const yIdx = tf.tensor3d(yBuf, [b, height, width], "int32");
    const y = tf.cast(tf.oneHot(yIdx, numClasses), "float32") as tf.Tensor4D;
    return { x, y };
  });
}

/** Validation pass: mean loss plus hard Dice over all validation voxels. */
export function evaluateOnDataset(
  model: SegModel,
  ds: SliceDataset,
  batchSize: number,
): { loss: number; dice: number } {
  let lossSum = 0;
  let count = 0;
  const predAll = new Int32Array(ds.slices.length * ds.height * ds.width);
  const gtAll = new Int32Array(ds.slices.length * ds.height * ds.width);
  const plane = ds.height * ds.width;
  for (let at = 0; at < ds.slices.length; at += batchSize) {
    const idx = [];
    for (let i = at; i < Math.min(at + batchSize, ds.slices.length); i++) idx.push(i);
    const { x, y } = batchTensors(ds.slices, idx, ds.height, ds.width, ds.numClasses);
    const { lossVal, preds } = tf.tidy(() => {
      const logits = model.forward(x, false);
      const lossVal = segLoss(logits, y).dataSync()[0];
      const preds = tf.argMax(logits, 3).dataSync() as Int32Array;
      return { lossVal, preds };
    });
    x.dispose();
    y.dispose();
    lossSum += lossVal * idx.length;
    count += idx.length;
    predAll.set(preds, at * plane);
    for (let i = 0; i < idx.length; i++) {
      gtAll.set(ds.slices[idx[i]].labels, (at + i) * plane);
    }
  }
  const classes = [];
  for (let c = 1; c < ds.numClasses; c++) classes.push(c);
  return {
    loss: lossSum / Math.max(count, 1),
    dice: diceFromLabels(predAll, gtAll, classes),
  };
}

export function trainModel(
  model: SegModel,
  train: SliceDataset,
  val: SliceDataset,
  cfg: TrainConfig,
  optimizer?: GroupedAdam,
): TrainResult {
  if (train.slices.length === 0) throw new DataError("training split is empty");
  if (val.slices.length === 0) throw new DataError("validation split is empty");
  if (train.height !== val.height || train.width !== val.width) {
    throw new DataError("train and validation slice shapes differ");
  }

  const batchSize = cfg.batchSize ?? 8;
  const stepsPerEpoch = cfg.stepsPerEpoch ?? Math.ceil(train.slices.length / batchSize);
  const seed = cfg.seed ?? 0;
  const logEvery = cfg.logEvery ?? 0;
  const opt =
    optimizer ?? makeOptimizer(model, { baseLr: cfg.baseLr, encoderLr: cfg.encoderLr });
  const ownsOptimizer = optimizer == null;
  const scheduler = new ReduceLROnPlateau((factor) => opt.scale(factor), {
    patience: cfg.patience ?? 100,
    factor: cfg.factor ?? 0.5,
    minDelta: cfg.minDelta ?? 0,
  });

  const logs: EpochLog[] = [];
  let bestValLoss = Number.POSITIVE_INFINITY;
  let bestEpoch = -1;
  let bestSnapshot: Map<string, Float32Array> | null = null;
  let order: number[] = [];
  let cursor = 0;

  try {
    for (let epoch = 0; epoch < cfg.epochs; epoch++) {
      const epochRng = mulberry32((seed + 0x1000 * (epoch + 1)) >>> 0);
      let lossSum = 0;
      for (let step = 0; step < stepsPerEpoch; step++) {
        const idx: number[] = [];
        while (idx.length < Math.min(batchSize, train.slices.length)) {
          if (cursor >= order.length) {
            order = shuffle([...train.slices.keys()], epochRng);
            cursor = 0;
          }
          idx.push(order[cursor]);
          cursor += 1;
        }
        const { x, y } = batchTensors(train.slices, idx, train.height, train.width, train.numClasses);
        const { value, grads } = tf.variableGrads(
          () => segLoss(model.forward(x, true), y),
          model.variables,
        );
        opt.applyGradients(grads);
        const lossVal = value.dataSync()[0];
        value.dispose();
        for (const g of Object.values(grads)) g.dispose();
        x.dispose();
        y.dispose();
        if (!Number.isFinite(lossVal)) {
          throw new TrainAbortError(
            `non-finite training loss ${lossVal} at epoch ${epoch}, step ${step} ` +
              `(learning rates: ${JSON.stringify(learningRates(opt))})`,
          );
        }
        lossSum += lossVal;
      }

      const { loss: valLoss, dice: valDice } = evaluateOnDataset(model, val, batchSize);
      if (!Number.isFinite(valLoss)) {
        throw new TrainAbortError(`non-finite validation loss at epoch ${epoch}`);
      }
      if (valLoss < bestValLoss) {
        bestValLoss = valLoss;
        bestEpoch = epoch;
        bestSnapshot = snapshotWeights(model.variables);
      }
      const reduced = scheduler.update(valLoss);
      const log: EpochLog = {
        epoch,
        trainLoss: lossSum / stepsPerEpoch,
        valLoss,
        valDice,
        learningRates: learningRates(opt),
        reduced,
      };
      logs.push(log);
      if (logEvery > 0 && (epoch % logEvery === 0 || epoch === cfg.epochs - 1)) {
        console.log(
          `epoch ${String(epoch).padStart(3)}  train ${log.trainLoss.toFixed(4)}  ` +
            `val ${valLoss.toFixed(4)}  dice ${valDice.toFixed(4)}` +
            (reduced ? "  [lr reduced]" : ""),
        );
      }
    }

    if ((cfg.restoreBest ?? true) && bestSnapshot) {
      restoreWeights(model.variables, bestSnapshot);
    }
    const finalValDice = logs.length ? logs[bestEpoch >= 0 ? bestEpoch : logs.length - 1].valDice : 0;
    return { logs, bestEpoch, bestValLoss, finalValDice };
  } finally {
    if (ownsOptimizer) opt.dispose();
  }
}

function learningRates(opt: GroupedAdam): Record<string, number> {
  const out: Record<string, number> = {};
  for (const g of opt.groups) out[g.name] = g.learningRate;
  return out;
}

/**
 * Segmentation loss: cross-entropy plus soft Dice over foreground classes.
 */

import { tf } from "./backend.js";

const EPS = 1e-5;

/** Cross-entropy from raw logits against one-hot targets. */
export function crossEntropy(logits: tf.Tensor4D, oneHot: tf.Tensor4D): tf.Scalar {
  return tf.tidy(() => {
    const logZ = tf.logSumExp(logits, -1, true);
    const logSoftmax = tf.sub(logits, logZ);
    const perVoxel = tf.neg(tf.sum(tf.mul(oneHot, logSoftmax), -1));
    return tf.mean(perVoxel) as tf.Scalar;
  });
}

/** 1 - mean soft Dice over classes 1..C-1 (background excluded). */
export function softDiceLoss(logits: tf.Tensor4D, oneHot: tf.Tensor4D): tf.Scalar {
  return tf.tidy(() => {
    const probs = tf.softmax(logits, -1);
    const numClasses = logits.shape[3];
    const fgProbs = tf.slice(probs, [0, 0, 0, 1], [-1, -1, -1, numClasses - 1]);
    const fgTargets = tf.slice(oneHot, [0, 0, 0, 1], [-1, -1, -1, numClasses - 1]);
    const inter = tf.sum(tf.mul(fgProbs, fgTargets), [0, 1, 2]);
    const total = tf.add(tf.sum(fgProbs, [0, 1, 2]), tf.sum(fgTargets, [0, 1, 2]));
    const dice = tf.div(tf.add(tf.mul(inter, 2), EPS), tf.add(total, EPS));
    return tf.sub(1, tf.mean(dice)) as tf.Scalar;
  });
}

/** Combined training loss: CE + soft Dice. */
export function segLoss(logits: tf.Tensor4D, oneHot: tf.Tensor4D): tf.Scalar {
  return tf.tidy(() => tf.add(crossEntropy(logits, oneHot), softDiceLoss(logits, oneHot)) as tf.Scalar);
}

/**
 * Hard Dice between two label arrays, averaged over the given classes.
 * A class absent from both volumes scores 1.0.
 */
export function diceFromLabels(
  pred: ArrayLike<number>,
  gt: ArrayLike<number>,
  classes: number[] = [1, 2, 3],
): number {
  if (pred.length !== gt.length) {
    throw new Error(`label arrays differ in length: ${pred.length} vs ${gt.length}`);
  }
  let sum = 0;
  for (const c of classes) {
    let inter = 0;
    let total = 0;
    for (let i = 0; i < pred.length; i++) {
      const p = pred[i] === c ? 1 : 0;
      const g = gt[i] === c ? 1 : 0;
      inter += p & g;
      total += p + g;
    }
    sum += total === 0 ? 1 : (2 * inter) / total;
  }
  return sum / classes.length;
}

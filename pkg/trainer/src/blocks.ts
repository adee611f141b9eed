/**
 * Shared network building blocks: a seeded parameter store plus the
 * conv / batch-norm / upsample primitives both architectures use.
 *
 * Batch norm uses batch statistics in every phase. There are no moving
 * averages to checkpoint, and prediction stays deterministic because
 * inference always batches whole volumes the same way.
 */

import { tf } from "./backend.js";
import { seedSequence } from "./rng.js";

let instanceCounter = 0;

/** Fresh unique prefix so variable names never collide across models. */
export function freshPrefix(tag: string): string {
  instanceCounter += 1;
  return `${tag}${instanceCounter}`;
}

/** Creates named variables with seeded He initialization and tracks them. */
export class ParamStore {
  readonly vars: tf.Variable[] = [];
  private readonly seeds: { nextSeed: () => number };

  constructor(
    readonly prefix: string,
    seed: number,
  ) {
    this.seeds = seedSequence(seed);
  }

  private register(initial: tf.Tensor, trainable: boolean, name: string): tf.Variable {
    const v = tf.variable(initial, trainable, `${this.prefix}/${name}`);
    initial.dispose();
    this.vars.push(v);
    return v;
  }

  /** He-normal conv kernel [kh, kw, ci, co]. */
  conv(name: string, kh: number, kw: number, ci: number, co: number): tf.Variable {
    const std = Math.sqrt(2 / (kh * kw * ci));
    const init = tf.randomNormal([kh, kw, ci, co], 0, std, "float32", this.seeds.nextSeed());
    return this.register(init, true, name);
  }

  /** Per-channel affine pair for batch norm: gamma (ones), beta (zeros). */
  bnPair(name: string, channels: number): { gamma: tf.Variable; beta: tf.Variable } {
    return {
      gamma: this.register(tf.ones([channels]), true, `${name}/gamma`),
      beta: this.register(tf.zeros([channels]), true, `${name}/beta`),
    };
  }

  bias(name: string, channels: number): tf.Variable {
    return this.register(tf.zeros([channels]), true, name);
  }

  dispose(): void {
    for (const v of this.vars) v.dispose();
    this.vars.length = 0;
  }
}

const BN_EPS = 1e-3;

/** Batch norm over (batch, height, width) with learned scale/shift. */
export function batchNorm(x: tf.Tensor4D, gamma: tf.Tensor, beta: tf.Tensor): tf.Tensor4D {
  const { mean, variance } = tf.moments(x, [0, 1, 2]);
  const inv = tf.mul(tf.rsqrt(tf.add(variance, BN_EPS)), gamma);
  return tf.add(tf.mul(tf.sub(x, mean), inv), beta) as tf.Tensor4D;
}

export interface ConvBnParams {
  w: tf.Variable;
  gamma: tf.Variable;
  beta: tf.Variable;
}

/** conv (no bias) -> batch norm -> optional ReLU. */
export function convBn(
  x: tf.Tensor4D,
  p: ConvBnParams,
  stride: number,
  relu = true,
): tf.Tensor4D {
  const y = tf.conv2d(x, p.w as unknown as tf.Tensor4D, stride, "same");
  const n = batchNorm(y, p.gamma, p.beta);
  return relu ? (tf.relu(n) as tf.Tensor4D) : n;
}

/** Allocate a conv+bn parameter set. */
export function makeConvBn(
  store: ParamStore,
  name: string,
  k: number,
  ci: number,
  co: number,
): ConvBnParams {
  const { gamma, beta } = store.bnPair(`${name}/bn`, co);
  return { w: store.conv(`${name}/w`, k, k, ci, co), gamma, beta };
}

/** Two 3x3 conv+BN+ReLU layers (one U-Net "pair"). */
export interface ConvPairParams {
  a: ConvBnParams;
  b: ConvBnParams;
}

export function makeConvPair(
  store: ParamStore,
  name: string,
  ci: number,
  co: number,
): ConvPairParams {
  return {
    a: makeConvBn(store, `${name}/0`, 3, ci, co),
    b: makeConvBn(store, `${name}/1`, 3, co, co),
  };
}

export function convPair(x: tf.Tensor4D, p: ConvPairParams): tf.Tensor4D {
  return convBn(convBn(x, p.a, 1), p.b, 1);
}

/** 2x nearest-neighbor upsample. */
export function upsample2(x: tf.Tensor4D): tf.Tensor4D {
  const [, h, w] = x.shape;
  return tf.image.resizeNearestNeighbor(x, [h * 2, w * 2]);
}

export class ShapeError extends Error {}

/** Reject inputs the pooling ladder cannot halve cleanly. */
export function assertDivisible(h: number, w: number, divisor: number): void {
  if (h % divisor === 0 && w % divisor === 0) return;
  const ph = Math.ceil(h / divisor) * divisor;
  const pw = Math.ceil(w / divisor) * divisor;
  throw new ShapeError(
    `input ${h}x${w} is not divisible by ${divisor}; pad to ${ph}x${pw} first`,
  );
}

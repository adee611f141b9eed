/**
 * Scratch U-Net: five pairs of 3x3 conv+BN+ReLU layers on the encoder
 * path, starting at 32 filters, with max-pooling after the first four
 * pairs and a mirrored nearest-neighbor-upsampling decoder with skip
 * connections. A 1x1 head maps to the class logits.
 */

import { tf } from "./backend.js";
import {
  ParamStore,
  assertDivisible,
  convPair,
  freshPrefix,
  makeConvPair,
  upsample2,
  type ConvPairParams,
} from "./blocks.js";

export const DEFAULT_GROWTH = [32, 64, 128, 256, 512];

export interface ScratchUNetOptions {
  /** Filters per encoder pair; the last entry is the bottleneck. */
  growth?: number[];
  numClasses?: number;
  seed?: number;
}

interface Params {
  enc: ConvPairParams[];
  bottleneck: ConvPairParams;
  dec: ConvPairParams[];
  headW: tf.Variable;
  headB: tf.Variable;
}

export interface ScratchUNet {
  readonly growth: number[];
  readonly numClasses: number;
  /** Input sides must be divisible by this (2^pool-count). */
  readonly divisor: number;
  readonly store: ParamStore;
  forward(x: tf.Tensor4D, training?: boolean): tf.Tensor4D;
  dispose(): void;
}

export function buildScratchUNet(opts: ScratchUNetOptions = {}): ScratchUNet {
  const growth = opts.growth ?? [...DEFAULT_GROWTH];
  const numClasses = opts.numClasses ?? 4;
  const seed = opts.seed ?? 0;
  if (growth.length < 2 || growth.some((g) => !Number.isInteger(g) || g < 1)) {
    throw new Error(`growth must be >= 2 positive integers, got [${growth}]`);
  }

  const store = new ParamStore(freshPrefix("scratch_unet"), seed);
  const levels = growth.length - 1; // pooled encoder stages
  const divisor = 2 ** levels;

  const enc: ConvPairParams[] = [];
  let ci = 1;
  for (let i = 0; i < levels; i++) {
    enc.push(makeConvPair(store, `enc${i}`, ci, growth[i]));
    ci = growth[i];
  }
  const bottleneck = makeConvPair(store, "bottleneck", ci, growth[levels]);
  const dec: ConvPairParams[] = [];
  ci = growth[levels];
  for (let i = levels - 1; i >= 0; i--) {
    dec.push(makeConvPair(store, `dec${i}`, ci + growth[i], growth[i]));
    ci = growth[i];
  }
  const params: Params = {
    enc,
    bottleneck,
    dec,
    headW: store.conv("head/w", 1, 1, growth[0], numClasses),
    headB: store.bias("head/b", numClasses),
  };

  const forward = (x: tf.Tensor4D): tf.Tensor4D => {
    const [, h, w] = x.shape;
    assertDivisible(h, w, divisor);
    const skips: tf.Tensor4D[] = [];
    let t = x;
    for (let i = 0; i < levels; i++) {
      const s = convPair(t, params.enc[i]);
      skips.push(s);
      t = tf.maxPool(s, 2, 2, "same");
    }
    t = convPair(t, params.bottleneck);
    for (let i = levels - 1; i >= 0; i--) {
      const up = upsample2(t);
      const cat = tf.concat([up, skips[i]], 3) as tf.Tensor4D;
      t = convPair(cat, params.dec[levels - 1 - i]);
    }
    const logits = tf.add(
      tf.conv2d(t, params.headW as unknown as tf.Tensor4D, 1, "same"),
      params.headB,
    );
    return logits as tf.Tensor4D;
  };

  return {
    growth,
    numClasses,
    divisor,
    store,
    forward,
    dispose: () => store.dispose(),
  };
}

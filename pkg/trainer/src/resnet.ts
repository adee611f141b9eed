/**
 * U-Net with a 101-layer residual encoder.
 *
 * Encoder: 7x7/2 stem conv + 3x3/2 max-pool, then four stages of
 * bottleneck blocks (1x1 reduce, 3x3 with the stage stride, 1x1 expand,
 * projection shortcut on the first block of each stage). The default
 * block counts [3, 4, 23, 3] give 1 + 3*(3+4+23+3) = 100 weighted conv
 * layers; with the classification layer the same trunk is the classic
 * 101-layer configuration. Decoder: five nearest-neighbor upsampling
 * blocks with skip connections from the stem and the first three stages.
 *
 * "Pretrained" weights are loaded from a caller-supplied file when
 * available; otherwise the encoder starts from seeded He initialization
 * (no network access is assumed, so no weights are downloaded).
 */

import { tf } from "./backend.js";
import {
  ParamStore,
  assertDivisible,
  convBn,
  convPair,
  freshPrefix,
  makeConvBn,
  makeConvPair,
  upsample2,
  type ConvBnParams,
  type ConvPairParams,
} from "./blocks.js";
import { seedSequence } from "./rng.js";

export const RESNET101_STAGES = [3, 4, 23, 3];
export const DEFAULT_DECODER_CHANNELS = [256, 128, 64, 32, 16];
const STAGE_BASES = [64, 128, 256, 512];
const EXPANSION = 4;

export interface PretrainedUNetOptions {
  /** Bottleneck block count per stage. */
  stages?: number[];
  decoderChannels?: number[];
  numClasses?: number;
  seed?: number;
}

interface BlockParams {
  c1: ConvBnParams;
  c2: ConvBnParams;
  c3: ConvBnParams;
  proj?: ConvBnParams;
}

export interface PretrainedUNet {
  readonly stages: number[];
  readonly numClasses: number;
  readonly divisor: number;
  /** Weighted conv layers in the encoder trunk (stem + 3 per block). */
  readonly encoderConvLayers: number;
  readonly encoderStore: ParamStore;
  readonly decoderStore: ParamStore;
  forward(x: tf.Tensor4D, training?: boolean): tf.Tensor4D;
  dispose(): void;
}

function makeBlock(
  store: ParamStore,
  name: string,
  ci: number,
  base: number,
  withProj: boolean,
): BlockParams {
  const co = base * EXPANSION;
  return {
    c1: makeConvBn(store, `${name}/c1`, 1, ci, base),
    c2: makeConvBn(store, `${name}/c2`, 3, base, base),
    c3: makeConvBn(store, `${name}/c3`, 1, base, co),
    proj: withProj ? makeConvBn(store, `${name}/proj`, 1, ci, co) : undefined,
  };
}

function runBlock(x: tf.Tensor4D, p: BlockParams, stride: number): tf.Tensor4D {
  const shortcut = p.proj ? convBn(x, p.proj, stride, false) : x;
  let y = convBn(x, p.c1, 1);
  y = convBn(y, p.c2, stride);
  y = convBn(y, p.c3, 1, false);
  return tf.relu(tf.add(y, shortcut)) as tf.Tensor4D;
}

export function buildPretrainedUNet(opts: PretrainedUNetOptions = {}): PretrainedUNet {
  const stages = opts.stages ?? [...RESNET101_STAGES];
  const decoderChannels = opts.decoderChannels ?? [...DEFAULT_DECODER_CHANNELS];
  const numClasses = opts.numClasses ?? 4;
  const seed = opts.seed ?? 0;
  if (stages.length !== 4 || stages.some((s) => !Number.isInteger(s) || s < 1)) {
    throw new Error(`stages must be 4 positive integers, got [${stages}]`);
  }
  if (decoderChannels.length !== 5) {
    throw new Error(
      `decoderChannels must have 5 entries (one per upsample from 1/32 scale), got [${decoderChannels}]`,
    );
  }

  const seeds = seedSequence(seed);
  const prefix = freshPrefix("pretrained_unet");
  const encoderStore = new ParamStore(`${prefix}/encoder`, seeds.nextSeed());
  const decoderStore = new ParamStore(`${prefix}/decoder`, seeds.nextSeed());
  const divisor = 32;

  // --- encoder parameters ---
  const stem = makeConvBn(encoderStore, "stem", 7, 1, 64);
  const blocks: BlockParams[][] = [];
  let ci = 64;
  for (let s = 0; s < 4; s++) {
    const stageBlocks: BlockParams[] = [];
    for (let b = 0; b < stages[s]; b++) {
      stageBlocks.push(makeBlock(encoderStore, `stage${s + 1}/block${b}`, ci, STAGE_BASES[s], b === 0));
      ci = STAGE_BASES[s] * EXPANSION;
    }
    blocks.push(stageBlocks);
  }

  // --- decoder parameters ---
  const skipChannels = [
    STAGE_BASES[2] * EXPANSION, // stage3 output, 1/16
    STAGE_BASES[1] * EXPANSION, // stage2 output, 1/8
    STAGE_BASES[0] * EXPANSION, // stage1 output, 1/4
    64, // stem output, 1/2
    0, // full resolution: no skip
  ];
  const dec: ConvPairParams[] = [];
  let di = STAGE_BASES[3] * EXPANSION;
  for (let i = 0; i < 5; i++) {
    dec.push(makeConvPair(decoderStore, `dec${i}`, di + skipChannels[i], decoderChannels[i]));
    di = decoderChannels[i];
  }
  const headW = decoderStore.conv("head/w", 1, 1, di, numClasses);
  const headB = decoderStore.bias("head/b", numClasses);

  const forward = (x: tf.Tensor4D): tf.Tensor4D => {
    const [, h, w] = x.shape;
    assertDivisible(h, w, divisor);
    const f0 = convBn(x, stem, 2); // 1/2, 64
    let t = tf.maxPool(f0, 3, 2, "same"); // 1/4
    const feats: tf.Tensor4D[] = [];
    for (let s = 0; s < 4; s++) {
      const stride = s === 0 ? 1 : 2;
      for (let b = 0; b < blocks[s].length; b++) {
        t = runBlock(t, blocks[s][b], b === 0 ? stride : 1);
      }
      feats.push(t); // 1/4, 1/8, 1/16, 1/32
    }
    const skips: (tf.Tensor4D | null)[] = [feats[2], feats[1], feats[0], f0, null];
    let d = feats[3];
    for (let i = 0; i < 5; i++) {
      const up = upsample2(d);
      const skip = skips[i];
      const cat = skip ? (tf.concat([up, skip], 3) as tf.Tensor4D) : up;
      d = convPair(cat, dec[i]);
    }
    return tf.add(tf.conv2d(d, headW as unknown as tf.Tensor4D, 1, "same"), headB) as tf.Tensor4D;
  };

  return {
    stages,
    numClasses,
    divisor,
    encoderConvLayers: 1 + 3 * stages.reduce((a, b) => a + b, 0),
    encoderStore,
    decoderStore,
    forward,
    dispose: () => {
      encoderStore.dispose();
      decoderStore.dispose();
    },
  };
}

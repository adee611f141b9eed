/**
 * Model facade: one interface over the scratch U-Net and the
 * residual-encoder U-Net, plus optimizer wiring and weight files.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { tf } from "./backend.js";
import { GroupedAdam } from "./optim.js";
import { buildScratchUNet, DEFAULT_GROWTH } from "./unet.js";
import { buildPretrainedUNet, RESNET101_STAGES } from "./resnet.js";

export type Variant = "scratch" | "pretrained";

export interface ModelSpec {
  variant: Variant;
  numClasses?: number;
  /** Scratch variant: filters per encoder pair (first entry 32 by default). */
  growth?: number[];
  /** Pretrained variant: residual blocks per stage. */
  stages?: number[];
  /** Pretrained variant: encoder weights file written by saveWeights. */
  weightsPath?: string;
  seed?: number;
}

export interface ParamGroupSpec {
  name: string;
  vars: tf.Variable[];
}

export interface SegModel {
  readonly spec: ModelSpec;
  readonly variant: Variant;
  readonly numClasses: number;
  readonly divisor: number;
  /** Parameter groups, encoder first for the pretrained variant. */
  readonly paramGroups: ParamGroupSpec[];
  readonly variables: tf.Variable[];
  forward(x: tf.Tensor4D, training?: boolean): tf.Tensor4D;
  dispose(): void;
}

export function buildModel(spec: ModelSpec): SegModel {
  const numClasses = spec.numClasses ?? 4;
  if (spec.variant === "scratch") {
    const net = buildScratchUNet({
      growth: spec.growth ?? [...DEFAULT_GROWTH],
      numClasses,
      seed: spec.seed,
    });
    return {
      spec,
      variant: "scratch",
      numClasses,
      divisor: net.divisor,
      paramGroups: [{ name: "all", vars: net.store.vars }],
      variables: net.store.vars,
      forward: net.forward,
      dispose: net.dispose,
    };
  }
  if (spec.variant === "pretrained") {
    const net = buildPretrainedUNet({
      stages: spec.stages ?? [...RESNET101_STAGES],
      numClasses,
      seed: spec.seed,
    });
    if (spec.weightsPath) {
      loadWeights(net.encoderStore.vars, spec.weightsPath);
    }
    return {
      spec,
      variant: "pretrained",
      numClasses,
      divisor: net.divisor,
      paramGroups: [
        { name: "encoder", vars: net.encoderStore.vars },
        { name: "decoder", vars: net.decoderStore.vars },
      ],
      variables: [...net.encoderStore.vars, ...net.decoderStore.vars],
      forward: net.forward,
      dispose: net.dispose,
    };
  }
  throw new Error(`unknown model variant '${(spec as { variant: string }).variant}'`);
}

export interface OptimizerConfig {
  baseLr?: number;
  encoderLr?: number;
}

/**
 * One Adam group per parameter group: the pretrained encoder fine-tunes
 * at `encoderLr` (default 1e-4) while everything else trains at `baseLr`
 * (default 1e-3); the scratch variant has a single group at `baseLr`.
 */
export function makeOptimizer(model: SegModel, cfg: OptimizerConfig = {}): GroupedAdam {
  const baseLr = cfg.baseLr ?? 1e-3;
  const encoderLr = cfg.encoderLr ?? 1e-4;
  if (model.variant === "pretrained") {
    if (!(encoderLr < baseLr)) {
      throw new Error(
        `encoder LR must be below the base LR when fine-tuning (got ${encoderLr} vs ${baseLr})`,
      );
    }
    const [encoder, decoder] = model.paramGroups;
    return new GroupedAdam([
      { name: encoder.name, vars: encoder.vars, learningRate: encoderLr },
      { name: decoder.name, vars: decoder.vars, learningRate: baseLr },
    ]);
  }
  return new GroupedAdam([
    { name: "all", vars: model.variables, learningRate: baseLr },
  ]);
}

// ---------------------------------------------------------------------------
// weight files: 4-byte little-endian header length, JSON header, float32 data
// ---------------------------------------------------------------------------

interface WeightEntry {
  name: string;
  shape: number[];
  offset: number; // float32 elements into the payload
  length: number;
}

/** Drop the per-instance prefix so weights rebind across model builds. */
function canonicalName(name: string): string {
  return name.replace(/^(scratch_unet|pretrained_unet)\d+\//, "");
}

export function saveWeights(vars: tf.Variable[], path: string): void {
  const entries: WeightEntry[] = [];
  let offset = 0;
  const chunks: Float32Array[] = [];
  for (const v of vars) {
    const data = v.dataSync() as Float32Array;
    entries.push({ name: canonicalName(v.name), shape: v.shape, offset, length: data.length });
    chunks.push(Float32Array.from(data));
    offset += data.length;
  }
  const header = Buffer.from(JSON.stringify({ entries }), "utf8");
  const out = Buffer.alloc(4 + header.length + offset * 4);
  out.writeUInt32LE(header.length, 0);
  header.copy(out, 4);
  const payload = new Float32Array(out.buffer, out.byteOffset + 4 + header.length, offset);
  let at = 0;
  for (const chunk of chunks) {
    payload.set(chunk, at);
    at += chunk.length;
  }
  writeFileSync(path, out);
}

/**
 * Assign matching entries from a weight file into `vars` (matched by
 * canonical name). Returns how many variables were loaded; with
 * `strict`, every variable must be found.
 */
export function loadWeights(
  vars: tf.Variable[],
  path: string,
  opts: { strict?: boolean } = {},
): number {
  const buf = readFileSync(path);
  const headerLen = buf.readUInt32LE(0);
  const { entries } = JSON.parse(buf.toString("utf8", 4, 4 + headerLen)) as {
    entries: WeightEntry[];
  };
  const payloadOffset = 4 + headerLen;
  const byName = new Map(entries.map((e) => [e.name, e]));
  let loaded = 0;
  for (const v of vars) {
    const entry = byName.get(canonicalName(v.name));
    if (!entry) {
      if (opts.strict) throw new Error(`weights file ${path} is missing ${v.name}`);
      continue;
    }
    if (entry.shape.join(",") !== v.shape.join(",")) {
      throw new Error(
        `shape mismatch for ${v.name}: file has [${entry.shape}], variable is [${v.shape}]`,
      );
    }
    const data = new Float32Array(entry.length);
    for (let i = 0; i < entry.length; i++) {
      data[i] = buf.readFloatLE(payloadOffset + (entry.offset + i) * 4);
    }
    const t = tf.tensor(data, v.shape as number[], "float32");
    v.assign(t);
    t.dispose();
    loaded += 1;
  }
  return loaded;
}

/** In-memory snapshot of variable values (for best-checkpoint tracking). */
export function snapshotWeights(vars: tf.Variable[]): Map<string, Float32Array> {
  const snap = new Map<string, Float32Array>();
  for (const v of vars) snap.set(v.name, Float32Array.from(v.dataSync() as Float32Array));
  return snap;
}

export function restoreWeights(vars: tf.Variable[], snap: Map<string, Float32Array>): void {
  for (const v of vars) {
    const data = snap.get(v.name);
    if (!data) throw new Error(`snapshot is missing ${v.name}`);
    const t = tf.tensor(data, v.shape as number[], "float32");
    v.assign(t);
    t.dispose();
  }
}

/**
 * Backend selection and the two convolution-backward kernels the wasm
 * backend does not ship.
 *
 * The wasm backend (XNNPACK) is 5-20x faster than the plain JS backend for
 * forward convolutions and matmuls, but it only covers inference kernels.
 * Training needs Conv2DBackpropInput and Conv2DBackpropFilter, so both are
 * registered here, expressed entirely through fast forward ops:
 *
 *  - dX is a stride-1 forward convolution of the (zero-interleaved) output
 *    gradient with the 180-degree-rotated, channel-swapped filter.
 *  - dW contracts input patches against the output gradient with one matmul
 *    per filter tap, transposing dY once per call (the wasm transposeA
 *    matmul path is an order of magnitude slower than a plain matmul).
 *
 * Both were validated against the reference CPU backend gradients to
 * float32 precision for 1x1/3x3/7x7 kernels at strides 1 and 2.
 */
import * as tf from '@tensorflow/tfjs';
import '@tensorflow/tfjs-backend-wasm';

const toPair = (v: number | [number, number]): [number, number] =>
  Array.isArray(v) ? v : [v, v];

function samePadBegin(inSize: number, k: number, s: number): number {
  const out = Math.ceil(inSize / s);
  return Math.floor(Math.max(0, (out - 1) * s + k - inSize) / 2);
}

/** Insert s-1 zeros between neighbouring elements along height and width. */
function zeroInterleave(dy: tf.Tensor4D, sh: number, sw: number): tf.Tensor4D {
  if (sh === 1 && sw === 1) return dy;
  const [n, oh, ow, c] = dy.shape;
  let z = dy.reshape([n, oh, 1, ow, 1, c]);
  z = tf.pad(z, [[0, 0], [0, 0], [0, sh - 1], [0, 0], [0, sw - 1], [0, 0]]);
  return z
    .reshape([n, oh * sh, ow * sw, c])
    .slice([0, 0, 0, 0], [n, (oh - 1) * sh + 1, (ow - 1) * sw + 1, c]) as tf.Tensor4D;
}

/** Rotate a HWIO filter 180 degrees in-plane and swap its channel axes. */
function rot180Swap(filter: tf.Tensor4D): tf.Tensor4D {
  const [fh, fw, ci, co] = filter.shape;
  const idx: number[] = [];
  for (let i = fh * fw - 1; i >= 0; i--) idx.push(i);
  // gather instead of tf.reverse: the wasm Reverse kernel is element-wise
  // slow on large filters, gather is a row copy
  const flat = tf.gather(filter.reshape([fh * fw, ci, co]), idx, 0);
  return tf.transpose(flat.reshape([fh, fw, ci, co]), [0, 1, 3, 2]) as tf.Tensor4D;
}

function convBackpropInputViaConv(
  dy: tf.Tensor4D,
  filter: tf.Tensor4D,
  inShape: [number, number, number, number],
  strides: number | [number, number],
  pad: 'same' | 'valid' | number,
): tf.Tensor4D {
  return tf.tidy(() => {
    const [sh, sw] = toPair(strides);
    const [fh, fw] = [filter.shape[0], filter.shape[1]];
    const [ih, iw] = [inShape[1], inShape[2]];
    const pB = pad === 'same' ? samePadBegin(ih, fh, sh) : typeof pad === 'number' ? pad : 0;
    const pL = pad === 'same' ? samePadBegin(iw, fw, sw) : typeof pad === 'number' ? pad : 0;
    const spread = zeroInterleave(dy, sh, sw);
    const top = fh - 1 - pB;
    const left = fw - 1 - pL;
    const bottom = ih + fh - 1 - top - spread.shape[1];
    const right = iw + fw - 1 - left - spread.shape[2];
    const padded = tf.pad(spread, [[0, 0], [top, bottom], [left, right], [0, 0]]);
    return tf.conv2d(padded as tf.Tensor4D, rot180Swap(filter), 1, 'valid');
  });
}

function convBackpropFilterViaGemm(
  x: tf.Tensor4D,
  dy: tf.Tensor4D,
  strides: number | [number, number],
  pad: 'same' | 'valid' | number,
  filterShape: [number, number, number, number],
): tf.Tensor4D {
  return tf.tidy(() => {
    const [sh, sw] = toPair(strides);
    const [fh, fw] = [filterShape[0], filterShape[1]];
    const [n, oh, ow, co] = dy.shape;
    const ci = x.shape[3];
    let xp = x;
    if (pad === 'same') {
      const pB = samePadBegin(x.shape[1], fh, sh);
      const pL = samePadBegin(x.shape[2], fw, sw);
      const padH = Math.max(0, (oh - 1) * sh + fh - x.shape[1]);
      const padW = Math.max(0, (ow - 1) * sw + fw - x.shape[2]);
      xp = tf.pad(x, [[0, 0], [pB, padH - pB], [pL, padW - pL], [0, 0]]) as tf.Tensor4D;
    }
    const dyT = tf.transpose(dy.reshape([n * oh * ow, co])); // [co, n*oh*ow]
    const taps: tf.Tensor2D[] = [];
    for (let i = 0; i < fh; i++) {
      for (let j = 0; j < fw; j++) {
        let patch = tf.slice(xp, [0, i, j, 0], [n, (oh - 1) * sh + 1, (ow - 1) * sw + 1, ci]);
        if (sh > 1 || sw > 1) {
          patch = tf.stridedSlice(patch, [0, 0, 0, 0], patch.shape, [1, sh, sw, 1]) as tf.Tensor4D;
        }
        taps.push(tf.matMul(dyT as tf.Tensor2D, patch.reshape([n * oh * ow, ci])));
      }
    }
    return tf.transpose(tf.stack(taps).reshape([fh, fw, co, ci]), [0, 1, 3, 2]) as tf.Tensor4D;
  });
}

const asTensor = (t: tf.TensorInfo): tf.Tensor =>
  (t as tf.Tensor).rank != null ? (t as tf.Tensor) : tf.engine().makeTensorFromTensorInfo(t);

let kernelsRegistered = false;

function registerBackwardConvKernels(): void {
  if (kernelsRegistered) return;
  kernelsRegistered = true;
  tf.registerKernel({
    kernelName: 'Conv2DBackpropFilter',
    backendName: 'wasm',
    kernelFunc: ({ inputs, attrs }) => {
      const a = attrs as unknown as {
        strides: number | [number, number];
        pad: 'same' | 'valid' | number;
        filterShape: [number, number, number, number];
      };
      return convBackpropFilterViaGemm(
        asTensor((inputs as { x: tf.TensorInfo }).x) as tf.Tensor4D,
        asTensor((inputs as { dy: tf.TensorInfo }).dy) as tf.Tensor4D,
        a.strides,
        a.pad,
        a.filterShape,
      );
    },
  });
  // The stock wasm Conv2DBackpropInput is several times slower than the
  // forward-conv formulation below, so replace it outright.
  if (tf.getKernel('Conv2DBackpropInput', 'wasm') != null) {
    tf.unregisterKernel('Conv2DBackpropInput', 'wasm');
  }
  tf.registerKernel({
    kernelName: 'Conv2DBackpropInput',
    backendName: 'wasm',
    kernelFunc: ({ inputs, attrs }) => {
      const a = attrs as unknown as {
        strides: number | [number, number];
        pad: 'same' | 'valid' | number;
        inputShape: [number, number, number, number];
      };
      return convBackpropInputViaConv(
        asTensor((inputs as { dy: tf.TensorInfo }).dy) as tf.Tensor4D,
        asTensor((inputs as { filter: tf.TensorInfo }).filter) as tf.Tensor4D,
        a.inputShape,
        a.strides,
        a.pad,
      );
    },
  });
}

let readyPromise: Promise<string> | null = null;

/**
 * Initialise tfjs on the fastest trainable CPU backend available.
 *
 * Prefers wasm (with the backward kernels above); falls back to the plain
 * JS backend if wasm fails to instantiate. Returns the active backend name.
 */
export function initBackend(): Promise<string> {
  if (readyPromise) return readyPromise;
  readyPromise = (async () => {
    registerBackwardConvKernels();
    try {
      await tf.setBackend('wasm');
      await tf.ready();
      return 'wasm';
    } catch {
      await tf.setBackend('cpu');
      await tf.ready();
      return 'cpu';
    }
  })();
  return readyPromise;
}

export { tf };

/**
 * Minimal NIfTI-1 reader/writer.
 *
 * Supports single-file .nii / .nii.gz volumes, both byte orders on read,
 * and little-endian float32 / uint8 on write. Voxel data is kept in
 * Fortran order (x fastest), matching the on-disk layout, as a
 * Float32Array alongside a 4x4 voxel-to-world affine.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { gzipSync, gunzipSync } from "node:zlib";

export interface Volume {
  /** [nx, ny, nz] */
  dims: [number, number, number];
  /** Fortran-order voxel data, length nx*ny*nz. */
  data: Float32Array;
  /** 4x4 row-major voxel-to-world affine. */
  affine: number[][];
}

const HDR_SIZE = 348;
const VOX_OFFSET = 352;

const DTYPE_CODES: Record<number, { bytes: number; name: string }> = {
  2: { bytes: 1, name: "uint8" },
  4: { bytes: 2, name: "int16" },
  8: { bytes: 4, name: "int32" },
  16: { bytes: 4, name: "float32" },
  64: { bytes: 8, name: "float64" },
  256: { bytes: 1, name: "int8" },
  512: { bytes: 2, name: "uint16" },
  768: { bytes: 4, name: "uint32" },
};

export class NiftiError extends Error {}

function identityAffine(): number[][] {
  return [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, 1],
  ];
}

export function spacingFromAffine(affine: number[][]): [number, number, number] {
  const norms: number[] = [];
  for (let col = 0; col < 3; col++) {
    let s = 0;
    for (let row = 0; row < 3; row++) s += affine[row][col] * affine[row][col];
    norms.push(Math.sqrt(s));
  }
  return [norms[0], norms[1], norms[2]];
}

function castToFloat32(
  buf: Buffer,
  offset: number,
  n: number,
  code: number,
  littleEndian: boolean,
): Float32Array {
  const out = new Float32Array(n);
  const dv = new DataView(buf.buffer, buf.byteOffset + offset);
  const le = littleEndian;
  switch (code) {
    case 2:
      for (let i = 0; i < n; i++) out[i] = dv.getUint8(i);
      break;
    case 256:
      for (let i = 0; i < n; i++) out[i] = dv.getInt8(i);
      break;
    case 4:
      for (let i = 0; i < n; i++) out[i] = dv.getInt16(i * 2, le);
      break;
    case 512:
      for (let i = 0; i < n; i++) out[i] = dv.getUint16(i * 2, le);
      break;
    case 8:
      for (let i = 0; i < n; i++) out[i] = dv.getInt32(i * 4, le);
      break;
    case 768:
      for (let i = 0; i < n; i++) out[i] = dv.getUint32(i * 4, le);
      break;
    case 16:
      for (let i = 0; i < n; i++) out[i] = dv.getFloat32(i * 4, le);
      break;
    case 64:
      for (let i = 0; i < n; i++) out[i] = dv.getFloat64(i * 8, le);
      break;
    default:
      throw new NiftiError(`unsupported NIfTI datatype code ${code}`);
  }
  return out;
}

export function readNifti(path: string): Volume {
  let raw: Buffer = readFileSync(path);
  if (raw.length >= 2 && raw[0] === 0x1f && raw[1] === 0x8b) {
    raw = gunzipSync(raw);
  }
  if (raw.length < HDR_SIZE) {
    throw new NiftiError(`${path}: file too small for a NIfTI-1 header`);
  }
  const dv = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);
  let le = true;
  if (dv.getInt32(0, true) !== HDR_SIZE) {
    if (dv.getInt32(0, false) === HDR_SIZE) {
      le = false;
    } else {
      throw new NiftiError(`${path}: not a NIfTI-1 file (bad sizeof_hdr)`);
    }
  }
  const magic = raw.toString("ascii", 344, 347);
  if (magic !== "n+1" && magic !== "ni1") {
    throw new NiftiError(`${path}: bad NIfTI magic '${magic}'`);
  }

  const ndim = dv.getInt16(40, le);
  const dims: number[] = [];
  for (let i = 1; i <= Math.max(3, ndim); i++) {
    dims.push(Math.max(1, dv.getInt16(40 + 2 * i, le)));
  }
  const [nx, ny, nz] = [dims[0], dims[1], dims[2] ?? 1];
  const extra = dims.slice(3).reduce((a, b) => a * b, 1);
  if (extra !== 1) {
    throw new NiftiError(`${path}: only 3-D volumes are supported (dim=${dims.join("x")})`);
  }

  const code = dv.getInt16(70, le);
  const info = DTYPE_CODES[code];
  if (!info) throw new NiftiError(`${path}: unsupported datatype code ${code}`);

  const voxOffset = Math.round(dv.getFloat32(108, le)) || VOX_OFFSET;
  const n = nx * ny * nz;
  if (raw.length < voxOffset + n * info.bytes) {
    throw new NiftiError(`${path}: truncated voxel data`);
  }
  let data = castToFloat32(raw, voxOffset, n, code, le);

  let slope = dv.getFloat32(112, le);
  const inter = dv.getFloat32(116, le);
  if (!Number.isFinite(slope) || slope === 0) slope = 1;
  if (slope !== 1 || inter !== 0) {
    for (let i = 0; i < n; i++) data[i] = data[i] * slope + inter;
  }

  const sformCode = dv.getInt16(254, le);
  let affine = identityAffine();
  if (sformCode > 0) {
    for (let r = 0; r < 3; r++) {
      for (let c = 0; c < 4; c++) {
        affine[r][c] = dv.getFloat32(280 + r * 16 + c * 4, le);
      }
    }
  } else {
    for (let i = 0; i < 3; i++) {
      affine[i][i] = dv.getFloat32(76 + 4 * (i + 1), le) || 1;
    }
  }

  return { dims: [nx, ny, nz], data, affine };
}

export function writeNifti(
  path: string,
  vol: Volume,
  dtype: "float32" | "uint8" = "float32",
): void {
  const [nx, ny, nz] = vol.dims;
  const n = nx * ny * nz;
  if (vol.data.length !== n) {
    throw new NiftiError(`data length ${vol.data.length} != dims product ${n}`);
  }
  const bytes = dtype === "float32" ? 4 : 1;
  const buf = Buffer.alloc(VOX_OFFSET + n * bytes);
  const dv = new DataView(buf.buffer, buf.byteOffset);

  dv.setInt32(0, HDR_SIZE, true);
  // dim
  dv.setInt16(40, 3, true);
  dv.setInt16(42, nx, true);
  dv.setInt16(44, ny, true);
  dv.setInt16(46, nz, true);
  for (let i = 4; i <= 7; i++) dv.setInt16(40 + 2 * i, 1, true);
  dv.setInt16(70, dtype === "float32" ? 16 : 2, true); // datatype
  dv.setInt16(72, bytes * 8, true); // bitpix
  const spacing = spacingFromAffine(vol.affine);
  dv.setFloat32(76, 1, true); // pixdim[0] = qfac
  dv.setFloat32(80, spacing[0], true);
  dv.setFloat32(84, spacing[1], true);
  dv.setFloat32(88, spacing[2], true);
  for (let i = 4; i <= 7; i++) dv.setFloat32(76 + 4 * i, 1, true);
  dv.setFloat32(108, VOX_OFFSET, true); // vox_offset
  dv.setFloat32(112, 1, true); // scl_slope
  dv.setFloat32(116, 0, true); // scl_inter
  dv.setUint8(123, 10); // xyzt_units: mm | sec
  dv.setInt16(252, 0, true); // qform_code
  dv.setInt16(254, 1, true); // sform_code
  for (let r = 0; r < 3; r++) {
    for (let c = 0; c < 4; c++) {
      dv.setFloat32(280 + r * 16 + c * 4, vol.affine[r][c], true);
    }
  }
  buf.write("n+1\0", 344, "ascii");

  if (dtype === "float32") {
    for (let i = 0; i < n; i++) dv.setFloat32(VOX_OFFSET + 4 * i, vol.data[i], true);
  } else {
    for (let i = 0; i < n; i++) {
      const v = Math.min(255, Math.max(0, Math.round(vol.data[i])));
      dv.setUint8(VOX_OFFSET + i, v);
    }
  }

  const out = path.endsWith(".gz") ? gzipSync(buf) : buf;
  writeFileSync(path, out);
}

/** Index into Fortran-order data for voxel (i, j, k). */
export function voxelIndex(dims: [number, number, number], i: number, j: number, k: number): number {
  return i + dims[0] * (j + dims[1] * k);
}

"""Minimal NIfTI-1 reader/writer (single-file .nii / .nii.gz).

Covers the scalar datatypes used by the challenge distribution (u8, i16,
i32, f32, f64), both endiannesses, intensity scaling on read, and the
standard sform-then-qform affine precedence. Written files carry the
affine in the sform and are byte-deterministic (gzip mtime pinned to 0).
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..volume import DEFAULT_LABEL_CODES, LabelVolume, Volume

_HEADER_SIZE = 348
_VOX_OFFSET = 352  # header + 4-byte extender

_DTYPE_FROM_CODE = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
}
_CODE_FROM_DTYPE = {np.dtype(v): k for k, v in _DTYPE_FROM_CODE.items()}
_BITPIX = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}


def _read_bytes(path: Path) -> bytes:
    with open(path, "rb") as handle:
        magic = handle.read(2)
        handle.seek(0)
        if magic == b"\x1f\x8b":
            with gzip.open(handle, "rb") as gz:
                return gz.read()
        return handle.read()


def quaternion_to_rotation(b: float, c: float, d: float) -> np.ndarray:
    """NIfTI qform quaternion (b, c, d) to a 3x3 rotation matrix."""
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a2) if a2 > 0.0 else 0.0
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )


def _parse_header(raw: bytes):
    if len(raw) < _HEADER_SIZE:
        raise FormatError("file too short to hold a NIfTI-1 header")
    endian = "<"
    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr != _HEADER_SIZE:
        endian = ">"
        (sizeof_hdr,) = struct.unpack_from(">i", raw, 0)
        if sizeof_hdr != _HEADER_SIZE:
            raise FormatError("bad sizeof_hdr: not a NIfTI-1 file")
    magic = struct.unpack_from("4s", raw, 344)[0]
    if magic == b"ni1\x00":
        raise FormatError("two-file NIfTI (.hdr/.img) is not supported")
    if magic != b"n+1\x00":
        raise FormatError(f"bad magic {magic!r}: not a single-file NIfTI-1")

    dim = struct.unpack_from(endian + "8h", raw, 40)
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise FormatError(f"invalid dim[0]={ndim}")
    sizes = [max(1, dim[i + 1]) for i in range(ndim)]
    if int(np.prod(sizes[3:], initial=1)) != 1:
        raise FormatError(f"only 3-D volumes are supported, got dims {sizes}")
    shape = tuple((sizes + [1, 1, 1])[:3])

    (datatype,) = struct.unpack_from(endian + "h", raw, 70)
    if datatype not in _DTYPE_FROM_CODE:
        raise FormatError(f"unsupported NIfTI datatype code {datatype}")

    pixdim = struct.unpack_from(endian + "8f", raw, 76)
    (vox_offset,) = struct.unpack_from(endian + "f", raw, 108)
    scl_slope, scl_inter = struct.unpack_from(endian + "2f", raw, 112)
    qform_code, sform_code = struct.unpack_from(endian + "2h", raw, 252)
    quatern = struct.unpack_from(endian + "6f", raw, 256)
    srow = struct.unpack_from(endian + "12f", raw, 280)

    if sform_code > 0:
        affine = np.eye(4)
        affine[:3, :] = np.asarray(srow, dtype=np.float64).reshape(3, 4)
    elif qform_code > 0:
        b, c, d, ox, oy, oz = (float(v) for v in quatern)
        qfac = -1.0 if pixdim[0] < 0 else 1.0
        rotation = quaternion_to_rotation(b, c, d)
        zooms = np.array([abs(pixdim[1]) or 1.0, abs(pixdim[2]) or 1.0,
                          (abs(pixdim[3]) or 1.0) * qfac])
        affine = np.eye(4)
        affine[:3, :3] = rotation * zooms
        affine[:3, 3] = (ox, oy, oz)
    else:
        affine = np.diag([abs(pixdim[1]) or 1.0, abs(pixdim[2]) or 1.0,
                          abs(pixdim[3]) or 1.0, 1.0])

    return {
        "endian": endian,
        "shape": shape,
        "datatype": datatype,
        "vox_offset": max(int(vox_offset), _HEADER_SIZE),
        "scl_slope": float(scl_slope),
        "scl_inter": float(scl_inter),
        "affine": affine,
    }


def read_nifti(
    path: str | Path,
    as_label: bool = False,
    allowed_codes: tuple[int, ...] = DEFAULT_LABEL_CODES,
) -> Volume | LabelVolume:
    """Load a .nii or .nii.gz file as a Volume (or LabelVolume)."""
    path = Path(path)
    raw = _read_bytes(path)
    header = _parse_header(raw)
    shape = header["shape"]
    dtype = np.dtype(_DTYPE_FROM_CODE[header["datatype"]]).newbyteorder(header["endian"])
    count = int(np.prod(shape))
    start = header["vox_offset"]
    end = start + count * dtype.itemsize
    if len(raw) < end:
        raise FormatError(
            f"truncated data: expected {end - start} bytes, file holds {len(raw) - start}"
        )
    data = np.frombuffer(raw[start:end], dtype=dtype).reshape(shape, order="F")
    data = data.astype(data.dtype.newbyteorder("="), copy=False)

    slope, inter = header["scl_slope"], header["scl_inter"]
    if slope not in (0.0, 1.0) or inter != 0.0:
        effective = slope if slope != 0.0 else 1.0
        data = data.astype(np.float64) * effective + inter

    name = path.name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break

    if as_label:
        if not np.issubdtype(data.dtype, np.integer):
            rounded = np.rint(data)
            if not np.array_equal(rounded, data):
                raise FormatError("label file holds non-integral values")
            data = rounded.astype(np.int16)
        return LabelVolume(data=data, affine=header["affine"], name=name,
                           allowed_codes=allowed_codes)
    return Volume(data=data, affine=header["affine"], name=name)


def _build_header(vol: Volume) -> bytes:
    dtype = np.dtype(vol.data.dtype)
    if dtype not in _CODE_FROM_DTYPE:
        raise FormatError(
            f"dtype {dtype} is not writable as NIfTI-1; cast to one of "
            f"{sorted(str(d) for d in _CODE_FROM_DTYPE)}"
        )
    code = _CODE_FROM_DTYPE[dtype]
    header = bytearray(_HEADER_SIZE)
    struct.pack_into("<i", header, 0, _HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, *vol.shape, 1, 1, 1, 1)
    struct.pack_into("<h", header, 70, code)
    struct.pack_into("<h", header, 72, _BITPIX[code])
    sx, sy, sz = vol.spacing
    struct.pack_into("<8f", header, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", header, 108, float(_VOX_OFFSET))
    struct.pack_into("<2f", header, 112, 1.0, 0.0)  # scl_slope, scl_inter
    struct.pack_into("<b", header, 123, 10)  # xyzt_units: mm | sec
    struct.pack_into("<80s", header, 148, b"cmrpipe")
    struct.pack_into("<2h", header, 252, 0, 1)  # qform off, sform aligned
    struct.pack_into("<12f", header, 280, *(float(v) for v in vol.affine[:3, :].ravel()))
    struct.pack_into("<4s", header, 344, b"n+1\x00")
    return bytes(header) + b"\x00\x00\x00\x00"


def write_nifti(vol: Volume, path: str | Path) -> None:
    """Write a volume as .nii, or .nii.gz when the path ends with .gz.

    Output bytes are a pure function of the volume (gzip mtime is pinned),
    so repeated runs produce identical files.
    """
    path = Path(path)
    payload = _build_header(vol) + np.asarray(vol.data).tobytes(order="F")
    if path.name.endswith(".gz"):
        with open(path, "wb") as handle:
            with gzip.GzipFile(filename="", mode="wb", fileobj=handle, mtime=0) as gz:
                gz.write(payload)
    else:
        path.write_bytes(payload)

"""Shared binary tensor container.

Layout, all little-endian: magic b"UDAT", version u32, dtype tag u8
(0=f64, 1=i32, 2=u8), rank u32, one u32 per dim, then the row-major payload.
Round-trips are bit-exact.
"""

import struct

import numpy as np

MAGIC = b"UDAT"
VERSION = 1

_TAGS = {0: np.dtype("<f8"), 1: np.dtype("<i4"), 2: np.dtype("u1")}
_DTYPE_TO_TAG = {np.dtype(np.float64): 0, np.dtype(np.int32): 1, np.dtype(np.uint8): 2}


class TensorFileError(ValueError):
    pass


def write_tensor(path, array: np.ndarray):
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _DTYPE_TO_TAG:
        raise TensorFileError(f"unsupported dtype {arr.dtype}; use f64, i32 or u8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IBI", VERSION, _DTYPE_TO_TAG[arr.dtype], arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise TensorFileError(f"bad magic {magic!r} in {path}")
        version, tag, rank = struct.unpack("<IBI", fh.read(9))
        if version != VERSION:
            raise TensorFileError(f"unsupported version {version}")
        if tag not in _TAGS:
            raise TensorFileError(f"unknown dtype tag {tag}")
        dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        dtype = _TAGS[tag]
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = fh.read()
    if len(payload) != count * dtype.itemsize:
        raise TensorFileError(f"payload length {len(payload)} != {count * dtype.itemsize}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()

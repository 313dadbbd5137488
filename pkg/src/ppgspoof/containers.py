"""Flat binary model container shared by the restoration and auth models.

Layout: magic string, little-endian uint32 array-dimension header
(count, then ndim + dims per array), raw float64 little-endian array
data in order, then trailing UTF-8 ``key=value`` metadata lines.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataValidityError

SIGR_MAGIC = b"SIGR1"
AUTH_MAGIC = b"AUTH1"


def save_container(path, magic: bytes, arrays, meta: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(arrays)))
        for arr in arrays:
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        lines = "".join(f"{k}={v}\n" for k, v in sorted(meta.items()))
        fh.write(lines.encode("utf-8"))


def load_container(path, magic: bytes):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(magic):
        raise DataValidityError(f"{path}: bad magic, expected {magic!r}")
    off = len(magic)
    (n_arrays,) = struct.unpack_from("<I", blob, off)
    off += 4
    shapes = []
    for _ in range(n_arrays):
        (ndim,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        shapes.append(shape)
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape)
        arrays.append(arr.astype(np.float64))
        off += 8 * count
    meta = {}
    for line in blob[off:].decode("utf-8").splitlines():
        if line:
            key, _, value = line.partition("=")
            meta[key] = value
    return arrays, meta

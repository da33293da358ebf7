"""Minimal MAT-file (level 5) writer and reader.

Only what the pipeline needs: uncompressed little-endian files holding real
double matrices and, optionally, a char matrix of labels. Output is
byte-stable (the header carries no timestamp).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from .exceptions import DataError

miINT8, miUINT8, miINT16, miUINT16, miINT32, miUINT32 = 1, 2, 3, 4, 5, 6
miSINGLE, miDOUBLE, miINT64, miUINT64, miMATRIX, miCOMPRESSED, miUTF8 = 7, 9, 12, 13, 14, 15, 16
mxCHAR_CLASS, mxDOUBLE_CLASS = 4, 6

HEADER_TEXT = b"MATLAB 5.0 MAT-file, written by mesgencov"

_NUMPY_TYPES = {
    miINT8: "<i1", miUINT8: "<u1", miINT16: "<i2", miUINT16: "<u2", miINT32: "<i4",
    miUINT32: "<u4", miSINGLE: "<f4", miDOUBLE: "<f8", miINT64: "<i8", miUINT64: "<u8",
    miUTF8: "<u1",
}


def _pad8(n: int) -> int:
    return (8 - n % 8) % 8


def _element(dtype: int, payload: bytes) -> bytes:
    n = len(payload)
    if n <= 4:
        # small data element: size and type packed into one 4-byte tag
        return struct.pack("<HH", dtype, n) + payload + b"\0" * (4 - n)
    return struct.pack("<II", dtype, n) + payload + b"\0" * _pad8(n)


def _matrix(name: str, cls: int, dims, data_type: int, data: bytes) -> bytes:
    flags = _element(miUINT32, struct.pack("<II", cls, 0))
    shape = _element(miINT32, struct.pack(f"<{len(dims)}i", *dims))
    label = _element(miINT8, name.encode("ascii"))
    body = flags + shape + label + _element(data_type, data)
    return struct.pack("<II", miMATRIX, len(body)) + body


def header() -> bytes:
    text = HEADER_TEXT.ljust(116, b" ")
    return text + b"\0" * 8 + struct.pack("<H", 0x0100) + b"IM"


def write_mat(path, C, labels: Optional[Sequence[str]] = None, name: str = "cov") -> None:
    """Write ``C`` as a double matrix variable ``name``.

    When ``labels`` is given a second variable ``labels`` (char matrix, one
    space-padded row per label) follows the matrix.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[None, :]
    if C.ndim != 2 or C.size == 0:
        raise ValueError("write_mat needs a non-empty 2-D matrix")
    if not np.isfinite(C).all():
        raise ValueError("write_mat refuses non-finite values")
    out = header() + _matrix(name, mxDOUBLE_CLASS, C.shape, miDOUBLE, C.astype("<f8").tobytes(order="F"))
    if labels is not None:
        labels = [str(s) for s in labels]
        if len(labels) != C.shape[0]:
            raise ValueError(f"{len(labels)} labels for a matrix with {C.shape[0]} rows")
        width = max(len(s) for s in labels)
        chars = np.array([[ord(c) for c in s.ljust(width)] for s in labels], dtype="<u2")
        out += _matrix("labels", mxCHAR_CLASS, chars.shape, miUINT16, chars.tobytes(order="F"))
    with open(path, "wb") as fh:
        fh.write(out)


def _read_tag(buf: bytes, pos: int):
    dtype, size = struct.unpack_from("<II", buf, pos)
    if dtype >> 16:
        # small element
        return dtype & 0xFFFF, dtype >> 16, pos + 4, pos + 8
    return dtype, size, pos + 8, pos + 8 + size + _pad8(size)


def read_mat(path) -> Dict[str, object]:
    """Read a level-5 MAT file written by :func:`write_mat` (or MATLAB, uncompressed).

    Double/integer matrices come back as 2-D ``float`` arrays; char matrices as
    lists of right-stripped strings.
    """
    buf = Path(path).read_bytes()
    if len(buf) < 128:
        raise DataError(f"{path}: too short for a MAT-file header")
    if buf[126:128] != b"IM":
        raise DataError(f"{path}: not a little-endian MAT-file (endian marker {buf[126:128]!r})")
    version = struct.unpack_from("<H", buf, 124)[0]
    if version != 0x0100:
        raise DataError(f"{path}: unsupported MAT version {version:#x}")
    out: Dict[str, object] = {}
    pos = 128
    while pos < len(buf):
        dtype, size, start, nxt = _read_tag(buf, pos)
        if dtype == miCOMPRESSED:
            raise DataError(f"{path}: compressed elements are not supported")
        if dtype != miMATRIX:
            pos = nxt
            continue
        sub = start
        parts = []
        while sub < start + size:
            t, s, ps, nx = _read_tag(buf, sub)
            parts.append((t, buf[ps : ps + s]))
            sub = nx
        (_, flags), (_, dims), (_, name) = parts[:3]
        cls = struct.unpack_from("<I", flags, 0)[0] & 0xFF
        shape = np.frombuffer(dims, dtype="<i4")
        var = name.decode("ascii")
        t, raw = parts[3]
        data = np.frombuffer(raw, dtype=_NUMPY_TYPES[t]).reshape(tuple(shape), order="F")
        if cls == mxCHAR_CLASS:
            out[var] = ["".join(chr(c) for c in row).rstrip() for row in data]
        else:
            out[var] = data.astype(float)
        pos = nxt
    return out

"""TNSR binary tensor records and the TT / Kruskal containers built on them.

A TNSR record is::

    b"TNSR" | u8 version=1 | u8 dtype (0=f64, 1=complex128) | u32 order N
    | N x u64 extents | buffer (little-endian, first-index-fastest)

TT and Kruskal files start with one JSON header line terminated by ``\\n``
followed by one TNSR record per core (TT) or per factor (Kruskal).
"""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .tensor_core import KruskalTensor, TTTensor

MAGIC = b"TNSR"
VERSION = 1
DTYPE_F64 = 0
DTYPE_C128 = 1


class FormatError(ValueError):
    """Raised on malformed TNSR data."""


def write_record(fh: BinaryIO, t) -> None:
    t = np.asarray(t)
    if np.iscomplexobj(t):
        code, dt = DTYPE_C128, np.dtype("<c16")
    else:
        code, dt = DTYPE_F64, np.dtype("<f8")
    fh.write(MAGIC)
    fh.write(struct.pack("<BBI", VERSION, code, t.ndim))
    fh.write(struct.pack(f"<{t.ndim}Q", *t.shape))
    fh.write(np.ravel(t, order="F").astype(dt, copy=False).tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated TNSR record: wanted {n} bytes, got {len(buf)}")
    return buf


def read_record(fh: BinaryIO) -> np.ndarray:
    magic = fh.read(4)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    version, code, order = struct.unpack("<BBI", _read_exact(fh, 6))
    if version != VERSION:
        raise FormatError(f"unsupported TNSR version {version}")
    if code == DTYPE_F64:
        dt = np.dtype("<f8")
    elif code == DTYPE_C128:
        dt = np.dtype("<c16")
    else:
        raise FormatError(f"unknown dtype code {code}")
    shape = struct.unpack(f"<{order}Q", _read_exact(fh, 8 * order)) if order else ()
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(_read_exact(fh, count * dt.itemsize), dtype=dt)
    return np.reshape(data.astype(dt.newbyteorder("="), copy=True), shape, order="F")


def save_tensor(path, t) -> None:
    with open(path, "wb") as fh:
        write_record(fh, t)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_record(fh)


def tensor_to_bytes(t) -> bytes:
    buf = io.BytesIO()
    write_record(buf, t)
    return buf.getvalue()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    return read_record(io.BytesIO(data))


def _read_header(fh: BinaryIO) -> dict:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise FormatError("missing JSON header line")
    return json.loads(line)


def save_tt(path, t: TTTensor) -> None:
    header = {"kind": "tt", "order": t.order, "ranks": list(t.ranks)}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for core in t.cores:
            write_record(fh, core)


def load_tt(path) -> TTTensor:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        if header.get("kind") != "tt":
            raise FormatError(f"not a TT file: kind={header.get('kind')!r}")
        cores = [read_record(fh) for _ in range(header["order"])]
    t = TTTensor(cores)
    if list(t.ranks) != list(header["ranks"]):
        raise FormatError(f"rank profile {t.ranks} disagrees with header {header['ranks']}")
    return t


def save_ktensor(path, k: KruskalTensor) -> None:
    w = k.weights
    header = {
        "kind": "ktensor",
        "order": k.order,
        "rank": k.rank,
        "weights": w.real.tolist() if not np.iscomplexobj(w) else [[z.real, z.imag] for z in w],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for f in k.factors:
            write_record(fh, f)


def load_ktensor(path) -> KruskalTensor:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        if header.get("kind") != "ktensor":
            raise FormatError(f"not a Kruskal file: kind={header.get('kind')!r}")
        factors = [read_record(fh) for _ in range(header["order"])]
    w = header["weights"]
    if w and isinstance(w[0], list):
        w = np.array([complex(re, im) for re, im in w])
    return KruskalTensor(factors, np.asarray(w, dtype=float if not np.iscomplexobj(w) else complex))


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p

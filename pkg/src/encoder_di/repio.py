"""Representation matrices and their on-disk formats.

Two formats are supported:

* ``REPR`` binary: magic ``b"REPR"``, ``u8`` version (1), ``u32`` n_rows,
  ``u32`` dim, ``n_rows * dim`` float32 values (row-major), then the encoder
  label and split label as ``u32``-length-prefixed UTF-8 strings. All
  integers and floats are little-endian.
* CSV: one representation per line, comma separated, no header.

Data is always held in float64 in memory. Writing the binary format rounds to
float32, so a binary round trip is bit-exact for float32-representable data.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DimensionMismatch, IoFailure, MalformedHeader, NonFiniteValue

MAGIC = b"REPR"
VERSION = 1
SPLIT_LABELS = ("P1", "P2", "N", "S", "other")

_HEADER = struct.Struct("<4sBII")
_U32 = struct.Struct("<I")


def _check_finite(data: np.ndarray) -> None:
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        r, c = (int(v) for v in bad[0])
        raise NonFiniteValue(r, c, float(data[r, c]))


@dataclass(frozen=True, eq=False)
class RepresentationSet:
    """An ``n_rows x dim`` matrix of encoder outputs plus provenance labels."""

    data: np.ndarray
    encoder_label: str = ""
    split_label: str = "other"

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {data.shape}")
        _check_finite(data)
        if self.split_label not in SPLIT_LABELS:
            raise ValueError(f"split_label must be one of {SPLIT_LABELS}, got {self.split_label!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "RepresentationSet":
        return RepresentationSet(data, self.encoder_label, self.split_label)

    def take(self, indices) -> "RepresentationSet":
        return self.with_data(self.data[np.asarray(indices, dtype=np.intp)])

    def __len__(self) -> int:
        return self.n_rows

    def __repr__(self) -> str:
        return (f"RepresentationSet(n_rows={self.n_rows}, dim={self.dim}, "
                f"encoder_label={self.encoder_label!r}, split_label={self.split_label!r})")


ArrayOrSet = Union[RepresentationSet, np.ndarray]


def as_array(reps) -> np.ndarray:
    """Return the float64 matrix behind ``reps`` (a set or anything array-like)."""
    if isinstance(reps, RepresentationSet):
        return reps.data
    arr = np.asarray(reps, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def like(reps, data: np.ndarray):
    """Wrap ``data`` the same way ``reps`` was wrapped (set in, set out)."""
    if isinstance(reps, RepresentationSet):
        return reps.with_data(data)
    return data


def to_bytes(reps: RepresentationSet) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, reps.n_rows, reps.dim))
    buf.write(reps.data.astype("<f4").tobytes(order="C"))
    for text in (reps.encoder_label, reps.split_label):
        raw = text.encode("utf-8")
        buf.write(_U32.pack(len(raw)))
        buf.write(raw)
    return buf.getvalue()


def _read_string(blob: bytes, offset: int) -> tuple[str, int]:
    if offset + 4 > len(blob):
        raise ValueError("truncated string length")
    (n,) = _U32.unpack_from(blob, offset)
    offset += 4
    if offset + n > len(blob):
        raise ValueError("truncated string")
    return blob[offset:offset + n].decode("utf-8"), offset + n


def from_bytes(blob: bytes) -> RepresentationSet:
    if len(blob) < _HEADER.size:
        raise MalformedHeader("file shorter than the REPR header")
    magic, version, n_rows, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise MalformedHeader(f"bad magic {magic!r}")
    if version != VERSION:
        raise MalformedHeader(f"unsupported REPR version {version}")
    if n_rows < 1 or dim < 1:
        raise MalformedHeader(f"header declares empty matrix ({n_rows} x {dim})")
    start = _HEADER.size
    end = start + 4 * n_rows * dim
    try:
        if end > len(blob):
            raise ValueError("payload too short")
        encoder_label, offset = _read_string(blob, end)
        split_label, offset = _read_string(blob, offset)
        if offset != len(blob):
            raise ValueError("trailing bytes")
    except (ValueError, UnicodeDecodeError) as exc:
        raise DimensionMismatch(
            f"payload does not hold {n_rows} x {dim} float32 values followed by labels ({exc})"
        ) from None
    data = np.frombuffer(blob, dtype="<f4", count=n_rows * dim, offset=start)
    data = data.astype(np.float64).reshape(n_rows, dim)
    _check_finite(data)
    if split_label not in SPLIT_LABELS:
        split_label = "other"
    return RepresentationSet(data, encoder_label, split_label)


def _parse_csv(text: str) -> np.ndarray:
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise MalformedHeader("empty CSV file")
    parsed = []
    for i, line in enumerate(rows):
        try:
            parsed.append([float(v) for v in line.split(",")])
        except ValueError:
            raise MalformedHeader(f"unparseable CSV line {i}: {line[:60]!r}") from None
    width = len(parsed[0])
    for i, row in enumerate(parsed):
        if len(row) != width:
            raise DimensionMismatch(f"CSV line {i} has {len(row)} values, expected {width}")
    data = np.array(parsed, dtype=np.float64)
    _check_finite(data)
    return data


def read_representations(path) -> RepresentationSet:
    """Load a REPR binary or CSV file, sniffing the format from the magic bytes."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc
    if blob[:4] == MAGIC:
        return from_bytes(blob)
    if path.suffix.lower() in (".repr", ".bin"):
        raise MalformedHeader(f"{path} has bad magic {blob[:4]!r}")
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedHeader(f"{path} is neither REPR binary nor CSV text") from None
    return RepresentationSet(_parse_csv(text), encoder_label=path.stem)


def write_representations(reps: RepresentationSet, path, format: str = "binary") -> None:
    path = Path(path)
    if format == "binary":
        payload = to_bytes(reps)
    elif format == "csv":
        lines = (",".join(repr(float(v)) for v in row) for row in reps.data)
        payload = ("\n".join(lines) + "\n").encode("utf-8")
    else:
        raise ValueError(f"unknown format {format!r}")
    try:
        path.write_bytes(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc

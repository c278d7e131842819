"""PBM1 sample files.

Layout (little-endian)::

    offset  size  field
    0       4     magic  b"PBM1"
    4       1     mod_sel
    5       1     flt_sel
    6       1     sample_format (0 rails, 1 IF, 2 symbol codes)
    7       8     sample_count  (uint64)
    15      ...   payload

Payloads:

* 0 - interleaved int16 I, Q rail samples; ``sample_count`` counts I/Q pairs
* 1 - int16 real IF samples
* 2 - interleaved int8 I, Q mapped-symbol codes (3-bit two's complement,
  sign-extended), one pair per symbol
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

MAGIC = b"PBM1"
HEADER = struct.Struct("<4sBBBQ")


class SampleFormat(IntEnum):
    RAILS = 0
    IF = 1
    SYMBOL_CODES = 2

    @property
    def dtype(self) -> np.dtype:
        return np.dtype("<i1") if self == SampleFormat.SYMBOL_CODES else np.dtype("<i2")

    @property
    def channels(self) -> int:
        return 1 if self == SampleFormat.IF else 2


class IqFileError(ValueError):
    """Malformed or inconsistent PBM1 file."""


@dataclass(frozen=True)
class IqFileHeader:
    mod_sel: int
    flt_sel: int
    sample_format: SampleFormat
    sample_count: int

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.mod_sel, self.flt_sel, int(self.sample_format), self.sample_count)

    @classmethod
    def unpack(cls, raw: bytes) -> "IqFileHeader":
        if len(raw) < HEADER.size:
            raise IqFileError(f"file too short for a header ({len(raw)} < {HEADER.size} bytes)")
        magic, mod_sel, flt_sel, fmt, count = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise IqFileError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if mod_sel > 3 or flt_sel > 3:
            raise IqFileError(f"selector out of range (mod_sel={mod_sel}, flt_sel={flt_sel})")
        try:
            fmt = SampleFormat(fmt)
        except ValueError:
            raise IqFileError(f"unknown sample format code {fmt}") from None
        return cls(mod_sel, flt_sel, fmt, count)


def encode(header_fields: tuple[int, int, SampleFormat], data: np.ndarray) -> bytes:
    mod_sel, flt_sel, fmt = header_fields
    fmt = SampleFormat(fmt)
    data = np.asarray(data)
    if fmt.channels == 2:
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError("two-channel formats need an (n, 2) array")
    elif data.ndim != 1:
        raise ValueError("IF format needs a one-dimensional array")
    info = np.iinfo(fmt.dtype)
    if data.size and (data.min() < info.min or data.max() > info.max):
        raise ValueError(f"samples do not fit {fmt.dtype}")
    header = IqFileHeader(mod_sel, flt_sel, fmt, len(data))
    return header.pack() + data.astype(fmt.dtype).tobytes()


def decode(raw: bytes) -> tuple[IqFileHeader, np.ndarray]:
    header = IqFileHeader.unpack(raw)
    fmt = header.sample_format
    payload = raw[HEADER.size :]
    expected = header.sample_count * fmt.channels * fmt.dtype.itemsize
    if len(payload) != expected:
        raise IqFileError(f"header declares {header.sample_count} samples ({expected} bytes) but payload has {len(payload)} bytes")
    data = np.frombuffer(payload, dtype=fmt.dtype).astype(np.int64)
    if fmt.channels == 2:
        data = data.reshape(-1, 2)
    return header, data


def write_iq_file(path, mod_sel: int, flt_sel: int, fmt: SampleFormat, data: np.ndarray) -> None:
    Path(path).write_bytes(encode((mod_sel, flt_sel, fmt), data))


def read_iq_file(path) -> tuple[IqFileHeader, np.ndarray]:
    return decode(Path(path).read_bytes())

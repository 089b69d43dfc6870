"""Shared plumbing for the binary checkpoint formats (MVID/MEMB/MDEN).

All files start with an 8-byte ASCII magic carrying the format version;
headers are little-endian. Writers are atomic (temp file + rename); readers
validate sizes before touching the payload and raise FormatError with a
distinct diagnostic for bad magic, truncation, and shape inconsistencies.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError

MAGIC_LEN = 8
# Guards against absurd extents from corrupted headers.
MAX_EXTENT = 1 << 24


class Reader:
    """Bounds-checked cursor over a byte string."""

    def __init__(self, data: bytes, path: str = "<bytes>"):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"{self.path}: truncated file (needed {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos})"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def extent(self, what: str) -> int:
        v = self.u32()
        if not 0 < v <= MAX_EXTENT:
            raise FormatError(f"{self.path}: implausible {what} extent {v} in header")
        return v

    def array(self, shape, dtype) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = self.take(count * np.dtype(dtype).itemsize)
        arr = np.frombuffer(raw, dtype="<" + np.dtype(dtype).str[1:], count=count)
        return np.ascontiguousarray(arr.astype(dtype, copy=False)).reshape(shape)

    def expect_magic(self, magic: bytes) -> None:
        got = self.take(MAGIC_LEN)
        if got != magic:
            raise FormatError(
                f"{self.path}: magic/version mismatch "
                f"(expected {magic!r}, found {got!r})"
            )

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.path}: {len(self.data) - self.pos} trailing bytes after payload"
            )


class Writer:
    def __init__(self):
        self.buf = bytearray()

    def magic(self, magic: bytes):
        assert len(magic) == MAGIC_LEN
        self.buf += magic

    def u8(self, v: int):
        self.buf += struct.pack("<B", v)

    def u32(self, v: int):
        self.buf += struct.pack("<I", v)

    def u64(self, v: int):
        self.buf += struct.pack("<Q", v)

    def array(self, arr: np.ndarray, dtype):
        self.buf += np.ascontiguousarray(arr, dtype="<" + np.dtype(dtype).str[1:]).tobytes()

    def getvalue(self) -> bytes:
        return bytes(self.buf)


def atomic_write(path: str, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_file(path: str) -> Reader:
    try:
        with open(path, "rb") as fh:
            return Reader(fh.read(), path=path)
    except OSError as exc:
        raise FormatError(f"{path}: cannot read file ({exc})") from exc

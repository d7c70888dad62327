"""Bit-exact codec for the NPY v1.0 binary array format.

Every scan that crosses the wire is an NPY file: 6 magic bytes
(``\\x93NUMPY``), a one-byte major/minor version, a little-endian u16
header length, an ASCII dictionary literal describing dtype/order/shape,
then the raw element payload.  This module parses and emits that layout
directly (header text via ``ast.literal_eval``, payload via buffer math)
so its behaviour can be cross-checked against an independent reference
implementation instead of delegating to one.

Writer guarantees: version 1.0 only, C order only, little-endian element
codes, header padded with spaces so the whole prelude is a multiple of 64
bytes and ends in a newline.  The reader additionally accepts
Fortran-ordered payloads (re-ordered to row-major on decode) and headers
with arbitrary internal spacing, key order, or non-aligned padding.
"""

from __future__ import annotations

import ast
import math
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"\x93NUMPY"

# Decoded payloads above this size are refused outright; it is a guard
# against hostile headers declaring absurd shapes, not a format rule.
MAX_PAYLOAD_BYTES = 256 * 1024 * 1024

#: dtype tag -> (NPY descr code, element width in bytes)
DTYPES: dict[str, tuple[str, int]] = {
    "f32": ("<f4", 4),
    "f64": ("<f8", 8),
    "i32": ("<i4", 4),
    "i64": ("<i8", 8),
    "u8": ("|u1", 1),
}

_DESCR_TO_TAG = {code: tag for tag, (code, _) in DTYPES.items()}

_PRELUDE_ALIGN = 64
_PRELUDE_FIXED = 10  # magic (6) + version (2) + header length field (2)


class NpyFormatError(ValueError):
    """Base class for every malformed-input error raised by this codec."""


class BadMagic(NpyFormatError):
    """Input does not start with the six NPY magic bytes."""


class UnsupportedVersion(NpyFormatError):
    """Header version is not 1.0."""


class UnsupportedDtype(NpyFormatError):
    """descr code outside the supported little-endian set."""


class MalformedHeader(NpyFormatError):
    """Header text is truncated or not a well-formed descriptor dict."""


class PayloadSizeMismatch(NpyFormatError):
    """Payload length disagrees with the declared shape, or exceeds the cap."""


@dataclass(frozen=True)
class ScanArray:
    """Dense n-dimensional array: dtype tag, extents, row-major payload.

    ``data`` holds little-endian element bytes in C order; equality is
    therefore bit-exact.
    """

    dtype: str
    shape: tuple[int, ...]
    data: bytes

    def __post_init__(self) -> None:
        if self.dtype not in DTYPES:
            raise UnsupportedDtype(f"unsupported dtype tag {self.dtype!r}")
        if any(not isinstance(n, int) or isinstance(n, bool) or n < 0 for n in self.shape):
            raise ValueError(f"shape extents must be non-negative ints, got {self.shape!r}")
        expected = self.element_count * self.item_size
        if len(self.data) != expected:
            raise ValueError(
                f"payload is {len(self.data)} bytes but shape {self.shape} with "
                f"dtype {self.dtype} needs {expected}"
            )

    @property
    def element_count(self) -> int:
        return math.prod(self.shape)

    @property
    def item_size(self) -> int:
        return DTYPES[self.dtype][1]

    def to_numpy(self) -> np.ndarray:
        """Return a writable ndarray copy of the payload."""
        descr = DTYPES[self.dtype][0]
        return np.frombuffer(self.data, dtype=np.dtype(descr)).reshape(self.shape).copy()

    @classmethod
    def from_numpy(cls, arr: np.ndarray) -> "ScanArray":
        """Build from an ndarray, normalized to little-endian C order."""
        tag = _TAG_BY_KIND.get((arr.dtype.kind, arr.dtype.itemsize))
        if tag is None:
            raise UnsupportedDtype(f"unsupported numpy dtype {arr.dtype!r}")
        descr = DTYPES[tag][0]
        canonical = np.ascontiguousarray(arr, dtype=np.dtype(descr))
        return cls(tag, tuple(int(n) for n in arr.shape), canonical.tobytes(order="C"))


_TAG_BY_KIND = {
    ("f", 4): "f32",
    ("f", 8): "f64",
    ("i", 4): "i32",
    ("i", 8): "i64",
    ("u", 1): "u8",
}


@dataclass(frozen=True)
class NpyHeader:
    """Parsed prelude of an NPY file."""

    version: tuple[int, int]
    descr: str
    fortran_order: bool
    shape: tuple[int, ...]
    header_len: int

    @property
    def prelude_len(self) -> int:
        return _PRELUDE_FIXED + self.header_len


def parse_header(buf: bytes) -> NpyHeader:
    """Parse the NPY prelude from the start of ``buf``.

    Tolerates arbitrary spacing inside the header dictionary and either
    key order; rejects anything that is not a v1.0 header over a
    supported dtype.
    """
    if len(buf) < 6 or bytes(buf[:6]) != MAGIC:
        raise BadMagic("not an NPY file: bad magic bytes")
    if len(buf) < _PRELUDE_FIXED:
        raise MalformedHeader("truncated prelude")
    version = (buf[6], buf[7])
    if version != (1, 0):
        raise UnsupportedVersion(f"unsupported NPY version {version[0]}.{version[1]}")
    (header_len,) = struct.unpack_from("<H", buf, 8)
    text_bytes = bytes(buf[_PRELUDE_FIXED : _PRELUDE_FIXED + header_len])
    if len(text_bytes) != header_len:
        raise MalformedHeader("truncated header text")
    if not text_bytes.endswith(b"\n"):
        raise MalformedHeader("header text does not end with newline")
    fields = _parse_header_dict(text_bytes.decode("latin-1"))
    descr, fortran_order, shape = fields
    return NpyHeader((1, 0), descr, fortran_order, shape, header_len)


def _parse_header_dict(text: str) -> tuple[str, bool, tuple[int, ...]]:
    try:
        literal = ast.literal_eval(text.strip())
    except Exception as exc:  # SyntaxError, ValueError, RecursionError, ...
        raise MalformedHeader(f"header is not a dict literal: {exc}") from None
    if not isinstance(literal, dict) or set(literal) != {"descr", "fortran_order", "shape"}:
        raise MalformedHeader("header dict must have exactly descr/fortran_order/shape keys")
    descr = literal["descr"]
    if not isinstance(descr, str):
        raise MalformedHeader("descr must be a string")
    if descr not in _DESCR_TO_TAG:
        raise UnsupportedDtype(f"unsupported descr {descr!r}")
    fortran_order = literal["fortran_order"]
    if not isinstance(fortran_order, bool):
        raise MalformedHeader("fortran_order must be a boolean")
    shape = literal["shape"]
    if not isinstance(shape, tuple):
        raise MalformedHeader("shape must be a tuple")
    for n in shape:
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise MalformedHeader("shape extents must be non-negative ints")
    return descr, fortran_order, tuple(shape)


def decode_npy(buf: bytes) -> ScanArray:
    """Decode a complete NPY byte sequence into a row-major ScanArray."""
    header = parse_header(buf)
    tag = _DESCR_TO_TAG[header.descr]
    width = DTYPES[tag][1]
    expected = math.prod(header.shape) * width
    if expected > MAX_PAYLOAD_BYTES:
        raise PayloadSizeMismatch(
            f"declared payload of {expected} bytes exceeds the {MAX_PAYLOAD_BYTES}-byte cap"
        )
    payload = bytes(buf[header.prelude_len :])
    if len(payload) != expected:
        raise PayloadSizeMismatch(
            f"payload is {len(payload)} bytes, expected {expected} for shape {header.shape}"
        )
    if header.fortran_order and len(header.shape) >= 2:
        # Column-major on the wire: transpose through numpy to get C order.
        arr = np.frombuffer(payload, dtype=np.dtype(header.descr))
        payload = arr.reshape(header.shape, order="F").tobytes(order="C")
    return ScanArray(tag, header.shape, payload)


def encode_npy(arr: ScanArray) -> bytes:
    """Encode a ScanArray as a canonical NPY v1.0 byte sequence.

    Deterministic: equal arrays produce byte-identical output.
    """
    if arr.dtype not in DTYPES:
        raise UnsupportedDtype(f"unsupported dtype tag {arr.dtype!r}")
    descr = DTYPES[arr.dtype][0]
    base = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (descr, repr(arr.shape))
    # Pad with spaces so magic+version+length+text is 64-aligned, newline last.
    unpadded = _PRELUDE_FIXED + len(base) + 1
    padding = (-unpadded) % _PRELUDE_ALIGN
    text = base + " " * padding + "\n"
    if len(text) > 0xFFFF:
        raise MalformedHeader("header text does not fit a v1.0 length field")
    return MAGIC + b"\x01\x00" + struct.pack("<H", len(text)) + text.encode("ascii") + arr.data

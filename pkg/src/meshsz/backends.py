"""Lossless back ends applied over the serialized sequence body.

Each back end is selected by a one-byte identifier stored in the container
header.  ``unpack`` must never return more than ``max_size`` bytes.
"""

from __future__ import annotations

import io
import lzma
import zlib
from dataclasses import dataclass
from typing import Callable

from .errors import CorruptStream, InvalidValue

try:
    import zstandard
except ImportError:  # pragma: no cover
    zstandard = None


@dataclass(frozen=True)
class Backend:
    ident: int
    name: str
    pack: Callable[[bytes], bytes]
    unpack: Callable[[bytes, int], bytes]


def _identity_unpack(data: bytes, max_size: int) -> bytes:
    return bytes(data)


def _zlib_unpack(data: bytes, max_size: int) -> bytes:
    d = zlib.decompressobj()
    out = d.decompress(data, max_size + 1)
    if not d.eof:
        raise CorruptStream("deflate stream incomplete or larger than declared")
    return out


def _lzma_unpack(data: bytes, max_size: int) -> bytes:
    d = lzma.LZMADecompressor(format=lzma.FORMAT_XZ)
    out = d.decompress(data, max_length=max_size + 1)
    if not d.eof:
        raise CorruptStream("xz stream incomplete or larger than declared")
    return out


def _zstd_pack(data: bytes) -> bytes:
    return zstandard.ZstdCompressor(level=19, write_checksum=False).compress(data)


def _zstd_unpack(data: bytes, max_size: int) -> bytes:
    # streaming read: never trusts a frame-declared content size for allocation
    with zstandard.ZstdDecompressor().stream_reader(io.BytesIO(data)) as reader:
        out = bytearray()
        while len(out) <= max_size:
            chunk = reader.read(min(1 << 20, max_size + 1 - len(out)))
            if not chunk:
                break
            out += chunk
    return bytes(out)


BACKENDS: dict[str, Backend] = {
    "none": Backend(0, "none", bytes, _identity_unpack),
    "zlib": Backend(1, "zlib", lambda b: zlib.compress(b, 9), _zlib_unpack),
    "lzma": Backend(3, "lzma", lambda b: lzma.compress(b, preset=6), _lzma_unpack),
}
if zstandard is not None:
    BACKENDS["zstd"] = Backend(2, "zstd", _zstd_pack, _zstd_unpack)

BY_ID = {b.ident: b for b in BACKENDS.values()}
KNOWN_IDS = {0: "none", 1: "zlib", 2: "zstd", 3: "lzma"}

DEFAULT_BACKEND = "zstd" if "zstd" in BACKENDS else "zlib"


def get_backend(name_or_id) -> Backend:
    if isinstance(name_or_id, int):
        if name_or_id in BY_ID:
            return BY_ID[name_or_id]
        if name_or_id in KNOWN_IDS:
            raise CorruptStream(f"back end {KNOWN_IDS[name_or_id]!r} is not installed")
        raise CorruptStream(f"unknown back end id {name_or_id}")
    try:
        return BACKENDS[name_or_id]
    except KeyError:
        raise InvalidValue(
            f"unknown back end {name_or_id!r}; available: {', '.join(sorted(BACKENDS))}"
        ) from None


def unpack(backend: Backend, data: bytes, expected_size: int) -> bytes:
    try:
        out = backend.unpack(data, expected_size)
    except CorruptStream:
        raise
    except Exception as exc:  # each library raises its own error type
        raise CorruptStream(f"{backend.name} back end failed: {exc}") from exc
    if len(out) != expected_size:
        raise CorruptStream(
            f"{backend.name} back end produced {len(out)} bytes, header declares {expected_size}"
        )
    return out

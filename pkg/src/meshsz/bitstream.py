"""The ``.umz`` container: header, seed block, Huffman code block, back end.

See FORMAT.md for the byte layout.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import huffman
from .backends import DEFAULT_BACKEND, get_backend, unpack
from .codec import END_MARK
from .errors import CorruptStream, DigestMismatch, InvalidValue, UnsupportedVersion
from .traversal import SequenceSet

MAGIC = b"UMZ\x1a"
VERSION = 1

PREDICTOR_TRAVERSAL = 0
PREDICTOR_LINEAR1D = 1
PREDICTORS = {"traversal": PREDICTOR_TRAVERSAL, "linear1d": PREDICTOR_LINEAR1D}

FLAG_SEED_RNG = 0x01

# magic, version, backend, predictor, dimension, code_bits, flags,
# n_vertices, n_cells, error_bound, n_sequences, seed_rng, digest
_FIXED = struct.Struct("<4sBBBBBBQQdQQ16s")
_NAME_LEN = struct.Struct("<H")
# raw body length, crc32 of raw body, packed length
_BODY = struct.Struct("<QIQ")


@dataclass(frozen=True)
class HeaderInfo:
    dimension: int
    n_vertices: int
    n_cells: int
    error_bound: float
    code_bits: int
    n_sequences: int
    digest: bytes
    backend: str = DEFAULT_BACKEND
    predictor: str = "traversal"
    seed_rng: int | None = None
    name: str = "field"

    @property
    def seed_size(self) -> int:
        return self.dimension + 1 if self.predictor == "traversal" else 1


def encode(sequences: SequenceSet, header: HeaderInfo) -> bytes:
    if sequences.n_sequences != header.n_sequences:
        raise InvalidValue("header sequence count does not match the sequence set")
    if sequences.seed_size != header.seed_size:
        raise InvalidValue("seed size does not match the header predictor")
    backend = get_backend(header.backend)
    name = header.name.encode("utf-8")
    if len(name) > 0xFFFF:
        raise InvalidValue("field name too long")

    body = bytearray()
    huffman.write_varint(body, len(sequences.seed_values))
    body += sequences.seed_values.astype("<f8").tobytes()
    body += huffman.encode(sequences.codes.tolist())
    body = bytes(body)
    packed = backend.pack(body)

    flags = FLAG_SEED_RNG if header.seed_rng is not None else 0
    out = bytearray(
        _FIXED.pack(
            MAGIC, VERSION, backend.ident, PREDICTORS[header.predictor],
            header.dimension, header.code_bits, flags,
            header.n_vertices, header.n_cells, header.error_bound,
            header.n_sequences, header.seed_rng or 0, header.digest,
        )
    )
    out += _NAME_LEN.pack(len(name)) + name
    out += _BODY.pack(len(body), zlib.crc32(body), len(packed))
    out += packed
    return bytes(out)


def read_header(data: bytes) -> tuple[HeaderInfo, int]:
    """Parse the fixed header and field name; returns (header, offset of the body record)."""
    if len(data) < 5:
        raise CorruptStream("payload shorter than the header", len(data))
    if data[:4] != MAGIC:
        raise CorruptStream("bad magic", 0)
    if data[4] != VERSION:
        raise UnsupportedVersion(f"container version {data[4]} is not supported (expected {VERSION})")
    if len(data) < _FIXED.size + _NAME_LEN.size:
        raise CorruptStream("truncated header", len(data))
    (_, _, backend_id, predictor, dim, code_bits, flags, n_v, n_c, xi, n_seq, rng,
     digest) = _FIXED.unpack_from(data, 0)
    pos = _FIXED.size
    if predictor not in PREDICTORS.values():
        raise CorruptStream(f"unknown predictor id {predictor}", 6)
    if dim not in (2, 3):
        raise CorruptStream(f"invalid dimension {dim}", 7)
    if not 2 <= code_bits <= 31:
        raise CorruptStream(f"invalid code width {code_bits}", 8)
    if flags & ~FLAG_SEED_RNG:
        raise CorruptStream(f"unknown flags {flags:#x}", 9)
    if not (math.isfinite(xi) and xi > 0):
        raise CorruptStream(f"invalid error bound {xi}", 26)
    (name_len,) = _NAME_LEN.unpack_from(data, pos)
    pos += _NAME_LEN.size
    if pos + name_len > len(data):
        raise CorruptStream("truncated field name", pos)
    try:
        name = data[pos:pos + name_len].decode("utf-8")
    except UnicodeDecodeError:
        raise CorruptStream("field name is not UTF-8", pos) from None
    pos += name_len
    backend = get_backend(backend_id).name
    header = HeaderInfo(
        dimension=dim, n_vertices=n_v, n_cells=n_c, error_bound=xi,
        code_bits=code_bits, n_sequences=n_seq, digest=bytes(digest),
        backend=backend,
        predictor="traversal" if predictor == PREDICTOR_TRAVERSAL else "linear1d",
        seed_rng=rng if flags & FLAG_SEED_RNG else None, name=name,
    )
    return header, pos


def decode(data: bytes, mesh=None) -> tuple[SequenceSet, HeaderInfo]:
    """Inverse of :func:`encode`.  With ``mesh`` the header digest is checked first."""
    data = bytes(data)
    header, pos = read_header(data)
    if mesh is not None and (
        mesh.digest != header.digest
        or mesh.n_vertices != header.n_vertices
        or mesh.n_cells != header.n_cells
    ):
        raise DigestMismatch("payload was compressed against a different mesh")
    if pos + _BODY.size > len(data):
        raise CorruptStream("truncated body record", pos)
    raw_len, crc, packed_len = _BODY.unpack_from(data, pos)
    pos += _BODY.size
    if pos + packed_len != len(data):
        raise CorruptStream(
            f"body length {packed_len} does not match the {len(data) - pos} remaining bytes", pos
        )
    if raw_len > _max_body_size(header):
        raise CorruptStream(f"implausible body size {raw_len}", pos - _BODY.size)
    body = unpack(get_backend(header.backend), data[pos:], raw_len)
    if zlib.crc32(body) != crc:
        raise CorruptStream("body checksum mismatch", pos)

    n_seed, bpos = huffman.read_varint(body, 0)
    if n_seed != header.n_sequences * header.seed_size:
        raise CorruptStream(
            f"{n_seed} seed values for {header.n_sequences} sequences", pos
        )
    if bpos + 8 * n_seed > len(body):
        raise CorruptStream("truncated seed block", pos)
    seeds = np.frombuffer(body, dtype="<f8", count=n_seed, offset=bpos).astype(np.float64)
    if not np.all(np.isfinite(seeds)):
        raise CorruptStream("non-finite seed value", pos)
    bpos += 8 * n_seed
    codes, bpos = huffman.decode(body, bpos)
    if bpos != len(body):
        raise CorruptStream("trailing bytes after the code block", pos)
    if any(c > (1 << header.code_bits) - 1 for c in codes):
        raise CorruptStream("code exceeds the declared code width", pos)
    n_marks = codes.count(END_MARK)
    if n_marks != header.n_sequences or (codes and codes[-1] != END_MARK):
        raise CorruptStream(
            f"code stream holds {n_marks} end marks, header declares {header.n_sequences}", pos
        )
    return SequenceSet(seeds, np.array(codes, dtype=np.uint32), header.seed_size), header


def _max_body_size(h: HeaderInfo) -> int:
    # seeds, then one code per vertex and one end mark per sequence (<= 8 bytes each),
    # then a code table of at most one entry per distinct symbol (<= 6 bytes each)
    n_symbols = h.n_vertices + h.n_sequences
    return (
        64
        + 8 * h.n_sequences * h.seed_size
        + 8 * n_symbols
        + 6 * min(n_symbols, 1 << h.code_bits)
    )


def compression_ratio(original_bytes: int, payload_bytes: int) -> float:
    if original_bytes <= 0 or payload_bytes <= 0:
        raise InvalidValue("sizes must be positive")
    return original_bytes / payload_bytes


def bit_rate(payload_bytes: int, vertex_count: int) -> float:
    if payload_bytes <= 0 or vertex_count <= 0:
        raise InvalidValue("sizes must be positive")
    return 8.0 * payload_bytes / vertex_count

"""Canonical Huffman coding of non-negative integer symbol streams.

Serialized block layout (all varints are unsigned LEB128)::

    varint n_symbols
    n_symbols x (varint symbol_delta, u8 code_length)   # symbols ascending
    varint n_codes
    varint n_bits
    ceil(n_bits / 8) bytes, MSB-first, zero padded
"""

from __future__ import annotations

import heapq
from collections import Counter

from .errors import CorruptStream

MAX_CODE_LENGTH = 64


def write_varint(out: bytearray, value: int) -> None:
    if value < 0:
        raise ValueError("varint must be non-negative")
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def read_varint(buf, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    start = pos
    while True:
        if pos >= len(buf):
            raise CorruptStream("truncated varint", start)
        b = buf[pos]
        pos += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise CorruptStream("varint too long", start)


def code_lengths(freqs: dict[int, int]) -> dict[int, int]:
    """Huffman code length per symbol; ties broken by symbol value for determinism."""
    if not freqs:
        return {}
    if len(freqs) == 1:
        return {next(iter(freqs)): 1}
    symbols = sorted(freqs)
    n = len(symbols)
    parent = [-1] * (2 * n - 1)
    heap = [(freqs[s], i) for i, s in enumerate(symbols)]
    heapq.heapify(heap)
    next_node = n
    while len(heap) > 1:
        f1, a = heapq.heappop(heap)
        f2, b = heapq.heappop(heap)
        parent[a] = parent[b] = next_node
        heapq.heappush(heap, (f1 + f2, next_node))
        next_node += 1
    # parents always have larger ids, so a reverse sweep resolves depths
    node_depth = [0] * (2 * n - 1)
    for node in range(2 * n - 3, -1, -1):
        node_depth[node] = node_depth[parent[node]] + 1
    depth = {s: node_depth[i] for i, s in enumerate(symbols)}
    return depth


def canonical_codes(lengths: dict[int, int]) -> dict[int, tuple[int, int]]:
    """Map symbol -> (code, length), codes assigned in (length, symbol) order."""
    codes = {}
    code = 0
    prev_len = 0
    for sym, length in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0])):
        code <<= length - prev_len
        codes[sym] = (code, length)
        code += 1
        prev_len = length
    return codes


def encode(symbols) -> bytes:
    symbols = list(symbols)
    lengths = code_lengths(Counter(symbols))
    codes = canonical_codes(lengths)

    out = bytearray()
    write_varint(out, len(lengths))
    prev = 0
    for sym in sorted(lengths):
        write_varint(out, sym - prev)
        out.append(lengths[sym])
        prev = sym

    as_bits = {s: format(c, f"0{n}b") for s, (c, n) in codes.items()}
    bits = "".join([as_bits[s] for s in symbols])
    write_varint(out, len(symbols))
    write_varint(out, len(bits))
    if bits:
        n_bytes = (len(bits) + 7) // 8
        out += _pack_bits(bits, n_bytes)
    return bytes(out)


def _pack_bits(bits: str, n_bytes: int) -> bytes:
    padded = bits + "0" * (n_bytes * 8 - len(bits))
    return int(padded, 2).to_bytes(n_bytes, "big")


def decode(buf, pos: int = 0) -> tuple[list[int], int]:
    """Decode one block starting at ``pos``; returns (symbols, position after the block)."""
    table_pos = pos
    n_symbols, pos = read_varint(buf, pos)
    if n_symbols > len(buf) - pos:
        raise CorruptStream(f"code table claims {n_symbols} symbols", table_pos)
    lengths = {}
    sym = 0
    for _ in range(n_symbols):
        delta, pos = read_varint(buf, pos)
        if pos >= len(buf):
            raise CorruptStream("truncated code table", pos)
        length = buf[pos]
        pos += 1
        sym += delta
        if (lengths and delta == 0) or not 1 <= length <= MAX_CODE_LENGTH:
            raise CorruptStream("invalid code table entry", pos - 1)
        lengths[sym] = length
    if sum(2.0 ** -l for l in lengths.values()) > 1.0 + 1e-12:
        raise CorruptStream("code table violates the Kraft inequality", table_pos)

    n_codes, pos = read_varint(buf, pos)
    n_bits, pos = read_varint(buf, pos)
    n_bytes = (n_bits + 7) // 8
    if n_bytes > len(buf) - pos:
        raise CorruptStream("truncated Huffman bit stream", pos)
    if n_codes > n_bits or (n_codes and not lengths):
        raise CorruptStream("inconsistent symbol and bit counts", pos)
    data_pos = pos
    pos += n_bytes
    if n_codes == 0:
        if n_bits:
            raise CorruptStream("bits present for an empty stream", data_pos)
        return [], pos

    max_len = max(lengths.values())
    # canonical decode tables: per length, first code and index of first symbol
    count = [0] * (max_len + 1)
    for length in lengths.values():
        count[length] += 1
    ordered = [s for s, _ in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0]))]
    first_code = [0] * (max_len + 2)
    first_index = [0] * (max_len + 2)
    code = 0
    index = 0
    for length in range(1, max_len + 1):
        code <<= 1
        first_code[length] = code
        first_index[length] = index
        code += count[length]
        index += count[length]

    raw = int.from_bytes(bytes(buf[data_pos:data_pos + n_bytes]), "big")
    bits = format(raw, f"0{n_bytes * 8}b")[:n_bits]
    out = []
    append = out.append
    i = 0
    for _ in range(n_codes):
        code = 0
        length = 0
        while True:
            if i >= n_bits:
                raise CorruptStream("Huffman bit stream ended mid-symbol", data_pos + i // 8)
            code = (code << 1) | (bits[i] == "1")
            i += 1
            length += 1
            if length > max_len:
                raise CorruptStream("invalid Huffman code", data_pos + i // 8)
            offset = code - first_code[length]
            if 0 <= offset < count[length]:
                append(ordered[first_index[length] + offset])
                break
    if i != n_bits:
        raise CorruptStream("trailing bits in Huffman stream", data_pos + i // 8)
    return out, pos

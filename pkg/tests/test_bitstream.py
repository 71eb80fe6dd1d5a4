import dataclasses
import math
import struct
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshsz import bitstream, huffman
from meshsz.backends import BACKENDS, get_backend
from meshsz.bitstream import HeaderInfo, bit_rate, compression_ratio
from meshsz.codec import END_MARK, QuantizerConfig
from meshsz.errors import CorruptStream, DigestMismatch, InvalidValue, UnsupportedVersion
from meshsz.mesh import SimplicialMesh
from meshsz.traversal import SequenceSet, compress

from conftest import random_mesh, smooth_values


def random_sequence_set(rng, seed_size=3, bits=16):
    n_seq = int(rng.integers(1, 20))
    parts = []
    for _ in range(n_seq):
        n = int(rng.integers(0, 200))
        spread = rng.uniform(0.5, 200)
        body = np.clip(np.rint(rng.normal(1 << (bits - 1), spread, n)), 1, (1 << bits) - 1)
        parts.append(np.append(body, END_MARK))
    codes = np.concatenate(parts).astype(np.uint32)
    seeds = rng.normal(0, 10 ** rng.uniform(-3, 6), n_seq * seed_size)
    return SequenceSet(seeds, codes, seed_size)


def header_for(seqs, backend="zstd", dimension=2, n_vertices=1000, bits=16, **kw):
    return HeaderInfo(
        dimension=dimension, n_vertices=n_vertices, n_cells=2 * n_vertices,
        error_bound=0.125, code_bits=bits, n_sequences=seqs.n_sequences,
        digest=bytes(range(16)), backend=backend, **kw,
    )


# --- Huffman -------------------------------------------------------------

@given(st.lists(st.integers(0, 70000), max_size=400))
@settings(max_examples=200, deadline=None)
def test_huffman_round_trip(symbols):
    block = huffman.encode(symbols)
    out, pos = huffman.decode(block + b"tail", 0)
    assert out == symbols
    assert pos == len(block)


def test_huffman_prefix_free_and_optimal_lengths():
    freqs = {0: 45, 1: 13, 2: 12, 3: 16, 4: 9, 5: 5}
    lengths = huffman.code_lengths(freqs)
    # classic textbook example; expected cost 224 bits
    assert sum(freqs[s] * lengths[s] for s in freqs) == 224
    codes = huffman.canonical_codes(lengths)
    words = [format(c, f"0{n}b") for c, n in codes.values()]
    for a in words:
        for b in words:
            assert a == b or not b.startswith(a)


def test_single_symbol_stream():
    symbols = [32768] * 5000
    block = huffman.encode(symbols)
    assert huffman.decode(block)[0] == symbols
    # one bit per symbol, tiny table
    assert len(block) < 5000 // 8 + 16
    bigger = huffman.encode([32768] * 50000)
    assert len(bigger) < 10 * len(block) + 16


def test_entropy_bound_on_skewed_stream():
    rng = np.random.default_rng(11)
    n = 100_000
    symbols = (32768 + np.rint(rng.laplace(0, 3.0, n))).astype(int).tolist()
    freq = Counter(symbols)
    p = np.array(list(freq.values())) / n
    entropy_bytes = -(p * np.log2(p)).sum() * n / 8
    block = huffman.encode(symbols)
    lengths = huffman.code_lengths(freq)
    table = bytearray()
    huffman.write_varint(table, len(lengths))
    prev = 0
    for s in sorted(lengths):
        huffman.write_varint(table, s - prev)
        table.append(lengths[s])
        prev = s
    overhead = len(table) + 8
    assert huffman.decode(block)[0] == symbols
    assert entropy_bytes <= len(block)
    assert len(block) <= 1.05 * (entropy_bytes + overhead)

    # the same stream through the container with the identity back end
    codes = np.array(symbols + [END_MARK], dtype=np.uint32)
    seqs = SequenceSet(np.zeros(3), codes, 3)
    payload = bitstream.encode(seqs, header_for(seqs, "none", n_vertices=n + 3))
    assert len(payload) <= 1.05 * (entropy_bytes + overhead) + 200


@pytest.mark.parametrize("blob", [b"", b"\x05", b"\x01\x00\x40\x01\x01", b"\xff" * 12,
                                  b"\x02\x01\x01\x01\x01\x01\x04\xff"])
def test_huffman_rejects_garbage(blob):
    with pytest.raises(CorruptStream):
        huffman.decode(blob)


def test_kraft_violation_rejected():
    # three symbols of length 1 cannot form a prefix code
    blob = bytes([3, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0x00])
    with pytest.raises(CorruptStream, match="Kraft"):
        huffman.decode(blob)


def test_varint_round_trip():
    for v in (0, 1, 127, 128, 300, 2**32, 2**63 - 1):
        out = bytearray()
        huffman.write_varint(out, v)
        assert huffman.read_varint(out, 0) == (v, len(out))


# --- container -----------------------------------------------------------

def test_hundred_random_round_trips():
    rng = np.random.default_rng(7)
    backends = sorted(BACKENDS)
    for i in range(100):
        bits = int(rng.choice([8, 12, 16, 20]))
        dim = int(rng.choice([2, 3]))
        seqs = random_sequence_set(rng, dim + 1, bits)
        header = header_for(seqs, backends[i % len(backends)], dim, bits=bits,
                            seed_rng=None if i % 3 else i, name=f"f{i}")
        payload = bitstream.encode(seqs, header)
        out, h2 = bitstream.decode(payload)
        assert out == seqs
        assert h2 == header


def test_single_cell_payload_layout():
    mesh = SimplicialMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    seqs = compress(mesh, [1.0, 2.0, 3.0], QuantizerConfig(0.5))
    header = header_for(seqs, "none", n_vertices=3)
    payload = bitstream.encode(seqs, header)
    fixed = bitstream._FIXED.size + 2 + len(b"field") + bitstream._BODY.size
    # body: varint seed count, 3 doubles, Huffman block for [END_MARK]
    assert len(payload) == fixed + 1 + 24 + len(huffman.encode([END_MARK]))
    assert bitstream.decode(payload)[0] == seqs


def test_mesh_digest_checked():
    mesh = random_mesh(2, 50, 1)
    other = random_mesh(2, 50, 2)
    f = smooth_values(mesh)
    seqs = compress(mesh, f, QuantizerConfig(0.01))
    header = dataclasses.replace(header_for(seqs, n_vertices=mesh.n_vertices), n_cells=mesh.n_cells,
                                 digest=mesh.digest)
    payload = bitstream.encode(seqs, header)
    assert bitstream.decode(payload, mesh)[0] == seqs
    with pytest.raises(DigestMismatch):
        bitstream.decode(payload, other)


def test_version_bump_rejected():
    seqs = random_sequence_set(np.random.default_rng(0))
    payload = bytearray(bitstream.encode(seqs, header_for(seqs)))
    payload[4] = bitstream.VERSION + 1
    with pytest.raises(UnsupportedVersion):
        bitstream.decode(bytes(payload))


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_every_truncation_is_a_typed_error(backend):
    seqs = random_sequence_set(np.random.default_rng(1))
    payload = bitstream.encode(seqs, header_for(seqs, backend))
    for cut in range(len(payload)):
        with pytest.raises(CorruptStream):
            bitstream.decode(payload[:cut])
    with pytest.raises(CorruptStream):
        bitstream.decode(payload + b"\x00")


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_bit_flips_never_crash(backend):
    rng = np.random.default_rng(3)
    seqs = random_sequence_set(rng)
    payload = bitstream.encode(seqs, header_for(seqs, backend))
    for _ in range(300):
        buf = bytearray(payload)
        for _ in range(int(rng.integers(1, 4))):
            i = int(rng.integers(len(buf)))
            buf[i] ^= 1 << int(rng.integers(8))
        try:
            out, _ = bitstream.decode(bytes(buf))
        except (CorruptStream, UnsupportedVersion):
            continue
        # flips in the header fields that are not checksummed may survive
        assert isinstance(out, SequenceSet)


@given(st.binary(max_size=300))
@settings(max_examples=300, deadline=None)
def test_arbitrary_bytes_never_crash(blob):
    for data in (blob, bitstream.MAGIC + bytes([bitstream.VERSION]) + blob):
        try:
            bitstream.decode(data)
        except (CorruptStream, UnsupportedVersion):
            pass


def test_corrupt_body_detected_by_crc():
    seqs = random_sequence_set(np.random.default_rng(4))
    payload = bytearray(bitstream.encode(seqs, header_for(seqs, "none")))
    payload[-3] ^= 0x10
    with pytest.raises(CorruptStream, match="checksum"):
        bitstream.decode(bytes(payload))


def test_header_validation_on_encode():
    seqs = random_sequence_set(np.random.default_rng(5))
    with pytest.raises(InvalidValue):
        bitstream.encode(seqs, dataclasses.replace(header_for(seqs), n_sequences=seqs.n_sequences + 1))
    with pytest.raises(InvalidValue):
        bitstream.encode(seqs, header_for(seqs, "brotli"))
    with pytest.raises(InvalidValue):
        bitstream.encode(seqs, header_for(seqs, dimension=3))


def test_unknown_backend_id_is_corrupt():
    seqs = random_sequence_set(np.random.default_rng(6))
    payload = bytearray(bitstream.encode(seqs, header_for(seqs)))
    payload[5] = 200
    with pytest.raises(CorruptStream):
        bitstream.decode(bytes(payload))
    with pytest.raises(CorruptStream):
        get_backend(77)


def test_non_finite_seed_rejected():
    seqs = random_sequence_set(np.random.default_rng(8))
    payload = bitstream.encode(seqs, header_for(seqs, "none"))
    at = payload.index(struct.pack("<d", seqs.seed_values[0]))
    bad = bytearray(payload)
    bad[at:at + 8] = struct.pack("<d", math.nan)
    with pytest.raises(CorruptStream):
        bitstream.decode(bytes(bad))


# --- size metrics --------------------------------------------------------

def test_ratio_examples():
    n = 1234
    assert compression_ratio(8 * n, 8 * n) == 1.0
    assert bit_rate(8 * n, n) == 64.0
    assert compression_ratio(800, 100) == 8.0
    assert bit_rate(100, 100) == 8.0
    with pytest.raises(InvalidValue):
        compression_ratio(0, 10)
    with pytest.raises(InvalidValue):
        bit_rate(10, 0)


@given(st.integers(1, 10**7), st.integers(1, 10**8))
def test_cr_times_br_is_64(n, size):
    assert compression_ratio(8 * n, size) * bit_rate(size, n) == pytest.approx(64.0, rel=1e-12)

"""One-call compression and decompression of a field to/from ``.umz`` bytes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitstream, traversal
from .backends import DEFAULT_BACKEND
from .codec import QuantizerConfig
from .errors import InvalidValue
from .mesh import ScalarField, SimplicialMesh


@dataclass
class CompressionResult:
    payload: bytes
    sequences: traversal.SequenceSet
    decomp_values: np.ndarray
    header: bitstream.HeaderInfo

    @property
    def n_sequences(self) -> int:
        return self.sequences.n_sequences

    @property
    def first_seed_coverage(self) -> float:
        return first_seed_coverage(self.sequences, self.header.n_vertices)


def first_seed_coverage(sequences: traversal.SequenceSet, n_vertices: int) -> float:
    """Fraction of the non-seed vertices that the first sequence quantized."""
    remaining = n_vertices - sequences.seed_size
    if remaining <= 0:
        return 1.0
    return sequences.coded_per_sequence()[0] / remaining


def absolute_bound(values, rel_error_percent: float) -> float:
    """Convert a percentage of the value range into an absolute error bound."""
    values = np.asarray(values, dtype=np.float64)
    value_range = float(values.max() - values.min()) if len(values) else 0.0
    if not rel_error_percent > 0:
        raise InvalidValue("relative error bound must be positive")
    if value_range <= 0:
        raise InvalidValue("field has zero range; give an absolute error bound instead")
    return rel_error_percent / 100.0 * value_range


def compress_field(
    mesh: SimplicialMesh,
    field,
    error_bound: float,
    *,
    code_bits: int = 16,
    backend: str = DEFAULT_BACKEND,
    predictor: str = "traversal",
    seed_rng: int | None = None,
) -> CompressionResult:
    config = QuantizerConfig(error_bound, code_bits)
    name = field.name if isinstance(field, ScalarField) else "field"
    if predictor == "traversal":
        seqs, state = traversal.compress_with_state(mesh, field, config, seed_rng)
        decomp = np.array(state.decomp_values)
    elif predictor == "linear1d":
        if seed_rng is not None:
            raise InvalidValue("seed_rng only applies to the traversal predictor")
        values = field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=float)
        if len(values) != mesh.n_vertices:
            raise InvalidValue("field length does not match the mesh")
        seqs = traversal.compress_linear1d(values, config)
        decomp = traversal.decompress_linear1d(seqs, len(values), config)
    else:
        raise InvalidValue(f"unknown predictor {predictor!r}")

    header = bitstream.HeaderInfo(
        dimension=mesh.dimension,
        n_vertices=mesh.n_vertices,
        n_cells=mesh.n_cells,
        error_bound=float(error_bound),
        code_bits=code_bits,
        n_sequences=seqs.n_sequences,
        digest=mesh.digest,
        backend=backend,
        predictor=predictor,
        seed_rng=seed_rng,
        name=name,
    )
    return CompressionResult(bitstream.encode(seqs, header), seqs, decomp, header)


def decompress_payload(mesh: SimplicialMesh, payload: bytes) -> ScalarField:
    seqs, header = bitstream.decode(payload, mesh)
    config = QuantizerConfig(header.error_bound, header.code_bits)
    if header.predictor == "linear1d":
        values = traversal.decompress_linear1d(seqs, header.n_vertices, config)
        return ScalarField(values, name=header.name)
    return traversal.decompress(mesh, seqs, config, header.seed_rng, name=header.name)

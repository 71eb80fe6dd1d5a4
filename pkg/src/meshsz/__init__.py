"""Error-bounded lossy compression of nodal fields on simplicial meshes."""

from .codec import QuantizerConfig, dequantize, quantize
from .errors import (
    CorruptStream,
    DegenerateCell,
    DigestMismatch,
    EmptyInput,
    InvalidMesh,
    InvalidValue,
    MeshszError,
    NonManifoldMesh,
    ParseError,
    UnsupportedMesh,
    UnsupportedVersion,
)
from .mesh import ScalarField, SimplicialMesh
from .pipeline import compress_field, decompress_payload
from .traversal import SequenceSet, compress, decompress

__version__ = "0.1.0"

__all__ = [
    "CorruptStream", "DegenerateCell", "DigestMismatch", "EmptyInput", "InvalidMesh",
    "InvalidValue", "MeshszError", "NonManifoldMesh", "ParseError", "QuantizerConfig",
    "ScalarField", "SequenceSet", "SimplicialMesh", "UnsupportedMesh", "UnsupportedVersion",
    "compress", "compress_field", "decompress", "decompress_payload", "dequantize", "quantize",
]

"""Seed-and-grow traversal of the dual graph.

Compression and decompression share one walk (``_walk``) so that visiting
order, prediction arithmetic and termination decisions are identical on both
sides; the only difference is how a predicted vertex gets its value.  The
compressor quantizes the true value, the decompressor reads the next code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .codec import END_MARK, QuantizerConfig, dequantize, quantize
from .errors import CorruptStream, EmptyInput, InvalidValue
from .mesh import ScalarField, SimplicialMesh, barycentric_lambdas


@dataclass
class TraversalState:
    node_visited: list[bool]
    cell_visited: list[bool]
    decomp_values: list[float]
    stack: list[tuple[int, int]] = field(default_factory=list)
    n_visited_nodes: int = 0
    next_seed_hint: int = 0

    @classmethod
    def fresh(cls, mesh: SimplicialMesh) -> "TraversalState":
        return cls(
            node_visited=[False] * mesh.n_vertices,
            cell_visited=[False] * mesh.n_cells,
            decomp_values=[0.0] * mesh.n_vertices,
        )

    @property
    def done(self) -> bool:
        return self.n_visited_nodes == len(self.node_visited)


@dataclass(eq=False)
class SequenceSet:
    """Flat storage of traversal sequences.

    ``seed_values`` holds ``seed_size`` lossless values per sequence, in
    traversal order.  ``codes`` holds the quantization codes of all
    sequences back to back, each sequence terminated by ``END_MARK``.
    """

    seed_values: np.ndarray
    codes: np.ndarray
    seed_size: int

    def __post_init__(self):
        self.seed_values = np.ascontiguousarray(self.seed_values, dtype=np.float64).ravel()
        self.codes = np.ascontiguousarray(self.codes, dtype=np.uint32).ravel()
        n_seq = self.n_sequences
        if len(self.codes) and self.codes[-1] != END_MARK:
            raise InvalidValue("code stream must end with an end mark")
        if len(self.seed_values) != n_seq * self.seed_size:
            raise InvalidValue(
                f"{len(self.seed_values)} seed values for {n_seq} sequences of seed size {self.seed_size}"
            )

    @property
    def n_sequences(self) -> int:
        return int(np.count_nonzero(self.codes == END_MARK))

    def sequences(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        ends = np.flatnonzero(self.codes == END_MARK)
        start = 0
        for i, end in enumerate(ends):
            s = i * self.seed_size
            yield self.seed_values[s:s + self.seed_size], self.codes[start:end + 1]
            start = end + 1

    def coded_per_sequence(self) -> list[int]:
        """Number of quantized (non-seed) vertices contributed by each sequence."""
        ends = np.flatnonzero(self.codes == END_MARK)
        return (np.diff(np.concatenate([[-1], ends])) - 1).tolist()

    def __eq__(self, other):
        if not isinstance(other, SequenceSet):
            return NotImplemented
        return (
            self.seed_size == other.seed_size
            and self.seed_values.tobytes() == other.seed_values.tobytes()
            and self.codes.tobytes() == other.codes.tobytes()
        )


def select_next_seed(state: TraversalState, rng: np.random.Generator | None = None) -> int | None:
    """Lowest-index unvisited cell, or ``None`` once every cell is visited.

    With ``rng`` the seed is drawn uniformly from the unvisited cells instead.
    """
    flags = state.cell_visited
    if rng is not None:
        unvisited = [i for i, f in enumerate(flags) if not f]
        if not unvisited:
            return None
        return unvisited[int(rng.integers(len(unvisited)))]
    i = state.next_seed_hint
    n = len(flags)
    while i < n and flags[i]:
        i += 1
    state.next_seed_hint = i
    return i if i < n else None


def _mark_complete_cells(mesh: SimplicialMesh, state: TraversalState, v: int) -> None:
    cells = mesh._cells_list
    node_visited = state.node_visited
    cell_visited = state.cell_visited
    for c in mesh.vertex_cells[v]:
        if not cell_visited[c]:
            for u in cells[c]:
                if not node_visited[u]:
                    break
            else:
                cell_visited[c] = True


def _plant_seed(mesh: SimplicialMesh, state: TraversalState, seed: int, seed_values) -> None:
    state.cell_visited[seed] = True
    for v, value in zip(mesh._cells_list[seed], seed_values):
        if not state.node_visited[v]:
            state.node_visited[v] = True
            state.n_visited_nodes += 1
        state.decomp_values[v] = value
        _mark_complete_cells(mesh, state, v)


def _predict(points, values, target, threshold):
    lam = barycentric_lambdas(points, target, threshold)
    if lam is None:
        return None
    pred = 0.0
    for l, f in zip(lam, values):
        pred += l * f
    # overflow at extreme magnitudes is handled like a degenerate cell
    return pred if math.isfinite(pred) else None


def _walk(
    mesh: SimplicialMesh,
    state: TraversalState,
    seed: int,
    resolve: Callable[[float, int], float | None],
) -> None:
    """Depth-first walk from ``seed``; ends on an unpredictable vertex or an empty stack.

    Neighbors are pushed in descending index order so the smallest index pops
    first.  ``resolve(predicted, vertex)`` returns the reconstructed value or
    ``None`` for unpredictable.
    """
    adj = mesh.face_adjacency
    cells = mesh._cells_list
    coords = mesh._coords_list
    threshold = mesh.degeneracy_threshold
    node_visited = state.node_visited
    cell_visited = state.cell_visited
    values = state.decomp_values

    stack = [(n, seed) for n in reversed(adj[seed]) if not cell_visited[n]]
    while stack:
        cur, prev = stack.pop()
        if cell_visited[cur]:
            continue
        prev_cell = cells[prev]
        new = [v for v in cells[cur] if v not in prev_cell]
        if len(new) != 1:
            raise RuntimeError(f"cells {prev} and {cur} do not share a facet")
        v = new[0]
        if node_visited[v]:
            cell_visited[cur] = True
        else:
            pred = _predict(
                [coords[u] for u in prev_cell], [values[u] for u in prev_cell], coords[v], threshold
            )
            if pred is None:
                break
            rec = resolve(pred, v)
            if rec is None:
                break
            values[v] = rec
            node_visited[v] = True
            state.n_visited_nodes += 1
            _mark_complete_cells(mesh, state, v)
            cell_visited[cur] = True
        for n in reversed(adj[cur]):
            if not cell_visited[n]:
                stack.append((n, cur))
    state.stack = stack


def traverse_from_seed(
    mesh: SimplicialMesh,
    field,
    config: QuantizerConfig,
    seed_cell: int,
    state: TraversalState,
) -> list[int]:
    """Walk from an already planted seed, returning the codes it emits (end mark included)."""
    return _traverse(mesh, _as_values(field), config, seed_cell, state)


def _traverse(mesh, actual: list[float], config, seed_cell, state) -> list[int]:
    codes: list[int] = []

    def resolve(pred, v):
        out = quantize(config, pred, actual[v])
        if not out.predictable:
            return None
        codes.append(out.code)
        return out.reconstructed

    _walk(mesh, state, seed_cell, resolve)
    codes.append(END_MARK)
    return codes


def _as_values(field) -> list[float]:
    if isinstance(field, ScalarField):
        return field.values.tolist()
    arr = np.asarray(field, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidValue("field contains non-finite values")
    return arr.tolist()


def compress_with_state(
    mesh: SimplicialMesh,
    field,
    config: QuantizerConfig,
    seed_rng: int | None = None,
) -> tuple[SequenceSet, TraversalState]:
    if mesh.n_cells == 0 or mesh.n_vertices == 0:
        raise EmptyInput("mesh has no cells")
    actual = _as_values(field)
    if len(actual) != mesh.n_vertices:
        raise InvalidValue(f"field has {len(actual)} values, mesh has {mesh.n_vertices} vertices")

    rng = np.random.default_rng(seed_rng) if seed_rng is not None else None
    state = TraversalState.fresh(mesh)
    seed_values: list[float] = []
    codes: list[int] = []
    cells = mesh._cells_list
    while not state.done:
        seed = select_next_seed(state, rng)
        vals = [actual[v] for v in cells[seed]]
        seed_values.extend(vals)
        _plant_seed(mesh, state, seed, vals)
        codes.extend(_traverse(mesh, actual, config, seed, state))

    seqs = SequenceSet(np.array(seed_values), np.array(codes, dtype=np.uint32), mesh.dimension + 1)
    return seqs, state


def compress(mesh: SimplicialMesh, field, config: QuantizerConfig, seed_rng: int | None = None) -> SequenceSet:
    return compress_with_state(mesh, field, config, seed_rng)[0]


class _CodeReader:
    def __init__(self, codes):
        self.codes = codes.tolist() if isinstance(codes, np.ndarray) else list(codes)
        self.pos = 0

    def next(self) -> int:
        if self.pos >= len(self.codes):
            raise CorruptStream("code stream exhausted mid-traversal")
        c = self.codes[self.pos]
        self.pos += 1
        return c


def decompress(
    mesh: SimplicialMesh,
    sequences: SequenceSet,
    config: QuantizerConfig,
    seed_rng: int | None = None,
    name: str = "field",
) -> ScalarField:
    """Replay the traversal, consuming codes, and return the reconstructed field."""
    if mesh.n_cells == 0:
        raise EmptyInput("mesh has no cells")
    seed_size = mesh.dimension + 1
    if sequences.seed_size != seed_size:
        raise CorruptStream(f"seed size {sequences.seed_size} does not match mesh dimension")
    rng = np.random.default_rng(seed_rng) if seed_rng is not None else None
    state = TraversalState.fresh(mesh)
    reader = _CodeReader(sequences.codes)
    seed_values = sequences.seed_values.tolist()
    seed_pos = 0
    cells = mesh._cells_list

    while not state.done:
        seed = select_next_seed(state, rng)
        if seed_pos + seed_size > len(seed_values):
            raise CorruptStream("seed values exhausted before all vertices were reconstructed")
        vals = seed_values[seed_pos:seed_pos + seed_size]
        seed_pos += seed_size
        _plant_seed(mesh, state, seed, vals)

        ended = False

        def resolve(pred, v):
            nonlocal ended
            code = reader.next()
            if code == END_MARK:
                ended = True
                return None
            value = dequantize(config, pred, code)
            if not math.isfinite(value):
                raise CorruptStream(f"code {code} reconstructs a non-finite value")
            return value

        _walk(mesh, state, seed, resolve)
        if not ended and reader.next() != END_MARK:
            raise CorruptStream(f"expected end mark at code {reader.pos - 1}")

    if reader.pos != len(reader.codes) or seed_pos != len(seed_values):
        raise CorruptStream("trailing data after the last sequence")
    return ScalarField(np.array(state.decomp_values), name=name)


def compress_linear1d(field, config: QuantizerConfig) -> SequenceSet:
    """Index-order baseline: each value predicted by the previous reconstructed value."""
    actual = _as_values(field)
    if not actual:
        raise EmptyInput("field is empty")
    seed_values = [actual[0]]
    codes: list[int] = []
    prev = actual[0]
    for x in actual[1:]:
        out = quantize(config, prev, x)
        if out.predictable:
            codes.append(out.code)
            prev = out.reconstructed
        else:
            codes.append(END_MARK)
            seed_values.append(x)
            prev = x
    codes.append(END_MARK)
    return SequenceSet(np.array(seed_values), np.array(codes, dtype=np.uint32), 1)


def decompress_linear1d(sequences: SequenceSet, n_values: int, config: QuantizerConfig) -> np.ndarray:
    if sequences.seed_size != 1:
        raise CorruptStream("linear1d stream must have seed size 1")
    out = []
    for seeds, codes in sequences.sequences():
        prev = float(seeds[0])
        out.append(prev)
        for c in codes[:-1].tolist():
            prev = dequantize(config, prev, c)
            if not math.isfinite(prev):
                raise CorruptStream(f"code {c} reconstructs a non-finite value")
            out.append(prev)
    if len(out) != n_values:
        raise CorruptStream(f"stream holds {len(out)} values, expected {n_values}")
    return np.array(out)

"""Simplicial meshes, dual-graph adjacency and barycentric transforms."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateCell, InvalidMesh, InvalidValue, NonManifoldMesh

DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class BarycentricCoords:
    lambdas: tuple[float, ...]

    def __iter__(self):
        return iter(self.lambdas)

    def __len__(self):
        return len(self.lambdas)

    def __getitem__(self, i):
        return self.lambdas[i]

    @property
    def inside(self) -> bool:
        return all(0.0 <= lam <= 1.0 for lam in self.lambdas)


@dataclass(frozen=True)
class ScalarField:
    values: np.ndarray
    name: str = "field"
    units: str | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise InvalidValue("field values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise InvalidValue(f"field {self.name!r} contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @property
    def value_range(self) -> float:
        if len(self.values) == 0:
            return 0.0
        return float(self.values.max() - self.values.min())


def build_adjacency(cells, dimension: int) -> list[list[int]]:
    """Face adjacency of the dual graph.

    Two cells are neighbors iff they share a facet (``dimension`` vertices).
    Facets are grouped by their sorted vertex tuple; a facet owned by more
    than two cells makes the mesh non-manifold.  Neighbor lists are sorted.
    """
    cells = np.asarray(cells, dtype=np.int64)
    n_cells = len(cells)
    if n_cells == 0:
        return []
    k = dimension + 1
    if cells.ndim != 2 or cells.shape[1] != k:
        raise InvalidMesh(f"cells must have {k} vertices each")

    # all facets: drop one local vertex at a time
    facets = np.concatenate(
        [np.delete(cells, j, axis=1) for j in range(k)], axis=0
    )
    facets.sort(axis=1)
    owners = np.tile(np.arange(n_cells, dtype=np.int64), k)

    order = np.lexsort(facets.T[::-1])
    facets = facets[order]
    owners = owners[order]
    same = np.all(facets[1:] == facets[:-1], axis=1)

    if len(same) > 1 and np.any(same[1:] & same[:-1]):
        bad = int(np.flatnonzero(same[1:] & same[:-1])[0]) + 1
        raise NonManifoldMesh(
            f"facet {tuple(facets[bad].tolist())} is shared by more than two cells"
        )

    pair = np.flatnonzero(same)
    a = owners[pair]
    b = owners[pair + 1]
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    order = np.lexsort((dst, src))
    src = src[order]
    dst = dst[order]

    adjacency: list[list[int]] = [[] for _ in range(n_cells)]
    bounds = np.searchsorted(src, np.arange(n_cells + 1))
    dst_list = dst.tolist()
    for i in range(n_cells):
        lo, hi = bounds[i], bounds[i + 1]
        if hi > lo:
            adjacency[i] = dst_list[lo:hi]
    return adjacency


class SimplicialMesh:
    """A 2D triangle or 3D tetrahedral mesh.

    Arrays are copied and frozen on construction; the mesh is immutable.
    Every vertex must be referenced by at least one cell.
    """

    def __init__(self, vertices, cells, dimension: int | None = None):
        vertices = np.array(vertices, dtype=np.float64)
        cells = np.array(cells, dtype=np.int64)
        if vertices.ndim != 2:
            raise InvalidMesh("vertices must be an (n, d) array")
        if dimension is None:
            dimension = vertices.shape[1]
        if dimension not in (2, 3):
            raise InvalidMesh(f"dimension must be 2 or 3, got {dimension}")
        if vertices.shape[1] != dimension:
            raise InvalidMesh(
                f"vertices have {vertices.shape[1]} coordinates, expected {dimension}"
            )
        if cells.size == 0:
            cells = cells.reshape(0, dimension + 1)
        if cells.ndim != 2 or cells.shape[1] != dimension + 1:
            raise InvalidMesh(f"cells must have {dimension + 1} vertex indices each")
        if not np.all(np.isfinite(vertices)):
            raise InvalidMesh("vertex coordinates must be finite")
        n = len(vertices)
        if cells.size:
            if cells.min() < 0 or cells.max() >= n:
                raise InvalidMesh("cell references a vertex index out of range")
            srt = np.sort(cells, axis=1)
            if np.any(srt[:, 1:] == srt[:, :-1]):
                bad = int(np.flatnonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))[0])
                raise InvalidMesh(f"cell {bad} repeats a vertex index")
        used = np.zeros(n, dtype=bool)
        used[cells.ravel()] = True
        if not used.all():
            raise InvalidMesh(
                f"vertex {int(np.flatnonzero(~used)[0])} does not belong to any cell"
            )

        vertices.setflags(write=False)
        cells.setflags(write=False)
        self.dimension = dimension
        self.vertices = vertices
        self.cells = cells
        self.face_adjacency = build_adjacency(cells, dimension)

    def __repr__(self):
        return (
            f"SimplicialMesh(dimension={self.dimension}, "
            f"n_vertices={self.n_vertices}, n_cells={self.n_cells})"
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def neighbors(self, cell_index: int) -> list[int]:
        return self.face_adjacency[cell_index]

    @cached_property
    def characteristic_length(self) -> float:
        if self.n_vertices == 0:
            return 0.0
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(span))

    @cached_property
    def degeneracy_threshold(self) -> float:
        return DEGENERACY_RTOL * self.characteristic_length ** self.dimension

    @cached_property
    def jacobians(self) -> np.ndarray:
        """Signed Jacobian determinant of every cell (edges relative to the last vertex)."""
        p = self.vertices[self.cells]
        edges = p[:, :-1, :] - p[:, -1:, :]
        # columns are the edge vectors; det is transpose-invariant
        return np.linalg.det(edges) if len(edges) else np.zeros(0)

    @cached_property
    def volumes(self) -> np.ndarray:
        vol = np.abs(self.jacobians) / math.factorial(self.dimension)
        vol[np.abs(self.jacobians) < self.degeneracy_threshold] = 0.0
        vol.setflags(write=False)
        return vol

    @property
    def total_volume(self) -> float:
        return float(self.volumes.sum())

    @cached_property
    def vertex_cells(self) -> list[list[int]]:
        """Cells incident to each vertex, ascending."""
        flat = self.cells.ravel()
        owner = np.repeat(np.arange(self.n_cells), self.dimension + 1)
        order = np.lexsort((owner, flat))
        bounds = np.searchsorted(flat[order], np.arange(self.n_vertices + 1))
        owner_sorted = owner[order].tolist()
        return [owner_sorted[bounds[v]:bounds[v + 1]] for v in range(self.n_vertices)]

    @cached_property
    def incident_volume(self) -> np.ndarray:
        """Total volume of the cells incident to each vertex."""
        out = np.zeros(self.n_vertices)
        np.add.at(out, self.cells.ravel(), np.repeat(self.volumes, self.dimension + 1))
        return out

    @cached_property
    def digest(self) -> bytes:
        """16-byte content hash of dimension, coordinates and connectivity."""
        h = hashlib.blake2b(digest_size=16)
        h.update(bytes([self.dimension]))
        h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.cells, dtype="<i8").tobytes())
        return h.digest()

    # plain-Python views used by the traversal hot loop
    @cached_property
    def _coords_list(self) -> list[tuple[float, ...]]:
        return [tuple(row) for row in self.vertices.tolist()]

    @cached_property
    def _cells_list(self) -> list[tuple[int, ...]]:
        return [tuple(row) for row in self.cells.tolist()]

    def is_degenerate(self, cell_index: int) -> bool:
        return abs(self.jacobians[cell_index]) < self.degeneracy_threshold

    def relabel_vertices(self, permutation) -> "SimplicialMesh":
        """Mesh with vertex ``i`` moved to position ``permutation[i]``."""
        perm = np.asarray(permutation, dtype=np.int64)
        verts = np.empty_like(self.vertices)
        verts[perm] = self.vertices
        return SimplicialMesh(verts, perm[self.cells], self.dimension)


def barycentric_lambdas(points, p, threshold: float):
    """Barycentric coordinates of ``p`` w.r.t. the simplex ``points``.

    Solves the affine system by Cramer's rule on the edge vectors relative to
    ``points[0]``.  Returns ``None`` when the simplex Jacobian magnitude is
    below ``threshold``.
    """
    if len(points) == 3:
        (ax, ay), (bx, by), (cx, cy) = points
        px, py = p
        e1x, e1y = bx - ax, by - ay
        e2x, e2y = cx - ax, cy - ay
        rx, ry = px - ax, py - ay
        det = e1x * e2y - e2x * e1y
        if abs(det) < threshold:
            return None
        l1 = (rx * e2y - e2x * ry) / det
        l2 = (e1x * ry - rx * e1y) / det
        return (1.0 - l1 - l2, l1, l2)

    (ax, ay, az), (bx, by, bz), (cx, cy, cz), (dx, dy, dz) = points
    px, py, pz = p
    e1x, e1y, e1z = bx - ax, by - ay, bz - az
    e2x, e2y, e2z = cx - ax, cy - ay, cz - az
    e3x, e3y, e3z = dx - ax, dy - ay, dz - az
    rx, ry, rz = px - ax, py - ay, pz - az
    # cofactors of the 3x3 system [e1 e2 e3] l = r
    c23x = e2y * e3z - e2z * e3y
    c23y = e2z * e3x - e2x * e3z
    c23z = e2x * e3y - e2y * e3x
    det = e1x * c23x + e1y * c23y + e1z * c23z
    if abs(det) < threshold:
        return None
    l1 = (rx * c23x + ry * c23y + rz * c23z) / det
    c31x = e3y * e1z - e3z * e1y
    c31y = e3z * e1x - e3x * e1z
    c31z = e3x * e1y - e3y * e1x
    l2 = (rx * c31x + ry * c31y + rz * c31z) / det
    c12x = e1y * e2z - e1z * e2y
    c12y = e1z * e2x - e1x * e2z
    c12z = e1x * e2y - e1y * e2x
    l3 = (rx * c12x + ry * c12y + rz * c12z) / det
    return (1.0 - l1 - l2 - l3, l1, l2, l3)


def cartesian_to_barycentric(mesh: SimplicialMesh, cell_index: int, point) -> BarycentricCoords:
    cell = mesh._cells_list[cell_index]
    coords = mesh._coords_list
    point = tuple(float(x) for x in point)
    if len(point) != mesh.dimension:
        raise InvalidValue(f"point must have {mesh.dimension} coordinates")
    lam = barycentric_lambdas([coords[v] for v in cell], point, mesh.degeneracy_threshold)
    if lam is None:
        raise DegenerateCell(cell_index, float(mesh.jacobians[cell_index]))
    return BarycentricCoords(lam)


def barycentric_to_cartesian(mesh: SimplicialMesh, cell_index: int, lambdas) -> np.ndarray:
    lam = np.asarray(tuple(lambdas), dtype=np.float64)
    return lam @ mesh.vertices[mesh.cells[cell_index]]


def barycentric_predict(mesh: SimplicialMesh, cell_index: int, target_vertex: int, known_values) -> float:
    """Extrapolate the cell's linear interpolant to another vertex's position."""
    cell = mesh._cells_list[cell_index]
    if target_vertex in cell:
        raise InvalidValue(f"vertex {target_vertex} belongs to cell {cell_index}")
    lam = cartesian_to_barycentric(mesh, cell_index, mesh._coords_list[target_vertex])
    pred = 0.0
    for l, f in zip(lam, known_values):
        pred += l * float(f)
    return pred


def cell_volume(mesh: SimplicialMesh, cell_index: int) -> float:
    return float(mesh.volumes[cell_index])

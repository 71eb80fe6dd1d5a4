"""Mesh/field files and synthetic datasets.

Two file formats are supported:

* legacy VTK, ASCII, ``DATASET UNSTRUCTURED_GRID`` with triangle (type 5)
  or tetrahedron (type 10) cells and ``POINT_DATA`` scalars;
* a raw little-endian binary bundle (``.umesh``) described in FORMAT.md.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidMesh, InvalidValue, ParseError, UnsupportedMesh
from .mesh import ScalarField, SimplicialMesh

VTK_TRIANGLE = 5
VTK_TETRA = 10


@dataclass
class DatasetBundle:
    mesh: SimplicialMesh
    fields: dict[str, ScalarField] = field(default_factory=dict)
    times: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, f in self.fields.items():
            if len(f) != self.mesh.n_vertices:
                raise InvalidValue(
                    f"field {name!r} has {len(f)} values, mesh has {self.mesh.n_vertices} vertices"
                )

    def add(self, name: str, values, time: float | None = None) -> None:
        f = ScalarField(values, name=name)
        if len(f) != self.mesh.n_vertices:
            raise InvalidValue(f"field {name!r} length does not match the mesh")
        self.fields[name] = f
        if time is not None:
            self.times[name] = time

    def field(self, name: str | None = None) -> ScalarField:
        if not self.fields:
            raise InvalidValue("bundle has no fields")
        if name is None:
            return next(iter(self.fields.values()))
        try:
            return self.fields[name]
        except KeyError:
            raise InvalidValue(
                f"no field named {name!r}; available: {', '.join(self.fields)}"
            ) from None


# -- legacy VTK --------------------------------------------------------------

class _Tokens:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.line_no = 0  # 1-based number of the current line
        self._buf: list[str] = []

    def next_line(self) -> str | None:
        """Next non-blank line (whole), discarding any pending tokens."""
        self._buf = []
        while self.line_no < len(self.lines):
            self.line_no += 1
            line = self.lines[self.line_no - 1].strip()
            if line:
                return line
        return None

    def token(self) -> str:
        while not self._buf:
            if self.line_no >= len(self.lines):
                raise ParseError("unexpected end of file", self.line_no)
            self.line_no += 1
            self._buf = self.lines[self.line_no - 1].split()[::-1]
        return self._buf.pop()

    def has_pending(self) -> bool:
        return bool(self._buf)

    def push_back(self, tok: str) -> None:
        self._buf.append(tok)

    def skip_line(self) -> None:
        self._buf = []

    def numbers(self, n: int, kind=float) -> list:
        out = []
        for _ in range(n):
            tok = self.token()
            try:
                out.append(kind(tok))
            except ValueError:
                raise ParseError(f"expected a number, got {tok!r}", self.line_no) from None
        return out

    def integer(self, what: str) -> int:
        tok = self.token()
        try:
            value = int(tok)
        except ValueError:
            raise ParseError(f"expected {what}, got {tok!r}", self.line_no) from None
        if value < 0:
            raise ParseError(f"{what} must be non-negative", self.line_no)
        return value


def read_vtk_unstructured(path) -> DatasetBundle:
    data = Path(path).read_bytes()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError(f"file is not ASCII (byte {exc.start})", None) from None
    return parse_vtk(text)


def parse_vtk(text: str) -> DatasetBundle:
    tk = _Tokens(text)
    head = tk.next_line()
    if head is None or not head.lower().startswith("# vtk datafile"):
        raise ParseError("missing '# vtk DataFile' header", 1)
    if tk.line_no >= len(tk.lines):
        raise ParseError("missing title line", tk.line_no + 1)
    tk.line_no += 1  # title line, may be blank
    fmt = tk.next_line()
    if fmt is None or fmt.upper() != "ASCII":
        raise ParseError(f"only ASCII legacy VTK is supported, got {fmt!r}", tk.line_no)
    ds = tk.next_line()
    if ds is None or ds.upper().split()[:2] != ["DATASET", "UNSTRUCTURED_GRID"]:
        raise ParseError(f"expected DATASET UNSTRUCTURED_GRID, got {ds!r}", tk.line_no)

    points = None
    cells = None
    cell_types = None
    fields: dict[str, np.ndarray] = {}
    n_point_data = None
    section = None

    while True:
        try:
            kw = tk.token()
        except ParseError:
            break
        key = kw.upper()
        line = tk.line_no
        if key == "POINTS":
            n = tk.integer("point count")
            tk.token()  # data type
            points = np.array(tk.numbers(3 * n), dtype=np.float64).reshape(n, 3)
        elif key == "CELLS":
            cells = _read_cells(tk)
        elif key == "CELL_TYPES":
            n = tk.integer("cell count")
            cell_types = tk.numbers(n, int)
        elif key == "POINT_DATA":
            n_point_data = tk.integer("point data count")
            section = "point"
        elif key == "CELL_DATA":
            tk.integer("cell data count")
            section = "cell"
        elif key == "SCALARS":
            name = tk.token()
            tk.token()  # data type
            ncomp = 1
            if tk.has_pending():
                ncomp = tk.integer("component count")
            if ncomp != 1:
                raise ParseError("only single-component SCALARS are supported", line)
            lut = tk.token()
            if lut.upper() != "LOOKUP_TABLE":
                raise ParseError(f"expected LOOKUP_TABLE, got {lut!r}", tk.line_no)
            tk.token()
            count = n_point_data if section == "point" else _cell_count(cells, line)
            if count is None:
                raise ParseError("SCALARS outside a data section", line)
            values = np.array(tk.numbers(count), dtype=np.float64)
            if section == "point":
                fields[name.replace("%20", " ")] = values
        elif key == "FIELD":
            tk.token()  # field-data name
            n_arrays = tk.integer("array count")
            for _ in range(n_arrays):
                name = tk.token()
                ncomp = tk.integer("component count")
                ntup = tk.integer("tuple count")
                tk.token()
                values = np.array(tk.numbers(ncomp * ntup), dtype=np.float64)
                if section == "point" and ncomp == 1:
                    fields[name.replace("%20", " ")] = values
        elif key in ("METADATA", "INFORMATION", "NAME", "DATA"):
            # metadata blocks run until a blank line; skip to the next keyword line
            tk.skip_line()
        else:
            raise ParseError(f"unexpected keyword {kw!r}", line)

    if points is None:
        raise ParseError("missing POINTS section", tk.line_no)
    if cells is None or cell_types is None:
        raise ParseError("missing CELLS or CELL_TYPES section", tk.line_no)
    if len(cells) != len(cell_types):
        raise ParseError("CELLS and CELL_TYPES counts differ", tk.line_no)
    if n_point_data is not None and n_point_data != len(points):
        raise ParseError("POINT_DATA count differs from POINTS count", tk.line_no)

    kinds = set(cell_types)
    if kinds - {VTK_TRIANGLE, VTK_TETRA}:
        bad = sorted(kinds - {VTK_TRIANGLE, VTK_TETRA})
        raise UnsupportedMesh(f"unsupported VTK cell type(s) {bad}; only triangles and tetrahedra")
    if len(kinds) > 1:
        raise UnsupportedMesh("mixed triangle/tetrahedron meshes are not supported")
    dim = 2 if kinds == {VTK_TRIANGLE} else 3
    for c in cells:
        if len(c) != dim + 1:
            raise ParseError(f"cell with {len(c)} vertices does not match its cell type", None)
    if dim == 2:
        if np.any(points[:, 2] != 0):
            raise UnsupportedMesh("triangle meshes must lie in the z = 0 plane")
        points = points[:, :2]
    mesh = SimplicialMesh(points, np.array(cells, dtype=np.int64).reshape(-1, dim + 1), dim)
    bundle = DatasetBundle(mesh)
    for name, values in fields.items():
        bundle.add(name, values)
    return bundle


def _cell_count(cells, line):
    if cells is None:
        raise ParseError("CELL_DATA before CELLS", line)
    return len(cells)


def _read_cells(tk: _Tokens) -> list[list[int]]:
    n = tk.integer("cell count")
    size = tk.integer("cell list size")
    nxt = tk.token()
    if nxt.upper() == "OFFSETS":
        # version 5.x layout: n is the offset count
        tk.token()
        offsets = tk.numbers(n, int)
        kw = tk.token()
        if kw.upper() != "CONNECTIVITY":
            raise ParseError(f"expected CONNECTIVITY, got {kw!r}", tk.line_no)
        tk.token()
        conn = tk.numbers(size, int)
        if offsets and (offsets[0] != 0 or offsets[-1] != size or any(
            b < a for a, b in zip(offsets, offsets[1:])
        )):
            raise ParseError("invalid OFFSETS array", tk.line_no)
        return [conn[a:b] for a, b in zip(offsets, offsets[1:])]
    tk.push_back(nxt)
    cells = []
    used = 0
    for _ in range(n):
        k = tk.integer("cell vertex count")
        cells.append(tk.numbers(k, int))
        used += k + 1
    if used != size:
        raise ParseError(f"CELLS size {size} does not match its {used} entries", tk.line_no)
    return cells


def _vtk_name(name: str) -> str:
    return name.replace(" ", "%20") or "field"


def format_vtk(bundle: DatasetBundle, title: str = "meshsz dataset") -> str:
    mesh = bundle.mesh
    d = mesh.dimension
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} double"]
    for row in mesh.vertices.tolist():
        xyz = row if d == 3 else row + [0.0]
        out.append(" ".join(repr(float(x)) for x in xyz))
    out.append(f"CELLS {mesh.n_cells} {mesh.n_cells * (d + 2)}")
    for c in mesh.cells.tolist():
        out.append(f"{d + 1} " + " ".join(map(str, c)))
    out.append(f"CELL_TYPES {mesh.n_cells}")
    ctype = str(VTK_TRIANGLE if d == 2 else VTK_TETRA)
    out.extend([ctype] * mesh.n_cells)
    if bundle.fields:
        out.append(f"POINT_DATA {mesh.n_vertices}")
        for name, f in bundle.fields.items():
            out.append(f"SCALARS {_vtk_name(name)} double 1")
            out.append("LOOKUP_TABLE default")
            out.extend(repr(x) for x in f.values.tolist())
    return "\n".join(out) + "\n"


def write_vtk_unstructured(path, bundle: DatasetBundle) -> None:
    Path(path).write_text(format_vtk(bundle), encoding="ascii", newline="\n")


# -- raw binary bundle -------------------------------------------------------

UMESH_MAGIC = b"UMSH"
UMESH_VERSION = 1
_UMESH_HEAD = struct.Struct("<4sBBHQQI")


def write_raw(path, bundle: DatasetBundle) -> None:
    mesh = bundle.mesh
    parts = [_UMESH_HEAD.pack(UMESH_MAGIC, UMESH_VERSION, mesh.dimension, 0,
                              mesh.n_vertices, mesh.n_cells, len(bundle.fields)),
             mesh.vertices.astype("<f8").tobytes(),
             mesh.cells.astype("<i8").tobytes()]
    for name, f in bundle.fields.items():
        raw = name.encode("utf-8")
        t = bundle.times.get(name, math.nan)
        parts.append(struct.pack("<Hd", len(raw), t) + raw)
        parts.append(f.values.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_raw(path) -> DatasetBundle:
    return parse_raw(Path(path).read_bytes())


def parse_raw(data: bytes) -> DatasetBundle:
    if len(data) < _UMESH_HEAD.size:
        raise ParseError("truncated .umesh header")
    magic, version, dim, _, nv, nc, nf = _UMESH_HEAD.unpack_from(data, 0)
    if magic != UMESH_MAGIC:
        raise ParseError("bad .umesh magic")
    if version != UMESH_VERSION:
        raise ParseError(f"unsupported .umesh version {version}")
    if dim not in (2, 3):
        raise ParseError(f"invalid dimension {dim}")
    pos = _UMESH_HEAD.size
    need = 8 * nv * dim + 8 * nc * (dim + 1)
    if pos + need > len(data):
        raise ParseError("truncated .umesh arrays")
    verts = np.frombuffer(data, "<f8", nv * dim, pos).reshape(nv, dim)
    pos += 8 * nv * dim
    cells = np.frombuffer(data, "<i8", nc * (dim + 1), pos).reshape(nc, dim + 1)
    pos += 8 * nc * (dim + 1)
    bundle = DatasetBundle(SimplicialMesh(verts, cells, dim))
    for _ in range(nf):
        if pos + 10 > len(data):
            raise ParseError("truncated .umesh field record")
        name_len, t = struct.unpack_from("<Hd", data, pos)
        pos += 10
        if pos + name_len + 8 * nv > len(data):
            raise ParseError("truncated .umesh field data")
        try:
            name = data[pos:pos + name_len].decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("field name is not UTF-8") from None
        pos += name_len
        values = np.frombuffer(data, "<f8", nv, pos)
        pos += 8 * nv
        bundle.add(name, values, None if math.isnan(t) else t)
    if pos != len(data):
        raise ParseError("trailing bytes after the last .umesh field")
    return bundle


def read_bundle(path) -> DatasetBundle:
    """Read a ``.vtk`` or ``.umesh`` file, chosen by extension."""
    path = Path(path)
    if path.suffix.lower() == ".umesh":
        return read_raw(path)
    return read_vtk_unstructured(path)


def write_bundle(path, bundle: DatasetBundle) -> None:
    path = Path(path)
    if path.suffix.lower() == ".umesh":
        write_raw(path, bundle)
    else:
        write_vtk_unstructured(path, bundle)


# -- synthetic datasets ------------------------------------------------------

def _delaunay_mesh(points: np.ndarray) -> SimplicialMesh:
    from scipy.spatial import Delaunay

    tri = Delaunay(points)
    cells = np.asarray(tri.simplices, dtype=np.int64)
    dim = points.shape[1]
    mesh = SimplicialMesh(points, cells, dim) if _all_used(cells, len(points)) else None
    if mesh is None or np.any(np.abs(mesh.jacobians) < mesh.degeneracy_threshold):
        span = np.linalg.norm(points.max(axis=0) - points.min(axis=0))
        p = points[cells]
        jac = np.abs(np.linalg.det(p[:, :-1] - p[:, -1:]))
        cells = cells[jac >= 1e-12 * span ** dim]
        used = np.unique(cells)
        remap = np.full(len(points), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        mesh = SimplicialMesh(points[used], remap[cells], dim)
    return mesh


def _all_used(cells, n):
    used = np.zeros(n, dtype=bool)
    used[cells.ravel()] = True
    return bool(used.all())


def _smooth_field(p: np.ndarray) -> np.ndarray:
    x = p[:, 0]
    y = p[:, 1]
    z = p[:, 2] if p.shape[1] == 3 else 0.0
    return np.sin(2.0 * np.pi * x) * np.cos(np.pi * y) + 0.5 * np.cos(np.pi * (x + z))


def _sunflower_disk(n: int, radius: float, rng, jitter: float) -> np.ndarray:
    """Near-uniform points in a disk (Vogel spiral) with optional jitter."""
    k = np.arange(n) + 0.5
    r = radius * np.sqrt(k / n)
    theta = k * np.pi * (3.0 - math.sqrt(5.0))
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    if jitter:
        spacing = radius * math.sqrt(math.pi / n)
        pts += rng.uniform(-jitter, jitter, pts.shape) * spacing
        norm = np.linalg.norm(pts, axis=1)
        outside = norm > radius
        pts[outside] *= (radius / norm[outside])[:, None]
    return pts


def gaussian_blobs(points: np.ndarray, t: float, period: float, orbit: float,
                   sigma: float, amplitude: float) -> np.ndarray:
    """Two Gaussian blobs, phase pi apart, rotating about the origin."""
    phase = 2.0 * math.pi * math.fmod(t / period, 1.0)
    out = np.zeros(len(points))
    for offset in (0.0, math.pi):
        c = orbit * np.array([math.cos(phase + offset), math.sin(phase + offset)])
        r2 = np.sum((points - c) ** 2, axis=1)
        out += amplitude * np.exp(-r2 / (2.0 * sigma * sigma))
    return out


def _heated_shape_radius(theta):
    return 0.25 * (1.0 + 0.25 * np.sin(3.0 * theta) + 0.1 * np.cos(5.0 * theta))


def heated_plate_temperature(points: np.ndarray, band: float = 0.08,
                             t_hot: float = 100.0, t_cold: float = 20.0) -> np.ndarray:
    """Hot inside an irregular star-shaped region, cold outside, linear across a band."""
    rel = points - 0.5
    rho = np.hypot(rel[:, 0], rel[:, 1])
    s = rho - _heated_shape_radius(np.arctan2(rel[:, 1], rel[:, 0]))
    w = np.clip(0.5 - s / band, 0.0, 1.0)
    return t_cold + (t_hot - t_cold) * w


def heated_plate_band(points: np.ndarray, band: float = 0.08) -> np.ndarray:
    """Mask of points inside the linear transition band."""
    rel = points - 0.5
    rho = np.hypot(rel[:, 0], rel[:, 1])
    s = rho - _heated_shape_radius(np.arctan2(rel[:, 1], rel[:, 0]))
    return np.abs(s) <= band / 2


def _poisson_disk(rng, radius_fn, n_candidates: int) -> np.ndarray:
    """Dart throwing with a spatially varying exclusion radius on the unit square."""
    from scipy.spatial import cKDTree

    cand = rng.random((n_candidates, 2))
    radii = radius_fn(cand)
    r_max = float(radii.max())
    # boundary nodes keep the hull equal to the square
    edge_n = int(math.ceil(1.0 / r_max))
    s = np.linspace(0.0, 1.0, edge_n + 1)
    boundary = np.unique(np.concatenate([
        np.column_stack([s, np.zeros_like(s)]), np.column_stack([s, np.ones_like(s)]),
        np.column_stack([np.zeros_like(s), s]), np.column_stack([np.ones_like(s), s]),
    ]), axis=0)
    accepted = [tuple(p) for p in boundary]
    cell = r_max / math.sqrt(2.0)
    n_grid = int(math.ceil(1.0 / cell)) + 1
    grid: dict[tuple[int, int], list[int]] = {}
    for i, (x, y) in enumerate(accepted):
        grid.setdefault((int(x / cell), int(y / cell)), []).append(i)
    reach = int(math.ceil(r_max / cell))
    for (x, y), r in zip(cand.tolist(), radii.tolist()):
        gx, gy = int(x / cell), int(y / cell)
        ok = True
        for ix in range(max(gx - reach, 0), min(gx + reach, n_grid) + 1):
            for iy in range(max(gy - reach, 0), min(gy + reach, n_grid) + 1):
                for j in grid.get((ix, iy), ()):
                    qx, qy = accepted[j]
                    if (qx - x) ** 2 + (qy - y) ** 2 < r * r:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            grid.setdefault((gx, gy), []).append(len(accepted))
            accepted.append((x, y))
    pts = np.array(accepted)
    # drop near-duplicates that could make degenerate triangles
    tree = cKDTree(pts)
    pairs = tree.query_pairs(1e-9)
    if pairs:
        drop = {max(p) for p in pairs}
        pts = np.delete(pts, sorted(drop), axis=0)
    return pts


_DEFAULTS = {
    "gaussian_blobs_2d": {"n": 1000, "radius": 1.0, "orbit": 0.45, "sigma": 0.2,
                          "amplitude": 1.0, "period": 1.0, "times": "0", "jitter": 0.25},
    "heated_plate_2d": {"fine": 0.0135, "coarse": 0.034, "band": 0.08, "candidates": 60000,
                        "refine": 0.5, "t_hot": 100.0, "t_cold": 20.0},
    "random_delaunay_2d": {"n": 1000},
    "random_delaunay_3d": {"n": 1000},
}

SYNTHETIC_KINDS = tuple(_DEFAULTS)


def _merge_params(kind: str, params: dict | None) -> dict:
    if kind not in _DEFAULTS:
        raise InvalidValue(f"unknown synthetic kind {kind!r}; choose from {', '.join(_DEFAULTS)}")
    merged = dict(_DEFAULTS[kind])
    for key, value in (params or {}).items():
        if key not in merged:
            raise InvalidValue(f"unknown parameter {key!r} for {kind}")
        default = merged[key]
        try:
            if isinstance(default, int) and not isinstance(default, bool):
                value = int(value)
            elif isinstance(default, float):
                value = float(value)
            else:
                value = str(value)
        except ValueError:
            raise InvalidValue(f"bad value {value!r} for parameter {key!r}") from None
        merged[key] = value
    return merged


def _parse_times(spec) -> list[float]:
    if isinstance(spec, (int, float)):
        return [float(spec)]
    try:
        return [float(t) for t in str(spec).replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise InvalidValue(f"bad times list {spec!r}") from None


def generate_synthetic(kind: str, params: dict | None = None, rng_seed: int = 0) -> DatasetBundle:
    """Build a synthetic mesh + fields; deterministic for a fixed ``rng_seed``.

    Kinds:
      gaussian_blobs_2d   disk mesh, one field per entry of ``times``
      heated_plate_2d     unit square, nodes dense along the hot/cold boundary
      random_delaunay_2d  Delaunay of uniform points in the unit square
      random_delaunay_3d  Delaunay of uniform points in the unit cube
    """
    p = _merge_params(kind, params)
    rng = np.random.default_rng(rng_seed)

    if kind == "gaussian_blobs_2d":
        if p["n"] < 4 or p["radius"] <= 0 or p["sigma"] <= 0 or p["period"] <= 0:
            raise InvalidValue("gaussian_blobs_2d needs n >= 4 and positive radius/sigma/period")
        pts = _sunflower_disk(p["n"], p["radius"], rng, p["jitter"])
        mesh = _delaunay_mesh(pts)
        bundle = DatasetBundle(mesh)
        times = _parse_times(p["times"])
        for i, t in enumerate(times):
            name = "value" if len(times) == 1 else f"value_t{i:03d}"
            bundle.add(name, gaussian_blobs(mesh.vertices, t, p["period"], p["orbit"],
                                            p["sigma"], p["amplitude"]), t)
        return bundle

    if kind == "heated_plate_2d":
        if not 0 < p["fine"] <= p["coarse"] or p["band"] <= 0:
            raise InvalidValue("heated_plate_2d needs 0 < fine <= coarse and band > 0")

        def radius(q):
            return np.where(heated_plate_band(q, 2.0 * p["band"]), p["fine"], p["coarse"])

        def temp(q):
            return heated_plate_temperature(q, p["band"], p["t_hot"], p["t_cold"])

        pts = _poisson_disk(rng, radius, p["candidates"])
        mesh = _delaunay_mesh(pts)
        # refine: midpoints of edges with a large temperature jump
        t = temp(mesh.vertices)
        jump = p["refine"] * (p["t_hot"] - p["t_cold"])
        cells = mesh.cells
        mids = []
        for a, b in [(0, 1), (1, 2), (0, 2)]:
            ia, ib = cells[:, a], cells[:, b]
            big = np.abs(t[ia] - t[ib]) > jump
            mids.append(0.5 * (mesh.vertices[ia[big]] + mesh.vertices[ib[big]]))
        mids = np.unique(np.round(np.concatenate(mids), 12), axis=0)
        if len(mids):
            mesh = _delaunay_mesh(np.concatenate([mesh.vertices, mids]))
        bundle = DatasetBundle(mesh)
        bundle.add("temperature", temp(mesh.vertices))
        return bundle

    n = p["n"]
    dim = 2 if kind == "random_delaunay_2d" else 3
    if n < dim + 1:
        raise InvalidValue(f"{kind} needs n >= {dim + 1}")
    pts = rng.random((n, dim))
    mesh = _delaunay_mesh(pts)
    bundle = DatasetBundle(mesh)
    bundle.add("smooth", _smooth_field(mesh.vertices))
    return bundle

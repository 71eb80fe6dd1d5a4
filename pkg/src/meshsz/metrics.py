"""Vertexwise (MSE family) and continuous (CMSE family) error metrics.

The continuous metrics integrate the squared difference of the two
piecewise-linear interpolants over every cell.  For a simplex with Jacobian
``|J|`` and vertex deltas ``d``::

    E(c) = |J| * 2 / (dim + 2)! * sum_{i <= j} d_i d_j

which is ``|J|/12`` for triangles and ``|J|/60`` for tetrahedra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidValue
from .mesh import ScalarField, SimplicialMesh


def _values(x) -> np.ndarray:
    if isinstance(x, ScalarField):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _deltas(original, decompressed) -> np.ndarray:
    f = _values(original)
    g = _values(decompressed)
    if f.shape != g.shape:
        raise InvalidValue(f"length mismatch: {f.shape[0]} vs {g.shape[0]} values")
    return g - f


def mse(field, decompressed) -> float:
    d = _deltas(field, decompressed)
    if len(d) == 0:
        raise InvalidValue("empty field")
    # fsum is exactly rounded, so the result does not depend on vertex order
    return math.fsum(np.square(d).tolist()) / len(d)


def _simplex_coefficient(dimension: int) -> float:
    return 2.0 / math.factorial(dimension + 2)


def cellwise_squared_error(mesh: SimplicialMesh, cell_index: int, deltas) -> float:
    """Exact integral of the squared linear error over one cell."""
    d = [float(x) for x in deltas]
    if len(d) != mesh.dimension + 1:
        raise InvalidValue(f"expected {mesh.dimension + 1} deltas")
    pair_sum = 0.0
    for i in range(len(d)):
        for j in range(i, len(d)):
            pair_sum += d[i] * d[j]
    jac = mesh.volumes[cell_index] * math.factorial(mesh.dimension)
    return jac * _simplex_coefficient(mesh.dimension) * pair_sum


def cellwise_squared_errors(mesh: SimplicialMesh, deltas) -> np.ndarray:
    """Vectorized E(c) for every cell, given per-vertex deltas."""
    d = np.asarray(deltas, dtype=np.float64)[mesh.cells]
    # sum_{i<=j} d_i d_j = ((sum d)^2 + sum d^2) / 2
    pair_sum = 0.5 * (d.sum(axis=1) ** 2 + (d * d).sum(axis=1))
    jac = mesh.volumes * math.factorial(mesh.dimension)
    return jac * _simplex_coefficient(mesh.dimension) * pair_sum


def cmse(mesh: SimplicialMesh, field, decompressed) -> float:
    d = _deltas(field, decompressed)
    if len(d) != mesh.n_vertices:
        raise InvalidValue("field length does not match the mesh")
    total = mesh.total_volume
    if total <= 0:
        raise InvalidValue("mesh has zero total volume")
    return float(cellwise_squared_errors(mesh, d).sum() / total)


class VolumeSampler:
    """Uniform random points over the mesh: cell by volume, then uniform barycentric."""

    def __init__(self, mesh: SimplicialMesh, rng_seed=None):
        total = mesh.total_volume
        if total <= 0:
            raise InvalidValue("mesh has zero total volume")
        self.mesh = mesh
        self.rng = np.random.default_rng(rng_seed)
        self._cdf = np.cumsum(mesh.volumes) / total
        self._cdf[-1] = 1.0

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (cell indices, barycentric coordinates) for ``n`` points."""
        cells = np.searchsorted(self._cdf, self.rng.random(n), side="right")
        cells = np.minimum(cells, len(self._cdf) - 1)
        # spacings of sorted uniforms are uniform on the simplex
        u = np.sort(self.rng.random((n, self.mesh.dimension)), axis=1)
        edges = np.concatenate([np.zeros((n, 1)), u, np.ones((n, 1))], axis=1)
        lam = np.diff(edges, axis=1)
        return cells, lam

    def interpolate(self, values, cells, lam) -> np.ndarray:
        return np.einsum("ij,ij->i", lam, np.asarray(values, dtype=np.float64)[self.mesh.cells[cells]])


def monte_carlo_cmse(
    mesh: SimplicialMesh,
    field,
    decompressed,
    n_samples: int,
    rng_seed=None,
    chunk: int = 1_000_000,
) -> tuple[float, float]:
    """Monte Carlo estimate of CMSE and its standard error."""
    if n_samples <= 0:
        raise InvalidValue("n_samples must be positive")
    f = _values(field)
    g = _values(decompressed)
    _deltas(f, g)
    sampler = VolumeSampler(mesh, rng_seed)
    s1 = 0.0
    s2 = 0.0
    left = n_samples
    while left:
        n = min(chunk, left)
        cells, lam = sampler.sample(n)
        e = (sampler.interpolate(g, cells, lam) - sampler.interpolate(f, cells, lam)) ** 2
        s1 += float(e.sum())
        s2 += float((e * e).sum())
        left -= n
    mean = s1 / n_samples
    if n_samples < 2:
        return mean, math.inf
    var = max(s2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def convergence_experiment(
    mesh: SimplicialMesh,
    field,
    decompressed,
    samples_per_iter: int = 1000,
    iters: int = 100,
    rng_seed=None,
) -> np.ndarray:
    """Vertexwise MSE after each round of inserting interpolated random nodes.

    Each iteration adds ``samples_per_iter`` uniformly random points whose
    original and decompressed values are interpolated from the cell that
    contains them, then recomputes the MSE over all nodes so far.
    """
    f = _values(field)
    g = _values(decompressed)
    d = _deltas(f, g)
    sampler = VolumeSampler(mesh, rng_seed)
    total_sq = math.fsum(np.square(d).tolist())
    count = len(d)
    series = np.empty(iters)
    for k in range(iters):
        cells, lam = sampler.sample(samples_per_iter)
        e = sampler.interpolate(g, cells, lam) - sampler.interpolate(f, cells, lam)
        total_sq += math.fsum(np.square(e).tolist())
        count += samples_per_iter
        series[k] = total_sq / count
    return series


@dataclass
class MetricsReport:
    mse: float
    rmse: float
    nrmse: float
    psnr: float
    cmse: float
    crmse: float
    cnrmse: float
    cpsnr: float
    max_abs_error: float
    value_range: float
    range_is_zero: bool = False
    extra: dict = field(default_factory=dict)

    FIELDS = (
        "mse", "rmse", "nrmse", "psnr", "cmse", "crmse", "cnrmse", "cpsnr",
        "max_abs_error", "value_range",
    )

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.FIELDS}
        out["range_is_zero"] = self.range_is_zero
        out.update(self.extra)
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k} = {format_value(v)}" for k, v in self.as_dict().items()) + "\n"

    def csv_header(self) -> list[str]:
        return list(self.as_dict())

    def csv_row(self) -> list[str]:
        return [format_value(v) for v in self.as_dict().values()]


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _psnr_from(rms: float, value_range: float) -> float:
    if value_range <= 0:
        return math.nan
    if rms == 0:
        return math.inf
    return 20.0 * math.log10(value_range / rms)


def metrics_report(mesh: SimplicialMesh, original, decompressed) -> MetricsReport:
    f = _values(original)
    g = _values(decompressed)
    m = mse(f, g)
    c = cmse(mesh, f, g)
    value_range = float(f.max() - f.min())
    zero = value_range <= 0
    rmse = math.sqrt(m)
    crmse = math.sqrt(c)
    return MetricsReport(
        mse=m,
        rmse=rmse,
        nrmse=math.nan if zero else rmse / value_range,
        psnr=_psnr_from(rmse, value_range),
        cmse=c,
        crmse=crmse,
        cnrmse=math.nan if zero else crmse / value_range,
        cpsnr=_psnr_from(crmse, value_range),
        max_abs_error=float(np.max(np.abs(g - f))),
        value_range=value_range,
        range_is_zero=zero,
    )


__all__ = [
    "MetricsReport", "VolumeSampler", "cellwise_squared_error",
    "cellwise_squared_errors", "cmse", "convergence_experiment", "metrics_report",
    "monte_carlo_cmse", "mse",
]

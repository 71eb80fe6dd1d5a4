import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshsz import metrics
from meshsz.errors import InvalidValue
from meshsz.io import generate_synthetic
from meshsz.mesh import SimplicialMesh

from conftest import random_mesh


def test_mse_examples():
    f = np.array([1.0, 2.0, 3.0, 4.0])
    assert metrics.mse(f, f) == 0.0
    assert metrics.mse(f, f + 0.5) == 0.25
    rng = np.random.default_rng(0)
    for _ in range(5):
        a, b = rng.normal(size=20), rng.normal(size=20)
        assert metrics.mse(a, b) == pytest.approx(sum((x - y) ** 2 for x, y in zip(a, b)) / 20, rel=1e-14)
    with pytest.raises(InvalidValue):
        metrics.mse([], [])
    with pytest.raises(InvalidValue):
        metrics.mse([1.0], [1.0, 2.0])


def test_mse_exactly_permutation_invariant():
    rng = np.random.default_rng(1)
    d = rng.normal(size=10_000) * 10.0 ** rng.integers(-8, 8, 10_000)
    base = metrics.mse(np.zeros_like(d), d)
    for _ in range(5):
        assert metrics.mse(np.zeros_like(d), rng.permutation(d)) == base


def test_unit_simplex_closed_forms(unit_triangle, unit_tet):
    assert metrics.cellwise_squared_error(unit_tet, 0, [1, 0, 0, 0]) == pytest.approx(1 / 60)
    assert metrics.cellwise_squared_error(unit_triangle, 0, [1, 0, 0]) == pytest.approx(1 / 12)
    assert metrics.cmse(unit_tet, np.zeros(4), [1, 0, 0, 0]) == pytest.approx(0.1)
    assert metrics.cmse(unit_triangle, np.zeros(3), [1, 0, 0]) == pytest.approx(1 / 6)


@pytest.mark.parametrize("which,expect", [("tri", 1 / 6), ("tet", 0.1)])
def test_unit_simplex_vs_monte_carlo(which, expect, unit_triangle, unit_tet):
    mesh = unit_triangle if which == "tri" else unit_tet
    d = np.zeros(mesh.n_vertices)
    d[0] = 1.0
    est, se = metrics.monte_carlo_cmse(mesh, np.zeros_like(d), d, 10_000_000, rng_seed=3)
    assert abs(est - expect) <= 3 * se
    assert metrics.cmse(mesh, np.zeros_like(d), d) == pytest.approx(expect, rel=1e-14)


def test_vectorized_matches_scalar_cell_formula():
    mesh = random_mesh(3, 60, 4)
    d = np.random.default_rng(4).normal(size=mesh.n_vertices)
    vec = metrics.cellwise_squared_errors(mesh, d)
    for c in range(mesh.n_cells):
        assert vec[c] == pytest.approx(metrics.cellwise_squared_error(mesh, c, d[mesh.cells[c]]), rel=1e-12)


@pytest.mark.parametrize("dimension", [2, 3])
def test_cmse_matches_monte_carlo(dimension):
    rng = np.random.default_rng(10 + dimension)
    for k in range(5):
        mesh = random_mesh(dimension, 80, 200 + k)
        f = rng.normal(size=mesh.n_vertices)
        g = f + rng.normal(size=mesh.n_vertices) * rng.uniform(0.01, 2)
        est, se = metrics.monte_carlo_cmse(mesh, f, g, 200_000, rng_seed=k)
        assert abs(est - metrics.cmse(mesh, f, g)) <= 3 * se


def test_constant_delta():
    mesh = random_mesh(2, 100, 5)
    f = np.random.default_rng(5).normal(size=mesh.n_vertices)
    assert metrics.cmse(mesh, f, f) == 0.0
    assert metrics.cmse(mesh, f, f + 0.3) == pytest.approx(0.09, rel=1e-12)
    assert metrics.mse(f, f + 0.3) == pytest.approx(0.09, rel=1e-12)
    series = metrics.convergence_experiment(mesh, f, f + 0.3, 100, 10, rng_seed=0)
    np.testing.assert_allclose(series, 0.09, rtol=1e-12)


def test_monte_carlo_zero_and_stderr_scaling():
    mesh = random_mesh(2, 100, 6)
    f = np.random.default_rng(6).normal(size=mesh.n_vertices)
    assert metrics.monte_carlo_cmse(mesh, f, f, 1000, 0) == (0.0, 0.0)
    g = f + np.random.default_rng(7).normal(size=mesh.n_vertices)
    _, se1 = metrics.monte_carlo_cmse(mesh, f, g, 200_000, 1)
    _, se2 = metrics.monte_carlo_cmse(mesh, f, g, 400_000, 2)
    assert se2 / se1 == pytest.approx(1 / math.sqrt(2), rel=0.05)
    with pytest.raises(InvalidValue):
        metrics.monte_carlo_cmse(mesh, f, g, 0)


def test_sampler_is_uniform_over_volume():
    mesh = random_mesh(2, 40, 8)
    sampler = metrics.VolumeSampler(mesh, 0)
    cells, lam = sampler.sample(400_000)
    np.testing.assert_allclose(lam.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(lam >= 0)
    hits = np.bincount(cells, minlength=mesh.n_cells) / len(cells)
    np.testing.assert_allclose(hits, mesh.volumes / mesh.total_volume, atol=0.004)
    # uniform inside a cell: mean barycentric coordinate is 1/(d+1)
    np.testing.assert_allclose(lam.mean(axis=0), 1 / 3, atol=0.003)


@given(st.floats(0.01, 100.0), st.integers(0, 100))
@settings(max_examples=30, deadline=None)
def test_scale_covariance(s, seed):
    mesh = random_mesh(2, 50, seed % 10)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=mesh.n_vertices) * 10
    d = rng.normal(size=mesh.n_vertices) * 0.01
    a = metrics.metrics_report(mesh, f, f + d)
    b = metrics.metrics_report(mesh, f, f + s * d)
    assert b.mse == pytest.approx(s * s * a.mse, rel=1e-9)
    assert b.cmse == pytest.approx(s * s * a.cmse, rel=1e-9)
    assert b.psnr == pytest.approx(a.psnr - 20 * math.log10(s), abs=1e-9)
    assert b.cpsnr == pytest.approx(a.cpsnr - 20 * math.log10(s), abs=1e-9)


def test_nonnegative_and_zero_iff_equal():
    mesh = random_mesh(3, 80, 9)
    rng = np.random.default_rng(9)
    f = rng.normal(size=mesh.n_vertices)
    assert metrics.cmse(mesh, f, f) == 0.0
    for _ in range(20):
        d = np.zeros(mesh.n_vertices)
        d[rng.integers(mesh.n_vertices)] = rng.normal() * 1e-3
        assert metrics.cmse(mesh, f, f + d) > 0


def refine_centroid(mesh, f, g, cell):
    """Split ``cell`` at its centroid; new values are the interpolated ones."""
    idx = mesh.cells[cell]
    centroid = mesh.vertices[idx].mean(axis=0)
    verts = np.vstack([mesh.vertices, centroid])
    new = mesh.n_vertices
    k = mesh.dimension + 1
    cells = [c for i, c in enumerate(mesh.cells.tolist()) if i != cell]
    for drop in range(k):
        sub = idx.tolist()
        sub[drop] = new
        cells.append(sub)
    return (
        SimplicialMesh(verts, cells),
        np.append(f, f[idx].mean()),
        np.append(g, g[idx].mean()),
    )


@pytest.mark.parametrize("dimension", [2, 3])
def test_refinement_invariance(dimension):
    mesh = random_mesh(dimension, 60, 12)
    rng = np.random.default_rng(12)
    f = rng.normal(size=mesh.n_vertices)
    g = f + rng.normal(size=mesh.n_vertices)
    base_cmse = metrics.cmse(mesh, f, g)
    base_mse = metrics.mse(f, g)
    m2, f2, g2 = mesh, f, g
    for cell in (0, 5, 9):
        m2, f2, g2 = refine_centroid(m2, f2, g2, cell)
    assert metrics.cmse(m2, f2, g2) == pytest.approx(base_cmse, rel=1e-12)
    assert metrics.mse(f2, g2) != pytest.approx(base_mse, rel=1e-6)


def appearance_assignment(mesh, magnitudes, large_where_small_volume: bool):
    order = np.argsort(mesh.incident_volume, kind="stable")
    if not large_where_small_volume:
        order = order[::-1]
    d = np.empty(mesh.n_vertices)
    d[order] = magnitudes[np.argsort(-np.abs(magnitudes), kind="stable")]
    return d


@pytest.mark.parametrize("kind", ["heated_plate_2d", "random_delaunay_3d"])
def test_appearance_property(kind):
    mesh = generate_synthetic(kind, {}, 0).mesh
    rng = np.random.default_rng(13)
    magnitudes = np.abs(rng.normal(size=mesh.n_vertices)) * rng.choice([-1, 1], mesh.n_vertices)
    f = np.zeros(mesh.n_vertices)
    dense = appearance_assignment(mesh, magnitudes, True)
    sparse = appearance_assignment(mesh, magnitudes, False)
    assert metrics.mse(f, dense) == metrics.mse(f, sparse)
    assert metrics.cmse(mesh, f, dense) < metrics.cmse(mesh, f, sparse)


def test_convergence_trend_and_tolerance():
    bundle = generate_synthetic("heated_plate_2d", {}, 0)
    f = bundle.field().values
    g = f + np.random.default_rng(5).normal(0, 1, len(f))
    series = metrics.convergence_experiment(bundle.mesh, f, g, 1000, 100, rng_seed=7)
    c = metrics.cmse(bundle.mesh, f, g)
    assert abs(series[-1] - c) / c < 0.05
    assert abs(series[-1] - c) < abs(series[0] - c)


def test_convergence_variance_shrinks():
    mesh = random_mesh(2, 300, 14)
    rng = np.random.default_rng(14)
    f = rng.normal(size=mesh.n_vertices)
    g = f + rng.normal(size=mesh.n_vertices)
    runs = np.array([metrics.convergence_experiment(mesh, f, g, 500, 40, rng_seed=s) for s in range(10)])
    var = runs.var(axis=0)
    assert var[-1] < var[4] < var[0]


def test_report_flags_and_sentinels():
    mesh = random_mesh(2, 50, 15)
    f = np.random.default_rng(15).normal(size=mesh.n_vertices)
    same = metrics.metrics_report(mesh, f, f)
    assert same.mse == same.cmse == 0.0
    assert same.psnr == math.inf and same.cpsnr == math.inf
    flat = metrics.metrics_report(mesh, np.ones(mesh.n_vertices), np.ones(mesh.n_vertices) + 0.1)
    assert flat.range_is_zero
    assert math.isnan(flat.nrmse) and math.isnan(flat.psnr)
    off = metrics.metrics_report(mesh, f, f + 0.2)
    assert off.mse == pytest.approx(0.04) and off.cmse == pytest.approx(0.04)
    assert off.psnr == pytest.approx(20 * math.log10(np.ptp(f) / 0.2))
    assert off.rmse == pytest.approx(math.sqrt(off.mse))
    assert off.cnrmse == pytest.approx(off.crmse / off.value_range)
    text = off.to_text()
    assert "cpsnr = " in text and text.endswith("\n")
    assert len(off.csv_header()) == len(off.csv_row())
    assert metrics.format_value(math.inf) == "inf"
    assert metrics.format_value(True) == "true"


def test_degenerate_cells_contribute_nothing():
    verts = [[0, 0], [1, 0], [0, 1], [2, 0]]
    mesh = SimplicialMesh(verts, [[0, 1, 2], [0, 1, 3]])
    assert mesh.volumes[1] == 0.0
    d = np.array([1.0, 0.0, 0.0, 5.0])
    assert metrics.cmse(mesh, np.zeros(4), d) == pytest.approx(1 / 6)

"""Sweep datasets x error bounds and collect size, error and timing rows.

Config file: CSV, one dataset per row, ``#`` starts a comment::

    dataset,field,xi_percent
    "gen:gaussian_blobs_2d?n=1000&times=0,0.25",*,0.1 0.5 1 2 5
    meshes/plate.vtk,temperature,1 5

``dataset`` is a path (``.vtk``/``.umesh``, relative to the config file) or
``gen:<kind>?key=value&...`` for a synthetic dataset (``seed`` selects the
generator seed).  ``field`` is a field name or ``*`` for all fields, which is
how time-varying datasets over one static mesh are swept.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import parse_qsl

import numpy as np

from . import io as meshio
from . import metrics
from .backends import DEFAULT_BACKEND
from .bitstream import bit_rate, compression_ratio
from .errors import InvalidValue
from .pipeline import absolute_bound, compress_field, decompress_payload, first_seed_coverage

ROW_FIELDS = [
    "dataset", "field", "xi_percent", "CR", "BR", "NRMSE", "CNRMSE", "PSNR", "CPSNR",
    "compress_s", "decompress_s", "n_seq", "first_seed_coverage",
    "predictor", "error_bound", "max_abs_error", "payload_bytes",
]
COVERAGE_FIELDS = [
    "dataset", "field", "xi_percent", "seed_index", "new_nodes", "cumulative_nodes",
    "cumulative_fraction",
]


@dataclass
class BenchJob:
    dataset: str
    fields: list[str]
    xi_percents: list[float]


def parse_config(text: str) -> list[BenchJob]:
    jobs = []
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    for lineno, row in enumerate(csv.reader(lines), 1):
        row = [c.strip() for c in row]
        if row[:3] == ["dataset", "field", "xi_percent"]:
            continue
        if len(row) != 3:
            raise InvalidValue(f"bench config row {lineno}: expected 3 columns, got {len(row)}")
        dataset, fields, xis = row
        try:
            xi_values = [float(x) for x in xis.replace(";", " ").split()]
        except ValueError:
            raise InvalidValue(f"bench config row {lineno}: bad xi_percent list {xis!r}") from None
        if not xi_values or any(x <= 0 for x in xi_values):
            raise InvalidValue(f"bench config row {lineno}: xi_percent values must be positive")
        names = [f for f in fields.replace(";", " ").split()] or ["*"]
        jobs.append(BenchJob(dataset, names, xi_values))
    if not jobs:
        raise InvalidValue("bench config lists no datasets")
    return jobs


def load_dataset(spec: str, base: Path | None = None) -> meshio.DatasetBundle:
    if spec.startswith("gen:"):
        kind, _, query = spec[4:].partition("?")
        params = dict(parse_qsl(query, keep_blank_values=True))
        seed = int(params.pop("seed", 0))
        return meshio.generate_synthetic(kind, params, seed)
    path = Path(spec)
    if base is not None and not path.is_absolute():
        path = base / path
    return meshio.read_bundle(path)


def run_one(mesh, field, xi_percent: float, dataset: str, backend: str = DEFAULT_BACKEND,
            predictor: str = "traversal") -> tuple[dict, list[dict]]:
    xi = absolute_bound(field.values, xi_percent)
    t0 = time.perf_counter()
    result = compress_field(mesh, field, xi, backend=backend, predictor=predictor)
    t1 = time.perf_counter()
    recon = decompress_payload(mesh, result.payload)
    t2 = time.perf_counter()

    report = metrics.metrics_report(mesh, field, recon)
    n_bytes = len(result.payload)
    row = {
        "dataset": dataset,
        "field": field.name,
        "xi_percent": xi_percent,
        "CR": compression_ratio(8 * mesh.n_vertices, n_bytes),
        "BR": bit_rate(n_bytes, mesh.n_vertices),
        "NRMSE": report.nrmse,
        "CNRMSE": report.cnrmse,
        "PSNR": report.psnr,
        "CPSNR": report.cpsnr,
        "compress_s": t1 - t0,
        "decompress_s": t2 - t1,
        "n_seq": result.n_sequences,
        "first_seed_coverage": first_seed_coverage(result.sequences, mesh.n_vertices),
        "predictor": predictor,
        "error_bound": xi,
        "max_abs_error": report.max_abs_error,
        "payload_bytes": n_bytes,
    }
    coverage = []
    per_seq = result.sequences.coded_per_sequence()
    cum = np.cumsum(per_seq)
    denom = max(mesh.n_vertices - result.sequences.seed_size, 1)
    for i, (new, total) in enumerate(zip(per_seq, cum.tolist())):
        coverage.append({
            "dataset": dataset, "field": field.name, "xi_percent": xi_percent,
            "seed_index": i, "new_nodes": new, "cumulative_nodes": total,
            "cumulative_fraction": total / denom,
        })
    return row, coverage


def run_bench(jobs: list[BenchJob], base: Path | None = None, backend: str = DEFAULT_BACKEND,
              predictor: str = "traversal", log=None) -> tuple[list[dict], list[dict]]:
    rows: list[dict] = []
    coverage: list[dict] = []
    for job in jobs:
        bundle = load_dataset(job.dataset, base)
        names = list(bundle.fields) if "*" in job.fields else job.fields
        for name in names:
            field = bundle.field(name)
            for xi in job.xi_percents:
                row, cov = run_one(bundle.mesh, field, xi, job.dataset, backend, predictor)
                if log is not None:
                    log(f"{job.dataset} {name} xi={xi}% CR={row['CR']:.3f} n_seq={row['n_seq']}")
                rows.append(row)
                coverage.extend(cov)
    return rows, coverage


def write_rows(fh, rows: list[dict], fieldnames: list[str]) -> None:
    w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: metrics.format_value(v) for k, v in row.items()})

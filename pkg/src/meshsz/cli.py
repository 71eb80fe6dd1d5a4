"""Command-line interface: ``meshsz {compress,decompress,eval,bench,gen}``.

Exit codes:

    0  success
    1  unexpected internal error
    2  usage error (bad flags)
    3  file could not be read or written
    4  invalid input (bad values, mesh, or file syntax)
    5  corrupt payload
    6  unsupported payload version
    7  payload belongs to a different mesh
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from . import bench, metrics
from . import io as meshio
from .backends import BACKENDS, DEFAULT_BACKEND
from .bitstream import bit_rate, compression_ratio
from .errors import (
    CorruptStream,
    DigestMismatch,
    InvalidMesh,
    InvalidValue,
    MeshszError,
    ParseError,
    UnsupportedVersion,
)
from .mesh import ScalarField
from .pipeline import absolute_bound, compress_field, decompress_payload

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INVALID = 4
EXIT_CORRUPT = 5
EXIT_VERSION = 6
EXIT_DIGEST = 7


def _load_field(mesh_bundle, field_path, field_name):
    if field_path is None:
        return mesh_bundle.field(field_name)
    other = meshio.read_bundle(field_path)
    field = other.field(field_name)
    if len(field) != mesh_bundle.mesh.n_vertices:
        raise InvalidValue(
            f"field has {len(field)} values, mesh has {mesh_bundle.mesh.n_vertices} vertices"
        )
    return field


def cmd_compress(args) -> int:
    bundle = meshio.read_bundle(args.mesh)
    field = _load_field(bundle, args.field_path, args.field)
    if args.abs_error is not None:
        xi = args.abs_error
    else:
        xi = absolute_bound(field.values, args.rel_error)
    t0 = time.perf_counter()
    result = compress_field(
        bundle.mesh, field, xi, code_bits=args.code_bits, backend=args.backend,
        predictor=args.predictor, seed_rng=args.seed_rng,
    )
    elapsed = time.perf_counter() - t0
    Path(args.out).write_bytes(result.payload)
    n = bundle.mesh.n_vertices
    size = len(result.payload)
    print(f"field = {field.name}")
    print(f"error_bound = {xi!r}")
    print(f"payload_bytes = {size}")
    print(f"CR = {compression_ratio(8 * n, size):.6g}")
    print(f"BR = {bit_rate(size, n):.6g}")
    print(f"n_seq = {result.n_sequences}")
    print(f"elapsed_s = {elapsed:.6f}")
    return EXIT_OK


def cmd_decompress(args) -> int:
    bundle = meshio.read_bundle(args.mesh)
    payload = Path(args.payload).read_bytes()
    t0 = time.perf_counter()
    field = decompress_payload(bundle.mesh, payload)
    elapsed = time.perf_counter() - t0
    out = meshio.DatasetBundle(bundle.mesh)
    out.add(field.name, field.values)
    meshio.write_bundle(args.out, out)
    print(f"field = {field.name}")
    print(f"n_vertices = {bundle.mesh.n_vertices}")
    print(f"elapsed_s = {elapsed:.6f}")
    return EXIT_OK


def _read_values(path, name, mesh) -> ScalarField:
    if Path(path).suffix.lower() == ".umz":
        return decompress_payload(mesh, Path(path).read_bytes())
    return meshio.read_bundle(path).field(name)


def cmd_eval(args) -> int:
    mesh = meshio.read_bundle(args.mesh).mesh
    original = _read_values(args.original, args.field, mesh)
    decompressed = _read_values(
        args.decompressed, args.decompressed_field or args.field or original.name, mesh
    )
    if len(original) != mesh.n_vertices or len(decompressed) != mesh.n_vertices:
        raise InvalidValue("field lengths do not match the mesh")
    report = metrics.metrics_report(mesh, original, decompressed)
    if args.mc_check:
        est, se = metrics.monte_carlo_cmse(mesh, original, decompressed, args.mc_check, args.seed)
        report.extra["mc_cmse"] = est
        report.extra["mc_stderr"] = se
        report.extra["mc_agrees"] = bool(abs(est - report.cmse) <= 3 * se) or est == report.cmse
    if args.format == "csv":
        print(",".join(report.csv_header()))
        print(",".join(report.csv_row()))
    else:
        sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_bench(args) -> int:
    config = Path(args.config)
    jobs = bench.parse_config(config.read_text(encoding="utf-8"))
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    rows, coverage = bench.run_bench(jobs, config.parent, args.backend, args.predictor, log)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            bench.write_rows(fh, rows, bench.ROW_FIELDS)
    else:
        bench.write_rows(sys.stdout, rows, bench.ROW_FIELDS)
    if args.coverage_out:
        with open(args.coverage_out, "w", encoding="utf-8", newline="") as fh:
            bench.write_rows(fh, coverage, bench.COVERAGE_FIELDS)
    return EXIT_OK


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise InvalidValue(f"parameter must look like key=value, got {item!r}")
        params[key.strip()] = value.strip()
    return params


def cmd_gen(args) -> int:
    bundle = meshio.generate_synthetic(args.kind, _parse_params(args.param), args.seed)
    meshio.write_bundle(args.out, bundle)
    m = bundle.mesh
    print(f"kind = {args.kind}")
    print(f"n_vertices = {m.n_vertices}")
    print(f"n_cells = {m.n_cells}")
    print(f"fields = {','.join(bundle.fields)}")
    return EXIT_OK


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshsz",
        description="Error-bounded lossy compression of nodal data on triangle/tetrahedral meshes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress one field to a .umz payload")
    p.add_argument("mesh", help="mesh file (.vtk or .umesh)")
    p.add_argument("field_path", nargs="?", help="file holding the field (default: the mesh file)")
    p.add_argument("--field", help="field name (default: first field)")
    bound = p.add_mutually_exclusive_group(required=True)
    bound.add_argument("--abs-error", type=_positive_float, help="absolute error bound")
    bound.add_argument("--rel-error", type=_positive_float,
                       help="error bound in percent of the field's value range")
    p.add_argument("--out", required=True, help="output .umz path")
    p.add_argument("--backend", choices=sorted(BACKENDS), default=DEFAULT_BACKEND)
    p.add_argument("--code-bits", type=int, default=16)
    p.add_argument("--predictor", choices=["traversal", "linear1d"], default="traversal")
    p.add_argument("--seed-rng", type=int, default=None,
                   help="pick seeds at random with this RNG seed (default: lowest index)")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="reconstruct a field from a .umz payload")
    p.add_argument("mesh")
    p.add_argument("payload")
    p.add_argument("--out", required=True, help="output .vtk or .umesh path")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("eval", help="pointwise and continuous error metrics")
    p.add_argument("mesh")
    p.add_argument("original")
    p.add_argument("decompressed", help=".vtk/.umesh file or a .umz payload")
    p.add_argument("--field", help="field name in the original file")
    p.add_argument("--decompressed-field", help="field name in the decompressed file")
    p.add_argument("--mc-check", type=int, default=0, metavar="N",
                   help="also estimate CMSE from N Monte Carlo samples")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for --mc-check")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="sweep datasets x error bounds, emit CSV")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--coverage-out", help="CSV path for per-seed cumulative coverage")
    p.add_argument("--backend", choices=sorted(BACKENDS), default=DEFAULT_BACKEND)
    p.add_argument("--predictor", choices=["traversal", "linear1d"], default="traversal")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("kind", choices=meshio.SYNTHETIC_KINDS)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DigestMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIGEST
    except UnsupportedVersion as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except CorruptStream as exc:
        print(f"error: corrupt payload: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (InvalidValue, InvalidMesh, ParseError, MeshszError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

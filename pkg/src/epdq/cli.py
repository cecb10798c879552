"""Command-line entry point ``epdq``."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import experiments as ex
from .measures import (
    DiagramFormatError,
    PersistenceMeasure,
    empirical_epd,
    format_dgm,
    read_dgm,
    read_sample,
    write_sample,
)

logger = logging.getLogger("epdq")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3


class UsageError(Exception):
    pass


def parse_p(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid p {text!r}") from None
    if not p >= 1:
        raise argparse.ArgumentTypeError("p must be >= 1 or 'inf'")
    return p


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text: str) -> int:
    s = int(text)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return s


def _common(p_default: str | None = "2") -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=_seed, default=0, help="random seed (default 0)")
    parent.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: number of logical cores)")
    parent.add_argument("--out", default=None, help="output path (default: standard output)")
    if p_default is not None:
        parent.add_argument("--p", type=parse_p, default=parse_p(p_default), help="exponent, a number >= 1 or 'inf'")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epdq", description="Expected persistence diagrams: "
                                     "estimation, transport distances and quantization.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[_common(None)], help="sample random diagrams into a directory")
    g.add_argument("model", choices=["triangles", "torus"])
    g.add_argument("-n", "--count", type=int, default=10, help="number of diagrams")
    g.add_argument("--n-min", type=int, default=1)
    g.add_argument("--n-max", type=int, default=20)
    g.add_argument("--cloud-size", type=float, default=250.0)
    g.add_argument("--epsilon", type=float, default=0.1)
    g.add_argument("--radius-fraction", type=float, default=0.4)
    g.add_argument("--clouds", action="store_true", help="torus: write the point clouds instead of diagrams")

    e = sub.add_parser("epd", parents=[_common(None)], help="empirical expected diagram of a sample")
    e.add_argument("inputs", nargs="+", help=".dgm files or directories of .dgm files")
    e.add_argument("--from-clouds", action="store_true", help="inputs are point clouds; compute their diagrams")
    e.add_argument("--dim", type=int, choices=[0, 1], default=1)
    e.add_argument("--radius-fraction", type=float, default=0.4)

    q = sub.add_parser("quantize", parents=[_common()], help="quantize the expected diagram of a sample")
    q.add_argument("inputs", nargs="+", help=".dgm files or directories, in sample order")
    q.add_argument("-k", type=int, default=2)
    q.add_argument("--method", choices=["online", "no-diagonal", "weighted"], default="online")
    q.add_argument("--batch-size", type=int, default=None)
    q.add_argument("--split-batches", action="store_true")

    d = sub.add_parser("dist", parents=[_common()], help="OT_p (or bottleneck for inf) between two diagrams")
    d.add_argument("first")
    d.add_argument("second")

    x = sub.add_parser("experiment", help="run an experiment and write its CSV")
    xs = x.add_subparsers(dest="experiment", required=True)
    ct = xs.add_parser("convergence-triangles", parents=[_common()])
    ct.add_argument("--n-list", type=parse_int_list, default=list(ex.TRIANGLE_N_LIST))
    ct.add_argument("--reps", type=int, default=20)
    ct.add_argument("--bins", type=int, default=50)
    ct.add_argument("--n-min", type=int, default=1)
    ct.add_argument("--n-max", type=int, default=20)
    ct.add_argument("--reference-count", type=float, default=10.0,
                    help="expected triangle count of the closed form; 0 uses the mean of the N law")
    co = xs.add_parser("convergence-torus", parents=[_common()])
    co.add_argument("--n-list", type=parse_int_list, default=list(ex.TORUS_N_LIST))
    co.add_argument("--n-max", type=int, default=100)
    co.add_argument("--reps", type=int, default=5)
    co.add_argument("--cloud-size", type=float, default=250.0)
    co.add_argument("--bins", type=int, default=50, help="histogram bins per axis; 0 compares raw measures")
    qu = xs.add_parser("quantization", parents=[_common(None)])
    qu.add_argument("--k-list", type=parse_int_list, default=[1, 2, 3, 4, 5])
    qu.add_argument("-n", type=int, default=60)
    qu.add_argument("--reps", type=int, default=10)
    qu.add_argument("--batch-size", type=int, default=10)
    qu.add_argument("--cloud-size", type=float, default=250.0)
    qu.add_argument("--epsilon", type=float, default=0.1)

    pl = sub.add_parser("plot", help="render an experiment CSV as SVG")
    pl.add_argument("csv")
    pl.add_argument("--kind", choices=["loglog", "bars"], default="loglog")
    pl.add_argument("--out", required=True)
    pl.add_argument("--title", default=None)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_diagrams(inputs) -> list[PersistenceMeasure]:
    out = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            out.extend(read_sample(path))
        elif path.exists():
            out.append(read_dgm(path))
        else:
            raise FileNotFoundError(f"no such file or directory: {item}")
    return out


def cmd_gen(args) -> None:
    from .generators import TorusParams, TriangleModelParams, make_rng, sample_torus_cloud, sample_triangle_diagram
    from .homology import cech_diagram, write_point_cloud

    if args.out is None:
        raise UsageError("gen needs --out DIRECTORY")
    if args.count < 0:
        raise UsageError("--count must be nonnegative")
    rng = make_rng(args.seed)
    if args.model == "triangles":
        params = TriangleModelParams(args.n_min, args.n_max)
        write_sample(args.out, [sample_triangle_diagram(params, rng) for _ in range(args.count)])
        return
    params = TorusParams(mean_points=args.cloud_size, epsilon=args.epsilon)
    clouds = [sample_torus_cloud(params, rng) for _ in range(args.count)]
    if args.clouds:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, pts in enumerate(clouds):
            write_point_cloud(out / f"cloud_{i:04d}.txt", pts)
    else:
        write_sample(args.out, [cech_diagram(pts, radius_fraction=args.radius_fraction) for pts in clouds])


def cmd_epd(args) -> None:
    if args.from_clouds:
        from .homology import cech_diagram, read_point_cloud

        files = []
        for item in args.inputs:
            path = Path(item)
            files.extend(sorted(path.glob("*.txt")) if path.is_dir() else [path])
        diagrams = [cech_diagram(read_point_cloud(f), dim=args.dim, radius_fraction=args.radius_fraction)
                    for f in files]
    else:
        diagrams = _load_diagrams(args.inputs)
    epd = empirical_epd(diagrams)
    _emit(format_dgm(epd, header=f"empirical expected diagram of {len(diagrams)} diagrams"), args.out)


def cmd_quantize(args) -> None:
    from . import quantize as qz

    diagrams = _load_diagrams(args.inputs)
    if args.method == "online":
        c = qz.online_quantize(diagrams, args.k, args.p, args.batch_size, split_batches=args.split_batches,
                               seed=args.seed)
    elif args.method == "no-diagonal":
        c = qz.lloyd_no_diagonal(diagrams, args.k, args.p, args.batch_size, split_batches=args.split_batches)
    else:
        c = qz.weighted_codebook(diagrams, args.k, seed=args.seed)
    epd = empirical_epd(diagrams)
    header = "quantized expected diagram; codebook: " + " ".join(f"({b!r}, {d!r})" for b, d in c.centroids.tolist())
    _emit(format_dgm(qz.quantized_measure(c, epd), header=header), args.out)


def cmd_dist(args) -> None:
    from .transport import bottleneck_distance, ot_distance

    a, b = read_dgm(args.first), read_dgm(args.second)
    value = bottleneck_distance(a, b)[0] if math.isinf(args.p) else ot_distance(a, b, args.p)[0]
    _emit(f"{value!r}\n", args.out)


def cmd_experiment(args) -> None:
    from .generators import TriangleModelParams
    from .measures import GridSpec

    if args.experiment == "convergence-triangles":
        records, summary = ex.run_convergence_triangles(
            args.n_list, args.reps, GridSpec(bins=(args.bins, args.bins)), args.p, args.seed,
            TriangleModelParams(args.n_min, args.n_max), args.reference_count or None, args.threads)
    elif args.experiment == "convergence-torus":
        records, summary = ex.run_convergence_torus(
            args.n_list, args.n_max, args.reps, args.p, args.cloud_size, args.seed,
            bins=args.bins or None, threads=args.threads)
    else:
        records, summary = ex.run_quantization_comparison(
            args.k_list, args.n, args.reps, args.batch_size, args.seed, cloud_size=args.cloud_size,
            epsilon=args.epsilon, threads=args.threads), None
    _emit(ex.emit_csv(records), args.out)
    if summary is not None:
        print(f"slope={summary.slope!r} intercept={summary.intercept!r} r2={summary.r2!r} "
              f"n_points={summary.n_points}", file=sys.stderr)


def cmd_plot(args) -> None:
    from .plotting import plot

    plot(args.csv, args.kind, args.out, args.title)


COMMANDS = {"gen": cmd_gen, "epd": cmd_epd, "quantize": cmd_quantize, "dist": cmd_dist,
            "experiment": cmd_experiment, "plot": cmd_plot}


def _configure_logging() -> None:
    level = os.environ.get("EPDQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.print_usage(sys.stderr)
        print("epdq: error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"epdq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DiagramFormatError, ex.CSVFormatError, OSError, ValueError) as exc:
        print(f"epdq: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

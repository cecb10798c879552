"""
Experiment harness: convergence of empirical expected diagrams and the
comparison of quantization methods, with a fixed CSV record format.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import quantize as qz
from .generators import (
    TorusParams,
    TriangleModelParams,
    closed_form_epd_histogram,
    make_rng,
    sample_torus_diagram,
    sample_triangle_diagram,
)
from .measures import GridSpec, PersistenceMeasure, empirical_epd, to_histogram
from .transport import histogram_ot, ot_distance

logger = logging.getLogger(__name__)

EXPERIMENTS = ("convergence-triangles", "convergence-torus", "quantization")
VALUE_KINDS = ("ot_p_pow_p", "distortion_p", "distortion_inf", "runtime_ms")
CSV_HEADER = ("experiment", "method", "n_or_k", "rep", "seed", "value", "value_kind")

TRIANGLE_N_LIST = (10, 21, 46, 100, 215, 464, 1000)
TORUS_N_LIST = (10, 15, 22, 32, 46, 68, 100)
QUANTIZATION_METHODS = ("OT_2", "OT_inf", "W_2", "weighted")

# stream ids keep the random draws of different experiments apart
_STREAM_TRIANGLES, _STREAM_TORUS, _STREAM_TORUS_PROXY, _STREAM_QUANT = 1, 2, 3, 4


class CSVFormatError(ValueError):
    """Raised on a CSV file that does not follow the record schema."""


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    method: str
    n_or_k: int
    rep: int
    seed: int
    value: float
    value_kind: str

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.value_kind not in VALUE_KINDS:
            raise ValueError(f"unknown value kind {self.value_kind!r}")
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"value must be finite and nonnegative, got {self.value}")


def format_float(x: float) -> str:
    return f"{x:.17g}"


def emit_csv(records: Iterable[ExperimentRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    seen = set()
    for r in records:
        key = (r.experiment, r.method, r.n_or_k, r.rep)
        if key in seen:
            raise ValueError(f"duplicate record {key}")
        seen.add(key)
        writer.writerow([r.experiment, r.method, r.n_or_k, r.rep, r.seed, format_float(r.value), r.value_kind])
    return out.getvalue()


def parse_csv(text: str) -> list[ExperimentRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CSVFormatError("empty CSV")
    if tuple(rows[0]) != CSV_HEADER:
        raise CSVFormatError(f"unexpected header {rows[0]}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise CSVFormatError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            records.append(ExperimentRecord(row[0], row[1], int(row[2]), int(row[3]), int(row[4]),
                                            float(row[5]), row[6]))
        except ValueError as exc:
            raise CSVFormatError(f"line {lineno}: {exc}") from exc
    return records


def write_csv(path, records: Iterable[ExperimentRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(emit_csv(records))


def read_csv(path) -> list[ExperimentRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh.read())


# -- regression ------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionSummary:
    slope: float
    intercept: float
    r2: float
    n_points: int


def per_n_means(ns: Sequence[float], values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    ns, values = np.asarray(ns, dtype=float), np.asarray(values, dtype=float)
    xs = np.unique(ns)
    return xs, np.array([values[ns == x].mean() for x in xs])


def loglog_regression(ns: Sequence[float], values: Sequence[float]) -> RegressionSummary:
    """OLS of ``log(mean value)`` on ``log n`` over the per-``n`` means."""
    xs, means = per_n_means(ns, values)
    if len(xs) < 2:
        raise ValueError("need at least two distinct n values")
    if np.any(means <= 0) or np.any(xs <= 0):
        raise ValueError("log-log regression needs positive values")
    lx, ly = np.log(xs), np.log(means)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RegressionSummary(float(slope), float(intercept), r2, len(xs))


def summarize(records: Sequence[ExperimentRecord], value_kind: str = "ot_p_pow_p") -> RegressionSummary:
    sel = [r for r in records if r.value_kind == value_kind]
    return loglog_regression([r.n_or_k for r in sel], [r.value for r in sel])


# -- worker pool -----------------------------------------------------------------


def default_threads() -> int:
    return os.cpu_count() or 1


def _map(fn: Callable, tasks: Sequence, threads: int | None) -> list:
    """Ordered map, over a process pool when ``threads > 1``."""
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


# -- convergence on the triangle model -------------------------------------------------


def _triangle_task(args) -> float:
    n, rep, seed, params, grid, reference, p = args
    rng = make_rng(seed, _STREAM_TRIANGLES, rep, n)
    epd = empirical_epd([sample_triangle_diagram(params, rng) for _ in range(n)])
    return histogram_ot(to_histogram(epd, grid), reference, p) ** p


def run_convergence_triangles(n_list: Sequence[int] = TRIANGLE_N_LIST, reps: int = 20,
                              grid: GridSpec = GridSpec(), p: float = 2.0, seed: int = 0,
                              params: TriangleModelParams = TriangleModelParams(1, 20),
                              reference_count: float | None = 10.0,
                              threads: int | None = 1) -> tuple[list[ExperimentRecord], RegressionSummary]:
    """``OT_p^p`` between the binned empirical and the binned closed-form expected diagram.

    Every ``(n, rep)`` draws ``n`` fresh diagrams from its own random stream.
    The closed form uses ``reference_count`` as expected number of triangles
    (10, i.e. the constant 30 in front of the integral). Note that the
    default law of ``N``, uniform on ``{1, ..., 20}``, has mean 10.5; pass
    ``reference_count=None`` to use the mean of ``params`` instead.
    """
    _check_n_list(n_list)
    if reps < 1:
        raise ValueError("reps must be positive")
    count = params.expected_count if reference_count is None else reference_count
    reference = closed_form_epd_histogram(grid, count)
    tasks = [(n, rep, seed, params, grid, reference, p) for n in n_list for rep in range(reps)]
    values = _map(_triangle_task, tasks, threads)
    records = [ExperimentRecord("convergence-triangles", f"OT_{_p_label(p)}", n, rep, seed, v, "ot_p_pow_p")
               for (n, rep, *_), v in zip(tasks, values)]
    return records, summarize(records)


# -- convergence on tori -------------------------------------------------------------------


def _torus_task(args) -> PersistenceMeasure:
    stream, i, seed, params, radius_fraction = args
    return sample_torus_diagram(params, make_rng(seed, *stream, i), radius_fraction)


def torus_grid(diagrams: Sequence[PersistenceMeasure], bins: int = 50) -> GridSpec:
    """Square window ``[0, s] x [0, s]`` covering every atom, ``s`` rounded up to 0.5."""
    top = max((float(d.points.max()) for d in diagrams if len(d)), default=1.0)
    s = math.ceil(top * 2.0 + 1e-9) / 2.0
    return GridSpec((0.0, s), (0.0, s), (bins, bins))


def run_convergence_torus(n_list: Sequence[int] = TORUS_N_LIST, n_max: int = 100, reps: int = 5,
                          p: float = 2.0, cloud_size: float = 250.0, seed: int = 0,
                          radius_fraction: float = 0.4, bins: int | None = 50,
                          threads: int | None = 1) -> tuple[list[ExperimentRecord], RegressionSummary]:
    """``OT_p^p`` between empirical expected diagrams of torus clouds and a proxy.

    The proxy is the empirical expected diagram of ``2 n_max`` independent
    diagrams. Each repetition draws ``max(n_list)`` diagrams and uses the
    first ``n`` of them for every ``n``. With ``bins`` set, both measures are
    binned on a common ``bins x bins`` grid before transport; ``bins=None``
    compares the raw measures (memory grows like ``(cloud_size n_max)^2``).
    """
    _check_n_list(n_list)
    if max(n_list) > n_max:
        raise ValueError("n_list may not exceed n_max: the proxy would share its sample size")
    if reps < 1:
        raise ValueError("reps must be positive")
    params = TorusParams(mean_points=cloud_size)
    proxy_tasks = [((_STREAM_TORUS_PROXY,), i, seed, params, radius_fraction) for i in range(2 * n_max)]
    rep_tasks = [((_STREAM_TORUS, rep), i, seed, params, radius_fraction)
                 for rep in range(reps) for i in range(max(n_list))]
    diagrams = _map(_torus_task, proxy_tasks + rep_tasks, threads)
    proxy_dgms, rep_dgms = diagrams[: len(proxy_tasks)], diagrams[len(proxy_tasks):]
    proxy = empirical_epd(proxy_dgms)

    grid = torus_grid(diagrams, bins) if bins else None
    if grid is not None:
        proxy_hist = to_histogram(proxy, grid)
    records = []
    for rep in range(reps):
        sample = rep_dgms[rep * max(n_list): (rep + 1) * max(n_list)]
        for n in n_list:
            epd = empirical_epd(sample[:n])
            if grid is not None:
                value = histogram_ot(to_histogram(epd, grid), proxy_hist, p) ** p
            else:
                value = ot_distance(epd, proxy, p)[0] ** p
            records.append(ExperimentRecord("convergence-torus", f"OT_{_p_label(p)}", n, rep, seed,
                                            value, "ot_p_pow_p"))
    records.sort(key=lambda r: (r.n_or_k, r.rep))
    return records, summarize(records)


# -- quantization comparison ------------------------------------------------------


@dataclass(frozen=True)
class QuantizationRun:
    method: str
    k: int
    rep: int
    codebook: qz.Codebook
    distortion_2: float
    distortion_inf: float
    epd: PersistenceMeasure


def fit_codebook(method: str, diagrams: Sequence[PersistenceMeasure], k: int, batch_size: int,
                 init: qz.Codebook, seed: int = 0) -> qz.Codebook:
    if method == "OT_2":
        return qz.online_quantize(diagrams, k, 2.0, batch_size, init)
    if method == "OT_inf":
        return qz.online_quantize(diagrams, k, math.inf, batch_size, init, seed=seed)
    if method == "W_2":
        return qz.lloyd_no_diagonal(diagrams, k, 2.0, batch_size, init)
    if method == "weighted":
        return qz.weighted_codebook(diagrams, k, seed=seed, init=init)
    raise ValueError(f"unknown method {method!r}")


def quantization_runs(diagrams: Sequence[PersistenceMeasure], k_list: Sequence[int], rep: int,
                      batch_size: int, methods: Sequence[str] = QUANTIZATION_METHODS,
                      seed: int = 0) -> list[QuantizationRun]:
    """Fit every method for every ``k`` on one sample, all started from the same init."""
    epd = empirical_epd(diagrams)
    runs = []
    for k in k_list:
        init = qz.top_persistence_init(diagrams[0], k)
        for method in methods:
            c = fit_codebook(method, diagrams, k, batch_size, init, seed)
            runs.append(QuantizationRun(method, k, rep, c, qz.distortion(c, epd, 2.0),
                                        qz.distortion(c, epd, math.inf), epd))
    return runs


def quantization_sample(rep: int, seed: int, n: int, params: TorusParams,
                        radius_fraction: float = 0.4) -> list[PersistenceMeasure]:
    """The ``n`` torus diagrams used by repetition ``rep`` of the quantization comparison."""
    rng = make_rng(seed, _STREAM_QUANT, rep)
    return [sample_torus_diagram(params, rng, radius_fraction) for _ in range(n)]


def _quantization_task(args) -> list[QuantizationRun]:
    rep, seed, n, k_list, batch_size, methods, params, radius_fraction = args
    diagrams = quantization_sample(rep, seed, n, params, radius_fraction)
    return quantization_runs(diagrams, k_list, rep, batch_size, methods, seed)


def run_quantization_comparison(k_list: Sequence[int] = (1, 2, 3, 4, 5), n: int = 60, reps: int = 10,
                                batch_size: int = 10, seed: int = 0,
                                methods: Sequence[str] = QUANTIZATION_METHODS,
                                cloud_size: float = 250.0, epsilon: float = 0.1,
                                radius_fraction: float = 0.4, threads: int | None = 1,
                                return_runs: bool = False):
    """Distortions (``p = 2`` and ``p = inf``) of each method's codebook on torus samples.

    Each repetition draws ``n`` diagrams of tori with radii jittered by
    ``epsilon``; every method starts from the ``k`` most persistent points of
    the first diagram.
    """
    if not all(1 <= k <= 8 for k in k_list):
        raise ValueError("k values must lie in 1..8")
    if reps < 1:
        raise ValueError("reps must be positive")
    params = TorusParams(mean_points=cloud_size, epsilon=epsilon)
    tasks = [(rep, seed, n, tuple(k_list), batch_size, tuple(methods), params, radius_fraction)
             for rep in range(reps)]
    runs = [run for chunk in _map(_quantization_task, tasks, threads) for run in chunk]
    records = []
    for r in sorted(runs, key=lambda r: (r.method, r.k, r.rep)):
        records.append(ExperimentRecord("quantization", r.method, r.k, r.rep, seed, r.distortion_2, "distortion_p"))
    for r in sorted(runs, key=lambda r: (r.method, r.k, r.rep)):
        records.append(ExperimentRecord("quantization", r.method + "@inf", r.k, r.rep, seed,
                                        r.distortion_inf, "distortion_inf"))
    return (records, runs) if return_runs else records


def _check_n_list(n_list: Sequence[int]) -> None:
    if len(n_list) < 2 or any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise ValueError("n_list must be a strictly increasing list of positive sizes (at least two)")


def _p_label(p: float) -> str:
    return "inf" if math.isinf(p) else format(p, "g")


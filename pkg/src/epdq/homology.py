"""
Čech persistence diagrams (dimensions 0 and 1) of small point clouds.

The filtration value of a simplex is the radius of the smallest ball
enclosing its vertices. Pairs are obtained by Z/2 matrix reduction: dimension 0
by the union-find form of the edge-column reduction, dimension 1 by reducing
edge coboundaries in reverse filtration order, with the dimension-0 deaths
cleared beforehand. Both directions produce the same persistence pairs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numba
import numpy as np

from .measures import DiagramFormatError, PersistenceMeasure

logger = logging.getLogger(__name__)


class Simplex(NamedTuple):
    vertices: tuple[int, ...]
    value: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


# -- geometry kernels ----------------------------------------------------------


@numba.njit(cache=True)
def _meb_radius3(a2, b2, c2):
    """Smallest enclosing ball radius of a triangle given squared side lengths."""
    longest = max(a2, b2, c2)
    half_longest = math.sqrt(longest) / 2.0
    if 2.0 * longest >= a2 + b2 + c2:  # right or obtuse: diametral ball
        return half_longest
    denom = 2.0 * (a2 * b2 + b2 * c2 + c2 * a2) - (a2 * a2 + b2 * b2 + c2 * c2)
    r = math.sqrt(a2 * b2 * c2 / denom)
    return max(r, half_longest)


def meb_radius(p0, p1, p2) -> float:
    """Radius of the smallest ball enclosing three points."""
    p0, p1, p2 = (np.asarray(p, dtype=float) for p in (p0, p1, p2))
    return float(_meb_radius3(np.sum((p1 - p2) ** 2), np.sum((p0 - p2) ** 2), np.sum((p0 - p1) ** 2)))


@numba.njit(cache=True)
def _edges_kernel(pts, max_radius):
    n = pts.shape[0]
    sq = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for d in range(pts.shape[1]):
                t = pts[i, d] - pts[j, d]
                s += t * t
            sq[i, j] = s
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            if math.sqrt(sq[i, j]) / 2.0 <= max_radius:
                count += 1
    edges = np.empty((count, 2), dtype=np.int64)
    values = np.empty(count)
    c = 0
    for i in range(n):
        for j in range(i + 1, n):
            v = math.sqrt(sq[i, j]) / 2.0
            if v <= max_radius:
                edges[c, 0] = i
                edges[c, 1] = j
                values[c] = v
                c += 1
    return sq, edges, values


@numba.njit(cache=True)
def _triangles_kernel(sq, max_radius):
    n = sq.shape[0]
    # a triangle's radius is at least half its longest edge
    limit = 4.0 * max_radius * max_radius
    cap = 1024
    tris = np.empty((cap, 3), dtype=np.int64)
    values = np.empty(cap)
    c = 0
    for i in range(n):
        for j in range(i + 1, n):
            if sq[i, j] > limit:
                continue
            for k in range(j + 1, n):
                if sq[i, k] > limit or sq[j, k] > limit:
                    continue
                v = _meb_radius3(sq[j, k], sq[i, k], sq[i, j])
                if v <= max_radius:
                    if c == cap:
                        cap *= 2
                        grown_t = np.empty((cap, 3), dtype=np.int64)
                        grown_t[:c] = tris[:c]
                        tris = grown_t
                        grown_v = np.empty(cap)
                        grown_v[:c] = values[:c]
                        values = grown_v
                    tris[c, 0] = i
                    tris[c, 1] = j
                    tris[c, 2] = k
                    values[c] = v
                    c += 1
    return tris[:c].copy(), values[:c].copy()


@numba.njit(cache=True)
def _cofaces(n, edges, tris):
    """Triangles containing each edge, in filtration order (CSR layout)."""
    eidx = np.full((n, n), -1, dtype=np.int64)
    for e in range(edges.shape[0]):
        eidx[edges[e, 0], edges[e, 1]] = e
    ptr = np.zeros(edges.shape[0] + 1, dtype=np.int64)
    for f in range(tris.shape[0]):
        i, j, k = tris[f, 0], tris[f, 1], tris[f, 2]
        ptr[eidx[i, j] + 1] += 1
        ptr[eidx[i, k] + 1] += 1
        ptr[eidx[j, k] + 1] += 1
    for e in range(edges.shape[0]):
        ptr[e + 1] += ptr[e]
    fill = ptr[:-1].copy()
    cof = np.empty(ptr[-1], dtype=np.int64)
    for f in range(tris.shape[0]):
        i, j, k = tris[f, 0], tris[f, 1], tris[f, 2]
        for e in (eidx[i, j], eidx[i, k], eidx[j, k]):
            cof[fill[e]] = f
            fill[e] += 1
    return ptr, cof


# -- filtration ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Filtration:
    """Čech filtration of a point cloud, truncated at ``max_radius``.

    Edges and triangles are stored per dimension, each sorted by
    ``(value, lexicographic vertices)``; vertices all enter at 0. The global
    order ``(value, dimension, vertices)`` is available as :attr:`simplices`.
    """

    points: np.ndarray
    max_radius: float
    edges: np.ndarray
    edge_values: np.ndarray
    triangles: np.ndarray
    triangle_values: np.ndarray
    _sq: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return self.n_vertices + len(self.edges) + len(self.triangles)

    @cached_property
    def simplices(self) -> list[Simplex]:
        out = [Simplex((i,), 0.0) for i in range(self.n_vertices)]
        out += [Simplex(tuple(e), float(v)) for e, v in zip(self.edges.tolist(), self.edge_values)]
        out += [Simplex(tuple(t), float(v)) for t, v in zip(self.triangles.tolist(), self.triangle_values)]
        out.sort(key=lambda s: (s.value, s.dim, s.vertices))
        return out


def cech_filtration(points, max_radius: float) -> Filtration:
    """All simplices of dimension <= 2 with enclosing radius <= ``max_radius``.

    Vertices enter at 0, edges at half their length, triangles at their
    circumradius when acute and half their longest edge otherwise.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=float))
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("need at least one point, as an (n, d) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("coordinates must be finite")
    if not max_radius > 0:
        raise ValueError("max_radius must be positive")
    sq, edges, evals = _edges_kernel(pts, float(max_radius))
    tris, tvals = _triangles_kernel(sq, float(max_radius))
    eo = np.argsort(evals, kind="stable")
    to = np.argsort(tvals, kind="stable")
    return Filtration(pts, float(max_radius), edges[eo], evals[eo], tris[to], tvals[to], sq)


# -- reduction ------------------------------------------------------------------


@numba.njit(cache=True)
def _h0_union_find(n, edges):
    parent = np.arange(n)
    negative = np.zeros(edges.shape[0], dtype=np.bool_)
    for e in range(edges.shape[0]):
        a, b = edges[e, 0], edges[e, 1]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            # all vertices are born at 0, so the elder rule reduces to any union
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
            negative[e] = True
    return negative


@numba.njit(cache=True)
def _symdiff(a, b):
    out = np.empty(len(a) + len(b), dtype=a.dtype)
    i = j = c = 0
    while i < len(a) and j < len(b):
        if a[i] < b[j]:
            out[c] = a[i]
            i += 1
            c += 1
        elif b[j] < a[i]:
            out[c] = b[j]
            j += 1
            c += 1
        else:
            i += 1
            j += 1
    while i < len(a):
        out[c] = a[i]
        i += 1
        c += 1
    while j < len(b):
        out[c] = b[j]
        j += 1
        c += 1
    return out[:c]


@numba.njit(cache=True)
def _h1_cohomology(n_triangles, ptr, cof, cleared):
    # coboundary columns processed from the youngest edge; pivot = oldest triangle
    n_edges = len(ptr) - 1
    owner = np.full(n_triangles, -1, dtype=np.int64)
    death = np.full(n_edges, -1, dtype=np.int64)
    start = np.zeros(n_edges, dtype=np.int64)
    length = np.zeros(n_edges, dtype=np.int64)
    buf = np.empty(max(16, 4 * n_edges), dtype=np.int64)
    used = 0
    essential = 0
    for e in range(n_edges - 1, -1, -1):
        if cleared[e]:
            continue
        col = cof[ptr[e]:ptr[e + 1]]
        while len(col) > 0:
            o = owner[col[0]]
            if o < 0:
                break
            col = _symdiff(col, buf[start[o]:start[o] + length[o]])
        if len(col) == 0:
            essential += 1
            continue
        owner[col[0]] = e
        death[e] = col[0]
        if used + len(col) > len(buf):
            grown = np.empty(max(2 * len(buf), used + len(col)), dtype=np.int64)
            grown[:used] = buf[:used]
            buf = grown
        buf[used:used + len(col)] = col
        start[e] = used
        length[e] = len(col)
        used += len(col)
    return death, essential


@dataclass(frozen=True)
class PairsInfo:
    infinite: int
    zero_persistence: int


def _pair_indices(f: Filtration, dim: int):
    """Indices of paired simplices: ``(births, deaths, n_infinite)``.

    Dimension 0 returns ``births=None`` (every vertex enters at 0) and the
    merging edges as deaths; dimension 1 returns edge and triangle indices.
    """
    if dim not in (0, 1):
        raise ValueError("only dimensions 0 and 1 are supported")
    negative = _h0_union_find(f.n_vertices, f.edges)
    if dim == 0:
        deaths = np.flatnonzero(negative)
        return None, deaths, f.n_vertices - len(deaths)
    ptr, cof = _cofaces(f.n_vertices, f.edges, f.triangles)
    death_idx, infinite = _h1_cohomology(len(f.triangles), ptr, cof, negative)
    births = np.flatnonzero(death_idx >= 0)
    return births, death_idx[births], int(infinite)


def simplex_pairs(f: Filtration, dim: int) -> list[tuple[tuple, tuple]]:
    """Paired simplices as vertex tuples, zero-persistence pairs included.

    In dimension 0 the birth is reported as the empty tuple, since all
    vertices enter together.
    """
    births, deaths, _ = _pair_indices(f, dim)
    if dim == 0:
        return [((), tuple(f.edges[d].tolist())) for d in deaths]
    return [(tuple(f.edges[b].tolist()), tuple(f.triangles[d].tolist())) for b, d in zip(births, deaths)]


def persistence_pairs(f: Filtration, dim: int, return_info: bool = False):
    """Finite persistence pairs of ``f`` in dimension 0 or 1, as a diagram.

    Zero-persistence pairs and infinite bars are dropped; the number of each
    is logged and, with ``return_info=True``, returned as :class:`PairsInfo`.
    """
    births_idx, deaths_idx, infinite = _pair_indices(f, dim)
    if dim == 0:
        deaths = f.edge_values[deaths_idx]
        births = np.zeros(len(deaths))
    else:
        births = f.edge_values[births_idx]
        deaths = f.triangle_values[deaths_idx]
    keep = deaths > births
    info = PairsInfo(int(infinite), int((~keep).sum()))
    if info.infinite or info.zero_persistence:
        logger.debug("H%d: dropped %d infinite and %d zero-persistence pairs",
                     dim, info.infinite, info.zero_persistence)
    dgm = PersistenceMeasure(np.column_stack([births[keep], deaths[keep]]))
    return (dgm, info) if return_info else dgm


def cech_diagram(points, max_radius: float | None = None, dim: int = 1,
                 radius_fraction: float = 0.4) -> PersistenceMeasure:
    """Čech diagram of a point cloud; ``max_radius`` defaults to a fraction of its diameter."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return PersistenceMeasure.empty()
    if max_radius is None:
        max_radius = radius_fraction * diameter(pts)
        if max_radius <= 0:
            return PersistenceMeasure.empty()
    return persistence_pairs(cech_filtration(pts, max_radius), dim)


def diameter(points) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    sq = np.sum(pts**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2 * pts @ pts.T
    return float(math.sqrt(max(d2.max(), 0.0)))


# -- point-cloud files ------------------------------------------------------------


def read_point_cloud(path) -> np.ndarray:
    """Whitespace-separated coordinates, one point per line; ``#`` comments."""
    rows = []
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(t) for t in line.split()])
        except ValueError as exc:
            raise DiagramFormatError(f"{path}:{lineno}: {exc}") from None
    if rows and len({len(r) for r in rows}) != 1:
        raise DiagramFormatError(f"{path}: rows have different dimensions")
    return np.array(rows, dtype=float).reshape(len(rows), -1 if rows else 0)


def write_point_cloud(path, points) -> None:
    pts = np.asarray(points, dtype=float)
    lines = [" ".join(repr(x) for x in row) for row in pts.tolist()]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

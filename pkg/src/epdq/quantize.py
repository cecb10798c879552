"""
Quantization of persistence measures with a diagonal cell.

A codebook of ``k`` centroids splits the half-plane into ``k + 1`` cells:
one Voronoi cell per centroid plus the cell of points closer to the diagonal
than to every centroid. Cell indices are 0-based; index ``k`` is the
diagonal cell. Ties go to the smaller index.
"""

from __future__ import annotations

import logging
import math
import random
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .enclosing import min_enclosing_circle
from .measures import SQRT2, HalfPlanePoint, PersistenceMeasure, concatenate, persistence

logger = logging.getLogger(__name__)

MIN_PERSISTENCE = 1e-9


@dataclass(frozen=True, eq=False)
class Codebook:
    """Ordered centroids, all strictly above the diagonal."""

    centroids: np.ndarray

    def __init__(self, centroids):
        c = np.array(centroids, dtype=float).reshape(-1, 2)
        if np.any(c[:, 1] <= c[:, 0]):
            raise ValueError("centroids must lie strictly above the diagonal")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def __len__(self) -> int:
        return self.k

    def __iter__(self):
        return (HalfPlanePoint(float(b), float(d)) for b, d in self.centroids)

    def __repr__(self) -> str:
        return f"Codebook({self.centroids.tolist()})"

    def allclose(self, other: "Codebook", atol: float = 1e-9) -> bool:
        return self.k == other.k and bool(np.allclose(self.centroids, other.centroids, rtol=0, atol=atol))


def _sq_distances(c: Codebook, points: np.ndarray, diagonal_cell: bool = True) -> np.ndarray:
    """Squared distances to every centroid, plus the diagonal as last column."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    diff = points[:, None, :] - c.centroids[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    if diagonal_cell:
        diag = (points[:, 1] - points[:, 0]) ** 2 / 2.0
        d2 = np.column_stack([d2, diag])
    return d2


def assign_cells(c: Codebook, points, diagonal_cell: bool = True) -> np.ndarray:
    """Cell index of every point (``k`` is the diagonal cell)."""
    d2 = _sq_distances(c, points, diagonal_cell)
    if d2.shape[1] == 0:
        return np.zeros(len(d2), dtype=int)
    # argmin returns the first minimiser, which is the tie-breaking rule
    return np.argmin(d2, axis=1)


def assign_cell(c: Codebook, x) -> int:
    return int(assign_cells(c, np.asarray(x, dtype=float).reshape(1, 2))[0])


def cell_masses(c: Codebook, mu: PersistenceMeasure, diagonal_cell: bool = True) -> np.ndarray:
    """Mass of every cell; length ``k + 1`` with the diagonal cell last."""
    n_cells = c.k + 1 if diagonal_cell else c.k
    if len(mu) == 0:
        return np.zeros(n_cells)
    return np.bincount(assign_cells(c, mu.points, diagonal_cell), weights=mu.masses, minlength=n_cells)


def optimal_weights(c: Codebook, mu: PersistenceMeasure) -> np.ndarray:
    """Masses ``m_j = mu(V_j(c))`` for the ``k`` centroids."""
    return cell_masses(c, mu)[: c.k]


def quantized_measure(c: Codebook, mu: PersistenceMeasure) -> PersistenceMeasure:
    """``sum_j mu(V_j(c)) delta_{c_j}``."""
    return PersistenceMeasure(c.centroids, optimal_weights(c, mu))


def distortion(c: Codebook, mu: PersistenceMeasure, p: float = 2.0) -> float:
    """Distortion of ``mu`` by the codebook, ``(sum_j int_{V_j} |x - c_j|^p dmu)^(1/p)``.

    For ``p = inf`` it is the largest distance from a support point to its
    closest centroid or to the diagonal.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if len(mu) == 0:
        return 0.0
    nearest = np.sqrt(np.min(_sq_distances(c, mu.points), axis=1))
    if math.isinf(p):
        return float(nearest.max())
    return float(np.sum(mu.masses * nearest**p) ** (1.0 / p))


# -- p-centers -----------------------------------------------------------------


def _objective(y, pts, w, p):
    return float(np.sum(w * np.linalg.norm(pts - y, axis=1) ** p))


def _gradient(y, pts, w, p):
    diff = y - pts
    r = np.linalg.norm(diff, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(r > 0, w * p * r ** (p - 2), 0.0)
    return coef @ diff


def p_center(points, masses=None, p: float = 2.0, gtol: float = 1e-9, max_iter: int = 10_000,
             rng: random.Random | None = None) -> HalfPlanePoint:
    """Minimiser of ``y -> sum_i m_i |y - x_i|^p`` over the plane.

    ``p = 2`` is the weighted mean, ``p = inf`` the center of the smallest
    enclosing circle of the points (masses ignored). Other ``p`` use gradient
    descent with backtracking from the weighted mean, stopping when the
    gradient norm falls below ``gtol``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("empty cell")
    w = np.ones(len(pts)) if masses is None else np.asarray(masses, dtype=float)
    if math.isinf(p):
        (cx, cy), _ = min_enclosing_circle(pts, rng)
        return HalfPlanePoint(cx, cy)
    if p < 1:
        raise ValueError("p must be >= 1")
    y = (w @ pts) / w.sum()
    if p == 2 or len(pts) == 1:
        return HalfPlanePoint(float(y[0]), float(y[1]))

    f = _objective(y, pts, w, p)
    step = 1.0 / (p * w.sum() * max(1.0, np.ptp(pts, axis=0).max()) ** max(p - 2, 0.0))
    for _ in range(max_iter):
        g = _gradient(y, pts, w, p)
        gn = float(np.linalg.norm(g))
        if gn <= gtol:
            break
        step *= 2.0
        while True:
            cand = y - step * g
            fc = _objective(cand, pts, w, p)
            if fc <= f - 0.5 * step * gn * gn:
                break
            step *= 0.5
            if step < 1e-300:
                break
        if step < 1e-300 or fc >= f:
            break
        y, f = cand, fc
    return HalfPlanePoint(float(y[0]), float(y[1]))


def _clamp_above_diagonal(y: np.ndarray) -> np.ndarray:
    if (y[1] - y[0]) / SQRT2 > MIN_PERSISTENCE:
        return y
    mid = 0.5 * (y[0] + y[1])
    half = MIN_PERSISTENCE * SQRT2 / 2.0
    return np.array([mid - half, mid + half])


# -- online algorithm ----------------------------------------------------------


def update_step(t: int, c: Codebook, mu: PersistenceMeasure, mu_prime: PersistenceMeasure,
                p: float = 2.0, diagonal_cell: bool = True, rng: random.Random | None = None) -> Codebook:
    """One update ``c_j <- c_j - (mu(V_j) / mu'(V_j)) (c_j - v_j) / (t + 1)``.

    ``v_j`` is the ``p``-center of ``mu`` restricted to cell ``j``. Cells
    empty for either measure keep their centroid. Centroids pushed onto or
    below the diagonal are moved back to persistence ``1e-9``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    new = c.centroids.copy()
    cells = assign_cells(c, mu.points, diagonal_cell) if len(mu) else np.empty(0, dtype=int)
    mass = cell_masses(c, mu, diagonal_cell)
    mass_prime = cell_masses(c, mu_prime, diagonal_cell)
    for j in range(c.k):
        if mass[j] <= 0 or mass_prime[j] <= 0:
            continue
        sel = cells == j
        center = np.asarray(p_center(mu.points[sel], mu.masses[sel], p, rng=rng))
        moved = c.centroids[j] - (mass[j] / mass_prime[j]) * (c.centroids[j] - center) / (t + 1)
        new[j] = _clamp_above_diagonal(moved)
    return Codebook(new)


def top_persistence_init(diagram: PersistenceMeasure, k: int) -> Codebook:
    """The ``k`` atoms of highest persistence (ties by input order)."""
    if k < 1:
        raise ValueError("k must be positive")
    if len(diagram) < k:
        raise ValueError(f"k={k} larger than the {len(diagram)} available init points")
    order = np.argsort(-diagram.persistence, kind="stable")[:k]
    return Codebook(diagram.points[order])


def default_batch_size(n: int) -> int:
    return max(2, math.ceil(math.log(n))) if n > 1 else 1


def _batch_average(diagrams: Sequence[PersistenceMeasure]) -> PersistenceMeasure:
    return concatenate(diagrams).scaled(1.0 / len(diagrams))


def online_quantize(diagrams: Sequence[PersistenceMeasure], k: int, p: float = 2.0,
                    batch_size: int | None = None, init: Codebook | None = None,
                    split_batches: bool = False, diagonal_cell: bool = True,
                    seed: int = 0) -> Codebook:
    """Online quantization of the expected diagram of a sample.

    The diagrams are cut, in order, into ``T = n // batch_size`` consecutive
    batches (sizes differing by at most one). Step ``t`` applies
    :func:`update_step` with the averages of the two halves of batch ``t``
    when ``split_batches`` is set, and with the whole-batch average on both
    sides otherwise.

    Parameters
    ----------
    diagrams : sequence of PersistenceMeasure
    k : int
        Number of centroids.
    p : float
        Exponent of the ``p``-centers, ``p > 1`` or ``inf``.
    batch_size : int, optional
        Defaults to ``max(2, ceil(log n))``.
    init : Codebook, optional
        Defaults to the ``k`` most persistent points of the first diagram.
    diagonal_cell : bool
        ``False`` drops the diagonal cell (plain online Lloyd).
    seed : int
        Seeds the shuffles of the enclosing-circle solver (``p = inf``).
    """
    n = len(diagrams)
    if n == 0:
        raise ValueError("no diagrams")
    if batch_size is None:
        batch_size = default_batch_size(n)
    if not 1 <= batch_size <= n:
        raise ValueError("need 1 <= batch_size <= number of diagrams")
    if split_batches and batch_size < 2:
        raise ValueError("split batches need batch_size >= 2")
    c = top_persistence_init(diagrams[0], k) if init is None else init
    if c.k != k:
        raise ValueError(f"init has {c.k} centroids, expected {k}")
    rng = random.Random(seed)
    n_batches = n // batch_size
    for t, batch in enumerate(np.array_split(np.arange(n), n_batches)):
        members = [diagrams[i] for i in batch]
        if split_batches:
            half = len(members) // 2
            mu1, mu2 = _batch_average(members[:half]), _batch_average(members[half:])
        else:
            mu1 = mu2 = _batch_average(members)
        c = update_step(t, c, mu1, mu2, p, diagonal_cell, rng)
    return c


def lloyd_no_diagonal(diagrams: Sequence[PersistenceMeasure], k: int, p: float = 2.0,
                      batch_size: int | None = None, init: Codebook | None = None,
                      split_batches: bool = False) -> Codebook:
    """Same online scheme without the diagonal cell (the Wasserstein baseline)."""
    return online_quantize(diagrams, k, p, batch_size, init, split_batches, diagonal_cell=False)


# -- weighted-codebook baseline ------------------------------------------------------


def persistence_weights(pers_q: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Piecewise-linear ramp ``min(max(0, (x - lo) / (hi - lo)), 1)``."""
    if hi <= lo:
        return np.zeros_like(pers_q)
    return np.clip((pers_q - lo) / (hi - lo), 0.0, 1.0)


def kmeans_lloyd(points: np.ndarray, init: np.ndarray, rtol: float = 1e-7, max_iter: int = 200) -> np.ndarray:
    """Batch Lloyd iterations until the relative change of distortion is below ``rtol``."""
    centers = np.array(init, dtype=float)
    prev = None
    for _ in range(max_iter):
        diff = points[:, None, :] - centers[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        labels = np.argmin(d2, axis=1)
        cost = float(d2[np.arange(len(points)), labels].sum())
        for j in range(len(centers)):
            sel = labels == j
            if np.any(sel):
                centers[j] = points[sel].mean(axis=0)
        if prev is not None and abs(prev - cost) <= rtol * max(prev, 1e-300):
            break
        prev = cost
    return centers


def weighted_codebook(diagrams: Sequence[PersistenceMeasure], k: int, n_subsample: int = 10_000,
                      q: float = 1.0, quantile_lo: float = 0.05, quantile_hi: float = 0.95,
                      seed: int = 0, init: Codebook | None = None) -> Codebook:
    """Persistence-weighted subsampling followed by k-means.

    Points of the pooled support are drawn with probability proportional to
    a ramp of ``persistence ** q`` between its ``quantile_lo`` and
    ``quantile_hi`` quantiles, then clustered by Lloyd's algorithm (no
    diagonal cell) started from ``init`` (default: the ``k`` most persistent
    points of the first diagram).
    """
    pooled = concatenate(list(diagrams))
    support = np.unique(pooled.points, axis=0)
    if len(support) == 0:
        raise ValueError("empty support")
    pq = persistence(support) ** q
    lo, hi = np.quantile(pq, [quantile_lo, quantile_hi])
    w = persistence_weights(pq, lo, hi)
    rng = np.random.Generator(np.random.PCG64(seed))
    if w.sum() <= 0:
        warnings.warn("all sampling weights vanish; falling back to uniform subsampling", stacklevel=2)
        w = np.ones(len(support))
    sample = support[rng.choice(len(support), size=n_subsample, replace=True, p=w / w.sum())]
    if init is None:
        init = top_persistence_init(diagrams[0], k)
    centers = kmeans_lloyd(sample, init.centroids)
    return Codebook(np.array([_clamp_above_diagonal(x) for x in centers]))


# -- margin diagnostic -----------------------------------------------------------


def _poly_roots(coefs: np.ndarray) -> np.ndarray:
    """Real roots of a polynomial given highest degree first."""
    coefs = np.trim_zeros(np.asarray(coefs, dtype=float), "f")
    if len(coefs) <= 1:
        return np.empty(0)
    scale = np.abs(coefs).max()
    coefs = coefs / scale
    while len(coefs) > 1 and abs(coefs[0]) < 1e-14:
        coefs = coefs[1:]
    if len(coefs) <= 1:
        return np.empty(0)
    r = np.roots(coefs)
    return np.real(r[np.abs(np.imag(r)) < 1e-9])


class _Curve:
    """A boundary curve ``y(s) = (P_b(s), P_d(s))`` with polynomial coordinates."""

    def __init__(self, pb: np.poly1d, pd: np.poly1d, owner: int, other: int):
        self.pb, self.pd = pb, pd
        self.owner, self.other = owner, other

    def point(self, s):
        return np.stack([self.pb(s), self.pd(s)], axis=-1)


def _sqdist_poly(curve: _Curve, x) -> np.poly1d:
    return (curve.pb - x[0]) ** 2 + (curve.pd - x[1]) ** 2


def _diag_sq_poly(curve: _Curve) -> np.poly1d:
    return (curve.pd - curve.pb) ** 2 / 2.0


def _boundary_curves(c: Codebook) -> list[_Curve]:
    """Bisectors between centroid pairs and parabolas between centroids and the diagonal."""
    curves = []
    cs = c.centroids
    for a in range(c.k):
        for b in range(a + 1, c.k):
            mid = 0.5 * (cs[a] + cs[b])
            direction = np.array([-(cs[b, 1] - cs[a, 1]), cs[b, 0] - cs[a, 0]])
            norm = np.linalg.norm(direction)
            if norm == 0:
                continue
            direction /= norm
            curves.append(_Curve(np.poly1d([direction[0], mid[0]]), np.poly1d([direction[1], mid[1]]), a, b))
        # rotated frame: u along the diagonal, v = persistence
        u0 = (cs[a, 0] + cs[a, 1]) / SQRT2
        v0 = (cs[a, 1] - cs[a, 0]) / SQRT2
        # points equidistant from the centroid and the diagonal: v = ((u - u0)^2 + v0^2) / (2 v0)
        u = np.poly1d([1.0, 0.0])
        v = ((u - u0) ** 2 + v0**2) / (2 * v0)
        curves.append(_Curve((u - v) / SQRT2, (u + v) / SQRT2, a, c.k))
    return curves


def _feasible_intervals(curve: _Curve, c: Codebook, span: float) -> list[tuple[float, float]]:
    """Parameter intervals where the two defining sites are the nearest ones."""
    cs = c.centroids
    owner_sq = _sqdist_poly(curve, cs[curve.owner])
    constraints = []  # polynomials that must be <= 0
    for m in range(c.k):
        if m in (curve.owner, curve.other):
            continue
        constraints.append(owner_sq - _sqdist_poly(curve, cs[m]))
    if curve.other != c.k:
        constraints.append(owner_sq - _diag_sq_poly(curve))
        constraints.append(curve.pb - curve.pd)  # stay above the diagonal
    breaks = {-span, span}
    for g in constraints:
        breaks.update(r for r in _poly_roots(g.coeffs) if -span < r < span)
    pts = sorted(breaks)
    out = []
    for a, b in zip(pts, pts[1:]):
        mid = 0.5 * (a + b)
        if all(g(mid) <= 0 for g in constraints):
            if out and abs(out[-1][1] - a) < 1e-15:
                out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
    return out


def boundary_distance(c: Codebook, points, span: float | None = None) -> np.ndarray:
    """Distance from each point to the set where two nearest sites tie.

    The set is made of perpendicular-bisector pieces between centroids and
    parabola pieces (focus a centroid, directrix the diagonal), each
    restricted to where its two sites are jointly closest.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if span is None:
        scale = np.abs(np.concatenate([pts.ravel(), c.centroids.ravel()])).max() if len(pts) else 1.0
        span = 10.0 * (scale + 1.0)
    out = np.full(len(pts), np.inf)
    for curve in _boundary_curves(c):
        intervals = _feasible_intervals(curve, c, span)
        if not intervals:
            continue
        for i, x in enumerate(pts):
            dist_sq = _sqdist_poly(curve, x)
            crit = _poly_roots(dist_sq.deriv().coeffs)
            for a, b in intervals:
                cand = [a, b] + [s for s in crit if a < s < b]
                out[i] = min(out[i], float(np.sqrt(max(np.min(dist_sq(np.array(cand))), 0.0))))
    return out


def margin_profile(epd: PersistenceMeasure, c: Codebook, radii: Sequence[float]) -> list[tuple[float, float]]:
    """Mass of the ``t``-neighbourhood of the cell-boundary set, for each ``t``."""
    if len(epd) == 0:
        return [(float(t), 0.0) for t in radii]
    dist = boundary_distance(c, epd.points)
    return [(float(t), float(epd.masses[dist <= t].sum())) for t in radii]

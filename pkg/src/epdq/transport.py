"""
Optimal partial transport between persistence measures.

``OT_p`` lets mass leave or enter through the diagonal at a cost equal to the
distance to the diagonal. It is computed exactly by augmenting each side with
a diagonal sink carrying the other side's total mass, which turns the
problem into a balanced transportation problem solved by network simplex on
integer-scaled masses.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .measures import SQRT2, GridHistogram, PersistenceMeasure, persistence

# POT probes every installed deep-learning backend on import; only numpy is used here.
for _key in ("PYTORCH", "JAX", "TENSORFLOW", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_key}", "1")
import ot  # noqa: E402

DIAGONAL = -1
MASS_PRECISION = 1e-9


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between two augmented measures.

    ``pairs`` holds ``(source, target, mass)`` with atom indices into the two
    measures, or :data:`DIAGONAL`. Diagonal-to-diagonal flow is not recorded.
    """

    pairs: tuple[tuple[int, int, float], ...]
    cost_p: float
    p: float

    def marginals(self, n_source: int, n_target: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = np.zeros(n_source), np.zeros(n_target)
        for i, j, m in self.pairs:
            if i != DIAGONAL:
                a[i] += m
            if j != DIAGONAL:
                b[j] += m
        return a, b


def _pairwise_dist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def mass_scale(masses: np.ndarray, precision: float = MASS_PRECISION) -> int:
    """Integer factor turning every mass into an integer.

    The least common denominator of the masses when each is a fraction with
    denominator at most ``1/precision``; otherwise ``round(1/precision)``.
    """
    max_den = int(round(1.0 / precision))
    if len(masses) == 0:
        return 1
    uniq = np.unique(masses)
    dens = []
    for m in uniq.tolist():
        f = Fraction(m).limit_denominator(max_den)
        if abs(float(f) - m) > precision * 1e-3 * max(1.0, abs(m)):
            return max_den
        dens.append(f.denominator)
    scale = reduce(math.lcm, dens, 1)
    return scale if scale <= max_den else max_den


def ot_distance(mu: PersistenceMeasure, nu: PersistenceMeasure, p: float = 2.0,
                precision: float = MASS_PRECISION) -> tuple[float, TransportPlan]:
    """Exact ``OT_p`` distance between two persistence measures.

    Parameters
    ----------
    mu, nu : PersistenceMeasure
    p : float
        Ground exponent, ``1 <= p < inf``. Use :func:`bottleneck_distance`
        for ``p = inf``.
    precision : float
        Masses are rounded to multiples of ``1/scale`` where ``scale`` is the
        common denominator found by :func:`mass_scale`.

    Returns
    -------
    value : float
        ``OT_p(mu, nu)``.
    plan : TransportPlan
        Optimal plan witnessing the value (``value ** p == plan.cost_p``).
    """
    if not (1 <= p < math.inf):
        raise ValueError("p must satisfy 1 <= p < inf")
    n, m = len(mu), len(nu)
    if n == 0 and m == 0:
        return 0.0, TransportPlan((), 0.0, p)

    scale = mass_scale(np.concatenate([mu.masses, nu.masses]), precision)
    a = np.round(mu.masses * scale)
    b = np.round(nu.masses * scale)
    pers_mu, pers_nu = mu.persistence, nu.persistence

    cost = np.zeros((n + 1, m + 1))
    cost[:n, :m] = _pairwise_dist(mu.points, nu.points) ** p
    cost[:n, m] = pers_mu**p
    cost[n, :m] = pers_nu**p
    a_aug = np.append(a, b.sum())
    b_aug = np.append(b, a.sum())

    # the solver checks feasibility with an absolute tolerance, so bring the
    # supplies to order one; a power-of-two factor keeps them exact
    unit = 2.0 ** math.ceil(math.log2(max(a_aug.sum(), 1.0)))
    flow = ot.emd(a_aug / unit, b_aug / unit, cost, numItermax=max(100_000, 50 * (n + 1) * (m + 1)))
    # integral supplies admit an integral optimal vertex; snap the solver's round-off
    flow = np.round(flow * unit)
    rows, cols = np.nonzero(flow)
    pairs = []
    total = 0.0
    for i, j in zip(rows.tolist(), cols.tolist()):
        if i == n and j == m:
            continue
        mass = flow[i, j] / scale
        total += mass * float(cost[i, j])
        pairs.append((DIAGONAL if i == n else i, DIAGONAL if j == m else j, float(mass)))
    return float(total ** (1.0 / p)), TransportPlan(tuple(pairs), float(total), p)


def plan_cost(mu: PersistenceMeasure, nu: PersistenceMeasure, plan: TransportPlan) -> float:
    """Recompute ``sum mass * dist ** p`` of a plan from the measures."""
    total = 0.0
    for i, j, mass in plan.pairs:
        if i == DIAGONAL and j == DIAGONAL:
            continue
        if i == DIAGONAL:
            d = (nu.points[j, 1] - nu.points[j, 0]) / SQRT2
        elif j == DIAGONAL:
            d = (mu.points[i, 1] - mu.points[i, 0]) / SQRT2
        else:
            d = math.dist(mu.points[i], nu.points[j])
        total += mass * d**plan.p
    return total


# -- bottleneck ---------------------------------------------------------------


def _unit_copies(mu: PersistenceMeasure, tol: float = 1e-9) -> np.ndarray:
    """Atom index repeated once per unit of mass."""
    counts = np.round(mu.masses)
    if np.any(np.abs(mu.masses - counts) > tol) or np.any(counts < 1):
        raise ValueError("bottleneck distance needs integer masses")
    return np.repeat(np.arange(len(mu)), counts.astype(int))


class _BottleneckGraph:
    """Threshold bipartite graph between ``A + diag(B)`` and ``B + diag(A)``."""

    def __init__(self, mu: PersistenceMeasure, nu: PersistenceMeasure):
        self.ia, self.ib = _unit_copies(mu), _unit_copies(nu)
        A, B = mu.points[self.ia], nu.points[self.ib]
        self.n, self.m = len(A), len(B)
        self.cross = _pairwise_dist(A, B)
        self.pers_a, self.pers_b = persistence(A), persistence(B)

    def candidates(self) -> np.ndarray:
        return np.unique(np.concatenate([[0.0], self.cross.ravel(), self.pers_a, self.pers_b]))

    def matching(self, r: float) -> np.ndarray:
        """Maximum matching of rows (A then diagonal copies of B) at threshold r."""
        n, m = self.n, self.m
        rows, cols = [], []
        ai, bj = np.nonzero(self.cross <= r)
        rows.append(ai)
        cols.append(bj)
        ok_a = np.nonzero(self.pers_a <= r)[0]
        rows.append(ok_a)
        cols.append(m + ok_a)
        ok_b = np.nonzero(self.pers_b <= r)[0]
        rows.append(n + ok_b)
        cols.append(ok_b)
        # diagonal copies match each other at no cost
        dr, dc = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        rows.append(n + dr.ravel())
        cols.append(m + dc.ravel())
        r_idx, c_idx = np.concatenate(rows), np.concatenate(cols)
        graph = csr_matrix((np.ones(len(r_idx), dtype=np.int8), (r_idx, c_idx)), shape=(n + m, n + m))
        return maximum_bipartite_matching(graph, perm_type="column")

    def feasible(self, r: float) -> bool:
        if self.n + self.m == 0:
            return True
        return bool(np.all(self.matching(r) >= 0))


def bottleneck_feasible(mu: PersistenceMeasure, nu: PersistenceMeasure, r: float) -> bool:
    """Whether a partial matching with every displacement ``<= r`` exists."""
    return _BottleneckGraph(mu, nu).feasible(r)


def bottleneck_candidates(mu: PersistenceMeasure, nu: PersistenceMeasure) -> np.ndarray:
    return _BottleneckGraph(mu, nu).candidates()


def bottleneck_distance(mu: PersistenceMeasure, nu: PersistenceMeasure) -> tuple[float, TransportPlan]:
    """Exact bottleneck distance ``OT_inf`` between two diagrams.

    Binary search over the sorted candidate values (pairwise distances and
    persistences); each probe tests for a perfect matching in the threshold
    graph. Atom masses must be positive integers; an atom of mass ``k`` is
    treated as ``k`` coincident points.
    """
    g = _BottleneckGraph(mu, nu)
    if g.n + g.m == 0:
        return 0.0, TransportPlan((), 0.0, math.inf)
    cand = g.candidates()
    lo, hi = 0, len(cand) - 1  # the largest candidate is always feasible
    while lo < hi:
        mid = (lo + hi) // 2
        if g.feasible(cand[mid]):
            hi = mid
        else:
            lo = mid + 1
    value = float(cand[lo])
    match = g.matching(value)
    pairs: dict[tuple[int, int], float] = {}
    for row, col in enumerate(match.tolist()):
        if row < g.n:
            src = int(g.ia[row])
            dst = int(g.ib[col]) if col < g.m else DIAGONAL
        elif col < g.m:
            src, dst = DIAGONAL, int(g.ib[col])
        else:
            continue
        pairs[(src, dst)] = pairs.get((src, dst), 0.0) + 1.0
    return value, TransportPlan(tuple((i, j, m) for (i, j), m in pairs.items()), value, math.inf)


# -- histograms ---------------------------------------------------------------


def histogram_ot(a: GridHistogram, b: GridHistogram, p: float = 2.0) -> float:
    """``OT_p`` between two histograms on the same grid.

    Each nonempty cell is an atom at its representative point (the cell
    center, or the centroid of the above-diagonal part for cells cut by the
    diagonal).
    """
    if a.grid != b.grid:
        raise ValueError("histograms live on different grids")
    if p == math.inf:
        raise ValueError("histogram masses are not diagrams; use a finite p")
    value, _ = ot_distance(a.to_measure(), b.to_measure(), p)
    return value


# -- multiscale bound ---------------------------------------------------------


def _rotated(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates along the diagonal and distance to it."""
    u = (points[:, 0] + points[:, 1]) / SQRT2
    v = (points[:, 1] - points[:, 0]) / SQRT2
    return u, v


def in_box(points: np.ndarray, L: float, atol: float = 1e-12) -> np.ndarray:
    """Membership in ``A_L``: the l1-ball of radius ``L/sqrt(2)`` centred at
    ``(-L/sqrt(8), L/sqrt(8))``, i.e. the square of side ``L`` standing on the
    diagonal segment from ``(-L/sqrt(8), -L/sqrt(8))`` to ``(L/sqrt(8), L/sqrt(8))``.
    """
    c = L / math.sqrt(8.0)
    radius = L / SQRT2
    return np.abs(points[:, 0] + c) + np.abs(points[:, 1] - c) <= radius * (1 + atol) + atol


def _band_index(v: np.ndarray, L: float) -> np.ndarray:
    """k such that ``v`` lies in ``(L 2^-(k+1), L 2^-k]``."""
    k = np.floor(np.log2(L / v)).astype(int)
    k = np.maximum(k, 0)
    for _ in range(2):
        k = np.where(v > L * 2.0**-k.astype(float), k - 1, k)
        k = np.where(v <= L * 2.0 ** -(k + 1).astype(float), k + 1, k)
    return np.maximum(k, 0)


def multiscale_upper_bound(mu: PersistenceMeasure, nu: PersistenceMeasure, p: float, J: int, L: float) -> float:
    r"""Multiscale upper bound on ``OT_p(mu, nu) ** p``.

    .. math::
        2^{p/2} L^p \sum_{k \ge 0} 2^{-kp} \Big( 2^{-Jp} (\mu(B_k) \wedge \nu(B_k))
        + c_p |\mu(B_k) - \nu(B_k)|
        + \sum_{j=1}^{J} \sum_{S \in \mathcal{S}_{k,j-1}} 2^{-jp} |\mu(S) - \nu(S)| \Big)

    with ``c_p = 2^{-p/2} (1 + 1/(2^p - 1))``. ``B_k`` is the band of
    ``A_L`` at distance ``(L 2^{-(k+1)}, L 2^{-k}]`` from the diagonal and
    ``S_{k,j}`` its partition into squares of side ``L 2^{-(k+1)} 2^{-j}``.
    """
    if J < 0:
        raise ValueError("J must be nonnegative")
    if not (1 <= p < math.inf):
        raise ValueError("p must satisfy 1 <= p < inf")
    for name, meas in (("mu", mu), ("nu", nu)):
        if len(meas) and not np.all(in_box(meas.points, L)):
            raise ValueError(f"{name} is not supported in A_L for L={L}")
    c_p = 2.0 ** (-p / 2) * (1 + 1 / (2.0**p - 1))

    def per_atom(meas):
        u, v = _rotated(meas.points)
        v = np.minimum(v, L)  # points on the top edge of A_L
        return u, v, _band_index(v, L)

    data = [per_atom(mu), per_atom(nu)]
    if len(mu) + len(nu) == 0:
        return 0.0
    k_max = int(max(d[2].max() for d in data if len(d[2])))
    total = 0.0
    for k in range(k_max + 1):
        sel = [d[2] == k for d in data]
        mass = [meas.masses[s].sum() for meas, s in zip((mu, nu), sel)]
        term = 2.0 ** (-J * p) * min(mass) + c_p * abs(mass[0] - mass[1])
        height = L * 2.0 ** -(k + 1)
        for j in range(1, J + 1):
            side = height * 2.0 ** -(j - 1)
            n_u, n_v = 2 ** (k + 1) * 2 ** (j - 1), 2 ** (j - 1)
            counts: dict[tuple[int, int], float] = {}
            for sign, (u, v, _), meas, s in zip((1.0, -1.0), data, (mu, nu), sel):
                iu = np.clip(np.floor((u[s] + L / 2) / side).astype(int), 0, n_u - 1)
                iv = np.clip(np.floor((v[s] - height) / side).astype(int), 0, n_v - 1)
                for key, w in zip(zip(iu.tolist(), iv.tolist()), meas.masses[s].tolist()):
                    counts[key] = counts.get(key, 0.0) + sign * w
            term += 2.0 ** (-j * p) * sum(abs(x) for x in counts.values())
        total += 2.0 ** (-k * p) * term
    return 2.0 ** (p / 2) * L**p * total

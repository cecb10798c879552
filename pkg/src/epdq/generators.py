"""
Random diagram models: the triangle-complex model, whose expected diagram is
known in closed form, and Poisson-sized point clouds on a torus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import GridHistogram, GridSpec, PersistenceMeasure


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for ``seed``, optionally on a derived sub-stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


# -- triangle model ----------------------------------------------------------------


@dataclass(frozen=True)
class TriangleModelParams:
    """Number of triangles ``N`` uniform on ``{n_min, ..., n_max}``; ``V ~ Beta(1, 3)``."""

    n_min: int = 1
    n_max: int = 20

    def __post_init__(self):
        if self.n_min < 0 or self.n_max < self.n_min:
            raise ValueError("need 0 <= n_min <= n_max")

    @property
    def expected_count(self) -> float:
        return 0.5 * (self.n_min + self.n_max)


def beta13_inverse_cdf(u):
    """Inverse CDF of Beta(1, 3), ``1 - (1 - u)^(1/3)``."""
    return 1.0 - np.cbrt(1.0 - np.asarray(u, dtype=float))


def beta13_cdf(v):
    v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
    return 1.0 - (1.0 - v) ** 3


def sample_triangle_diagram(params: TriangleModelParams, rng: np.random.Generator) -> PersistenceMeasure:
    """One diagram of the triangle model.

    Each triangle contributes the point ``(b, b + V)`` where ``b`` is the
    largest of its three uniform edge values (the loop closes) and ``V`` the
    extra height of its interior (the loop is filled).
    """
    n = int(rng.integers(params.n_min, params.n_max + 1))
    births = rng.random((n, 3)).max(axis=1)
    heights = beta13_inverse_cdf(rng.random(n))
    # V = 0 has probability zero but would put the point on the diagonal
    while np.any(heights <= 0):
        bad = heights <= 0
        heights[bad] = beta13_inverse_cdf(rng.random(int(bad.sum())))
    return PersistenceMeasure(np.column_stack([births, births + heights]))


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 50) -> float:
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def _epd_mass(r1: float, r2: float, s1: float, s2: float, expected_count: float, tol: float) -> float:
    """Expected number of triangle-model points in ``[r1, r2] x [s1, s2]``."""
    lo, hi = max(r1, 0.0), min(r2, 1.0)  # births are maxima of uniforms on [0, 1]
    if hi <= lo or s2 <= s1:
        return 0.0

    def integrand(t):
        return t * t * float(beta13_cdf(s2 - t) - beta13_cdf(s1 - t))

    # the integrand is a polynomial between these breakpoints
    cuts = sorted({lo, hi, *(c for c in (s1 - 1, s2 - 1, s1, s2) if lo < c < hi)})
    n_pieces = len(cuts) - 1
    total = sum(_adaptive_simpson(integrand, a, b, tol / n_pieces) for a, b in zip(cuts, cuts[1:]))
    return 3.0 * expected_count * total


def closed_form_epd_rect(r1: float, r2: float, s1: float, s2: float,
                         expected_count: float = 10.0, tol: float = 1e-8) -> float:
    """Expected persistence diagram of the triangle model on a rectangle.

    ``E(P)([r1, r2] x [s1, s2]) = 3 E[N] \\int_{r1}^{r2} t^2 P(s1 - t <= V <= s2 - t) dt``
    with ``V ~ Beta(1, 3)``; the default ``E[N] = 10`` gives the constant 30.
    Since ``V > 0``, the formula holds for any rectangle, including ones cut
    by the diagonal; only ``r1 <= r2`` and ``s1 <= s2`` are required.
    """
    if not (r1 <= r2 and s1 <= s2):
        raise ValueError("need r1 <= r2 and s1 <= s2")
    return _epd_mass(r1, r2, s1, s2, expected_count, tol)


def closed_form_epd_histogram(grid: GridSpec = GridSpec(), expected_count: float = 10.0,
                              tol: float = 1e-8) -> GridHistogram:
    """Closed-form expected diagram integrated over every cell of ``grid``.

    Cells cut by the diagonal only count the part above it (points satisfy
    death > birth automatically since ``V > 0``).
    """
    nx, ny = grid.bins
    xe, ye = grid.x_edges, grid.y_edges
    cells = np.zeros((nx, ny))
    for i in range(nx):
        for j in range(ny):
            if ye[j + 1] <= xe[i]:
                continue
            cells[i, j] = _epd_mass(xe[i], xe[i + 1], ye[j], ye[j + 1], expected_count, tol)
    return GridHistogram(grid, cells)


# -- torus -----------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusParams:
    """Torus clouds: ``Poisson(mean_points)`` points, radii uniform in ``[r +- epsilon]``."""

    mean_points: float = 250.0
    r1: float = 5.0
    r2: float = 2.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.mean_points <= 0:
            raise ValueError("mean_points must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not (self.r1 - self.epsilon > self.r2 + self.epsilon > 0):
            raise ValueError("need r1 - epsilon > r2 + epsilon > 0")


def sample_torus_angles(m: int, R1: float, R2: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Angles of ``m`` points uniform with respect to the surface area."""
    phi = rng.uniform(0.0, 2 * np.pi, m)
    theta = np.empty(0)
    while len(theta) < m:
        need = m - len(theta)
        cand = rng.uniform(0.0, 2 * np.pi, 2 * need + 8)
        accept = rng.random(len(cand)) * (R1 + R2) < R1 + R2 * np.cos(cand)
        theta = np.concatenate([theta, cand[accept]])
    return phi, theta[:m]


def sample_torus_cloud(params: TorusParams, rng: np.random.Generator, return_radii: bool = False):
    """Point cloud on a random torus in R^3 (possibly empty)."""
    m = int(rng.poisson(params.mean_points))
    R1 = rng.uniform(params.r1 - params.epsilon, params.r1 + params.epsilon)
    R2 = rng.uniform(params.r2 - params.epsilon, params.r2 + params.epsilon)
    phi, theta = sample_torus_angles(m, R1, R2, rng)
    ring = R1 + R2 * np.cos(theta)
    pts = np.column_stack([ring * np.cos(phi), ring * np.sin(phi), R2 * np.sin(theta)])
    return (pts, float(R1), float(R2)) if return_radii else pts


def torus_mean_cos_theta(R1: float, R2: float) -> float:
    """``E[cos theta]`` under the area density ``(R1 + R2 cos theta) / (2 pi R1)``."""
    return R2 / (2.0 * R1)


def sample_torus_diagram(params: TorusParams, rng: np.random.Generator,
                         radius_fraction: float = 0.4) -> PersistenceMeasure:
    """H1 Čech diagram of one torus cloud, truncated at ``radius_fraction`` of its diameter."""
    from .homology import cech_diagram

    return cech_diagram(sample_torus_cloud(params, rng), dim=1, radius_fraction=radius_fraction)


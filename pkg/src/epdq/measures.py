"""
Persistence measures: weighted point sets on the open half-plane above the
diagonal, their averaging into empirical expected persistence diagrams,
grid histograms and the ``.dgm`` text format.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


class DiagramFormatError(ValueError):
    """Raised when a ``.dgm`` file or point-cloud file cannot be parsed."""


class HalfPlanePoint(NamedTuple):
    birth: float
    death: float

    @property
    def persistence(self) -> float:
        """Euclidean distance to the diagonal, ``(death - birth) / sqrt(2)``."""
        return (self.death - self.birth) / SQRT2


def persistence(points) -> np.ndarray:
    """Distance to the diagonal of every row of an ``(n, 2)`` array."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    return (points[:, 1] - points[:, 0]) / SQRT2


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PersistenceMeasure:
    """Finite atomic measure supported on ``{(b, d) : d > b}``.

    Parameters
    ----------
    points : array-like, shape (n, 2)
        Atom locations ``(birth, death)``.
    masses : array-like, shape (n,), optional
        Nonnegative atom masses (default: all ones). Zero-mass atoms are
        dropped.
    """

    points: np.ndarray
    masses: np.ndarray

    def __init__(self, points=(), masses=None):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if masses is None:
            m = np.ones(len(pts))
        else:
            m = np.asarray(masses, dtype=float).reshape(-1)
        if len(m) != len(pts):
            raise ValueError(f"{len(pts)} points but {len(m)} masses")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(m))):
            raise ValueError("coordinates and masses must be finite")
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        keep = m > 0
        pts, m = pts[keep], m[keep]
        if np.any(pts[:, 1] <= pts[:, 0]):
            raise ValueError("every atom must satisfy death > birth")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "masses", _frozen(m))

    @classmethod
    def empty(cls) -> "PersistenceMeasure":
        return cls(np.empty((0, 2)))

    def __len__(self) -> int:
        return len(self.masses)

    def __iter__(self) -> Iterator[tuple[HalfPlanePoint, float]]:
        for (b, d), m in zip(self.points, self.masses):
            yield HalfPlanePoint(float(b), float(d)), float(m)

    def __repr__(self) -> str:
        return f"PersistenceMeasure(n_atoms={len(self)}, total_mass={self.total_mass:.6g})"

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def persistence(self) -> np.ndarray:
        return persistence(self.points)

    def scaled(self, factor: float) -> "PersistenceMeasure":
        """Measure with every mass multiplied by ``factor``."""
        return PersistenceMeasure(self.points, self.masses * factor)

    def merged(self) -> "PersistenceMeasure":
        """Combine atoms sitting at exactly the same coordinates."""
        if len(self) == 0:
            return self
        uniq, inverse = np.unique(self.points, axis=0, return_inverse=True)
        masses = np.zeros(len(uniq))
        np.add.at(masses, inverse.reshape(-1), self.masses)
        return PersistenceMeasure(uniq, masses)

    def allclose(self, other: "PersistenceMeasure", atol: float = 1e-12) -> bool:
        """Equality as measures (after merging), up to ``atol``."""
        a, b = self.merged(), other.merged()
        if len(a) != len(b):
            return False
        return bool(
            np.allclose(a.points, b.points, rtol=0, atol=atol)
            and np.allclose(a.masses, b.masses, rtol=0, atol=atol)
        )


def total_persistence(mu: PersistenceMeasure, p: float) -> float:
    """Total persistence ``sum_i m_i * pers(x_i) ** p``.

    For ``p = 0`` this is the total mass.
    """
    if not math.isfinite(p) or p < 0:
        raise ValueError("p must be finite and nonnegative")
    if len(mu) == 0:
        return 0.0
    if p == 0:
        return mu.total_mass
    return float(np.sum(mu.masses * mu.persistence**p))


def concatenate(measures: Sequence[PersistenceMeasure]) -> PersistenceMeasure:
    """Sum of measures (atoms concatenated, no merging)."""
    if not measures:
        return PersistenceMeasure.empty()
    pts = np.concatenate([m.points for m in measures], axis=0)
    ms = np.concatenate([m.masses for m in measures])
    return PersistenceMeasure(pts, ms)


def empirical_epd(diagrams: Sequence[PersistenceMeasure], merge: bool = True) -> PersistenceMeasure:
    """Empirical expected persistence diagram ``(1/n) sum_i mu_i``.

    Atoms at identical coordinates are merged unless ``merge=False``.
    """
    if len(diagrams) == 0:
        raise ValueError("no diagrams")
    out = concatenate(diagrams).scaled(1.0 / len(diagrams))
    return out.merged() if merge else out


# -- grid histograms ---------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Regular grid over ``x_range`` (birth) times ``y_range`` (death)."""

    x_range: tuple[float, float] = (0.0, 1.0)
    y_range: tuple[float, float] = (0.0, 2.0)
    bins: tuple[int, int] = (50, 50)

    def __post_init__(self):
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        if not (x1 > x0 and y1 > y0):
            raise ValueError("grid ranges must be increasing")
        if self.bins[0] < 1 or self.bins[1] < 1:
            raise ValueError("bins must be positive")

    @property
    def x_edges(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.bins[0] + 1)

    @property
    def y_edges(self) -> np.ndarray:
        return np.linspace(self.y_range[0], self.y_range[1], self.bins[1] + 1)

    def cell_bounds(self, i: int, j: int) -> tuple[float, float, float, float]:
        xe, ye = self.x_edges, self.y_edges
        return float(xe[i]), float(xe[i + 1]), float(ye[j]), float(ye[j + 1])

    def representative_points(self) -> np.ndarray:
        """Transport location of every cell, shape ``(nx, ny, 2)``.

        The geometric center when it lies strictly above the diagonal,
        otherwise the centroid of the part of the cell above the diagonal
        (cells straddling the diagonal). Cells not meeting the open
        half-plane get NaN.
        """
        nx, ny = self.bins
        xe, ye = self.x_edges, self.y_edges
        out = np.full((nx, ny, 2), np.nan)
        for i in range(nx):
            for j in range(ny):
                cx, cy = 0.5 * (xe[i] + xe[i + 1]), 0.5 * (ye[j] + ye[j + 1])
                if cy > cx:
                    out[i, j] = cx, cy
                elif ye[j + 1] > xe[i]:
                    out[i, j] = _upper_part_centroid(xe[i], xe[i + 1], ye[j], ye[j + 1])
        return out


def _upper_part_centroid(x0, x1, y0, y1) -> tuple[float, float]:
    """Centroid of ``[x0,x1] x [y0,y1]`` intersected with ``{y >= x}``."""
    # clip the rectangle polygon against the half-plane y - x >= 0
    poly = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    clipped = []
    for k in range(4):
        p, q = poly[k], poly[(k + 1) % 4]
        fp, fq = p[1] - p[0], q[1] - q[0]
        if fp >= 0:
            clipped.append(p)
        if (fp >= 0) != (fq >= 0):
            s = fp / (fp - fq)
            clipped.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    area = cx = cy = 0.0
    for k in range(len(clipped)):
        (ax, ay), (bx, by) = clipped[k], clipped[(k + 1) % len(clipped)]
        cross = ax * by - bx * ay
        area += cross
        cx += (ax + bx) * cross
        cy += (ay + by) * cross
    area *= 0.5
    return cx / (6 * area), cy / (6 * area)


@dataclass(frozen=True, eq=False)
class GridHistogram:
    grid: GridSpec
    cells: np.ndarray  # shape (nx, ny), indexed [x-bin, y-bin] from the lower corner

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float)
        if cells.shape != tuple(self.grid.bins):
            raise ValueError(f"cells shape {cells.shape} does not match bins {self.grid.bins}")
        if np.any(cells < 0):
            raise ValueError("cell masses must be nonnegative")
        object.__setattr__(self, "cells", _frozen(cells))

    @property
    def x_range(self):
        return self.grid.x_range

    @property
    def y_range(self):
        return self.grid.y_range

    @property
    def bins(self):
        return self.grid.bins

    @property
    def total_mass(self) -> float:
        return float(self.cells.sum())

    def to_measure(self) -> PersistenceMeasure:
        """Atoms at the cell representative points carrying the cell masses."""
        reps = self.grid.representative_points()
        nz = self.cells > 0
        pts = reps[nz]
        if np.any(np.isnan(pts)):
            raise ValueError("mass in a cell lying entirely on or below the diagonal")
        return PersistenceMeasure(pts, self.cells[nz])


def _bin_index(values: np.ndarray, lo: float, hi: float, n: int) -> np.ndarray:
    idx = np.floor((values - lo) / (hi - lo) * n).astype(int)
    # last cell is closed on the right
    idx[values == hi] = n - 1
    return idx


def to_histogram(mu: PersistenceMeasure, grid: GridSpec, clip: bool = False) -> GridHistogram:
    """Bin the atoms of ``mu`` on ``grid``.

    Cells are half-open ``[lo, hi)`` except the last cell along each axis,
    which is closed. Atoms outside the window raise unless ``clip=True``, in
    which case they are dropped with a warning.
    """
    nx, ny = grid.bins
    cells = np.zeros((nx, ny))
    if len(mu) == 0:
        return GridHistogram(grid, cells)
    (x0, x1), (y0, y1) = grid.x_range, grid.y_range
    b, d = mu.points[:, 0], mu.points[:, 1]
    inside = (b >= x0) & (b <= x1) & (d >= y0) & (d <= y1)
    if not np.all(inside):
        n_out = int((~inside).sum())
        if not clip:
            raise ValueError(f"{n_out} atoms fall outside the grid window")
        warnings.warn(f"dropping {n_out} atoms outside the grid window", stacklevel=2)
    i = _bin_index(b[inside], x0, x1, nx)
    j = _bin_index(d[inside], y0, y1, ny)
    np.add.at(cells, (i, j), mu.masses[inside])
    return GridHistogram(grid, cells)


# -- .dgm text format --------------------------------------------------------


def parse_dgm(text: str, source: str = "<string>") -> tuple[PersistenceMeasure, int]:
    """Parse ``.dgm`` text: ``birth death [mass]`` per line, ``#`` comments.

    Returns the measure and the number of dropped infinite-persistence lines.
    """
    pts, masses = [], []
    n_infinite = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) not in (2, 3):
            raise DiagramFormatError(f"{source}:{lineno}: expected 'birth death [mass]'")
        try:
            vals = [float(f) for f in fields]
        except ValueError as exc:
            raise DiagramFormatError(f"{source}:{lineno}: {exc}") from None
        if math.isinf(vals[1]) and not math.isnan(vals[0]):
            n_infinite += 1
            continue
        if not all(math.isfinite(v) for v in vals):
            raise DiagramFormatError(f"{source}:{lineno}: non-finite value")
        if vals[1] <= vals[0]:
            raise DiagramFormatError(f"{source}:{lineno}: death must exceed birth")
        m = vals[2] if len(vals) == 3 else 1.0
        if m < 0:
            raise DiagramFormatError(f"{source}:{lineno}: negative mass")
        pts.append(vals[:2])
        masses.append(m)
    if n_infinite:
        logger.info("%s: dropped %d infinite-persistence points", source, n_infinite)
    return PersistenceMeasure(np.array(pts).reshape(-1, 2), np.array(masses)), n_infinite


def format_dgm(mu: PersistenceMeasure, header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for (b, d), m in zip(mu.points.tolist(), mu.masses.tolist()):
        if m == 1.0:
            lines.append(f"{b!r} {d!r}")
        else:
            lines.append(f"{b!r} {d!r} {m!r}")
    return "\n".join(lines) + "\n"


def read_dgm(path) -> PersistenceMeasure:
    path = Path(path)
    mu, _ = parse_dgm(path.read_text(encoding="utf-8"), source=str(path))
    return mu


def write_dgm(path, mu: PersistenceMeasure, header: str | None = None) -> None:
    Path(path).write_text(format_dgm(mu, header), encoding="utf-8")


def read_sample(directory) -> list[PersistenceMeasure]:
    """Read every ``*.dgm`` file of a directory, in sorted filename order."""
    files = sorted(Path(directory).glob("*.dgm"))
    if not files:
        raise DiagramFormatError(f"no .dgm files in {os.fspath(directory)}")
    return [read_dgm(f) for f in files]


def write_sample(directory, diagrams: Iterable[PersistenceMeasure], prefix: str = "dgm") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    diagrams = list(diagrams)
    width = max(4, len(str(len(diagrams))))
    paths = []
    for i, mu in enumerate(diagrams):
        p = directory / f"{prefix}_{i:0{width}d}.dgm"
        write_dgm(p, mu)
        paths.append(p)
    return paths

"""Smallest enclosing circle of a planar point set (Welzl's randomized algorithm)."""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Sequence

REL_EPS = 1e-12


def _diametral(a, b):
    cx, cy = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    return cx, cy, (a[0] - cx) ** 2 + (a[1] - cy) ** 2


def _circumcircle(a, b, c):
    d = 2 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if d == 0:
        # collinear: the widest pair spans the others
        pairs = [(a, b), (a, c), (b, c)]
        return max((_diametral(p, q) for p, q in pairs), key=lambda circ: circ[2])
    sa, sb, sc = a[0] ** 2 + a[1] ** 2, b[0] ** 2 + b[1] ** 2, c[0] ** 2 + c[1] ** 2
    cx = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d
    cy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d
    return cx, cy, (a[0] - cx) ** 2 + (a[1] - cy) ** 2


def _make_inside(exact: bool):
    if exact:
        def inside(circ, p):
            return (p[0] - circ[0]) ** 2 + (p[1] - circ[1]) ** 2 <= circ[2]
    else:
        def inside(circ, p):
            d2 = (p[0] - circ[0]) ** 2 + (p[1] - circ[1]) ** 2
            return d2 <= circ[2] * (1 + REL_EPS) + 1e-300
    return inside


def welzl(points: Sequence[tuple], rng: random.Random | None = None):
    """Smallest enclosing circle as ``(cx, cy, r_squared)``.

    Works over any ordered field: with :class:`fractions.Fraction` inputs the
    result is exact. Float inputs use a relative tolerance of ``1e-12`` in
    the containment test. The expected running time is linear after the
    random shuffle.
    """
    pts = [tuple(p) for p in points]
    if not pts:
        raise ValueError("empty point set")
    exact = all(isinstance(c, (int, Fraction)) for p in pts for c in p)
    inside = _make_inside(exact)
    (rng or random.Random(0)).shuffle(pts)

    circ = (pts[0][0], pts[0][1], 0 * pts[0][0])
    for i in range(1, len(pts)):
        p = pts[i]
        if inside(circ, p):
            continue
        circ = _diametral(pts[0], p)
        for j in range(i):
            q = pts[j]
            if inside(circ, q):
                continue
            circ = _diametral(p, q)
            for k in range(j):
                if not inside(circ, pts[k]):
                    circ = _circumcircle(p, q, pts[k])
    return circ


def min_enclosing_circle(points, rng: random.Random | None = None) -> tuple[tuple[float, float], float]:
    """Center and radius of the smallest circle enclosing ``points``."""
    cx, cy, r2 = welzl([(float(x), float(y)) for x, y in points], rng)
    return (float(cx), float(cy)), math.sqrt(max(float(r2), 0.0))

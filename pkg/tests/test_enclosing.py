import random
from fractions import Fraction

import numpy as np
import pytest

from epdq.enclosing import min_enclosing_circle, welzl
from oracles import brute_min_circle, circle_candidates


def rational_points(rng, n):
    return [(Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 8))),
             Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 8)))) for _ in range(n)]


def test_examples():
    (cx, cy), r = min_enclosing_circle([(0, 2), (0, 4), (1, 3)])
    assert (cx, cy, r) == pytest.approx((0.0, 3.0, 1.0))
    (cx, cy), r = min_enclosing_circle([(1.5, 2.5)])
    assert (cx, cy, r) == (1.5, 2.5, 0.0)
    with pytest.raises(ValueError):
        welzl([])


def test_exact_against_all_candidates():
    rng = np.random.default_rng(0)
    for trial in range(100):
        pts = rational_points(rng, int(rng.integers(1, 13)))
        cx, cy, r2 = welzl(pts, random.Random(trial))
        assert all((x - cx) ** 2 + (y - cy) ** 2 <= r2 for x, y in pts)
        assert r2 == brute_min_circle(pts)[2]
        for ccx, ccy, cr2 in circle_candidates(pts):
            if all((x - ccx) ** 2 + (y - ccy) ** 2 <= cr2 for x, y in pts):
                assert r2 <= cr2


def test_collinear_and_duplicate_points():
    pts = [(Fraction(i), Fraction(2 * i)) for i in range(5)] + [(Fraction(2), Fraction(4))]
    cx, cy, r2 = welzl(pts)
    assert (cx, cy) == (2, 4) and r2 == 20


def test_float_input_close_to_exact():
    rng = np.random.default_rng(1)
    for trial in range(50):
        pts = rational_points(rng, 10)
        exact = brute_min_circle(pts)
        (cx, cy), r = min_enclosing_circle([(float(x), float(y)) for x, y in pts], random.Random(trial))
        assert r == pytest.approx(float(exact[2]) ** 0.5, rel=1e-9)
        assert (cx, cy) == pytest.approx((float(exact[0]), float(exact[1])), abs=1e-8)


def test_shuffle_order_does_not_change_result():
    rng = np.random.default_rng(2)
    pts = rational_points(rng, 12)
    results = {welzl(pts, random.Random(s)) for s in range(10)}
    assert len(results) == 1

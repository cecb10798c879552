import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epdq.measures import (
    DiagramFormatError,
    GridHistogram,
    GridSpec,
    HalfPlanePoint,
    PersistenceMeasure,
    empirical_epd,
    format_dgm,
    parse_dgm,
    read_sample,
    to_histogram,
    total_persistence,
    write_sample,
)

coord = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def measures(draw, max_atoms=8, unit=False):
    n = draw(st.integers(0, max_atoms))
    pts, masses = [], []
    for _ in range(n):
        b = draw(coord)
        d = b + draw(st.floats(1e-3, 5))
        pts.append((b, d))
        masses.append(1.0 if unit else draw(st.floats(1e-3, 3)))
    return PersistenceMeasure(np.array(pts).reshape(-1, 2), masses)


def test_half_plane_point_persistence():
    assert HalfPlanePoint(0.0, 2.0).persistence == pytest.approx(math.sqrt(2))


def test_constructor_drops_zero_mass_and_validates():
    mu = PersistenceMeasure([(0, 1), (0, 2)], [0.0, 2.0])
    assert len(mu) == 1 and mu.total_mass == 2.0
    with pytest.raises(ValueError):
        PersistenceMeasure([(1, 1)])
    with pytest.raises(ValueError):
        PersistenceMeasure([(0, 1)], [-1.0])
    with pytest.raises(ValueError):
        PersistenceMeasure([(0, 1)], [1.0, 2.0])
    with pytest.raises(ValueError):
        PersistenceMeasure([(0, np.inf)])


def test_measure_is_immutable():
    mu = PersistenceMeasure([(0, 1)])
    with pytest.raises(ValueError):
        mu.points[0, 0] = 5.0


def test_total_persistence_examples():
    assert total_persistence(PersistenceMeasure([(0, 2)]), 2) == pytest.approx(2.0)
    assert total_persistence(PersistenceMeasure.empty(), 3) == 0.0
    mu = PersistenceMeasure([(0, 2), (1, 2)], [1.0, 0.5])
    assert total_persistence(mu, 1) == pytest.approx(math.sqrt(2) + 0.5 / math.sqrt(2))
    assert total_persistence(mu, 0) == 1.5


@given(measures(), st.floats(0.01, 10), st.floats(0, 4))
def test_total_persistence_is_linear_in_mass(mu, alpha, p):
    assert total_persistence(mu.scaled(alpha), p) == pytest.approx(alpha * total_persistence(mu, p), rel=1e-12,
                                                                    abs=1e-300)


def test_empirical_epd_examples():
    a, b = PersistenceMeasure([(0, 2)]), PersistenceMeasure([(0, 4)])
    assert empirical_epd([a]).allclose(a)
    assert empirical_epd([a, b]).allclose(PersistenceMeasure([(0, 2), (0, 4)], [0.5, 0.5]))
    c = PersistenceMeasure([(0, 2), (1, 3)])
    out = empirical_epd([a, c])
    assert len(out) == 2
    assert out.allclose(PersistenceMeasure([(0, 2), (1, 3)], [1.0, 0.5]))
    with pytest.raises(ValueError, match="no diagrams"):
        empirical_epd([])


@given(measures(), st.integers(1, 6))
def test_epd_of_copies_is_the_diagram(mu, n):
    assert empirical_epd([mu] * n).allclose(mu, atol=1e-12)


@given(st.lists(measures(), min_size=1, max_size=5))
def test_epd_total_mass(dgms):
    epd = empirical_epd(dgms)
    assert epd.total_mass == pytest.approx(sum(d.total_mass for d in dgms) / len(dgms), rel=1e-12, abs=1e-12)


def test_histogram_example():
    grid = GridSpec((0, 1), (0, 2), (2, 2))
    h = to_histogram(PersistenceMeasure([(0.5, 1.5)]), grid)
    assert h.cells[1, 1] == 1.0 and h.total_mass == 1.0
    assert to_histogram(PersistenceMeasure.empty(), grid).total_mass == 0.0


def test_histogram_edges_and_clipping():
    grid = GridSpec((0, 1), (0, 2), (2, 2))
    # right and top edges close the last cells; interior edges open the next cell
    h = to_histogram(PersistenceMeasure([(1.0, 2.0), (0.5, 1.0)]), grid)
    assert h.cells[1, 1] == 2.0
    outside = PersistenceMeasure([(0.5, 3.0), (0.2, 0.5)])
    with pytest.raises(ValueError):
        to_histogram(outside, grid)
    with pytest.warns(UserWarning):
        h = to_histogram(outside, grid, clip=True)
    assert h.total_mass == 1.0


@settings(max_examples=100)
@given(st.integers(0, 30), st.integers(0, 2**32 - 1))
def test_histogram_conserves_mass(n, seed):
    rng = np.random.default_rng(seed)
    b = rng.random(n)
    d = b + rng.random(n) * (2 - b) + 1e-9
    d = np.minimum(d, 2.0)
    mu = PersistenceMeasure(np.column_stack([b, d]), rng.random(n) + 0.1)
    h = to_histogram(mu, GridSpec())
    assert math.isclose(h.total_mass, mu.total_mass, rel_tol=1e-12, abs_tol=1e-12)


def test_representative_points_lie_above_diagonal():
    grid = GridSpec()
    reps = grid.representative_points()
    xe, ye = grid.x_edges, grid.y_edges
    for i in range(50):
        for j in range(50):
            meets = ye[j + 1] > xe[i]
            assert np.isnan(reps[i, j, 0]) != meets
            if meets:
                x, y = reps[i, j]
                assert y > x
                assert xe[i] <= x <= xe[i + 1] and ye[j] <= y <= ye[j + 1]


def test_straddling_cell_uses_upper_part_centroid():
    # unit cell cut by the diagonal through opposite corners: centroid of the upper triangle
    grid = GridSpec((0, 1), (0, 1), (1, 1))
    x, y = grid.representative_points()[0, 0]
    assert (x, y) == pytest.approx((1 / 3, 2 / 3))


def test_histogram_rejects_mass_below_diagonal():
    grid = GridSpec((0, 2), (0, 2), (2, 2))
    cells = np.zeros((2, 2))
    cells[1, 0] = 1.0  # [1,2] x [0,1] lies below the diagonal
    with pytest.raises(ValueError):
        GridHistogram(grid, cells).to_measure()


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec((1, 0))
    with pytest.raises(ValueError):
        GridSpec(bins=(0, 3))
    with pytest.raises(ValueError):
        GridHistogram(GridSpec(bins=(2, 2)), np.zeros((3, 3)))


@given(measures())
def test_dgm_round_trip(mu):
    back, n_inf = parse_dgm(format_dgm(mu))
    assert n_inf == 0
    assert len(back) == len(mu)
    assert np.array_equal(back.points, mu.points) and np.array_equal(back.masses, mu.masses)


def test_parse_dgm_comments_infinite_and_errors():
    text = "# header\n0 1\n\n0.5 2 0.25  # trailing\n1 inf\n"
    mu, n_inf = parse_dgm(text)
    assert n_inf == 1 and len(mu) == 2
    assert mu.masses.tolist() == [1.0, 0.25]
    for bad in ("0 1 2 3", "a b", "2 1", "0 1 -1", "0 nan"):
        with pytest.raises(DiagramFormatError):
            parse_dgm(bad)


def test_sample_directory_round_trip(tmp_path):
    dgms = [PersistenceMeasure([(0, 1), (0.5, 2)]), PersistenceMeasure.empty(), PersistenceMeasure([(0.1, 0.3)])]
    write_sample(tmp_path, dgms)
    back = read_sample(tmp_path)
    assert len(back) == 3
    for a, b in zip(dgms, back):
        assert a.allclose(b)
    with pytest.raises(DiagramFormatError):
        read_sample(tmp_path / "missing")


def test_iteration_yields_points_and_masses():
    mu = PersistenceMeasure([(0, 1)], [2.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert list(mu) == [(HalfPlanePoint(0.0, 1.0), 2.0)]

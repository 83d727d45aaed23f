import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dfib.diagnostics import (TimeSeries, area_error, max_spurious_velocity, mesh_volume,
                              mode_amplitude, normal_tangential, perturbed_circle_area,
                              polygon_area, resample_curve, spline_area, successive_error,
                              successive_marker_error)
from dfib.grid import GridGeometry, StaggeredField, Subgrid
from dfib.structures import TriMesh, make_circle, make_icosphere, make_perturbed_circle
from dfib.coupling import MarkerSet

G2 = GridGeometry(2, 16)


def test_polygon_area():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    assert polygon_area(sq) == 1.0
    assert polygon_area(sq[::-1]) == 1.0
    M, R = 9, 0.3
    assert np.isclose(polygon_area(make_circle(G2, R, M=M)), M / 2 * R**2 * math.sin(2 * math.pi / M))


def _spline_circle_error(M):
    """Exact relative area error of the periodic cubic spline through a regular M-gon.

    The spline through e^{is} is sigma * sum_j e^{ijD} B3(s/D - j), whose Fourier
    coefficients at the aliases k = 1 + mM are sigma * sinc(kD/2)^4; the enclosed
    area of sum a_k e^{iks} is pi * sum k a_k^2.
    """
    D = 2 * np.pi / M
    k = 1 + M * np.arange(-4000, 4001)
    a = 3 / (2 + np.cos(D)) * (np.sin(k * D / 2) / (k * D / 2)) ** 4
    return np.sum(k * a**2) - 1


@pytest.mark.parametrize("M", [16, 64, 256])
def test_spline_area_circle_matches_fourier_oracle(M):
    R = 0.25
    err = (spline_area(make_circle(G2, R, M=M)) - math.pi * R**2) / (math.pi * R**2)
    assert abs(err - _spline_circle_error(M)) < 1e-14


def test_spline_area_circle_fourth_order():
    R = 0.25
    errs = [abs(spline_area(make_circle(G2, R, M=M)) / (math.pi * R**2) - 1) for M in (64, 128, 256)]
    assert errs[0] < 3e-7
    assert errs[2] < 1.01e-9
    for e1, e2 in zip(errs, errs[1:]):
        assert e1 / e2 >= 8


def test_spline_area_matches_polynomial_quadrature():
    # independent oracle: Gauss-Legendre on each piece is exact for degree 5
    c = make_perturbed_circle(G2, 0.3, 0.2, 3, 11)
    from dfib.diagnostics import periodic_spline
    spl = periodic_spline(c)
    d = spl.derivative()
    xg, wg = np.polynomial.legendre.leggauss(4)
    total = 0.0
    for a, b in zip(spl.x[:-1], spl.x[1:]):
        s = 0.5 * (b - a) * xg + 0.5 * (a + b)
        X, D = spl(s), d(s)
        total += 0.5 * (b - a) * np.sum(wg * 0.5 * (X[:, 0] * D[:, 1] - X[:, 1] * D[:, 0]))
    assert np.isclose(spline_area(c), abs(total), rtol=1e-14)


def test_spline_area_square_is_close_to_polygon():
    t = np.arange(10) / 10
    one, zero = np.ones(10), np.zeros(10)
    sq = np.concatenate([np.stack(p, 1) for p in
                         [(t, zero), (one, t), (1 - t, one), (zero, 1 - t)]])
    assert polygon_area(sq) == pytest.approx(1.0)
    # corner overshoot is the only difference
    assert abs(spline_area(sq) - polygon_area(sq)) < 40**-2 * 10


def test_spline_beats_polygon_on_smooth_shape():
    exact = perturbed_circle_area(1.0, 0.05)
    for M in (32, 64):
        c = make_perturbed_circle(GridGeometry(2, 16, 5.0), 1.0, 0.05, 2, M)
        assert abs(spline_area(c) - exact) * 100 < abs(polygon_area(c) - exact)


def test_perturbed_circle_area_formula():
    c = make_perturbed_circle(GridGeometry(2, 16, 5.0), 1.0, 0.3, 2, 2048)
    assert np.isclose(spline_area(c), perturbed_circle_area(1.0, 0.3), rtol=1e-12)


def test_mesh_volume_cube_and_translation():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                  [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
    f = np.array([[0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7], [0, 1, 5], [0, 5, 4],
                  [1, 2, 6], [1, 6, 5], [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7]])
    cube = TriMesh(MarkerSet(v, 1.0), f)
    assert np.isclose(mesh_volume(cube), 1.0, rtol=1e-15)
    m = make_icosphere(3, 0.1)
    assert np.isclose(mesh_volume(m.moved(m.positions + 7.3)), mesh_volume(m), rtol=1e-13)


def test_mesh_volume_against_divergence_theorem():
    # oracle: V = (1/3) sum over faces of (centroid . n) * area
    m = make_icosphere(3, 0.1)
    x = m.positions
    a, b, c = (x[m.faces[:, i]] for i in range(3))
    n2 = np.cross(b - a, c - a)  # 2 * area * unit normal
    oracle = np.sum(np.einsum("ij,ij->i", (a + b + c) / 3, n2)) / 6
    assert np.isclose(mesh_volume(m), oracle, rtol=1e-13)
    assert mesh_volume(m) < 4 / 3 * math.pi * 0.1**3


def test_area_error():
    np.testing.assert_allclose(area_error([1.0, 1.01, 1.0]), [0, 0.01, 0], atol=1e-15)
    assert area_error([2.0, 2.0]).max() == 0
    np.testing.assert_allclose(area_error([1.1], reference=1.0), [0.1])


def test_mode_amplitude():
    g = GridGeometry(2, 16, 5.0)
    c = make_perturbed_circle(g, 1.0, 0.05, 2, 128)
    assert abs(mode_amplitude(c, 2, 1.0) - 0.05) < 1e-12
    assert mode_amplitude(make_circle(g, 1.0, M=64), 2, 1.0) < 1e-14
    s = 2 * np.pi * np.arange(128) / 128
    r = 1 + 0.05 * np.cos(2 * s) + 0.03 * np.cos(3 * s)
    x = 2.5 + np.stack([r * np.cos(s), r * np.sin(s)], 1)
    # the p=3 mode shifts the centroid only at second order; measure p=2 leakage
    eps2 = mode_amplitude(x, 2, 1.0)
    assert abs(eps2 - 0.05) < 1e-3
    assert abs(mode_amplitude(x, 3, 1.0) - 0.03) < 1e-3


def test_mode_amplitude_orthogonality_about_fixed_centroid():
    # symmetric modes keep the centroid fixed, so extraction is exact
    s = 2 * np.pi * np.arange(256) / 256
    r = 1 + 0.05 * np.cos(2 * s) + 0.02 * np.cos(4 * s)
    x = np.stack([r * np.cos(s), r * np.sin(s)], 1)
    assert abs(mode_amplitude(x, 2, 1.0) - 0.05) < 1e-12


def test_successive_error():
    coarse, fine = GridGeometry(2, 8), GridGeometry(2, 16)
    fn = lambda c, x, y: np.sin(2 * np.pi * x) * (c + 1)  # noqa: E731
    uf = StaggeredField.from_function(fine, Subgrid.FACE, fn)
    uc = StaggeredField.from_function(coarse, Subgrid.FACE, fn)
    shifted = uc + np.array([0.3, 0.3])
    base = successive_error(uf, uc)
    assert abs(successive_error(uf, shifted) - 0.3) <= base + 1e-15
    z = StaggeredField.zeros(coarse, Subgrid.FACE)
    assert successive_error(StaggeredField.zeros(fine, Subgrid.FACE), z) == 0
    with pytest.raises(ValueError):
        successive_error(uf, StaggeredField.zeros(GridGeometry(2, 4), Subgrid.FACE))


@pytest.mark.parametrize("norm", ["inf", "2"])
def test_successive_error_component(norm):
    coarse, fine = GridGeometry(2, 8), GridGeometry(2, 16)
    zf = StaggeredField.zeros(fine, Subgrid.FACE)
    d = np.zeros((2, 8, 8))
    d[0] = 0.5
    d[1, 3, 4] = -2.0
    uc = StaggeredField(coarse, Subgrid.FACE, d)
    # l2 carries the h^2 cell volume: 0.5^2 * 64 / 64 and 2^2 / 64
    want = {"inf": (0.5, 2.0), "2": (0.5, 0.25)}[norm]
    assert successive_error(zf, uc, norm, 0) == pytest.approx(want[0], rel=1e-15)
    assert successive_error(zf, uc, norm, 1) == pytest.approx(want[1], rel=1e-15)
    assert successive_error(zf, uc, norm) >= max(want)


def test_successive_marker_error():
    a = make_circle(G2, 0.25, M=64)
    b = make_circle(G2, 0.25, M=64)
    assert successive_marker_error(a, b) == 0
    shifted = a.positions + np.array([1e-3, 0.0])
    assert np.isclose(successive_marker_error(shifted, b, 128), 1e-3)
    assert resample_curve(a, 128).shape == (128, 2)


def test_max_spurious_velocity():
    g = GridGeometry(2, 4)
    z = StaggeredField.zeros(g, Subgrid.FACE)
    assert max_spurious_velocity(z) == 0
    d = z.data.copy()
    d[1, 2, 3] = -1e-5
    assert max_spurious_velocity(z.with_data(d)) == 1e-5


def test_normal_tangential():
    c = make_circle(G2, 0.25, (0.5, 0.5), 8)
    F = -(c.positions - 0.5)
    nt = normal_tangential(c, F, center=(0.5, 0.5))
    np.testing.assert_allclose(nt[:, 0], -0.25)
    np.testing.assert_allclose(nt[:, 1], 0, atol=1e-15)


def test_timeseries_csv(tmp_path):
    ts = TimeSeries()
    ts.append(0.0, a=1.0, b=0.1)
    ts.append(0.5, a=1 / 3, b=0.2)
    with pytest.raises(ValueError):
        ts.append(0.1, a=0.0, b=0.0)
    with pytest.raises(ValueError):
        ts.append(1.0, a=0.0)
    ts.to_csv(tmp_path / "ts.csv")
    lines = (tmp_path / "ts.csv").read_text().splitlines()
    assert lines[0] == "t,a,b"
    assert float(lines[2].split(",")[1]) == 1 / 3

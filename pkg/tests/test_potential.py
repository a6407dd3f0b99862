import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pauli_torsion.geometry import DomainSpec, build_grid
from pauli_torsion.potential import (
    MagneticField,
    ScalarField,
    UnsupportedDomain,
    analytic_psi,
    check_gauge,
    contour_segments,
    export_field_csv,
    find_minimizers,
    rectangle_psi_series,
    solve_poisson,
    vector_potential,
)

UNIT = MagneticField.constant(1.0)


@pytest.fixture(scope="module")
def disk_grid():
    return build_grid(DomainSpec.disk(1.0), 1 / 32)


@pytest.fixture(scope="module")
def disk_psi(disk_grid):
    return solve_poisson(disk_grid, UNIT)


def test_disk_matches_paraboloid(disk_psi, disk_grid):
    x, y = disk_grid.points.T
    exact = (x**2 + y**2 - 1) / 4
    # the cut-cell scheme is exact on quadratics up to boundary interpolation
    assert np.max(np.abs(disk_psi.values - exact)) < 2e-3


def test_cg_and_direct_agree(disk_grid):
    a = solve_poisson(disk_grid, UNIT, method="cg")
    b = solve_poisson(disk_grid, UNIT, method="direct")
    assert np.max(np.abs(a.values - b.values)) < 1e-9


@pytest.mark.parametrize(
    "dom, psi_min",
    [
        (DomainSpec.disk(1.0), -0.25),
        (DomainSpec.ellipse(2.0, 1.0), -0.4),
        (DomainSpec.equilateral_triangle(1.0), -1 / 27),
    ],
)
def test_closed_form_minima(dom, psi_min):
    assert analytic_psi(dom, 1.0).psi_min == pytest.approx(psi_min, rel=1e-12)
    grid = build_grid(dom, 1 / 64)
    assert solve_poisson(grid, UNIT).values.min() == pytest.approx(psi_min, abs=2e-3)


def test_square_series_centre_value():
    assert rectangle_psi_series(2.0, 2.0, 0.0, 0.0) == pytest.approx(-0.294685, abs=1e-6)


def test_series_solves_the_equation():
    # second differences of the series reproduce lap psi = 1 away from the boundary
    e = 0.02
    f = lambda x, y: rectangle_psi_series(3.0, 1.0, x, y)
    lap = (f(0.3 + e, 0.1) + f(0.3 - e, 0.1) + f(0.3, 0.1 + e) + f(0.3, 0.1 - e) - 4 * f(0.3, 0.1)) / e**2
    assert lap == pytest.approx(1.0, abs=2e-3)
    assert f(1.5, 0.2) == pytest.approx(0.0, abs=1e-12)


def test_polygon_has_no_closed_form():
    with pytest.raises(UnsupportedDomain):
        analytic_psi(DomainSpec.polygon([(0, 0), (1, 0), (0, 1)]), 1.0)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_solution_is_linear_in_the_field(disk_grid, a, b):
    B1 = MagneticField.formula(lambda x, y: 1 + x**2)
    B2 = MagneticField.formula(lambda x, y: np.cos(y))
    Bc = MagneticField.formula(lambda x, y: a * (1 + x**2) + b * np.cos(y))
    lhs = solve_poisson(disk_grid, Bc).values
    rhs = a * solve_poisson(disk_grid, B1).values + b * solve_poisson(disk_grid, B2).values
    assert np.max(np.abs(lhs - rhs)) < 1e-8 * (1 + abs(a) + abs(b))


@settings(max_examples=10, deadline=None)
@given(B0=st.floats(0.1, 10.0))
def test_minimum_scales_with_field_strength(disk_grid, disk_psi, B0):
    scaled = solve_poisson(disk_grid, MagneticField.constant(B0))
    assert scaled.values.min() == pytest.approx(B0 * disk_psi.values.min(), rel=1e-8)


def test_positive_field_gives_negative_potential():
    grid = build_grid(DomainSpec.dumbbell(), 1 / 16)
    psi = solve_poisson(grid, MagneticField.formula(lambda x, y: 1 + 0.5 * np.sin(x)))
    assert np.all(psi.values < 0)


def test_disk_minimizer_and_hessian(disk_psi):
    rep = find_minimizers(disk_psi, B=UNIT)
    assert len(rep.minimizers) == 1
    m = rep.minimizers[0]
    assert np.hypot(*m.point) < 1e-6
    assert np.allclose(m.hessian, 0.5 * np.eye(2), atol=1e-3)
    assert not m.degenerate
    assert rep.psi_min == pytest.approx(-0.25, abs=1e-3)


def test_dumbbell_has_two_minimizers():
    grid = build_grid(DomainSpec.dumbbell(), 1 / 32)
    rep = find_minimizers(solve_poisson(grid, UNIT), B=UNIT)
    assert len(rep.minimizers) == 2
    xs = sorted(m.point[0] for m in rep.minimizers)
    assert xs[0] == pytest.approx(-xs[1], abs=0.05)


def test_vector_potential_gauge(disk_psi):
    A1, A2 = vector_potential(disk_psi)
    res = check_gauge(A1, A2, UNIT, tol=5e-3)
    assert res.passed
    assert res.divergence < 1e-12
    x, y = disk_psi.grid.points.T
    # A = (-psi_y, psi_x) = (-y/2, x/2) for the disk
    deep = np.all(disk_psi.grid.neighbors >= 0, axis=1)
    assert np.allclose(A1.values[deep], -y[deep] / 2, atol=1e-3)
    assert np.allclose(A2.values[deep], x[deep] / 2, atol=1e-3)
    # one-sided stencils over small cut fractions are first order only
    assert np.allclose(A1.values, -y / 2, atol=5e-2)


@pytest.mark.parametrize("dom", [DomainSpec.disk(1.0), DomainSpec.equilateral_triangle(1.0)])
def test_curl_residual_converges(dom):
    B = MagneticField.formula(lambda x, y: 1 + x**2 + np.sin(y))
    res = []
    for dx in (1 / 32, 1 / 64):
        grid = build_grid(dom, dx)
        res.append(check_gauge(*vector_potential(solve_poisson(grid, B)), B).curl)
    assert res[1] < res[0] / 3


def test_gradient_field_is_not_tangent():
    grid = build_grid(DomainSpec.disk(1.0), 1 / 16)
    one = ScalarField(grid, np.ones(grid.n_interior))
    zero = ScalarField(grid, np.zeros(grid.n_interior))
    res = check_gauge(one, zero, MagneticField.constant(0.0), tol=1e-8)
    assert res.curl == 0 and res.divergence == 0
    assert res.tangency > 0.9
    assert not res.passed


def test_flux_of_unit_field(disk_grid):
    # flux is normalised by 2 pi
    assert UNIT.flux(disk_grid, math.pi) == pytest.approx(0.5)
    assert UNIT.flux(disk_grid) == pytest.approx(0.5, rel=2e-2)


def test_contours_are_circles(disk_psi):
    segs = contour_segments(disk_psi, [-0.15])
    pts = np.concatenate(segs[-0.15])
    assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), math.sqrt(0.4), atol=5e-3)


def test_field_csv_carries_header(tmp_path, disk_psi):
    path = export_field_csv(disk_psi, tmp_path / "psi.csv", ["config_sha256 abc"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256 abc"
    assert lines[1] == "x,y,value"
    assert len(lines) == 2 + disk_psi.grid.n_interior

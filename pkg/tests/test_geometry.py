import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pauli_torsion.geometry import (
    DIRECTIONS,
    DomainSpec,
    InvalidDomain,
    build_grid,
    domain_from_dict,
    export_mask_csv,
    geometry_report,
)


def test_coarse_disk_has_nine_nodes():
    grid = build_grid(DomainSpec.disk(1.0), 0.5)
    assert grid.n_interior == 9
    pts = grid.points
    assert np.all(pts[:, 0] ** 2 + pts[:, 1] ** 2 < 1)


def test_neighbour_table_is_symmetric():
    grid = build_grid(DomainSpec.ellipse(2.0, 1.0), 1 / 16)
    opposite = {0: 1, 1: 0, 2: 3, 3: 2}
    for k in range(grid.n_interior):
        for d in range(4):
            j = grid.neighbors[k, d]
            if j >= 0:
                assert grid.neighbors[j, opposite[d]] == k
                assert grid.fractions[k, d] == 1.0
            else:
                assert 0 < grid.fractions[k, d] <= 1.0


def test_cut_fractions_hit_the_boundary():
    dom = DomainSpec.disk(1.0)
    grid = build_grid(dom, 1 / 8)
    for k, d in zip(*np.nonzero(grid.neighbors < 0)):
        x, y = grid.points[k]
        ex, ey = DIRECTIONS[d]
        t = grid.fractions[k, d]
        px, py = x + t * grid.spacing * ex, y + t * grid.spacing * ey
        assert math.hypot(px, py) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize(
    "dom, area, diameter, width, inradius",
    [
        (DomainSpec.disk(1.0), math.pi, 2.0, 2.0, 1.0),
        (DomainSpec.rectangle(2.0, 2.0), 4.0, 2 * math.sqrt(2), 2.0, 1.0),
        # the triangle is parametrised by its height
        (DomainSpec.equilateral_triangle(1.0), 1 / math.sqrt(3), 2 / math.sqrt(3), 1.0, 1 / 3),
    ],
)
def test_geometry_report_closed_forms(dom, area, diameter, width, inradius):
    rep = geometry_report(dom, build_grid(dom, 1 / 32))
    assert rep.area == pytest.approx(area, rel=1e-9)
    assert rep.diameter == pytest.approx(diameter, rel=1e-6)
    assert rep.width == pytest.approx(width, rel=1e-6)
    assert rep.inradius == pytest.approx(inradius, rel=1e-6)
    assert rep.convex


def test_polygon_geometry_matches_rectangle():
    sq = DomainSpec.polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)])
    rep = geometry_report(sq, build_grid(sq, 1 / 32))
    assert rep.area == pytest.approx(4.0)
    assert rep.width == pytest.approx(2.0, rel=1e-3)
    assert rep.convex


def test_dumbbell_is_not_convex():
    dom = DomainSpec.dumbbell()
    rep = geometry_report(dom, build_grid(dom, 1 / 16))
    assert not rep.convex
    assert rep.diameter == pytest.approx(5.2, rel=1e-2)


def test_invalid_domains_are_rejected():
    with pytest.raises(InvalidDomain):
        domain_from_dict({"kind": "disk", "R": -1})
    with pytest.raises(InvalidDomain):
        domain_from_dict({"kind": "hexagon"})
    with pytest.raises(InvalidDomain):
        DomainSpec.polygon([(0, 0), (1, 1), (1, 0), (0, 1)])  # self-crossing


def test_domain_from_dict_round_trip():
    dom = domain_from_dict({"kind": "ellipse", "a": 2.0, "b": 1.0, "center": [0.5, 0.0]})
    assert dom.contains(np.array([2.4]), np.array([0.0]))[0]
    assert not dom.contains(np.array([-1.6]), np.array([0.0]))[0]


def test_mask_export(tmp_path):
    grid = build_grid(DomainSpec.disk(1.0), 0.25)
    path = export_mask_csv(grid, tmp_path / "mask.csv")
    rows = [l.split(",") for l in path.read_text().splitlines() if l and not l.startswith("#")]
    mask = np.array(rows, dtype=int)
    assert mask.shape == grid.node_index.shape
    assert mask.sum() == grid.n_interior


@settings(max_examples=15, deadline=None)
@given(R=st.floats(0.5, 2.0), spacing=st.sampled_from([1 / 8, 1 / 16]))
def test_node_count_tracks_area(R, spacing):
    grid = build_grid(DomainSpec.disk(R), spacing)
    expected = math.pi * R**2 / spacing**2
    assert abs(grid.n_interior - expected) <= 4 * 2 * math.pi * R / spacing + 4

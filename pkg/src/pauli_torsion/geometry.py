"""Planar domains, Cartesian grids with cut-cell boundary data, and geometric functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, optimize
from scipy.spatial import ConvexHull, cKDTree

__all__ = [
    "DomainSpec",
    "Grid",
    "GeometryReport",
    "EmptyInterior",
    "DisconnectedInterior",
    "InvalidDomain",
    "build_grid",
    "geometry_report",
    "export_mask_csv",
    "domain_from_dict",
    "DIRECTIONS",
]

# Order used for the per-node boundary fractions: +x, -x, +y, -y.
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))

_KINDS = ("disk", "ellipse", "rectangle", "equilateral_triangle", "polygon", "union")


class InvalidDomain(ValueError):
    pass


class EmptyInterior(ValueError):
    pass


class DisconnectedInterior(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """A planar open set.

    Lengths are stored in ``lengths`` with a kind-dependent meaning:
    ``(R,)`` for a disk, ``(a, b)`` semi-axes for an ellipse, ``(a, b)``
    side lengths for a rectangle ``(-a/2, a/2) x (-b/2, b/2)``, and ``(a,)``
    for the equilateral triangle bounded by ``x = -a/3`` and
    ``x -+ sqrt(3) y = 2a/3`` (inradius ``a/3``, minimum of the torsion
    potential at the center). ``center`` translates every kind except
    polygons, whose vertices are absolute.
    """

    kind: str
    lengths: tuple[float, ...] = ()
    center: tuple[float, float] = (0.0, 0.0)
    vertices: tuple[tuple[float, float], ...] = ()
    members: tuple["DomainSpec", ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidDomain(f"unknown domain kind {self.kind!r}")
        expected = {"disk": 1, "ellipse": 2, "rectangle": 2, "equilateral_triangle": 1}
        if self.kind in expected:
            if len(self.lengths) != expected[self.kind]:
                raise InvalidDomain(f"{self.kind} needs {expected[self.kind]} length(s)")
            if any(not (v > 0 and math.isfinite(v)) for v in self.lengths):
                raise InvalidDomain(f"{self.kind} lengths must be positive, got {self.lengths}")
        elif self.kind == "polygon":
            _validate_polygon(np.asarray(self.vertices, dtype=float))
        elif self.kind == "union" and not self.members:
            raise InvalidDomain("union needs at least one member")

    # constructors -------------------------------------------------------

    @classmethod
    def disk(cls, R, center=(0.0, 0.0)):
        return cls("disk", (float(R),), tuple(map(float, center)))

    @classmethod
    def ellipse(cls, a, b, center=(0.0, 0.0)):
        return cls("ellipse", (float(a), float(b)), tuple(map(float, center)))

    @classmethod
    def rectangle(cls, a, b, center=(0.0, 0.0)):
        return cls("rectangle", (float(a), float(b)), tuple(map(float, center)))

    @classmethod
    def equilateral_triangle(cls, a, center=(0.0, 0.0)):
        return cls("equilateral_triangle", (float(a),), tuple(map(float, center)))

    @classmethod
    def polygon(cls, vertices):
        return cls("polygon", vertices=tuple((float(x), float(y)) for x, y in vertices))

    @classmethod
    def union(cls, *members):
        return cls("union", members=tuple(members))

    @classmethod
    def dumbbell(cls, R=1.0, separation=3.2, neck_width=0.3):
        """Two equal disks joined by a rectangular neck, symmetric about x = 0."""
        c = separation / 2
        neck = cls.rectangle(separation, neck_width)
        return cls.union(cls.disk(R, (-c, 0.0)), neck, cls.disk(R, (c, 0.0)))

    # evaluation ----------------------------------------------------------

    @property
    def is_parametric(self):
        return self.kind in ("disk", "ellipse", "rectangle", "equilateral_triangle")

    def level_set(self, x, y):
        """Continuous function that is negative exactly inside the domain."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "union":
            out = self.members[0].level_set(x, y)
            for m in self.members[1:]:
                out = np.minimum(out, m.level_set(x, y))
            return out
        if self.kind == "polygon":
            return _polygon_signed_distance(np.asarray(self.vertices), x, y)
        u = x - self.center[0]
        v = y - self.center[1]
        if self.kind == "disk":
            return np.hypot(u, v) - self.lengths[0]
        if self.kind == "ellipse":
            a, b = self.lengths
            return (u / a) ** 2 + (v / b) ** 2 - 1.0
        if self.kind == "rectangle":
            a, b = self.lengths
            return np.maximum(np.abs(u) - a / 2, np.abs(v) - b / 2)
        a = self.lengths[0]
        s3 = math.sqrt(3.0)
        return np.maximum.reduce(
            [-a / 3 - u, (u - s3 * v - 2 * a / 3) / 2, (u + s3 * v - 2 * a / 3) / 2]
        )

    def contains(self, x, y):
        return self.level_set(x, y) < 0

    def normal(self, x, y):
        """Outward unit normal from the level-set gradient (central differences)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        eps = 1e-7 * max(1.0, self.scale())
        gx = (self.level_set(x + eps, y) - self.level_set(x - eps, y)) / (2 * eps)
        gy = (self.level_set(x, y + eps) - self.level_set(x, y - eps)) / (2 * eps)
        norm = np.hypot(gx, gy)
        norm = np.where(norm > 0, norm, 1.0)
        return gx / norm, gy / norm

    def bounding_box(self):
        if self.kind == "union":
            boxes = np.array([m.bounding_box() for m in self.members])
            return (boxes[:, 0].min(), boxes[:, 1].max(), boxes[:, 2].min(), boxes[:, 3].max())
        if self.kind == "polygon":
            v = np.asarray(self.vertices)
            return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())
        cx, cy = self.center
        if self.kind == "disk":
            R = self.lengths[0]
            return (cx - R, cx + R, cy - R, cy + R)
        if self.kind == "ellipse":
            a, b = self.lengths
            return (cx - a, cx + a, cy - b, cy + b)
        if self.kind == "rectangle":
            a, b = self.lengths
            return (cx - a / 2, cx + a / 2, cy - b / 2, cy + b / 2)
        a = self.lengths[0]
        h = a / math.sqrt(3.0)
        return (cx - a / 3, cx + 2 * a / 3, cy - h, cy + h)

    def scale(self):
        x0, x1, y0, y1 = self.bounding_box()
        return max(x1 - x0, y1 - y0)

    def exact_area(self):
        """Closed-form area, or ``None`` for unions."""
        if self.kind == "disk":
            return math.pi * self.lengths[0] ** 2
        if self.kind == "ellipse":
            return math.pi * self.lengths[0] * self.lengths[1]
        if self.kind == "rectangle":
            return self.lengths[0] * self.lengths[1]
        if self.kind == "equilateral_triangle":
            return self.lengths[0] ** 2 / math.sqrt(3.0)
        if self.kind == "polygon":
            return _shoelace(np.asarray(self.vertices))
        return None

    def boundary_points(self, spacing):
        """Points on the boundary, at most ``spacing`` apart."""
        if self.kind == "union":
            pts = np.concatenate([m.boundary_points(spacing) for m in self.members])
            keep = np.ones(len(pts), dtype=bool)
            for m in self.members:
                keep &= ~m.contains(pts[:, 0], pts[:, 1])
            return pts[keep]
        cx, cy = self.center
        if self.kind in ("disk", "ellipse"):
            a, b = (self.lengths[0],) * 2 if self.kind == "disk" else self.lengths
            n = 4 * max(64, int(math.ceil(2 * math.pi * max(a, b) / spacing / 4)))
            t = 2 * math.pi * np.arange(n) / n
            return np.column_stack([cx + a * np.cos(t), cy + b * np.sin(t)])
        return _sample_polyline(self._corners(), spacing)

    def _corners(self):
        if self.kind == "polygon":
            return np.asarray(self.vertices, dtype=float)
        cx, cy = self.center
        if self.kind == "rectangle":
            a, b = self.lengths
            v = np.array([[-a / 2, -b / 2], [a / 2, -b / 2], [a / 2, b / 2], [-a / 2, b / 2]])
        else:
            a = self.lengths[0]
            h = a / math.sqrt(3.0)
            v = np.array([[-a / 3, -h], [2 * a / 3, 0.0], [-a / 3, h]])
        return v + np.array([cx, cy])


def _shoelace(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _validate_polygon(v):
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise InvalidDomain("polygon needs at least 3 (x, y) vertices")
    if _shoelace(v) <= 0:
        raise InvalidDomain("polygon vertices must be counterclockwise")
    n = len(v)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                raise InvalidDomain(f"polygon edges {i} and {j} intersect")


def _polygon_signed_distance(v, x, y):
    shape = np.broadcast(x, y).shape
    px = np.broadcast_to(x, shape).ravel()
    py = np.broadcast_to(y, shape).ravel()
    a = v
    b = np.roll(v, -1, axis=0)
    dist2 = np.full(px.shape, np.inf)
    inside = np.zeros(px.shape, dtype=bool)
    for (ax, ay), (bx, by) in zip(a, b):
        ex, ey = bx - ax, by - ay
        t = np.clip(((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
        dist2 = np.minimum(dist2, (px - ax - t * ex) ** 2 + (py - ay - t * ey) ** 2)
        crosses = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * ex / (by - ay)
        inside ^= crosses & (px < xint)
    d = np.sqrt(dist2)
    return np.where(inside, -d, d).reshape(shape)


def _sample_polyline(corners, spacing):
    pts = []
    n = len(corners)
    for i in range(n):
        a, b = corners[i], corners[(i + 1) % n]
        k = max(1, int(math.ceil(np.hypot(*(b - a)) / spacing)))
        t = np.arange(k)[:, None] / k
        pts.append(a + t * (b - a))
    return np.concatenate(pts)


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform node lattice ``origin + spacing * (i, j)`` restricted to a domain.

    ``interior_mask`` has shape ``(ny, nx)`` (row index is y).  Interior nodes
    are enumerated in row-major order; ``neighbors[k, d]`` is the index of the
    neighbor of node ``k`` in direction ``DIRECTIONS[d]`` or ``-1`` when that
    neighbor is exterior, in which case ``fractions[k, d]`` is the distance to
    the boundary crossing in units of ``spacing``.
    """

    origin: tuple[float, float]
    spacing: float
    dims: tuple[int, int]
    interior_mask: np.ndarray
    fractions: np.ndarray
    neighbors: np.ndarray
    node_index: np.ndarray = field(repr=False)
    domain: DomainSpec | None = field(default=None, repr=False)

    @property
    def n_interior(self):
        return int(self.fractions.shape[0])

    @property
    def xs(self):
        return self.origin[0] + self.spacing * np.arange(self.dims[0])

    @property
    def ys(self):
        return self.origin[1] + self.spacing * np.arange(self.dims[1])

    @property
    def ij(self):
        """(row, col) array indices of interior nodes."""
        return np.nonzero(self.interior_mask)

    @property
    def points(self):
        r, c = self.ij
        return np.column_stack([self.xs[c], self.ys[r]])

    def near_boundary(self):
        return np.any(self.neighbors < 0, axis=1)

    def boundary_crossings(self):
        """Boundary points on cut grid edges: (points, node index, direction index)."""
        k, d = np.nonzero(self.neighbors < 0)
        pts = self.points[k]
        step = np.array(DIRECTIONS, dtype=float)[d] * (self.fractions[k, d] * self.spacing)[:, None]
        return pts + step, k, d

    def to_array(self, values, fill=np.nan):
        out = np.full(self.interior_mask.shape, fill, dtype=np.result_type(values, float))
        out[self.interior_mask] = values
        return out


def build_grid(domain: DomainSpec, target_spacing: float) -> Grid:
    if not target_spacing > 0:
        raise ValueError("target_spacing must be positive")
    dx = float(target_spacing)
    x0, x1, y0, y1 = domain.bounding_box()
    i0, i1 = math.floor(x0 / dx) - 1, math.ceil(x1 / dx) + 1
    j0, j1 = math.floor(y0 / dx) - 1, math.ceil(y1 / dx) + 1
    xs = np.arange(i0, i1 + 1) * dx
    ys = np.arange(j0, j1 + 1) * dx
    X, Y = np.meshgrid(xs, ys)
    mask = domain.level_set(X, Y) < 0
    if not mask.any():
        raise EmptyInterior(f"no grid node lies inside the domain at spacing {dx}")
    _, ncomp = ndimage.label(mask)
    if ncomp != 1:
        raise DisconnectedInterior(f"interior mask has {ncomp} components at spacing {dx}")

    node_index = np.full(mask.shape, -1, dtype=np.int64)
    node_index[mask] = np.arange(mask.sum())
    rows, cols = np.nonzero(mask)
    n = len(rows)
    neighbors = np.empty((n, 4), dtype=np.int64)
    fractions = np.ones((n, 4))
    for d, (sx, sy) in enumerate(DIRECTIONS):
        neighbors[:, d] = node_index[rows + sy, cols + sx]
        cut = neighbors[:, d] < 0
        if cut.any():
            fractions[cut, d] = _crossing_fraction(
                domain, xs[cols[cut]], ys[rows[cut]], sx * dx, sy * dx
            )
    mask = mask.copy()
    _freeze(mask, fractions, neighbors, node_index)
    return Grid(
        origin=(float(xs[0]), float(ys[0])),
        spacing=dx,
        dims=(len(xs), len(ys)),
        interior_mask=mask,
        fractions=fractions,
        neighbors=neighbors,
        node_index=node_index,
        domain=domain,
    )


def _crossing_fraction(domain, px, py, ex, ey, iterations=60):
    """Bisection for the first sign change of the level set on ``p + t e``, t in (0, 1]."""
    lo = np.zeros_like(px)
    hi = np.ones_like(px)
    exact_end = domain.level_set(px + ex, py + ey) == 0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        inside = domain.level_set(px + mid * ex, py + mid * ey) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return np.where(exact_end, 1.0, hi)


def export_mask_csv(grid: Grid, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# origin={grid.origin[0]!r},{grid.origin[1]!r} spacing={grid.spacing!r}\n")
        for row in grid.interior_mask.astype(int):
            fh.write(",".join(map(str, row)) + "\n")
    return path


@dataclass(frozen=True)
class GeometryReport:
    area: float
    diameter: float
    width: float
    inradius: float
    convex: bool


def geometry_report(domain: DomainSpec, grid: Grid, method: str = "auto") -> GeometryReport:
    """Area, diameter, minimal width and inradius of ``domain``.

    ``method="auto"`` uses closed forms for the parametric kinds and the
    sampled-boundary computation otherwise; ``method="numeric"`` forces the
    sampled computation (used to cross-check the closed forms).
    """
    if method not in ("auto", "numeric"):
        raise ValueError(method)
    area = domain.exact_area()
    if area is None:
        area = grid.n_interior * grid.spacing**2
    if method == "auto" and domain.is_parametric:
        return _closed_form_geometry(domain, area)

    bpts = domain.boundary_points(grid.spacing / 8)
    hull = bpts[ConvexHull(bpts).vertices]
    diff = hull[:, None, :] - hull[None, :, :]
    diameter = float(np.sqrt((diff**2).sum(-1)).max())
    width = _min_width(hull)
    inradius = _inradius(domain, grid, bpts)
    inradius = min(inradius, width / 2)
    hull_area = ConvexHull(bpts).volume
    convex = bool(domain.kind != "union" and _is_convex_polygon(domain)) or (
        domain.kind == "union" and area >= hull_area * (1 - 2e-3)
    )
    return GeometryReport(float(area), diameter, width, inradius, convex)


def _closed_form_geometry(domain, area):
    L = domain.lengths
    if domain.kind == "disk":
        return GeometryReport(area, 2 * L[0], 2 * L[0], L[0], True)
    if domain.kind == "ellipse":
        a, b = max(L), min(L)
        return GeometryReport(area, 2 * a, 2 * b, b, True)
    if domain.kind == "rectangle":
        a, b = L
        return GeometryReport(area, math.hypot(a, b), min(a, b), min(a, b) / 2, True)
    a = L[0]
    return GeometryReport(area, 2 * a / math.sqrt(3.0), a, a / 3, True)


def _is_convex_polygon(domain):
    if domain.is_parametric:
        return True
    v = np.asarray(domain.vertices)
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross >= -1e-12 * np.abs(cross).max()))


def _extent(points, theta):
    proj = points[:, 0] * math.cos(theta) + points[:, 1] * math.sin(theta)
    return proj.max() - proj.min()


def _min_width(points):
    thetas = np.deg2rad(np.arange(0.0, 180.0, 0.1))
    extents = np.array([_extent(points, t) for t in thetas])
    best = int(np.argmin(extents))  # argmin keeps the smallest angle on ties
    step = thetas[1] - thetas[0]
    res = optimize.minimize_scalar(
        lambda t: _extent(points, t),
        bracket=None,
        bounds=(thetas[best] - step, thetas[best] + step),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(min(res.fun, extents[best]))


def _inradius(domain, grid, bpts):
    tree = cKDTree(bpts)
    pts = grid.points
    dist, _ = tree.query(pts)
    start = pts[int(np.argmax(dist))]

    def neg_dist(p):
        if not domain.contains(p[0], p[1]):
            return 0.0
        return -tree.query(p)[0]

    res = optimize.minimize(neg_dist, start, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12})
    return float(max(-res.fun, dist.max()))


def domain_from_dict(cfg: dict) -> DomainSpec:
    """Build a domain from a config table such as ``{"kind": "disk", "R": 1.0}``."""
    kind = cfg.get("kind")
    center = tuple(cfg.get("center", (0.0, 0.0)))
    try:
        if kind == "disk":
            return DomainSpec.disk(cfg["R"], center)
        if kind == "ellipse":
            return DomainSpec.ellipse(cfg["a"], cfg["b"], center)
        if kind == "rectangle":
            return DomainSpec.rectangle(cfg["a"], cfg["b"], center)
        if kind in ("equilateral_triangle", "triangle"):
            return DomainSpec.equilateral_triangle(cfg["a"], center)
        if kind == "polygon":
            return DomainSpec.polygon(cfg["vertices"])
        if kind == "dumbbell":
            return DomainSpec.dumbbell(cfg.get("R", 1.0), cfg.get("separation", 3.2),
                                       cfg.get("neck_width", 0.3))
        if kind == "union":
            return DomainSpec.union(*(domain_from_dict(m) for m in cfg["members"]))
    except KeyError as exc:
        raise InvalidDomain(f"domain of kind {kind!r} is missing field {exc.args[0]!r}") from None
    raise InvalidDomain(f"unknown domain kind {kind!r}")

"""Scalar potential of a planar magnetic field.

The potential solves ``lap(psi) = B`` in the domain with ``psi = 0`` on the
boundary; the divergence-free, boundary-tangent vector potential is then
``A = (-d psi/dy, d psi/dx)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import DIRECTIONS, DomainSpec, Grid

__all__ = [
    "MagneticField",
    "ScalarField",
    "MinimizerReport",
    "Minimizer",
    "AnalyticPotential",
    "NoConvergence",
    "UnsupportedDomain",
    "laplacian_matrix",
    "solve_poisson",
    "analytic_psi",
    "analytic_psi_function",
    "rectangle_psi_series",
    "find_minimizers",
    "vector_potential",
    "GaugeResidual",
    "check_gauge",
    "export_field_csv",
    "contour_segments",
    "export_contours_csv",
]


class NoConvergence(RuntimeError):
    def __init__(self, iterations, residual):
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class UnsupportedDomain(ValueError):
    pass


@dataclass(frozen=True)
class MagneticField:
    """Constant, node-sampled, or formula-defined field ``B(x, y)``."""

    kind: str
    B0: float | None = None
    values: np.ndarray | None = field(default=None, repr=False)
    func: Callable | None = field(default=None, repr=False)

    @classmethod
    def constant(cls, B0):
        return cls("constant", B0=float(B0))

    @classmethod
    def sampled(cls, values):
        return cls("sampled", values=np.asarray(values, dtype=float))

    @classmethod
    def formula(cls, func):
        return cls("formula", func=func)

    def on_grid(self, grid: Grid) -> np.ndarray:
        if self.kind == "constant":
            return np.full(grid.n_interior, self.B0)
        if self.kind == "sampled":
            if self.values.shape != (grid.n_interior,):
                raise ValueError("sampled field does not match the grid")
            return self.values
        pts = grid.points
        return np.asarray(self.func(pts[:, 0], pts[:, 1]), dtype=float) * np.ones(grid.n_interior)

    def at(self, x, y):
        if self.kind == "constant":
            return np.full(np.broadcast(x, y).shape, self.B0)
        if self.kind == "formula":
            return np.asarray(self.func(x, y), dtype=float)
        raise ValueError("a sampled field has no off-grid values")

    def scaled(self, c):
        if self.kind == "constant":
            return MagneticField.constant(c * self.B0)
        if self.kind == "sampled":
            return MagneticField.sampled(c * self.values)
        f = self.func
        return MagneticField.formula(lambda x, y: c * f(x, y))

    def is_positive(self, grid):
        return bool(np.all(self.on_grid(grid) > 0))

    def flux(self, grid, area=None):
        """``(1/2 pi) * integral of B``; exact area used for constant fields when given."""
        if self.kind == "constant" and area is not None:
            return self.B0 * area / (2 * math.pi)
        return float(self.on_grid(grid).sum()) * grid.spacing**2 / (2 * math.pi)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    boundary_value: float = 0.0

    def __post_init__(self):
        if self.values.shape[0] != self.grid.n_interior:
            raise ValueError("field size does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite values")

    def to_array(self, fill=None):
        return self.grid.to_array(self.values, self.boundary_value if fill is None else fill)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c, self.boundary_value * c)

    __rmul__ = __mul__


# --- discrete Laplacian -------------------------------------------------------


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Symmetric cut-cell Laplacian with homogeneous Dirichlet data.

    Interior couplings are the five-point stencil; an edge cut by the
    boundary at fraction ``t`` adds ``-1/(t dx^2)`` to the diagonal.  The
    matrix is symmetric negative definite and second-order convergent.
    """
    n = grid.n_interior
    inv = 1.0 / grid.spacing**2
    nb = grid.neighbors
    diag = -inv * (1.0 / grid.fractions).sum(axis=1)
    rows, cols = [np.arange(n)], [np.arange(n)]
    vals = [diag]
    for d in (0, 2):  # +x, +y: each interior edge once, then mirrored
        k = np.nonzero(nb[:, d] >= 0)[0]
        rows += [k, nb[k, d]]
        cols += [nb[k, d], k]
        vals += [np.full(len(k), inv)] * 2
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def solve_poisson(grid: Grid, B: MagneticField, tol: float = 1e-10, method: str = "cg") -> ScalarField:
    """Solve ``lap_h psi = B`` with ``psi = 0`` on the boundary.

    ``method="cg"`` runs Jacobi-preconditioned conjugate gradients on the
    (definite) negated system until ``max|lap_h psi - B| <= tol * max|B|``
    up to the rounding floor of the residual evaluation;
    ``method="direct"`` uses a sparse LU factorization.
    """
    L = laplacian_matrix(grid)
    rhs = B.on_grid(grid)
    bnorm = float(np.abs(rhs).max()) if rhs.size else 0.0
    if bnorm == 0.0:
        return ScalarField(grid, np.zeros(grid.n_interior))
    # the problem is linear: solve with unit-size data so tiny or huge fields neither underflow nor overflow
    rhs = rhs / bnorm
    A = (-L).tocsr()
    if method == "direct":
        psi = -spla.splu(A.tocsc()).solve(rhs)
        return ScalarField(grid, psi * bnorm)
    if method != "cg":
        raise ValueError(method)

    absL = abs(L)
    cap = 20 * (grid.dims[0] + grid.dims[1])
    dinv = 1.0 / A.diagonal()
    precond = spla.LinearOperator(A.shape, matvec=lambda r: dinv * r, dtype=float)
    x = np.zeros_like(rhs)
    r = rhs.copy()
    used = 0
    # the CG test is a relative 2-norm; scaling by 1/sqrt(n) aims the first pass at the max-norm target
    rtol = tol / math.sqrt(rhs.size)
    last = math.inf
    while True:
        count = [0]

        def cb(_xk):
            count[0] += 1

        # CG's recursive residual drifts from the true one, so later passes
        # solve for a correction driven by the recomputed residual
        dx_, _info = spla.cg(A, -r, rtol=rtol, atol=0.0, maxiter=max(cap - used, 1),
                             M=precond, callback=cb)
        x = x + dx_
        used += count[0]
        r = rhs - L @ x
        # evaluating L @ x leaves |r_i| ~ eps (|L| |x|)_i, which exceeds tol at
        # fine spacings; only the excess over that floor counts
        floor = 8 * np.finfo(float).eps * (absL @ np.abs(x))
        res = float(np.max(np.maximum(np.abs(r) - floor, 0.0)))
        if res <= tol:
            return ScalarField(grid, x * bnorm)
        if used >= cap or res > 0.5 * last:
            raise NoConvergence(used, res)
        last = res
        rtol = 1e-3


# --- closed forms -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AnalyticPotential:
    field: ScalarField | None
    psi_min: float
    minimizer: tuple[float, float]
    func: Callable


def rectangle_psi_series(a, b, x, y, kmax=999):
    """Double cosine series for the rectangle ``(-a/2, a/2) x (-b/2, b/2)`` with ``B = 1``.

    Scalars are summed with compensated summation; arrays are evaluated by
    separable matrix products.
    """
    k = np.arange(1, kmax + 1, 2, dtype=float)
    K, L = np.meshgrid(k, k, indexing="ij")
    sign = np.where(((K + L) / 2 - 1) % 2 == 0, 1.0, -1.0)
    coef = -sign * 16 * a**2 * b**2 / (math.pi**4 * K * L * (K**2 * b**2 + L**2 * a**2))
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        cx = np.cos(k * math.pi * x / a)
        cy = np.cos(k * math.pi * y / b)
        return math.fsum((coef * cx[:, None] * cy[None, :]).ravel())
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xb, yb = np.broadcast_arrays(x, y)
    xf, yf = xb.ravel(), yb.ravel()
    out = np.empty(xf.shape)
    for s in range(0, len(xf), 2048):
        cx = np.cos(np.multiply.outer(xf[s:s + 2048], k) * math.pi / a)
        cy = np.cos(np.multiply.outer(yf[s:s + 2048], k) * math.pi / b)
        out[s:s + 2048] = np.einsum("pk,pk->p", cx @ coef, cy)
    return out.reshape(xb.shape)


def analytic_psi_function(domain: DomainSpec, B0: float = 1.0):
    """Closed-form potential as ``(func, psi_min, minimizer)``; linear in ``B0``."""
    cx, cy = domain.center
    if domain.kind == "disk":
        R = domain.lengths[0]

        def f(x, y):
            return B0 * (((x - cx) ** 2 + (y - cy) ** 2) - R**2) / 4

        return f, -B0 * R**2 / 4, (cx, cy)
    if domain.kind == "ellipse":
        a, b = domain.lengths
        c = 1.0 / (2 / a**2 + 2 / b**2)

        def f(x, y):
            return B0 * c * ((x - cx) ** 2 / a**2 + (y - cy) ** 2 / b**2 - 1)

        return f, -B0 * c, (cx, cy)
    if domain.kind == "rectangle":
        a, b = domain.lengths

        def f(x, y):
            return B0 * rectangle_psi_series(a, b, np.asarray(x) - cx, np.asarray(y) - cy)

        return f, B0 * rectangle_psi_series(a, b, 0.0, 0.0), (cx, cy)
    if domain.kind == "equilateral_triangle":
        a = domain.lengths[0]
        s3 = math.sqrt(3.0)

        def f(x, y):
            u, v = x - cx, y - cy
            return -B0 / (4 * a) * (u - s3 * v - 2 * a / 3) * (u + s3 * v - 2 * a / 3) * (u + a / 3)

        return f, -B0 * a**2 / 27, (cx, cy)
    raise UnsupportedDomain(f"no closed-form potential for {domain.kind}")


def analytic_psi(domain: DomainSpec, B0: float, grid: Grid | None = None) -> AnalyticPotential:
    if not B0 > 0:
        raise ValueError("B0 must be positive")
    f, psi_min, x0 = analytic_psi_function(domain, B0)
    fld = None
    if grid is not None:
        pts = grid.points
        fld = ScalarField(grid, np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float))
    return AnalyticPotential(fld, float(psi_min), x0, f)


# --- minimizers ---------------------------------------------------------------


@dataclass(frozen=True)
class Minimizer:
    point: tuple[float, float]
    value: float
    hessian: np.ndarray
    degenerate: bool

    @property
    def det_hessian(self):
        return float(np.linalg.det(self.hessian))


@dataclass(frozen=True)
class MinimizerReport:
    psi_min: float
    minimizers: list[Minimizer]
    cluster_tolerance: float


def _quadratic_fit(xs, ys, vals):
    """Least-squares ``c + g.u + u.H.u / 2``; returns stationary point, value, Hessian."""
    X = np.column_stack([np.ones_like(xs), xs, ys, xs**2 / 2, xs * ys, ys**2 / 2])
    coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
    c, gx, gy, hxx, hxy, hyy = coef
    H = np.array([[hxx, hxy], [hxy, hyy]])
    g = np.array([gx, gy])
    try:
        u = -np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        u = np.zeros(2)
    if np.abs(u).max() > np.abs(np.column_stack([xs, ys])).max():
        u = np.zeros(2)
    val = c + g @ u + 0.5 * u @ H @ u
    return u, float(val), H


def find_minimizers(fld: ScalarField, cluster_tol: float | None = None,
                    B: MagneticField | None = None) -> MinimizerReport:
    """Global minimum and every discrete local minimum within ``cluster_tol`` of it.

    Each candidate is refined by a least-squares quadratic on its 5x5 nodal
    neighbourhood (3x3 when the larger patch leaves the domain).  The default
    tolerance is ``10 dx^2 max|B|`` (``max|lap psi|`` estimate when ``B`` is
    not given).
    """
    grid = fld.grid
    dx = grid.spacing
    if cluster_tol is None:
        if B is not None:
            bmax = float(np.abs(B.on_grid(grid)).max())
        else:
            bmax = 1.0
        cluster_tol = 10 * dx**2 * bmax
    arr = fld.to_array(fill=np.inf)
    ny, nx = arr.shape
    padded = np.pad(arr, 2, constant_values=np.inf)
    center = padded[2:-2, 2:-2]
    is_min = np.isfinite(center)
    for dy in (-1, 0, 1):
        for dxn in (-1, 0, 1):
            if dy == 0 and dxn == 0:
                continue
            is_min &= center <= padded[2 + dy: 2 + dy + ny, 2 + dxn: 2 + dxn + nx]
    gmin = float(fld.values.min())
    cand = np.argwhere(is_min & (center <= gmin + cluster_tol))
    # plateaus: keep one node per 8-connected group of candidates
    taken = np.zeros(len(cand), dtype=bool)
    groups = []
    for i in range(len(cand)):
        if taken[i]:
            continue
        group = [i]
        taken[i] = True
        stack = [i]
        while stack:
            j = stack.pop()
            near = np.nonzero(~taken & (np.abs(cand - cand[j]).max(axis=1) <= 1))[0]
            taken[near] = True
            group.extend(near)
            stack.extend(near)
        groups.append(min(group, key=lambda g: arr[tuple(cand[g])]))
    xs, ys = grid.xs, grid.ys
    mins = []
    for g in groups:
        r, c = cand[g]
        for half in (2, 1):
            patch = padded[r + 2 - half: r + 3 + half, c + 2 - half: c + 3 + half]
            if np.all(np.isfinite(patch)):
                break
        else:
            half = 0
        if half == 0:
            H = np.full((2, 2), np.nan)
            mins.append(Minimizer((float(xs[c]), float(ys[r])), float(arr[r, c]), H, True))
            continue
        off = np.arange(-half, half + 1) * dx
        U, V = np.meshgrid(off, off)
        u, val, H = _quadratic_fit(U.ravel(), V.ravel(), patch.ravel())
        ev = np.linalg.eigvalsh(H)
        degenerate = bool(ev[0] < 1e-3 * ev[1]) if ev[1] > 0 else True
        mins.append(Minimizer((float(xs[c] + u[0]), float(ys[r] + u[1])), val, H, degenerate))
    mins.sort(key=lambda m: (m.point[0], m.point[1]))
    return MinimizerReport(gmin, mins, float(cluster_tol))


# --- vector potential -------------------------------------------------------------


def _directional_derivative(grid: Grid, values: np.ndarray, axis: int, boundary_value=0.0):
    """Derivative along x (axis 0) or y (axis 1); three-point formula on the
    possibly non-uniform stencil given by the cut fractions (exact for quadratics)."""
    dp, dm = (0, 1) if axis == 0 else (2, 3)
    nb = grid.neighbors
    tp = grid.fractions[:, dp]
    tm = grid.fractions[:, dm]
    fp = np.where(nb[:, dp] >= 0, values[nb[:, dp]], boundary_value)
    fm = np.where(nb[:, dm] >= 0, values[nb[:, dm]], boundary_value)
    f0 = values
    return (tm**2 * (fp - f0) + tp**2 * (f0 - fm)) / (tm * tp * (tm + tp) * grid.spacing)


def vector_potential(psi: ScalarField) -> tuple[ScalarField, ScalarField]:
    """``A1 = -d psi/dy``, ``A2 = d psi/dx`` at the interior nodes."""
    g = psi.grid
    A1 = -_directional_derivative(g, psi.values, 1, psi.boundary_value)
    A2 = _directional_derivative(g, psi.values, 0, psi.boundary_value)
    return ScalarField(g, A1), ScalarField(g, A2)


@dataclass(frozen=True)
class GaugeResidual:
    curl: float
    divergence: float
    tangency: float
    tol: float

    @property
    def passed(self):
        return max(self.curl, self.divergence, self.tangency) <= self.tol


def boundary_hops(grid: Grid) -> np.ndarray:
    """Number of neighbour steps from each node to the nearest cut edge (0 on the first layer)."""
    nb = grid.neighbors
    hops = np.full(grid.n_interior, -1)
    front = np.any(nb < 0, axis=1)
    level = 0
    while front.any():
        hops[front] = level
        reached = hops >= 0
        nxt = np.zeros_like(front)
        src = np.nonzero(front)[0]
        tgt = nb[src].ravel()
        tgt = tgt[tgt >= 0]
        nxt[tgt] = True
        front = nxt & ~reached
        level += 1
    return hops


def check_gauge(A1: ScalarField, A2: ScalarField, B: MagneticField, tol: float = 1e-8,
                margin: float | None = None) -> GaugeResidual:
    """Max-norm residuals of ``curl A - B`` and ``div A`` away from the boundary,
    and of ``A . nu`` at the boundary crossings (values there linearly
    extrapolated from the two nearest nodes).

    The discrete potential has an O(dx^2) but non-smooth error in the first
    few layers, which centred second differences turn into O(1).  Curl and
    divergence are therefore checked on nodes at least ``margin`` (length
    units, default 0.1 of the domain scale, never under two cells) from the
    boundary, where the residual converges.
    """
    grid = A1.grid
    nb = grid.neighbors
    dx = grid.spacing
    if margin is None:
        margin = 0.1 * grid.domain.scale() if grid.domain is not None else 2 * dx
    layers = max(2, int(math.ceil(margin / dx)))
    k = np.nonzero(boundary_hops(grid) >= layers)[0]
    if len(k):
        def cd(v, dp, dm):
            return (v[nb[k, dp]] - v[nb[k, dm]]) / (2 * dx)

        curl = cd(A2.values, 0, 1) - cd(A1.values, 2, 3) - B.on_grid(grid)[k]
        div = cd(A1.values, 0, 1) + cd(A2.values, 2, 3)
        curl_res = float(np.abs(curl).max())
        div_res = float(np.abs(div).max())
    else:
        curl_res = div_res = 0.0

    pts, kk, d = grid.boundary_crossings()
    opposite = np.array([1, 0, 3, 2])[d]
    behind = nb[kk, opposite]
    t = grid.fractions[kk, d]
    t_back = grid.fractions[kk, opposite]

    def extrapolate(v):
        v0 = v[kk]
        vb = np.where(behind >= 0, v[np.maximum(behind, 0)], v0)
        slope = np.where(behind >= 0, (v0 - vb) / t_back, 0.0)
        return v0 + t * slope

    nx_, ny_ = grid.domain.normal(pts[:, 0], pts[:, 1])
    tangency = extrapolate(A1.values) * nx_ + extrapolate(A2.values) * ny_
    tan_res = float(np.abs(tangency).max()) if len(tangency) else 0.0
    return GaugeResidual(curl_res, div_res, tan_res, tol)


# --- export ---------------------------------------------------------------------


def export_field_csv(fld: ScalarField, path, header_lines=()) -> Path:
    path = Path(path)
    pts = fld.grid.points
    with path.open("w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("x,y,value\n")
        for (x, y), v in zip(pts, fld.values):
            fh.write(f"{x:.17g},{y:.17g},{v:.17g}\n")
    return path


def contour_segments(fld: ScalarField, levels):
    """Level lines of the field as ``{level: [polyline (n, 2) array, ...]}``.

    Marching squares on the node lattice with exterior nodes set to the
    boundary value.
    """
    import contourpy

    grid = fld.grid
    z = fld.to_array()
    gen = contourpy.contour_generator(grid.xs, grid.ys, z, name="serial", corner_mask=False)
    return {float(lv): [np.asarray(s) for s in gen.lines(lv)] for lv in levels}


def export_contours_csv(fld: ScalarField, levels, path, header_lines=()) -> Path:
    path = Path(path)
    segs = contour_segments(fld, levels)
    sid = 0
    with path.open("w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("level,segment_id,x,y\n")
        for lv in sorted(segs):
            for line in segs[lv]:
                for x, y in line:
                    fh.write(f"{lv:.17g},{sid},{x:.17g},{y:.17g}\n")
                sid += 1
    return path

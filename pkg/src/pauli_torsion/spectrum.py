"""Discrete Pauli operators and their lowest eigenvalues.

Two discretizations of the same operator are provided:

* ``direct_pauli``: the magnetic five-point Laplacian with lattice link phases
  minus the Zeeman term ``h B``;
* ``weighted_cr``: the form ``h^2 int w |(d1 + i d2) v|^2`` with
  ``w = exp(-2 Psi / h)``, obtained from the operator through
  ``u = exp(-Psi / h) v``.  It is solved in the scaled variable ``u`` so the
  matrix entries only involve differences of ``Psi`` and never underflow.

Eigenvalues are found by block shift-and-invert iteration with a sparse LU
factorization and Rayleigh-Ritz extraction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import DomainSpec, Grid, build_grid
from .potential import MagneticField, ScalarField, laplacian_matrix, solve_poisson, vector_potential

__all__ = [
    "FORMULATIONS",
    "DiscreteOperator",
    "SpectralResult",
    "NoConvergence",
    "SingularShift",
    "WeightUnderflow",
    "InsufficientRange",
    "assemble_laplacian",
    "assemble_pauli",
    "assemble_weighted_form",
    "smallest_eigs",
    "dirichlet_lambda",
    "trial_state",
    "rayleigh_quotient",
    "SweepRow",
    "RateFit",
    "SweepResult",
    "boundary_layer_ok",
    "fit_log_rate",
    "semiclassical_sweep",
    "export_sweep_csv",
]

FORMULATIONS = ("direct_pauli", "weighted_cr", "dirichlet_laplacian")

# largest 2 Psi / h for which a mass weight exp(-2 Psi / h) is a normal double
_LOG_WEIGHT_FLOOR = 700.0


class NoConvergence(RuntimeError):
    def __init__(self, iterations, residual):
        super().__init__(f"eigensolver stopped after {iterations} iterations, best residual {residual:.3e}")
        self.iterations = iterations
        self.residual = residual


class SingularShift(RuntimeError):
    pass


class WeightUnderflow(ValueError):
    pass


class InsufficientRange(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Hermitian matrix of a discretized operator.

    For ``weighted_cr`` the stored matrix is ``M^{-1/2} K M^{-1/2}``, with the
    diagonal mass ``M`` kept as its logarithm; eigenvalues coincide with those
    of ``K v = lam M v``.
    """

    matrix: sp.csr_matrix
    formulation: str
    h: float
    grid: Grid | None = None
    log_mass: np.ndarray | None = None

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ValueError(self.formulation)
        if self.log_mass is not None and not np.all(np.isfinite(self.log_mass)):
            raise ValueError("mass weights must be finite and positive")

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def mass(self):
        """Diagonal mass weights (these may underflow to zero for small ``h``)."""
        if self.log_mass is None:
            return np.ones(self.dimension)
        return np.exp(self.log_mass)

    def hermiticity_defect(self):
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0


def _interior_edges(grid: Grid):
    """Each interior edge once: (i, j, direction) with ``j`` the +x or +y neighbour."""
    nb = grid.neighbors
    out = []
    for d in (0, 2):
        k = np.nonzero(nb[:, d] >= 0)[0]
        out.append((k, nb[k, d], d))
    return out


def _hermitian(n, diag, i, j, vij):
    rows = np.concatenate([np.arange(n), i, j])
    cols = np.concatenate([np.arange(n), j, i])
    vals = np.concatenate([diag.astype(vij.dtype), vij, np.conj(vij)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def assemble_laplacian(grid: Grid) -> DiscreteOperator:
    """Positive Dirichlet Laplacian ``-lap_h`` (cut-cell boundary treatment)."""
    return DiscreteOperator((-laplacian_matrix(grid)).tocsr(), "dirichlet_laplacian", 1.0, grid)


def assemble_pauli(grid: Grid, A1: ScalarField, A2: ScalarField, B: MagneticField, h: float,
                   gauge: np.ndarray | None = None) -> DiscreteOperator:
    """Magnetic Laplacian with link phases, minus ``h B`` on the diagonal.

    The phase of the link ``i -> j`` is ``exp(-i int_i^j A.dl / h)`` with the
    line integral taken by the midpoint rule from nodal ``A``.  ``gauge``
    optionally adds the nodal function ``chi`` as ``A -> A + grad chi``,
    realized exactly on the links as ``chi_j - chi_i``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    n = grid.n_interior
    dx = grid.spacing
    c = h**2 / dx**2
    diag = c * (1.0 / grid.fractions).sum(axis=1) - h * B.on_grid(grid)
    I, J, V = [], [], []
    for i, j, d in _interior_edges(grid):
        a = A1.values if d == 0 else A2.values
        theta = 0.5 * (a[i] + a[j]) * dx
        if gauge is not None:
            theta = theta + (gauge[j] - gauge[i])
        I.append(i)
        J.append(j)
        V.append(-c * np.exp(-1j * theta / h))
    K = _hermitian(n, diag, np.concatenate(I), np.concatenate(J), np.concatenate(V))
    return DiscreteOperator(K, "direct_pauli", h, grid)


def assemble_weighted_form(grid: Grid, psi: ScalarField, h: float) -> DiscreteOperator:
    """Weighted Cauchy-Riemann form in the scaled variable ``u = exp(-Psi/h) v``.

    Integrating by parts, ``int w |(d1 + i d2) v|^2`` equals
    ``int w |grad v|^2 - i int conj(v) (grad^perp w) . grad v`` for Dirichlet
    ``v``, and ``grad^perp w = -(2/h) w A``.  Edge weights are geometric means
    of the nodal weights, so after scaling every interior coupling is exactly
    ``-h^2/dx^2 + i h (A.e)/dx`` while the diagonal collects
    ``exp((Psi_i - Psi_j)/h)``.  The stored mass is ``log w = -2 Psi/h``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    n = grid.n_interior
    dx = grid.spacing
    psi_min = float(min(psi.values.min(), psi.boundary_value))
    Psi = psi.values - psi_min
    Psi_b = psi.boundary_value - psi_min
    log_mass = -2 * Psi / h
    if np.count_nonzero(-log_mass < _LOG_WEIGHT_FLOOR) < min(9, n):
        raise WeightUnderflow(f"h = {h} leaves fewer than 9 representable weights; refine the grid")
    A1, A2 = vector_potential(psi)
    c = h**2 / dx**2
    nb = grid.neighbors
    diag = np.zeros(n)
    for d in range(4):
        inside = nb[:, d] >= 0
        other = np.where(inside, Psi[np.maximum(nb[:, d], 0)], Psi_b)
        diag += np.exp((Psi - other) / h) / np.where(inside, 1.0, grid.fractions[:, d])
    diag *= c
    I, J, V = [], [], []
    for i, j, d in _interior_edges(grid):
        a = A1.values if d == 0 else A2.values
        I.append(i)
        J.append(j)
        V.append(-c + 1j * h * 0.5 * (a[i] + a[j]) / dx)
    K = _hermitian(n, diag, np.concatenate(I), np.concatenate(J), np.concatenate(V))
    return DiscreteOperator(K, "weighted_cr", h, grid, log_mass)


# --- eigensolver ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralResult:
    eigenvalues: np.ndarray
    residual_norms: np.ndarray
    iterations: int
    shift_used: float
    thresholds: np.ndarray = field(repr=False, default=None)
    vectors: np.ndarray | None = field(repr=False, default=None)

    @property
    def converged(self):
        return bool(np.all(self.residual_norms <= self.thresholds))


def _factor(S, sigma):
    n = S.shape[0]
    A = (S - sigma * sp.identity(n, dtype=S.dtype, format="csr")).tocsc()
    lu = spla.splu(A)
    if not np.all(np.isfinite(lu.solve(np.ones(n, dtype=A.dtype)))):
        raise RuntimeError("singular factor")
    return lu


def smallest_eigs(op: DiscreteOperator, k: int = 1, tol: float = 1e-8, shift: float | None = None,
                  max_iter: int = 300) -> SpectralResult:
    """The ``k`` smallest eigenvalues of a Hermitian operator.

    Block inverse iteration on ``(S - sigma)^{-1}`` with block size
    ``k + max(2, k)`` and Rayleigh-Ritz extraction.  The start block is the
    normalized all-ones vector followed by seeded random vectors, so results
    are deterministic.  A pair is converged when its residual is at most
    ``max(tol |theta|, 100 eps d)`` with ``d`` the median diagonal entry, the
    second term being the round-off level of the residual.  The default shift sits slightly
    below zero; if an eigenvalue turns up below it the shift is lowered once.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    S = op.matrix.tocsr()
    n = S.shape[0]
    if k > n:
        raise ValueError("k exceeds the dimension")
    # typical diagonal size: sets the default shift and the round-off floor of the residual
    scale = float(np.median(np.abs(S.diagonal())))
    floor = 100 * np.finfo(float).eps * scale
    p = min(n, k + max(2, k))
    if p == n or n <= 32:
        dense = S.toarray()
        theta, X = np.linalg.eigh(dense)
        res = np.linalg.norm(dense @ X[:, :k] - X[:, :k] * theta[:k], axis=0)
        thr = np.maximum(tol * np.abs(theta[:k]), floor)
        return SpectralResult(theta[:k], res, 1, 0.0 if shift is None else shift, thr, X[:, :k])

    sigma = -1e-6 * scale if shift is None else float(shift)
    rng = np.random.default_rng(0)
    X0 = np.empty((n, p), dtype=S.dtype)
    X0[:, 0] = 1.0
    X0[:, 1:] = rng.standard_normal((n, p - 1))
    best = math.inf
    total = 0
    for attempt in range(2):
        try:
            lu = _factor(S, sigma)
        except RuntimeError:
            sigma -= tol * max(abs(sigma), floor)
            try:
                lu = _factor(S, sigma)
            except RuntimeError as exc:
                raise SingularShift(f"shift {sigma:.6g} coincides with an eigenvalue") from exc
        X, _ = np.linalg.qr(X0)
        for it in range(1, max_iter + 1):
            Y = lu.solve(X)
            Q, _ = np.linalg.qr(Y)
            SQ = S @ Q
            H = Q.conj().T @ SQ
            theta, W = np.linalg.eigh(0.5 * (H + H.conj().T))
            X = Q @ W
            R = SQ @ W - X * theta
            res = np.linalg.norm(R, axis=0)
            thr = np.maximum(tol * np.abs(theta), floor)
            best = min(best, float(np.max(res[:k] / thr[:k])))
            if np.all(res[:k] <= thr[:k]):
                total += it
                break
        else:
            raise NoConvergence(total + max_iter, best)
        if theta[0] >= sigma or attempt == 1 or shift is not None:
            break
        # an eigenvalue lies below the shift: move the shift under it and redo
        sigma = theta[0] - max(abs(theta[0]), 1e-6 * scale)
        X0 = X
    return SpectralResult(theta[:k].real.copy(), res[:k], total, sigma, thr[:k], X[:, :k])


def dirichlet_lambda(grid: Grid, tol: float = 1e-10) -> float:
    """Ground energy of the Dirichlet Laplacian on the grid."""
    return float(smallest_eigs(assemble_laplacian(grid), 1, tol).eigenvalues[0])


def trial_state(psi: ScalarField, h: float) -> np.ndarray:
    """Scaled trial state ``exp(-Psi/h) (1 - exp(2 psi/h))`` (``v = 1 - exp(2 psi/h)``)."""
    psi_min = float(min(psi.values.min(), psi.boundary_value))
    return np.exp(-(psi.values - psi_min) / h) * -np.expm1(2 * (psi.values - psi.boundary_value) / h)


def rayleigh_quotient(op: DiscreteOperator, u: np.ndarray) -> float:
    """``<u, S u> / <u, u>`` in the operator's own (scaled) variable."""
    Su = op.matrix @ u
    return float(np.real(np.vdot(u, Su)) / np.real(np.vdot(u, u)))


# --- semiclassical sweep -----------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    h: float
    lam: float
    residual: float
    formulation: str
    usable: bool
    lam_coarse: float = math.nan

    @property
    def log_lam(self):
        return math.log(self.lam) if self.lam > 0 else math.nan


@dataclass(frozen=True)
class RateFit:
    intercept: float
    stderr: float
    coef_hlogh: float
    coef_h: float
    h_used: tuple[float, ...]


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    fit: RateFit | None
    psi_min: float


def boundary_layer_ok(h: float, grad_max: float, spacing: float, cells: float = 1.0) -> bool:
    """Whether the decay length ``h / (2 max|grad psi|)`` spans at least ``cells`` grid cells."""
    return h / (2 * grad_max) >= cells * spacing


def fit_log_rate(hs, lams) -> RateFit:
    """Weighted least squares ``h log lam = c0 + c1 h log h + c2 h`` with weights ``1/h``."""
    h = np.asarray(hs, dtype=float)
    lams = np.asarray(lams, dtype=float)
    if len(h) < 4:
        raise InsufficientRange(f"need at least 4 points, got {len(h)}")
    if np.any(lams <= 0):
        raise ValueError("eigenvalues must be positive")
    y = h * np.log(lams)
    X = np.column_stack([np.ones_like(h), h * np.log(h), h])
    sw = h**-0.5
    Xw = X * sw[:, None]
    coef, *_ = np.linalg.lstsq(Xw, y * sw, rcond=None)
    r = (y - X @ coef) * sw
    s2 = float(r @ r) / (len(h) - 3)
    cov = s2 * np.linalg.inv(Xw.T @ Xw)
    return RateFit(float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0))), float(coef[1]), float(coef[2]),
                   tuple(float(v) for v in h))


class _Level:
    """Grid, potential and vector potential at one resolution."""

    def __init__(self, domain, B, spacing, grid=None, psi=None):
        self.grid = grid if grid is not None else build_grid(domain, spacing)
        self.psi = psi if psi is not None else solve_poisson(self.grid, B)
        self.A1, self.A2 = vector_potential(self.psi)
        self.B = B

    def lowest(self, h, formulation, tol):
        if formulation == "weighted_cr":
            op = assemble_weighted_form(self.grid, self.psi, h)
        else:
            op = assemble_pauli(self.grid, self.A1, self.A2, self.B, h)
        res = smallest_eigs(op, 1, tol)
        return float(res.eigenvalues[0]), float(res.residual_norms[0])


def semiclassical_sweep(domain: DomainSpec, B: MagneticField, h_list, formulation: str = "weighted_cr",
                        spacing: float = 1 / 128, n_fit: int = 5, tol: float = 1e-8,
                        convergence_tol: float | None = 0.05, layer_cells: float = 1.0,
                        grid: Grid | None = None, psi: ScalarField | None = None) -> SweepResult:
    """Lowest eigenvalue along ``h_list`` and the fitted exponential rate ``2 psi_min``.

    An ``h`` counts as resolved when the weight's boundary decay length spans
    ``layer_cells`` cells, the eigenvalue is positive, and (unless
    ``convergence_tol`` is None) it agrees within that relative tolerance with
    the value on a grid of twice the spacing.  The fit uses the ``n_fit``
    smallest resolved values.
    """
    if formulation not in ("weighted_cr", "direct_pauli"):
        raise ValueError(formulation)
    fine = _Level(domain, B, spacing, grid, psi)
    if not B.is_positive(fine.grid):
        raise ValueError("the sweep needs a positive field")
    coarse = None
    if convergence_tol is not None:
        if B.kind == "sampled":
            raise ValueError("grid-convergence check needs a field defined off the grid")
        coarse = _Level(domain, B, 2 * fine.grid.spacing)
    grad_max = float(np.sqrt(fine.A1.values**2 + fine.A2.values**2).max())
    psi_min = float(fine.psi.values.min())
    rows = []
    for h in sorted(h_list, reverse=True):
        skip = SweepRow(h, math.nan, math.nan, formulation, False)
        if not boundary_layer_ok(h, grad_max, fine.grid.spacing, layer_cells):
            rows.append(skip)
            continue
        try:
            lam_c = math.nan
            if coarse is not None:
                lam_c, _ = coarse.lowest(h, formulation, tol)
                if not lam_c > 0:
                    rows.append(SweepRow(h, math.nan, math.nan, formulation, False, lam_c))
                    continue
            lam, res = fine.lowest(h, formulation, tol)
        except (WeightUnderflow, NoConvergence):
            rows.append(skip)
            continue
        ok = lam > 0
        if coarse is not None and ok:
            ok = abs(lam_c / lam - 1) <= convergence_tol
        rows.append(SweepRow(h, lam, res, formulation, ok, lam_c))
    usable = [r for r in rows if r.usable]
    if len(usable) < 4:
        raise InsufficientRange(f"only {len(usable)} resolved values of h")
    chosen = sorted(usable, key=lambda r: r.h)[:n_fit]
    fit = fit_log_rate([r.h for r in chosen], [r.lam for r in chosen])
    return SweepResult(rows, fit, psi_min)


def export_sweep_csv(result: SweepResult, path, header_lines=()) -> Path:
    """CSV ``h,lambda,log_lambda,h_log_lambda,formulation,residual``; the fit follows as comments.

    Rows skipped as unresolved carry ``nan`` eigenvalues.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "lambda", "log_lambda", "h_log_lambda", "formulation", "residual"])
        for r in result.rows:
            w.writerow([f"{r.h:.17g}", f"{r.lam:.17g}", f"{r.log_lam:.17g}", f"{r.h * r.log_lam:.17g}",
                        r.formulation, f"{r.residual:.17g}"])
        if result.fit is not None:
            f = result.fit
            fh.write("# fit: h log lambda = c0 + c1 h log h + c2 h, weights 1/h\n")
            fh.write(f"# c0 = {f.intercept:.17g} +- {f.stderr:.3g}\n")
            fh.write(f"# c1 = {f.coef_hlogh:.17g}\n# c2 = {f.coef_h:.17g}\n")
            fh.write(f"# h used = {' '.join(f'{v:.17g}' for v in f.h_used)}\n")
            fh.write(f"# psi_min = {result.psi_min:.17g}\n")
    return path

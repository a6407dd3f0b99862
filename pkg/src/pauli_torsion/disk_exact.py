"""Exact spectral analysis of the Pauli operator on a disk with constant field.

Separating variables turns the Dirichlet problem into radial channels

    P_m = h^2 [-d^2/dr^2 - (1/r) d/dr + (m/r - B r / 2h)^2] - h B,

whose eigenvalues are the roots in ``lam`` of
``M(-lam / 2hB, m + 1, B R^2 / 2h) = 0`` with ``M`` the regularized Kummer
function.  Everything exponentially large or small is carried in logs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.optimize as so
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "RadialChannel",
    "ChannelSpectrum",
    "RootResult",
    "DiskReport",
    "BracketFailure",
    "TempleInapplicable",
    "KummerOverflow",
    "kummer_regularized",
    "kummer_regularized_split",
    "kummer_regularized_array",
    "count_positive_zeros",
    "count_zeros_by_scan",
    "channel_root",
    "channel_eigenvalue",
    "asymptotic_eig",
    "temple_bounds",
    "temple_integrals",
    "negative_m_lower",
    "radial_fd_eigenvalue",
    "channel_spectrum",
    "disk_ground",
    "export_channel_csv",
    "gauss_legendre_adaptive",
]

Z_MAX = 700.0


class BracketFailure(RuntimeError):
    pass


class TempleInapplicable(ValueError):
    pass


class KummerOverflow(OverflowError):
    pass


@dataclass(frozen=True)
class RadialChannel:
    m: int
    h: float
    B: float = 1.0
    R: float = 1.0

    def __post_init__(self):
        if not (self.h > 0 and self.B > 0 and self.R > 0):
            raise ValueError("h, B and R must be positive")
        if int(self.m) != self.m:
            raise ValueError("angular momentum must be an integer")

    @property
    def z(self):
        """Kummer argument ``B R^2 / 2h``."""
        return self.B * self.R**2 / (2 * self.h)

    @property
    def landau(self):
        """Landau level spacing ``2 h B``."""
        return 2 * self.h * self.B


# --- Kummer function ------------------------------------------------------------


def _log_terms(a_int, a_frac, b, z, smax):
    """Signs and log-magnitudes of ``(a)_s z^s / (Gamma(b+s) s!)``, s = 0..smax-1.

    ``a = a_int + a_frac`` with the parts kept apart so that ``a + j`` is exact
    near the integers.  ``z`` may be an array (terms along the last axis).
    """
    s = np.arange(smax, dtype=float)
    factors = (a_int + s[:-1]) + a_frac
    zero = factors == 0
    logf = np.log(np.abs(np.where(zero, 1.0, factors)))
    logpoch = np.concatenate([[0.0], np.cumsum(logf)])
    sign = np.concatenate([[1.0], np.cumprod(np.sign(np.where(zero, 1.0, factors)))])
    alive = np.concatenate([[True], np.cumsum(zero) == 0])
    from scipy.special import gammaln

    base = logpoch - gammaln(b + s) - gammaln(s + 1)
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logz = np.log(z)[..., None]
        logt = base + s * logz
    logt = np.where(s == 0, base, logt)  # 0^0 = 1
    logt = np.where(alive, logt, -np.inf)
    return np.where(alive, sign, 0.0) * np.ones_like(logt), logt


def _term_count(a, z):
    # terms grow until s ~ |a| + z, then decay geometrically; the tail below
    # 1e-17 of the peak is reached within a few standard deviations
    zm = float(np.max(z))
    return int(abs(a) + zm + 12 * math.sqrt(zm + abs(a) + 1) + 60)


def _neumaier(values, axis=-1):
    """Compensated summation along an axis (vectorized over the others)."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    s = np.zeros(v.shape[:-1])
    c = np.zeros(v.shape[:-1])
    for j in range(v.shape[-1]):
        x = v[..., j]
        t = s + x
        big = np.abs(s) >= np.abs(x)
        c += np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + c


def kummer_regularized_split(a_int: float, a_frac: float, b: float, z: float):
    """``M(a_int + a_frac, b, z)`` as ``(sign, log|M|, log max term)``.

    The third value is the scale of the largest series term, useful to judge
    cancellation near a zero.
    """
    if b <= 0:
        raise ValueError("b must be positive")
    if z < 0:
        raise ValueError("z must be non-negative")
    if z > Z_MAX:
        raise KummerOverflow(f"z = {z} exceeds {Z_MAX}; rescale h")
    a = a_int + a_frac
    n = _term_count(a, z)
    while True:
        sign, logt = _log_terms(a_int, a_frac, b, z, n)
        top = float(np.max(logt))
        tail = logt[-8:]
        if not np.isfinite(top) or np.all(tail < top + math.log(1e-17)) or np.all(sign[-8:] == 0):
            break
        n *= 2
    if not np.isfinite(top):
        return 0.0, -math.inf, -math.inf
    keep = (sign != 0) & (logt >= top + math.log(1e-17) - 40)
    total = math.fsum((sign[keep] * np.exp(logt[keep] - top)).tolist())
    if total == 0.0:
        return 0.0, -math.inf, top
    return math.copysign(1.0, total), math.log(abs(total)) + top, top


def kummer_regularized(a: float, b: float, z: float):
    """Regularized confluent hypergeometric function ``sum (a)_s z^s / (Gamma(b+s) s!)``.

    Returns ``(sign, log|value|)``; the value itself is ``sign * exp(log)``.
    """
    a_int = float(round(a))
    sign, logv, _ = kummer_regularized_split(a_int, a - a_int, b, z)
    return sign, logv


def kummer_regularized_array(a: float, b: float, z):
    """Vectorized evaluation over an array of ``z``; returns ``(sign, log|value|)`` arrays."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z < 0) or np.any(z > Z_MAX):
        raise ValueError("z must lie in [0, 700]")
    a_int = float(round(a))
    n = _term_count(a, z)
    sign, logt = _log_terms(a_int, a - a_int, b, z, n)
    top = np.max(logt, axis=-1)
    scaled = sign * np.exp(logt - top[..., None])
    total = _neumaier(scaled)
    with np.errstate(divide="ignore"):
        logv = np.log(np.abs(total)) + top
    return np.sign(total), logv


def count_positive_zeros(a: float, b: float) -> int:
    """Number of positive zeros of ``z -> M(a, b, z)`` for ``b > 0``."""
    if b <= 0:
        raise ValueError("b must be positive")
    return 0 if a >= 0 else int(math.ceil(-a))


def count_zeros_by_scan(a: float, b: float, z_max: float = 100.0, n: int = 3000) -> int:
    """Sign changes of ``M(a, b, .)`` on a log-spaced grid of ``(0, z_max]``."""
    z = np.geomspace(1e-4, z_max, n)
    sign, _ = kummer_regularized_array(a, b, z)
    s = sign[sign != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


# --- eigenvalues ------------------------------------------------------------------


@dataclass(frozen=True)
class RootResult:
    lam: float
    residual: float
    bracket: tuple[float, float]


def _channel_value(ch: RadialChannel, k: int, s: float):
    """Kummer function at ``lam = 2hB (k + s)``, scaled by its largest term."""
    sign, logv, top = kummer_regularized_split(-float(k), -s, ch.m + 1, ch.z)
    if sign == 0:
        return 0.0
    return sign * math.exp(logv - top)


def channel_root(ch: RadialChannel, k: int = 0, tol: float = 1e-12) -> RootResult:
    """Root number ``k`` of the channel equation with its scaled residual.

    The root is sought as ``lam = 2hB (k + s)`` with ``s`` in (0, 1), working
    in ``t = log s`` because ground states sit exponentially close to the
    Landau levels.  When ``M`` has no sign change (``z`` too small) the
    bracket is widened once to ``s`` in (0, 2).
    """
    if ch.m < 0:
        raise ValueError("negative angular momenta have no Kummer root formulation")
    if k < 0:
        raise ValueError("k must be non-negative")

    def f_s(s):
        return _channel_value(ch, k, s)

    t_lo = math.log(np.finfo(float).tiny)
    f_lo = f_s(math.exp(t_lo))
    s_hi = 1.0
    f_hi = f_s(s_hi)
    if f_lo * f_hi > 0 or f_lo == 0:
        # widen: first sign change of f on (0, 2)
        grid = np.linspace(0.0, 2.0, 129)[1:]
        vals = np.array([f_s(s) for s in grid])
        change = np.nonzero(np.sign(vals) != np.sign(f_lo))[0]
        if len(change) == 0:
            return _scanned_root(ch, k, tol)
        j = change[0]
        s_hi = float(grid[j])
        t_lo = math.log(grid[j - 1]) if j > 0 else t_lo
        f_lo = f_s(math.exp(t_lo))
        f_hi = vals[j]

    def f_t(t):
        return f_s(math.exp(t))

    t_hi = math.log(s_hi)
    # bisection until the bracket is narrow on the eigenvalue scale
    width = 1e-3
    while True:
        lo_s, hi_s = math.exp(t_lo), math.exp(t_hi)
        if hi_s - lo_s <= width * max(hi_s, 1e-300) or t_hi - t_lo <= 1e-3:
            break
        tm = 0.5 * (t_lo + t_hi)
        fm = f_t(tm)
        if fm == 0:
            t_lo = t_hi = tm
            break
        if (fm > 0) == (f_lo > 0):
            t_lo, f_lo = tm, fm
        else:
            t_hi = tm
    if t_hi > t_lo:
        t = so.brentq(f_t, t_lo, t_hi, xtol=max(tol, 1e-15) * 0.1, rtol=4 * np.finfo(float).eps)
    else:
        t = t_lo
    s = math.exp(t)
    if k > 0 and _interior_zeros(ch, k + s) != k:
        # the bracket caught a lower root: the levels are far from the Landau ladder
        return _scanned_root(ch, k, tol)
    lam = ch.landau * (k + s)
    return RootResult(lam, abs(f_s(s)), (ch.landau * (k + math.exp(t_lo)), ch.landau * (k + math.exp(t_hi))))


def _interior_zeros(ch: RadialChannel, nu: float) -> int:
    """Interior radial zeros of the channel eigenfunction at ``lam = 2hB nu``."""
    return count_zeros_by_scan(-nu, ch.m + 1, z_max=ch.z * (1 - 1e-7), n=2000)


def _signed_value(ch: RadialChannel, nu: float) -> float:
    sign, logv = kummer_regularized(-nu, ch.m + 1, ch.z)
    return 0.0 if sign == 0 else sign * math.exp(min(max(logv, -700.0), 700.0))


def _scanned_root(ch: RadialChannel, k: int, tol: float) -> RootResult:
    """Root ``k`` found by scanning ``nu = lam / 2hB`` and checking its zero count.

    Used when ``z`` is small enough that roots drift far above their Landau levels.
    """
    nu_max = k + 4.0
    while nu_max < 1e7:
        grid = np.linspace(0.0, nu_max, 64 * (k + 4) + 1)[1:]
        vals = np.array([_signed_value(ch, nu) for nu in grid])
        for c in np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]:
            lo, hi = grid[c], grid[c + 1]
            nu = so.brentq(lambda v: _signed_value(ch, v), lo, hi, xtol=1e-300,
                           rtol=max(tol * 0.1, 4 * np.finfo(float).eps))
            if _interior_zeros(ch, nu) == k:
                return RootResult(ch.landau * nu, abs(_signed_value(ch, nu)), (ch.landau * lo, ch.landau * hi))
        nu_max *= 4
    raise BracketFailure(f"no root with {k} interior zeros for m={ch.m}, z={ch.z:.4g}")


def channel_eigenvalue(ch: RadialChannel, k: int = 0, tol: float = 1e-12) -> float:
    """Eigenvalue ``lam_{m,k}`` of the Dirichlet channel operator (``m >= 0``)."""
    return channel_root(ch, k, tol).lam


def asymptotic_eig(ch: RadialChannel) -> float:
    """Log of the small-h prediction ``2hB z^{m+1} / m! e^{-z}``, ``z = BR^2/2h``."""
    if ch.m < 0:
        raise ValueError("the prediction holds for m >= 0")
    z = ch.z
    return math.log(ch.landau) + (ch.m + 1) * math.log(z) - math.lgamma(ch.m + 1) - z


def negative_m_lower(ch: RadialChannel) -> float:
    """Lower bound ``(2|m| - 1) h B`` for the ground energy of a channel with ``m < 0``."""
    if ch.m >= 0:
        raise ValueError("m must be negative")
    return (2 * abs(ch.m) - 1) * ch.h * ch.B


# --- Temple inequality ----------------------------------------------------------------


_GL_X, _GL_W = np.polynomial.legendre.leggauss(15)


def gauss_legendre_adaptive(logf, a: float, b: float, rtol: float = 1e-12, max_depth: int = 60):
    """Integral of ``exp(logf(x))`` over ``[a, b]`` as a log value.

    Adaptive bisection with 15-point Gauss-Legendre panels; panel sums are
    accumulated relative to a common scale and summed with ``math.fsum``.
    """
    probe = np.linspace(a, b, 2049)
    scale = float(np.max(logf(probe)))
    if not np.isfinite(scale):
        return -math.inf

    def panel(lo, hi):
        x = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
        return 0.5 * (hi - lo) * float(np.dot(_GL_W, np.exp(logf(x) - scale)))

    n0 = 16
    edges = np.linspace(a, b, n0 + 1)
    stack = [(edges[i], edges[i + 1], panel(edges[i], edges[i + 1]), 0) for i in range(n0)]
    total_est = abs(math.fsum(p[2] for p in stack))
    parts = []
    while stack:
        lo, hi, val, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        if abs(left + right - val) <= rtol * total_est or depth >= max_depth:
            parts.append(left + right)
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    total = math.fsum(parts)
    return math.log(total) + scale if total > 0 else -math.inf


def temple_integrals(ch: RadialChannel, rtol: float = 1e-12):
    """Logs of ``||v||^2 e^{-z}``, ``<v, P v> / (2(m+1)hB)`` and ``||P v||^2 / (2(m+1)hB)^2``.

    Trial state ``v = r^m (e^{q} - e^{-q})``, ``q = B(R^2 - r^2)/4h``; it obeys
    ``P_m v = 2(m+1)hB r^m e^{-q}``.  All integrals use the measure ``r dr``.
    """
    m, B, R, h = ch.m, ch.B, ch.R, ch.h
    if m < 0:
        raise ValueError("trial state defined for m >= 0")

    def q(r):
        return B * (R**2 - r**2) / (4 * h)

    def logr(r):
        with np.errstate(divide="ignore"):
            return (2 * m + 1) * np.log(r)

    def log_norm(r):
        # v^2 e^{-z} = r^{2m} e^{-B r^2/2h} (1 - e^{-2q})^2
        with np.errstate(divide="ignore"):
            return logr(r) - B * r**2 / (2 * h) + 2 * np.log(-np.expm1(-2 * q(r)))

    def log_form(r):
        with np.errstate(divide="ignore"):
            return logr(r) + np.log(-np.expm1(-2 * q(r)))

    def log_image(r):
        return logr(r) - 2 * q(r)

    return (
        gauss_legendre_adaptive(log_norm, 0.0, R, rtol),
        gauss_legendre_adaptive(log_form, 0.0, R, rtol),
        gauss_legendre_adaptive(log_image, 0.0, R, rtol),
    )


def _temple_logs(ch: RadialChannel):
    ln2, lform, limage = temple_integrals(ch)
    c = math.log(2 * (ch.m + 1) * ch.h * ch.B)
    log_eta = c + lform - ch.z - ln2
    log_pv2 = 2 * c + limage - ch.z - ln2  # ||P v||^2 / ||v||^2
    return log_eta, log_pv2


def temple_bounds(ch: RadialChannel):
    """Temple enclosure ``(eta - eps^2 / (beta - eta), eta)`` for the channel ground state.

    ``eta`` is the Rayleigh quotient of the trial state, ``eps^2`` its
    variance and ``beta = 2hB`` a lower bound for the second eigenvalue.
    """
    log_eta, log_pv2 = _temple_logs(ch)
    eta = math.exp(log_eta)
    beta = ch.landau
    if eta >= beta:
        raise TempleInapplicable(f"Rayleigh quotient {eta:.4g} is not below 2hB = {beta:.4g}")
    # eps^2 = ||Pv||^2/||v||^2 - eta^2, formed without cancellation loss in the logs
    eps2 = math.exp(log_pv2) * -math.expm1(2 * log_eta - log_pv2)
    return eta - eps2 / (beta - eta), eta


# --- 1D finite-difference oracle --------------------------------------------------------


def radial_fd_eigenvalue(ch: RadialChannel, n: int = 8000, k: int = 1):
    """Lowest ``k`` eigenvalues of a symmetric finite-volume discretization of ``P_m``.

    Works for any integer ``m``; independent of the Kummer route.
    """
    h, B, R, m = ch.h, ch.B, ch.R, ch.m
    r = np.linspace(0.0, R, n + 1)
    dr = r[1] - r[0]
    rh = 0.5 * (r[:-1] + r[1:])
    if m == 0:
        # the centre is an unknown with control volume [0, dr/2]
        rc = r[:-1]
        mass = np.concatenate([[dr / 8], rc[1:]])
        main = np.concatenate([[rh[0]], rh[:-1] + rh[1:]]) / dr**2
        off = -rh[:-1] / dr**2
        V = (B * rc / (2 * h)) ** 2
    else:
        rc = r[1:-1]
        mass = rc
        main = (rh[:-1] + rh[1:]) / dr**2
        off = -rh[1:-1] / dr**2
        V = (m / rc - B * rc / (2 * h)) ** 2
    K = sp.diags([off, main + mass * V, off], [-1, 0, 1]) * h**2 - sp.diags(mass * h * B)
    Minv = sp.diags(1 / np.sqrt(mass))
    S = (Minv @ K @ Minv).tocsc()
    vals = spla.eigsh(S, k=k, sigma=-1e-3 * h * B, which="LM", v0=np.ones(S.shape[0]))[0]
    return np.sort(vals)


# --- reports ------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelSpectrum:
    channel: RadialChannel
    eigenvalues: list[float]
    temple_lower: float | None
    rayleigh_upper: float | None
    asymptotic_log: float | None
    residuals: list[float] = field(default_factory=list)

    @property
    def ratio(self):
        """Ground eigenvalue over the small-h prediction."""
        if self.asymptotic_log is None or not self.eigenvalues:
            return None
        return math.exp(math.log(self.eigenvalues[0]) - self.asymptotic_log)


def channel_spectrum(ch: RadialChannel, k_max: int = 0, tol: float = 1e-12) -> ChannelSpectrum:
    """Roots ``k = 0..k_max`` plus the Temple pair and the prediction for the ground state."""
    if ch.m < 0:
        lower = negative_m_lower(ch)
        vals = radial_fd_eigenvalue(ch, k=k_max + 1).tolist()
        return ChannelSpectrum(ch, vals, lower, None, None)
    roots = [channel_root(ch, k, tol) for k in range(k_max + 1)]
    log_eta, _ = _temple_logs(ch)
    eta = math.exp(log_eta)
    try:
        lower, _ = temple_bounds(ch)
    except TempleInapplicable:
        lower = None
    return ChannelSpectrum(ch, [r.lam for r in roots], lower, eta, asymptotic_eig(ch),
                           [r.residual for r in roots])


@dataclass(frozen=True)
class DiskReport:
    h: float
    B: float
    R: float
    ground: float
    temple_lower: float | None
    rayleigh_upper: float
    asymptotic: float
    ratio: float
    channels: list[ChannelSpectrum]

    @property
    def enclosure_width(self):
        """Relative width of the Temple enclosure."""
        if self.temple_lower is None:
            return math.inf
        return (self.rayleigh_upper - self.temple_lower) / self.ground


def disk_ground(h: float, B: float = 1.0, R: float = 1.0, m_max: int = 2, k_max: int = 0) -> DiskReport:
    """Ground state of the disk (the ``m = 0`` channel) with the other channels tabulated."""
    channels = [channel_spectrum(RadialChannel(m, h, B, R), k_max) for m in range(m_max + 1)]
    c0 = channels[0]
    return DiskReport(h, B, R, c0.eigenvalues[0], c0.temple_lower, c0.rayleigh_upper,
                      math.exp(c0.asymptotic_log), c0.ratio, channels)


def _fmt(v):
    return "" if v is None else f"{v:.17g}"


def export_channel_csv(spectra, path, header_lines=()) -> Path:
    """Rows ``m,k,h,B,R,lambda,temple_lower,rayleigh_upper,asymptotic,ratio``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "k", "h", "B", "R", "lambda", "temple_lower", "rayleigh_upper",
                    "asymptotic", "ratio"])
        for sp_ in spectra:
            ch = sp_.channel
            for k, lam in enumerate(sp_.eigenvalues):
                ground = k == 0
                asym = math.exp(sp_.asymptotic_log) if ground and sp_.asymptotic_log is not None else None
                w.writerow([ch.m, k, _fmt(ch.h), _fmt(ch.B), _fmt(ch.R), _fmt(lam),
                            _fmt(sp_.temple_lower if ground else None),
                            _fmt(sp_.rayleigh_upper if ground else None),
                            _fmt(asym), _fmt(sp_.ratio if ground else None)])
    return path

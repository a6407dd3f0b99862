import math

import mpmath as mp
import numpy as np
import pytest
import scipy.integrate as si
from hypothesis import given, settings, strategies as st

from pauli_torsion.disk_exact import (
    KummerOverflow,
    RadialChannel,
    TempleInapplicable,
    asymptotic_eig,
    channel_eigenvalue,
    channel_root,
    channel_spectrum,
    count_positive_zeros,
    count_zeros_by_scan,
    disk_ground,
    export_channel_csv,
    gauss_legendre_adaptive,
    kummer_regularized,
    kummer_regularized_array,
    negative_m_lower,
    radial_fd_eigenvalue,
    temple_bounds,
    temple_integrals,
)

mp.mp.dps = 40


def mp_regularized(a, b, z):
    return mp.hyp1f1(a, b, z) / mp.gamma(b)


@pytest.mark.parametrize(
    "a, b, z",
    [(0.5, 1.0, 3.0), (-2.3, 2.0, 10.0), (-1e-9, 1.0, 50.0), (-0.999999, 3.0, 40.0), (-7.5, 1.0, 25.0), (2.0, 4.0, 300.0)],
)
def test_kummer_against_mpmath(a, b, z):
    sign, logv = kummer_regularized(a, b, z)
    ref = mp_regularized(a, b, z)
    assert sign == int(mp.sign(ref))
    assert logv == pytest.approx(float(mp.log(abs(ref))), abs=1e-11)


def test_kummer_array_matches_scalar():
    z = np.array([0.1, 1.0, 7.0, 33.0])
    sa, la = kummer_regularized_array(-3.4, 2.0, z)
    for zi, si_, li in zip(z, sa, la):
        s, l = kummer_regularized(-3.4, 2.0, zi)
        assert s == si_
        assert l == pytest.approx(li, abs=1e-12)


def test_kummer_overflow_guard():
    with pytest.raises(KummerOverflow):
        kummer_regularized(-0.5, 1.0, 800.0)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-6.0, -0.01), b=st.floats(1.0, 4.0))
def test_zero_count_rule(a, b):
    # keep a away from integers where a zero escapes to infinity
    if abs(a - round(a)) < 0.02:
        a += 0.05
    assert count_positive_zeros(a, b) == math.ceil(-a)
    assert count_zeros_by_scan(a, b, z_max=150.0) == math.ceil(-a)


def test_positive_a_has_no_zeros():
    assert count_positive_zeros(1.5, 2.0) == 0
    assert count_zeros_by_scan(1.5, 2.0) == 0


@pytest.mark.parametrize("m", [0, 1, 2])
@pytest.mark.parametrize("h", [0.3, 0.1, 0.05])
def test_ground_root_against_mpmath(m, h):
    ch = RadialChannel(m, h)
    lam = channel_eigenvalue(ch)
    ref = mp.findroot(lambda v: mp.hyp1f1(-v / (2 * h), m + 1, 1 / (2 * h)), lam)
    assert lam == pytest.approx(float(ref), rel=1e-10)


@pytest.mark.parametrize("m", [0, 1, 2])
@pytest.mark.parametrize("h", [0.05, 0.2, 0.5, 2.0])
def test_roots_against_finite_differences(m, h):
    ch = RadialChannel(m, h)
    exact = [channel_eigenvalue(ch, k) for k in range(3)]
    fd = radial_fd_eigenvalue(ch, n=4000, k=3)
    assert np.allclose(exact, fd, rtol=2e-5, atol=1e-8)
    assert exact[0] < exact[1] < exact[2]


def test_h_half_has_integer_root():
    # z = 1 and L_1(1) = 0 make lam = 2hB exact
    assert channel_eigenvalue(RadialChannel(0, 0.5)) == pytest.approx(1.0, rel=1e-12)


def test_large_h_approaches_dirichlet_scaling():
    # for large h, lam = h^2 j_{0,1}^2 - hB + O(1)
    for h in (50.0, 200.0):
        lam = channel_eigenvalue(RadialChannel(0, h))
        assert (lam + h) / h**2 == pytest.approx(2.404825557695773**2, rel=2 / h**2)


@settings(max_examples=20, deadline=None)
@given(h=st.floats(0.04, 1.0), m=st.integers(0, 3))
def test_landau_floor(h, m):
    ch = RadialChannel(m, h)
    for k in range(2):
        assert channel_eigenvalue(ch, k) >= 2 * h * k * (1 - 1e-12)


def test_root_residual_and_bracket():
    r = channel_root(RadialChannel(1, 0.1), 0)
    assert r.bracket[0] <= r.lam <= r.bracket[1]
    assert r.residual < 1e-10


def test_root_scales_with_field():
    # (h, B, R) -> (h, cB, R/sqrt(c)) keeps z fixed and multiplies lam by c
    base = channel_eigenvalue(RadialChannel(1, 0.2, 1.0, 1.0))
    scaled = channel_eigenvalue(RadialChannel(1, 0.2, 3.0, 1 / math.sqrt(3.0)))
    assert scaled == pytest.approx(3 * base, rel=1e-10)


def test_asymptotic_prediction_values():
    ch = RadialChannel(0, 0.1)
    assert math.exp(asymptotic_eig(ch)) == pytest.approx(0.2 * 5 * math.exp(-5), rel=1e-14)


@pytest.mark.parametrize("m", [0, 1, 2])
@pytest.mark.parametrize("h", [0.3, 0.1])
def test_temple_integrals_against_quad(m, h):
    ch = RadialChannel(m, h)
    log_norm, log_form, log_image = temple_integrals(ch)
    z = 1 / (2 * h)
    q = lambda r: (1 - r * r) / (4 * h)
    v = lambda r: r**m * (math.exp(q(r)) - math.exp(-q(r)))
    quad = lambda f: si.quad(f, 0, 1, epsabs=0, epsrel=1e-13, limit=200)[0]
    assert math.exp(log_norm) == pytest.approx(quad(lambda r: v(r) ** 2 * math.exp(-z) * r), rel=1e-9)
    assert math.exp(log_form) == pytest.approx(quad(lambda r: v(r) * r**m * math.exp(-q(r)) * r), rel=1e-9)
    assert math.exp(log_image) == pytest.approx(quad(lambda r: r ** (2 * m) * math.exp(-2 * q(r)) * r), rel=1e-9)


def test_gauss_legendre_adaptive_log_integral():
    val = gauss_legendre_adaptive(lambda x: np.log(np.exp(-x) * x**3 + 1e-300), 0.0, 20.0)
    ref = si.quad(lambda x: math.exp(-x) * x**3, 0, 20, epsrel=1e-13)[0]
    assert math.exp(val) == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("h", [0.2, 0.1, 0.05])
def test_temple_encloses_ground_state(h):
    rep = disk_ground(h)
    assert rep.temple_lower <= rep.ground <= rep.rayleigh_upper
    assert rep.enclosure_width < 1.0


def test_temple_tightens_as_h_decreases():
    widths = [disk_ground(h).enclosure_width for h in (0.2, 0.1, 0.05)]
    assert widths[0] > widths[2]


def test_temple_needs_a_gap():
    # the m = 2 trial state at h = 0.2 has Rayleigh quotient above 2hB
    with pytest.raises(TempleInapplicable):
        temple_bounds(RadialChannel(2, 0.2))
    assert channel_spectrum(RadialChannel(2, 0.2)).temple_lower is None


def test_negative_angular_momentum_is_harmless():
    ch = RadialChannel(-1, 0.1)
    lower = negative_m_lower(ch)
    assert lower == pytest.approx(0.1)  # (2|m| - 1) h B
    assert radial_fd_eigenvalue(ch, n=4000, k=1)[0] >= lower
    with pytest.raises(ValueError):
        channel_eigenvalue(ch)


def test_ground_channel_is_zero():
    rep = disk_ground(0.1, m_max=3)
    lams = [c.eigenvalues[0] for c in rep.channels]
    assert np.argmin(lams) == 0
    assert rep.ratio == pytest.approx(rep.ground / math.exp(asymptotic_eig(RadialChannel(0, 0.1))))


def test_channel_table_export(tmp_path):
    spectra = [channel_spectrum(RadialChannel(m, 0.1), 1) for m in range(2)]
    path = export_channel_csv(spectra, tmp_path / "ch.csv", ["config_sha256 0"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256 0"
    assert lines[1].startswith("m,k,h")
    assert len(lines) == 2 + 4
    # 17 significant digits survive a round trip
    lam = float(lines[2].split(",")[5])
    assert lam == spectra[0].eigenvalues[0]

import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from pauli_torsion.disk_exact import RadialChannel, channel_eigenvalue
from pauli_torsion.geometry import DomainSpec, build_grid
from pauli_torsion.potential import MagneticField, solve_poisson, vector_potential
from pauli_torsion.spectrum import (
    InsufficientRange,
    WeightUnderflow,
    assemble_laplacian,
    assemble_pauli,
    assemble_weighted_form,
    boundary_layer_ok,
    dirichlet_lambda,
    export_sweep_csv,
    fit_log_rate,
    rayleigh_quotient,
    semiclassical_sweep,
    smallest_eigs,
    trial_state,
)

UNIT = MagneticField.constant(1.0)
ZERO = MagneticField.constant(0.0)


@pytest.fixture(scope="module")
def disk():
    grid = build_grid(DomainSpec.disk(1.0), 1 / 32)
    psi = solve_poisson(grid, UNIT)
    A1, A2 = vector_potential(psi)
    return grid, psi, A1, A2


def square_levels(dx, count):
    # five-point Laplacian on the aligned square (-1, 1)^2
    n = round(2 / dx)
    ks = np.arange(1, n)
    one = 4 / dx**2 * np.sin(np.pi * ks * dx / 4) ** 2
    return np.sort(np.add.outer(one, one).ravel())[:count]


def test_square_matches_lattice_spectrum():
    dx = 1 / 16
    res = smallest_eigs(assemble_laplacian(build_grid(DomainSpec.rectangle(2.0, 2.0), dx)), 4, tol=1e-12)
    assert np.allclose(res.eigenvalues, square_levels(dx, 4), rtol=1e-10)
    # and the continuum levels pi^2 (m^2 + n^2) / 4 to O(dx^2)
    assert res.eigenvalues[0] == pytest.approx(math.pi**2 / 2, rel=2e-3)


def test_disk_dirichlet_eigenvalue():
    lam = dirichlet_lambda(build_grid(DomainSpec.disk(1.0), 1 / 64))
    assert lam == pytest.approx(2.404825557695773**2, rel=1e-3)


def test_against_eigsh(disk):
    grid = disk[0]
    op = assemble_laplacian(grid)
    ours = smallest_eigs(op, 3, tol=1e-12).eigenvalues
    ref = np.sort(spla.eigsh(op.matrix, k=3, sigma=0, which="LM")[0])
    assert np.allclose(ours, ref, rtol=1e-10)


def test_operators_are_hermitian(disk):
    grid, psi, A1, A2 = disk
    assert assemble_pauli(grid, A1, A2, UNIT, 0.3).hermiticity_defect() == 0.0
    assert assemble_weighted_form(grid, psi, 0.3).hermiticity_defect() == 0.0


def test_zero_field_reduces_to_laplacian(disk):
    grid = disk[0]
    z = np.zeros(grid.n_interior)
    from pauli_torsion.potential import ScalarField

    zf = ScalarField(grid, z)
    h = 0.4
    lam = smallest_eigs(assemble_pauli(grid, zf, zf, ZERO, h), 1, 1e-12).eigenvalues[0]
    assert lam == pytest.approx(h**2 * dirichlet_lambda(grid), rel=1e-10)


def test_gauge_invariance(disk):
    grid, psi, A1, A2 = disk
    chi = np.random.default_rng(3).uniform(-2, 2, grid.n_interior)
    a = smallest_eigs(assemble_pauli(grid, A1, A2, UNIT, 0.3), 3, 1e-13).eigenvalues
    b = smallest_eigs(assemble_pauli(grid, A1, A2, UNIT, 0.3, gauge=chi), 3, 1e-13).eigenvalues
    assert np.allclose(a, b, rtol=1e-10)


def test_formulations_agree(disk):
    grid, psi, A1, A2 = disk
    h = 0.3
    direct = smallest_eigs(assemble_pauli(grid, A1, A2, UNIT, h), 1).eigenvalues[0]
    weighted = smallest_eigs(assemble_weighted_form(grid, psi, h), 1).eigenvalues[0]
    exact = channel_eigenvalue(RadialChannel(0, h))
    assert weighted == pytest.approx(direct, rel=1e-2)
    assert weighted == pytest.approx(exact, rel=1e-3)


def test_weighted_form_is_nonnegative(disk):
    grid, psi, _, _ = disk
    for h in (0.3, 0.15):
        res = smallest_eigs(assemble_weighted_form(grid, psi, h), 2)
        assert res.converged
        assert np.all(res.eigenvalues > 0)
        assert res.eigenvalues[0] < res.eigenvalues[1]


def test_trial_state_bounds_ground_energy(disk):
    grid, psi, _, _ = disk
    h = 0.2
    op = assemble_weighted_form(grid, psi, h)
    lam = smallest_eigs(op, 1).eigenvalues[0]
    assert rayleigh_quotient(op, trial_state(psi, h)) >= lam * (1 - 1e-12)


def test_solver_is_deterministic(disk):
    op = assemble_weighted_form(disk[0], disk[1], 0.25)
    a = smallest_eigs(op, 2)
    b = smallest_eigs(op, 2)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert a.iterations == b.iterations


def test_weight_underflow():
    grid = build_grid(DomainSpec.disk(1.0), 1 / 8)
    with pytest.raises(WeightUnderflow):
        assemble_weighted_form(grid, solve_poisson(grid, UNIT), 1e-6)


def test_boundary_layer_rule():
    assert boundary_layer_ok(0.1, 0.5, 0.05)
    assert not boundary_layer_ok(0.01, 0.5, 0.05)


@settings(max_examples=30, deadline=None)
@given(c0=st.floats(-1.0, -0.05), c1=st.floats(-1.0, 1.0), c2=st.floats(-2.0, 2.0))
def test_fit_recovers_exact_model(c0, c1, c2):
    h = np.array([0.1, 0.08, 0.06, 0.05, 0.04])
    lam = np.exp((c0 + c1 * h * np.log(h) + c2 * h) / h)
    fit = fit_log_rate(h, lam)
    assert fit.intercept == pytest.approx(c0, abs=1e-8)
    assert fit.coef_hlogh == pytest.approx(c1, abs=1e-6)
    assert fit.coef_h == pytest.approx(c2, abs=1e-6)


def test_fit_needs_four_points():
    with pytest.raises(InsufficientRange):
        fit_log_rate([0.1, 0.08, 0.06], [1e-3, 1e-4, 1e-5])
    with pytest.raises(ValueError):
        fit_log_rate([0.1, 0.08, 0.06, 0.05], [1e-3, 1e-4, 0.0, 1e-6])


def test_fit_on_exact_disk_values():
    # the exact channel roots follow lam ~ 2 z e^{-z} h, i.e. c1 = 0 after the h log h term absorbs h
    h = np.array([0.06, 0.05, 0.04, 0.035, 0.03])
    lam = [channel_eigenvalue(RadialChannel(0, v)) for v in h]
    assert fit_log_rate(h, lam).intercept == pytest.approx(-0.5, rel=2e-2)


def test_sweep_on_coarse_disk(tmp_path):
    hs = [0.2, 0.15, 0.12, 0.1, 0.08]
    res = semiclassical_sweep(DomainSpec.disk(1.0), UNIT, hs, spacing=1 / 64)
    assert all(r.usable for r in res.rows)
    for r in res.rows:
        assert r.lam == pytest.approx(channel_eigenvalue(RadialChannel(0, r.h)), rel=5e-3)
    # this range is pre-asymptotic: compare with the same fit on exact roots
    exact = fit_log_rate(hs, [channel_eigenvalue(RadialChannel(0, h)) for h in hs])
    assert res.fit.intercept == pytest.approx(exact.intercept, rel=1e-2)
    path = export_sweep_csv(res, tmp_path / "sweep.csv", ["config_sha256 0"])
    text = path.read_text()
    assert text.startswith("# config_sha256 0\nh,lambda")
    assert f"# c0 = {res.fit.intercept:.17g}" in text


def test_sweep_reports_unresolved_values():
    # at spacing 1/16 the smallest h leave the boundary layer under-resolved
    hs = [0.4, 0.3, 0.25, 0.2, 0.02]
    res = semiclassical_sweep(DomainSpec.disk(1.0), UNIT, hs, spacing=1 / 16, convergence_tol=None)
    flags = {r.h: r.usable for r in res.rows}
    assert not flags[0.02]
    assert flags[0.4]

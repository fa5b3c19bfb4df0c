import numpy as np
import pytest

from intertwine.errors import ConfigError
from intertwine.fields import EDGE, ComplexField, TimeGrid, l2, make_grid, sample_snapshots
from intertwine.ode import stationary_eigensolve
from intertwine.operators import (CachedIntegral, ChargeSpec, Composition, Hamiltonian, SymmetryOpSpec,
                                  Term, apply_charge, apply_symmetry, canonicalize_second_order,
                                  diffusion_residual, h_power, map_snapshots, schrodinger_residual)
from intertwine import profiles as P


def harmonic_q():
    return ChargeSpec.first_order(1.0, lambda x, t: x)


def interior_max(f, extra=0):
    sl = slice(f.band + extra, f.grid.n - f.band - extra)
    return np.max(np.abs(f.values[sl]))


def test_apply_charge_lowers_first_excited(line_grid):
    psi = ComplexField.sample(line_grid, lambda x: x * np.exp(-x * x / 2))
    out = apply_charge(harmonic_q(), psi, 0.0)
    diff = out - ComplexField.sample(line_grid, lambda x: np.exp(-x * x / 2))
    assert interior_max(diff) < 1e-8


def test_apply_charge_kernel(line_grid):
    out = apply_charge(harmonic_q(), ComplexField.sample(line_grid, lambda x: np.exp(-x * x / 2)), 0.0)
    assert interior_max(out) < 1e-8


def test_derivative_kills_constant(line_grid):
    out = apply_charge(ChargeSpec.first_order(1.0, 0.0), ComplexField(line_grid, np.ones(line_grid.n)), 0.0)
    assert np.all(out.values == 0)


def test_adjoint_is_involution_and_formal_adjoint(line_grid):
    q = ChargeSpec.second_order(1.0, lambda x, t: 0.3 * np.tanh(x), lambda x, t: 1 + 0 * x,
                                lambda x, t: 0.2 * np.exp(-x * x))
    assert q.adjoint().adjoint() is q
    u = ComplexField.sample(line_grid, lambda x: np.exp(-(x - 0.5) ** 2) * (1 + 0.3j * x))
    v = ComplexField.sample(line_grid, lambda x: np.exp(-(x + 0.3) ** 2 / 2 + 1j * x))
    lhs = np.vdot(v.values, q.apply(u, 0.0).values)
    rhs = np.vdot(q.adjoint().apply(v, 0.0).values, u.values)
    assert abs(lhs - rhs) * line_grid.h < 1e-8


def test_invalid_term():
    with pytest.raises(ConfigError):
        ChargeSpec([Term(1.0, 5)])


def test_schrodinger_residual_plane_wave(line_grid):
    snaps = sample_snapshots(lambda x, t: np.exp(1j * (x - t)), line_grid, TimeGrid(0, 1e-4, 4))
    assert np.max(schrodinger_residual(0.0, snaps)) < 1e-6


def test_schrodinger_residual_stationary_state(line_grid):
    snaps = sample_snapshots(lambda x, t: np.pi ** -0.25 * np.exp(-x * x / 2) + 0 * t, line_grid,
                             TimeGrid(0, 1e-4, 4))
    assert np.max(schrodinger_residual(lambda x, t: x * x - 1, snaps)) < 1e-6


def test_residual_zero_field(line_grid):
    snaps = sample_snapshots(lambda x, t: 0 * x, line_grid, TimeGrid(0, 1e-4, 4))
    assert np.all(schrodinger_residual(0.0, snaps) == 0)


def test_residual_needs_three_snapshots(line_grid):
    snaps = sample_snapshots(lambda x, t: 0 * x, line_grid, TimeGrid(0, 1e-4, 1))
    with pytest.raises(ConfigError) as exc:
        schrodinger_residual(0.0, snaps)
    assert exc.value.code == "too-few-snapshots"


def test_diffusion_residual_heat_mode(line_grid):
    snaps = sample_snapshots(lambda x, t: np.exp(-t) * np.sin(x), line_grid, TimeGrid(0, 1e-4, 4),
                             "diffusion")
    assert np.max(diffusion_residual(0.0, snaps)) < 1e-6


def test_diffusion_residual_wick_rotated_ground_state(line_grid):
    # V = x^2 has ground energy 1, so exp(-x^2/2 - t) decays at rate 1
    snaps = sample_snapshots(lambda x, t: np.pi ** -0.25 * np.exp(-x * x / 2 - t), line_grid,
                             TimeGrid(0, 1e-4, 4), "diffusion")
    assert np.max(diffusion_residual(lambda x, t: x * x, snaps)) < 1e-6


@pytest.mark.xfail(strict=True, reason="under V = x^2 - 1 the ground state does not decay")
def test_diffusion_residual_literal_shifted_potential(line_grid):
    snaps = sample_snapshots(lambda x, t: np.pi ** -0.25 * np.exp(-x * x / 2 - t), line_grid,
                             TimeGrid(0, 1e-4, 4), "diffusion")
    assert np.max(diffusion_residual(lambda x, t: x * x - 1, snaps)) < 1e-6


def test_diffusion_residual_constant(line_grid):
    snaps = sample_snapshots(lambda x, t: 1 + 0 * x, line_grid, TimeGrid(0, 1e-4, 4), "diffusion")
    assert np.max(diffusion_residual(0.0, snaps)) < 1e-12


def test_apply_symmetry_hamiltonian_eigenstate():
    g = make_grid(-8, 8, 1601)
    Phi = lambda x, t: x * x + 0.1 * x ** 4  # noqa: E731
    eig = stationary_eigensolve(lambda y: y * y + 0.1 * y ** 4, g, 1, order=4)
    phi0 = eig.states[0]
    R = SymmetryOpSpec([(1.0, Hamiltonian(Phi))])
    out = apply_symmetry(R, phi0, 0.0)
    diff = out - phi0.scale(eig.energies[0])
    assert l2(diff.values[2 * EDGE:-2 * EDGE], g.h) < 1e-6


def test_apply_symmetry_zero_coefficients(line_grid):
    R = SymmetryOpSpec([(0.0, Hamiltonian(0.0)), (lambda t: 0.0, h_power(0.0, 2))])
    out = apply_symmetry(R, ComplexField.sample(line_grid, np.cos), 0.0)
    assert np.all(out.values == 0)


def test_excessive_order():
    q = harmonic_q()
    with pytest.raises(ConfigError) as exc:
        SymmetryOpSpec([(1.0, Composition([q, q, q]))])
    assert exc.value.code == "excessive-order"
    with pytest.raises(ConfigError):
        SymmetryOpSpec([(1.0, h_power(0.0, 3))])


def test_map_snapshots_band_growth(line_grid):
    snaps = sample_snapshots(lambda x, t: np.exp(-x * x), line_grid, TimeGrid(0, 0.1, 2))
    out = map_snapshots(Composition([harmonic_q(), harmonic_q().adjoint()]), snaps)
    assert out.band == 2 * EDGE


def test_cached_integral_and_inverse():
    I = CachedIntegral(lambda s: 1 / np.cos(2 * s) ** 2)
    assert I(0.3) == pytest.approx(np.tan(0.6) / 2, abs=1e-10)
    assert I.invert(np.tan(0.6) / 2) == pytest.approx(0.3, abs=1e-9)


def test_canonicalize_identity_case():
    cf = canonicalize_second_order(1.0, lambda x, t: 0.3 * x + 0 * t, lambda x, t: 1 + x * x, 0.0)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(cf.multiplier(x, 0.4), 1.0)
    y, tau = cf.variable_map.forward(x, 0.4)
    np.testing.assert_allclose(y, x)
    assert tau == pytest.approx(0.4)
    _, f, b, c = cf.charge.canonical
    np.testing.assert_allclose(f(x, 0.4), 0.3 * x)
    np.testing.assert_allclose(b(x, 0.4), 1 + x * x)
    np.testing.assert_allclose(c(x, 0.4), 0, atol=1e-15)


def test_canonicalize_cos_time_map():
    rho = P.Trig(1, 2)
    g = rho * rho

    def F(x, t):
        return 0.1 * x + 1j * g.d(t, 1) * x / 4

    cf = canonicalize_second_order(g, F, lambda x, t: 0 * x, 0.0, t_window=(0.0, 0.5))
    x = np.linspace(-1, 1, 5)
    for t in (0.1, 0.3, 0.5):
        y, tau = cf.variable_map.forward(x, t)
        np.testing.assert_allclose(y, x / np.cos(2 * t), rtol=1e-12)
        assert tau == pytest.approx(np.tan(2 * t) / 2, abs=1e-9)


def test_canonicalize_rejects_bad_imaginary_part():
    with pytest.raises(ConfigError) as exc:
        canonicalize_second_order(1.0, lambda x, t: 1j * x, lambda x, t: 0 * x, 0.0)
    assert exc.value.code == "imF-constraint-violated"

import numpy as np
import pytest

from intertwine import profiles as P
from intertwine.errors import ConfigError, DomainError
from intertwine.fields import make_grid
from intertwine.ode import integrate_riccati, ode_residual, stationary_eigensolve


def test_painleve4_riccati_closed_form():
    # 1/(2x) solves f' = -2 f^2 - 2 m x f - a for m = 1, a = -1
    g = make_grid(1, 5, 801)
    sol = integrate_riccati("painleve4-riccati", (1.0, -1.0), 1.0, 0.5, g)
    assert np.max(np.abs(sol.values - 0.5 / sol.grid.x)) < 1e-9
    assert sol.error_estimate < 1e-9


@pytest.mark.xfail(strict=True, reason="1/(2x) is not a solution of the a = 0 Riccati equation")
def test_painleve4_riccati_literal_zero_a():
    g = make_grid(1, 5, 801)
    sol = integrate_riccati("painleve4-riccati", (1.0, 0.0), 1.0, 0.5, g)
    assert np.max(np.abs(sol.values - 0.5 / sol.grid.x)) < 1e-9


def test_quadratic_riccati_linear_solution():
    g = make_grid(0, 2, 401)
    sol = integrate_riccati("eq41-riccati", (8.0, 1.0), 0.0, 0.0, g)
    assert np.max(np.abs(sol.values - g.x)) < 1e-9


def test_painleve2_riccati_closed_form():
    g = make_grid(1, 5, 801)
    sol = integrate_riccati("painleve2-riccati", (0.0,), 1.0, -1.0, g)
    assert np.max(np.abs(sol.values + 1 / g.x)) < 1e-9


def test_riccati_profile_derivatives_follow_ladder():
    g = make_grid(1, 5, 801)
    f = integrate_riccati("painleve4-riccati", (1.0, -1.0), 1.0, 0.5, g).profile()
    x = g.x[100:800:100]  # nodes
    # each ladder order amplifies the value error by at most about 20 on [1, 5]
    for k in range(5):
        exact = 0.5 * [1, -1, 2, -6, 24][k] * x ** (-1.0 - k)
        np.testing.assert_allclose(f.d(x, k), exact, rtol=1e-9 * 20 ** k)


def test_riccati_truncates_at_blow_up():
    # W' = W^2 from W(0) = 1 is 1/(1 - x), which blows up at x = 1
    g = make_grid(0, 2, 2001)
    sol = integrate_riccati("painleve2-riccati", (0.0,), 0.0, 1.0, g)
    assert sol.truncation["reason"]
    assert sol.grid.x_max <= 1.0
    assert sol.grid.x_min == 0.0


def test_riccati_errors():
    g = make_grid(0, 1, 101)
    with pytest.raises(ConfigError) as exc:
        integrate_riccati("nope", (1.0,), 0.0, 0.0, g)
    assert exc.value.code == "invalid-kind"
    with pytest.raises(DomainError) as exc:
        integrate_riccati("painleve2-riccati", (0.0,), 0.0, np.inf, g)
    assert exc.value.code == "blow-up-at-start"


def test_residual_painleve4_closed_form():
    g = make_grid(0.5, 6, 1101)
    assert ode_residual("painleve4", P.Power(0.5, -1), (1.0, -1.0, -1.0), grid=g).max < 1e-9


@pytest.mark.xfail(strict=True, reason="with a = d = 0 the residual of 1/(2x) is 1/x + x")
def test_residual_painleve4_literal_zero_parameters():
    g = make_grid(0.5, 6, 1101)
    assert ode_residual("painleve4", P.Power(0.5, -1), (1.0, 0.0, 0.0), grid=g).max < 1e-9


def test_residual_fourth_derivative_cosh():
    g = make_grid(-3, 3, 601)
    assert ode_residual("eq411", P.Cosh(1, 1), (1.0,), grid=g).max < 1e-10


def test_residual_painleve2_inverse():
    g = make_grid(0.5, 6, 1101)
    assert ode_residual("painleve2", P.Power(1, -1), (1.0, -4.0), grid=g).max < 1e-9


def test_residual_detects_non_solution():
    g = make_grid(0.5, 6, 1101)
    assert ode_residual("painleve2", P.Power(1, -1), (1.0, -3.0), grid=g).max > 1e-2


def test_residual_insufficient_order():
    g = make_grid(0, 1, 101)
    tab = P.Tabulated(g.x, np.cosh(g.x))
    with pytest.raises(ConfigError) as exc:
        ode_residual("eq411", tab, (1.0,), grid=g)
    assert exc.value.code == "insufficient-derivative-order"


def test_eigensolve_shifted_oscillator():
    g = make_grid(-10, 10, 2001)
    eig = stationary_eigensolve(lambda y: y * y - 1, g, 2)
    assert abs(eig.energies[0]) < 2e-4
    assert abs(eig.energies[1] - 2) < 5e-4
    eig4 = stationary_eigensolve(lambda y: y * y - 1, g, 2, order=4)
    np.testing.assert_allclose(eig4.energies, [0, 2], atol=1e-8)


def test_eigensolve_order4_matches_banded_solver():
    from scipy.linalg import eig_banded
    g = make_grid(-6, 6, 301)
    V = lambda y: y ** 4 / 4 - y * y
    eig = stationary_eigensolve(V, g, 5, order=4)
    h2, m = g.h ** 2, g.n - 2
    ab = np.zeros((3, m))
    ab[0, 2:] = 1 / (12 * h2)
    ab[1, 1:] = -16 / (12 * h2)
    ab[2] = 30 / (12 * h2) + V(g.x[1:-1])
    E, vecs = eig_banded(ab, select="i", select_range=(0, 4))
    np.testing.assert_allclose(eig.energies, E, rtol=1e-10, atol=1e-10)
    for j in range(5):
        u = eig.states[j].values.real[1:-1]
        overlap = abs(u @ vecs[:, j]) / np.linalg.norm(u)
        assert overlap == pytest.approx(1.0, abs=1e-9)


def test_eigensolve_box():
    g = make_grid(0, np.pi, 1001)
    eig = stationary_eigensolve(lambda y: 0 * y, g, 4)
    np.testing.assert_allclose(eig.energies, (np.arange(4) + 1.0) ** 2, rtol=1e-3)


def test_eigensolve_repulsive_half_line():
    g = make_grid(0, 10, 1001)
    with np.errstate(divide="ignore"):
        eig = stationary_eigensolve(lambda y: 2 / y ** 2, g, 3)
    assert np.all(eig.energies > 0)


def test_eigensolve_too_many_states():
    with pytest.raises(ConfigError) as exc:
        stationary_eigensolve(lambda y: y * y, make_grid(-1, 1, 11), 21)
    assert exc.value.code == "too-many-states"

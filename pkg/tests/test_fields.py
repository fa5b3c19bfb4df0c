import numpy as np
import pytest

from intertwine.errors import ConfigError, DomainError
from intertwine.fields import (EDGE, ComplexField, TimeGrid, cumulative_integral, differentiate,
                               fd_weights, inner_product, integrate, make_grid, norm)
from intertwine import profiles as P


def test_make_grid_spacing():
    assert make_grid(-10, 10, 2001).h == pytest.approx(0.01)
    g = make_grid(0, 1, 9)
    assert g.h == 0.125
    assert g.x[-1] == pytest.approx(1.0)


@pytest.mark.parametrize("args,code", [((5, 5, 100), "invalid-extent"), ((1, 0, 100), "invalid-extent"),
                                       ((0, 1, 8), "too-few-points"), ((0, 1, -3), "too-few-points")])
def test_make_grid_errors(args, code):
    with pytest.raises(ConfigError) as exc:
        make_grid(*args)
    assert exc.value.code == code


def test_time_grid():
    tg = TimeGrid(0.5, 0.1, 4)
    assert tg.t_end == pytest.approx(0.9)
    assert len(tg.times) == 5


def test_fd_weights_reproduce_known_stencil():
    w = fd_weights(0.0, np.arange(-2, 3, dtype=float), 2)
    np.testing.assert_allclose(w[2], [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12], atol=1e-13)


def test_derivative_of_sine():
    g = make_grid(-10, 10, 2001)
    d = differentiate(ComplexField.sample(g, np.sin), 1)
    sl = slice(EDGE, g.n - EDGE)
    assert np.max(np.abs(d.values - np.cos(g.x))[sl]) < 1e-8
    assert d.band == EDGE


def test_second_derivative_of_constant_is_zero():
    g = make_grid(-1, 1, 101)
    d = differentiate(ComplexField(g, np.full(g.n, 3.0 + 1j)), 2)
    assert np.all(d.values == 0)


def test_fourth_derivative_of_exp():
    g = make_grid(-2, 2, 401)
    d = differentiate(ComplexField.sample(g, np.exp), 4)
    sl = slice(EDGE, g.n - EDGE)
    assert np.max(np.abs(d.values - np.exp(g.x))[sl]) < 1e-5


def test_unsupported_order():
    g = make_grid(-1, 1, 101)
    with pytest.raises(ConfigError) as exc:
        differentiate(ComplexField.zeros(g), 5)
    assert exc.value.code == "unsupported-order"


def test_inner_product_gaussian(line_grid):
    f = ComplexField.sample(line_grid, lambda x: np.pi ** -0.25 * np.exp(-x * x / 2))
    assert abs(inner_product(f, f) - 1) < 1e-10


def test_inner_product_null_and_odd(line_grid):
    z = ComplexField.zeros(line_grid)
    assert inner_product(z, z) == 0
    f = ComplexField.sample(line_grid, lambda x: np.exp(-x * x / 2))
    g = ComplexField.sample(line_grid, lambda x: x * np.exp(-x * x / 2))
    assert abs(inner_product(f, g)) < 1e-12


def test_inner_product_grid_mismatch():
    a = ComplexField.zeros(make_grid(0, 1, 11))
    b = ComplexField.zeros(make_grid(0, 1, 13))
    with pytest.raises(ConfigError) as exc:
        inner_product(a, b)
    assert exc.value.code == "grid-mismatch"


def test_simpson_and_norm(line_grid):
    f = ComplexField.sample(line_grid, lambda x: np.exp(-x * x))
    assert integrate(np.exp(-line_grid.x ** 2), line_grid.h) == pytest.approx(np.sqrt(np.pi), abs=1e-12)
    assert norm(f) == pytest.approx((np.pi / 2) ** 0.25, abs=1e-12)


def test_cumulative_integral_exact_for_cubics():
    g = make_grid(0, 2, 41)
    out = cumulative_integral(g.x ** 3 - g.x, g.h)
    np.testing.assert_allclose(out, g.x ** 4 / 4 - g.x ** 2 / 2, atol=1e-13)


def test_field_rejects_non_finite():
    g = make_grid(0, 1, 11)
    v = np.zeros(g.n)
    v[3] = np.nan
    with pytest.raises(ConfigError):
        ComplexField(g, v)


# ---------------------------------------------------------------- profiles


@pytest.mark.parametrize("prof,exact", [
    (P.Trig(1.5, 2.0, 0.3), lambda x, k: 1.5 * 2 ** k * np.cos(2 * x + 0.3 + k * np.pi / 2)),
    (P.Exponential(2.0, -0.5), lambda x, k: 2 * (-0.5) ** k * np.exp(-0.5 * x)),
    (P.Cosh(0.7, 1.3), lambda x, k: 0.7 * 1.3 ** k * (np.cosh if k % 2 == 0 else np.sinh)(1.3 * x)),
    (P.Power(0.5, -1), lambda x, k: 0.5 * [1, -1, 2, -6, 24][k] * x ** (-1 - k)),
])
def test_profile_derivatives(prof, exact):
    x = np.linspace(0.5, 3, 7)
    d = prof.derivs(x, 4)
    for k in range(5):
        np.testing.assert_allclose(d[k], exact(x, k), rtol=1e-12)


def test_product_leibniz():
    p = P.Polynomial([0, 1]) * P.Trig(1, 1)  # x cos x
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(p.d(x, 2), -2 * np.sin(x) - x * np.cos(x), rtol=1e-12)


def test_power_window():
    with pytest.raises(DomainError):
        P.Power(1, -1)(np.array([0.0, 1.0]))


def test_positive_wrapper():
    with pytest.raises(DomainError) as exc:
        P.Positive(P.Trig(1, 1), "rho")(np.pi)
    assert exc.value.code == "nonpositive-rho"


def test_from_config_rejects_unknown_key():
    with pytest.raises(ConfigError) as exc:
        P.from_config({"kind": "trig", "A": 1, "omega": 1, "bogus": 2}, "family.rho")
    assert "family.rho.bogus" in exc.value.message
    assert P.from_config(3.0)(np.array([1.0]))[0] == 3.0

import numpy as np
from hypothesis import given, settings, strategies as st

from conftest import intertwining_defect
from intertwine import families as F
from intertwine import profiles as P
from intertwine.fields import (EDGE, ComplexField, TimeGrid, cumulative_integral, derivative_array, integrate,
                               l2, make_grid, sample_snapshots)
from intertwine.operators import ChargeSpec
from intertwine.propagate import fp_transform, propagate
from intertwine.verify import zero_mode_check

small = st.floats(-1.0, 1.0, allow_nan=False)
positive = st.floats(0.3, 2.0, allow_nan=False)
SETTINGS = settings(max_examples=25, deadline=None)


@SETTINGS
@given(st.lists(small, min_size=5, max_size=5), st.integers(1, 4), st.integers(21, 200))
def test_stencils_exact_for_quartics(coeffs, order, n):
    g = make_grid(-1.3, 0.7, n)
    p = np.polynomial.Polynomial(coeffs)
    got = derivative_array(p(g.x), g.h, order)
    assert np.max(np.abs(got - p.deriv(order)(g.x))) < 1e-6 * g.h ** -order


@SETTINGS
@given(st.lists(small, min_size=4, max_size=4), st.integers(4, 100).map(lambda k: 2 * k + 1))
def test_quadrature_exact_for_cubics(coeffs, n):
    g = make_grid(0.0, 1.7, n)
    p = np.polynomial.Polynomial(coeffs)
    P_ = p.integ()
    assert abs(integrate(p(g.x), g.h) - (P_(1.7) - P_(0.0))) < 1e-12
    np.testing.assert_allclose(cumulative_integral(p(g.x), g.h), P_(g.x) - P_(0.0), atol=1e-12)


@SETTINGS
@given(small, small, positive, small)
def test_adjoint_involution_and_duality(a, b, c, k):
    g = make_grid(-8, 8, 801)
    q = ChargeSpec.second_order(c, lambda x, t: a * np.tanh(x), lambda x, t: b * x / (1 + x * x),
                                lambda x, t: k * np.exp(-x * x))
    assert q.adjoint().adjoint() is q
    u = np.exp(-(g.x - a) ** 2) * (1 + 1j * b * g.x)
    v = np.exp(-(g.x + b) ** 2 / 2 + 1j * k * g.x)
    qu, _ = q.apply_values(u, g, 0.0)
    qv, _ = q.adjoint().apply_values(v, g, 0.0)
    assert abs(np.vdot(v, qu) - np.vdot(qv, u)) * g.h < 1e-7


@SETTINGS
@given(small, positive, small, st.floats(0.0, 3.0))
def test_schrodinger_propagation_is_unitary(c, w, k, amp):
    g = make_grid(-15, 15, 1501)
    psi = ComplexField(g, np.exp(-(g.x - c) ** 2 / (2 * w * w) + 1j * k * g.x))
    V = lambda x, t: amp * np.cos(x + t)  # noqa: E731
    run = propagate(V, psi, TimeGrid(0, 1e-3, 50), record_every=50)
    assert np.max(np.abs(run.norms - run.norms[0])) < 1e-11 * run.norms[0]


@SETTINGS
@given(small, positive, st.floats(0.0, 3.0))
def test_diffusion_norm_decreases_for_nonnegative_potential(c, w, amp):
    g = make_grid(-10, 10, 1001)
    psi = ComplexField(g, np.exp(-(g.x - c) ** 2 / (2 * w * w)))
    run = propagate(lambda x, t: amp * x * x, psi, TimeGrid(0, 1e-3, 40), "diffusion", record_every=40)
    assert np.all(np.diff(run.norms) <= 1e-14)


@SETTINGS
@given(small, small)
def test_fp_round_trip(a, b):
    g = make_grid(-4, 4, 201)
    P_ = sample_snapshots(lambda x, t: np.exp(-x * x) + 0 * t, g, TimeGrid(0, 0.1, 2), "diffusion")
    U = lambda x, t: a * x * x + b * t * x  # noqa: E731
    back = fp_transform(fp_transform(P_, U, "fp-to-diffusion"), U, "diffusion-to-fp")
    np.testing.assert_allclose(back.values, P_.values, rtol=1e-12, atol=0)


first_order_params = st.tuples(st.floats(0.6, 1.5), st.floats(-0.5, 0.5), small, small,
                               st.floats(0.2, 0.8))


@settings(max_examples=15, deadline=None)
@given(first_order_params)
def test_first_order_pairs_intertwine(p):
    rho0, rate, mu1, gam, k2 = p
    fam = F.FirstOrderFamily(P.Exponential(rho0, rate), P.Polynomial([0, mu1]),
                             P.Polynomial([0, gam]), P.Polynomial([0, 0.1, k2]))
    pair = F.first_order_pair(fam)
    g = make_grid(-8, 8, 1601)
    # partner potentials differ by 2 K''(y) / rho^2
    t = 0.3
    np.testing.assert_allclose(pair.V1(g.x, t) - pair.V2(g.x, t), 4 * k2 / fam.rho(t) ** 2, rtol=1e-10)
    assert intertwining_defect(pair, g, t) < 1e-5


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 1.0), small, small)
def test_zero_mode_annihilated(k2, k1, k3):
    # K = k1 y + k2 y^2 + k3/10 y^3 + y^4/8: bounded below, normalizable
    K = P.Polynomial([0, k1, k2, 0.1 * k3, 0.125])
    rep = zero_mode_check(F.FirstOrderFamily(1.0, 0.0, 0.0, K), make_grid(-4, 4, 1601))
    assert rep.entry("annihilation").value < 1e-7
    assert rep.flags["normalizable"]


@SETTINGS
@given(st.sampled_from(["trig", "exponential", "cosh", "polynomial"]), positive, small)
def test_profile_config_round_trip(kind, a, b):
    spec = {"trig": {"kind": "trig", "A": a, "omega": b, "phase": 0.3},
            "exponential": {"kind": "exponential", "A": a, "lam": b},
            "cosh": {"kind": "cosh", "A": a, "kappa": b},
            "polynomial": {"kind": "polynomial", "coeffs": [a, b, 0.5]}}[kind]
    p = P.from_config(spec)
    q = P.from_config(p.describe())
    x = np.linspace(-1, 1, 9)
    np.testing.assert_array_equal(p.derivs(x), q.derivs(x))


@SETTINGS
@given(positive, small, st.floats(0.5, 2.0))
def test_profile_derivatives_match_finite_differences(a, b, w):
    prof = P.Trig(a, w, b) * P.Exponential(1.0, b) + P.Cosh(0.2, w)
    g = make_grid(-2, 2, 801)
    d = prof.derivs(g.x, 4)
    sl = slice(EDGE, g.n - EDGE)
    # chain first derivatives: a direct 4th-derivative stencil amplifies round-off by ~1/h^4
    for k in range(1, 5):
        fd = derivative_array(d[k - 1], g.h, 1)
        assert np.max(np.abs(fd - d[k])[sl]) < 1e-7 * (1 + np.max(np.abs(d[k])))

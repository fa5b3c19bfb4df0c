"""Families of intertwined potential pairs and their intertwining operators.

Every builder returns real bivariate evaluators ``V(x, t)`` together with
the intertwining operator as a ``ChargeSpec``.  Gauge choices are recorded
in the ``provenance`` dictionary of each pair.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigError, DomainError
from .ode import RiccatiProfile, fourth_order_U, fourth_order_V2, ode_residual
from .operators import (CachedIntegral, ChargeSpec, Composition, Hamiltonian, SymmetryOpSpec,
                        Term, h_power)
from .profiles import Exponential, Polynomial, Positive, Profile, Trig, as_profile

WINDOW_SAMPLES = 201


@dataclass
class PotentialPair:
    V1: object
    V2: object
    charge: ChargeSpec
    provenance: dict
    extras: dict = field(default_factory=dict)


def _describe(p):
    return p.describe() if isinstance(p, Profile) else repr(p)


def _check_positive(profile, window, name):
    if window is None:
        return
    ts = np.linspace(window[0], window[1], WINDOW_SAMPLES)
    v = as_profile(profile)(ts)
    if np.any(~(v > 0)):
        raise DomainError(f"nonpositive-{name}", f"{name} is not positive on {window}")


def _full(x, v, dtype=float):
    return np.full(np.shape(x), v, dtype=dtype)


def _pos(p, name):
    return p if isinstance(p, Positive) else Positive(p, name)


# ------------------------------------------------------------------ first order


@dataclass
class FirstOrderFamily:
    """rho(t) > 0, mu(t), gamma(t) and superpotential shape K(y), y = x/rho + mu."""

    rho: Profile
    mu: Profile
    gamma: Profile
    K: Profile

    def __post_init__(self):
        self.rho = _pos(as_profile(self.rho), "rho")
        self.mu, self.gamma, self.K = (as_profile(p) for p in (self.mu, self.gamma, self.K))
        self.tau = CachedIntegral(lambda s: self.rho(s) ** -2.0)

    def y(self, x, t):
        return np.asarray(x) / self.rho(t) + self.mu(t)

    def h(self, x, t):
        return 0.5 * np.log(self.rho(t)) + self.K(self.y(x, t))

    def g(self, x, t):
        r = self.rho.derivs(t, 1)
        x = np.asarray(x)
        return -r[1] / (4 * r[0]) * x * x + 0.5 * r[0] * self.mu.d(t, 1) * x + self.gamma(t)

    def branch_potential(self, branch):
        """Stationary potential K'^2 + K'' (branch 1) or K'^2 - K'' (branch 2) in y."""
        if branch not in (1, 2):
            raise ConfigError("invalid-branch", "branch must be 1 or 2")
        s = 1.0 if branch == 1 else -1.0

        def V(y):
            k = self.K.derivs(y, 2)
            return k[1] ** 2 + s * k[2]
        return V

    def potential(self, branch):
        s = 1.0 if branch == 1 else -1.0

        def V(x, t):
            r = self.rho.derivs(t, 2)
            m = self.mu.derivs(t, 2)
            k = self.K.derivs(self.y(x, t), 2)
            x = np.asarray(x)
            return ((k[1] ** 2 + s * k[2]) / r[0] ** 2 - r[2] / (4 * r[0]) * x * x
                    + (r[1] * m[1] + r[0] * m[2] / 2) * x - r[0] ** 2 * m[1] ** 2 / 4
                    + self.gamma.d(t, 1))
        return V

    def describe(self):
        return {k: _describe(getattr(self, k)) for k in ("rho", "mu", "gamma", "K")}


def first_order_pair(fam, t_window=None):
    """Partner potentials and the first-order charge rho d + K'(y) - i(rho' x - rho^2 mu')/2."""
    _check_positive(fam.rho, t_window, "rho")

    def c1(x, t):
        return _full(x, fam.rho(t), complex)

    def c0(x, t):
        r = fam.rho.derivs(t, 1)
        x = np.asarray(x)
        return fam.K.d(fam.y(x, t), 1) - 0.5j * (r[1] * x - r[0] ** 2 * fam.mu.d(t, 1))

    charge = ChargeSpec.first_order(c1, c0, "q+")
    prov = {"family": "first-order", "params": fam.describe(),
            "gauge": {"beta": 0.0, "alpha": 0.0, "xi0": 0.0}}
    return PotentialPair(fam.potential(1), fam.potential(2), charge, prov, {"family": fam})


def zero_mode(fam):
    """Kernel element of q+: exp(-h - i g) up to normalisation, as ``(x, t) -> values``."""
    def psi(x, t):
        return np.exp(-fam.h(x, t) - 1j * fam.g(x, t))
    return psi


# ------------------------------------------------------------------ symmetry


@dataclass
class SymmetryFamily:
    """omega(t) > 0, nu(t) and Phi(z): potentials with a second-order symmetry."""

    omega: Profile
    nu: Profile
    Phi: Profile

    def __post_init__(self):
        self.omega = _pos(as_profile(self.omega), "omega")
        self.nu, self.Phi = as_profile(self.nu), as_profile(self.Phi)
        self._zshift = CachedIntegral(lambda s: self.nu(s) * self.omega(s) ** -1.5)

    def z(self, x, t):
        return np.asarray(x) / np.sqrt(self.omega(t)) - self._zshift(t)

    def describe(self):
        return {k: _describe(getattr(self, k)) for k in ("omega", "nu", "Phi")}


@dataclass
class SymmetryBuild:
    V: object
    R: SymmetryOpSpec
    z_map: object
    delta: object
    zeta: object
    provenance: dict


def symmetry_family_build(fam, t_window=None):
    """Potential V, symmetry operator R = -omega d^2 + i{delta, d} + zeta, and z(x, t).

    zeta carries the time-only term nu^2/(4 omega) - nu(0)^2/(4 omega(0)); it
    vanishes for constant nu and omega and is needed for [S[V], R] = 0
    otherwise.
    """
    _check_positive(fam.omega, t_window, "omega")
    w0, n0 = float(fam.omega(0.0)), float(fam.nu(0.0))

    def delta(x, t):
        return fam.omega.d(t, 1) * np.asarray(x) / 4 + fam.nu(t) / 2

    def zeta(x, t):
        w = fam.omega.derivs(t, 1)
        nu = fam.nu(t)
        x = np.asarray(x)
        return (fam.Phi(fam.z(x, t)) + w[1] ** 2 / (16 * w[0]) * x * x
                + nu * w[1] / (4 * w[0]) * x + nu * nu / (4 * w[0]) - n0 * n0 / (4 * w0))

    def V(x, t):
        w = fam.omega.derivs(t, 2)
        nu = fam.nu.derivs(t, 1)
        x = np.asarray(x)
        return (-(w[2] - w[1] ** 2 / (2 * w[0])) / (8 * w[0]) * x * x
                - (nu[1] - nu[0] * w[1] / (2 * w[0])) / (2 * w[0]) * x
                + fam.Phi(fam.z(x, t)) / w[0])

    R = ChargeSpec([
        Term(lambda x, t: _full(x, -fam.omega(t), complex), 2),
        Term(lambda x, t: 1j * delta(x, t), 1, "L"),
        Term(lambda x, t: 1j * delta(x, t), 1, "R"),
        Term(lambda x, t: zeta(x, t).astype(complex), 0),
    ], "R")
    prov = {"family": "symmetry", "params": fam.describe()}
    return SymmetryBuild(V, SymmetryOpSpec([(1.0, R)], "R"), fam.z, delta, zeta, prov)


# ------------------------------------------------------------------ Fokker-Planck


class Bivariate:
    """Real function of (x, t) with partial derivatives d^kx/dx d^kt/dt (kx <= 2, kt <= 1)."""

    def __call__(self, x, t):
        return self.partial(x, t, 0, 0)

    def partial(self, x, t, kx, kt):
        raise NotImplementedError


class Separable(Bivariate):
    """Sum of products X_i(x) T_i(t)."""

    def __init__(self, terms):
        self.terms = [(as_profile(X), as_profile(T)) for X, T in terms]

    def partial(self, x, t, kx, kt):
        out = 0.0
        for X, T in self.terms:
            out = out + X.d(x, kx) * T.d(t, kt) if (kx or kt) else out + X(x) * T(t)
        return np.broadcast_to(out, np.shape(x)) * 1.0

    def describe(self):
        return [[X.describe(), T.describe()] for X, T in self.terms]


class _Function(Bivariate):
    """Plain callable; derivatives by central differences (accuracy about 1e-8)."""

    def __init__(self, func, eps=1e-4):
        self.func, self.eps = func, eps

    def partial(self, x, t, kx, kt):
        e = self.eps
        f = self.func
        if kt:
            return (self.partial(x, t + e, kx, 0) - self.partial(x, t - e, kx, 0)) / (2 * e)
        x = np.asarray(x, dtype=float)
        if kx == 0:
            return np.real(f(x, t))
        if kx == 1:
            return np.real(f(x + e, t) - f(x - e, t)) / (2 * e)
        return np.real(f(x + e, t) - 2 * f(x, t) + f(x - e, t)) / e ** 2

    def describe(self):
        return "callable"


class _Combo(Bivariate):
    def __init__(self, parts):
        self.parts = parts

    def partial(self, x, t, kx, kt):
        return sum(c * p.partial(x, t, kx, kt) for c, p in self.parts)


class _LogTime(Bivariate):
    def __init__(self, rho):
        self.rho = rho

    def partial(self, x, t, kx, kt):
        if kx:
            return np.zeros(np.shape(x))
        r = self.rho.derivs(t, 1)
        return _full(x, r[1] / r[0] if kt else np.log(r[0]))


class _TimeReversed(Bivariate):
    def __init__(self, inner):
        self.inner = inner

    def partial(self, x, t, kx, kt):
        return (-1) ** kt * self.inner.partial(x, -t, kx, kt)


def potential_from_drift(U):
    """Diffusion potential U'^2/4 - U''/2 - U_t/2 of a drift potential."""
    def V(x, t):
        return (U.partial(x, t, 1, 0) ** 2 / 4 - U.partial(x, t, 2, 0) / 2
                - U.partial(x, t, 0, 1) / 2)
    return V


@dataclass
class FokkerPlanckFamily:
    chi: object
    rho: Profile

    def __post_init__(self):
        if not isinstance(self.chi, Bivariate):
            if not callable(self.chi):
                raise ConfigError("invalid-chi", "chi must be a Bivariate or a callable")
            self.chi = _Function(self.chi)
        probe = np.linspace(-1.0, 1.0, 7)
        for t in (0.0, 0.5, 1.0):
            v = self.chi.func(probe, t) if isinstance(self.chi, _Function) else self.chi(probe, t)
            if np.iscomplexobj(v) and np.any(np.imag(v) != 0):
                raise ConfigError("complex-chi-rejected", "chi must be real-valued")
        self.rho = _pos(as_profile(self.rho), "rho")


@dataclass
class FokkerPlanckPair:
    V1: object
    V2: object
    U1: Bivariate
    U2: Bivariate
    charge: ChargeSpec
    provenance: dict


def fokker_planck_pair(fam, t_window=None):
    """Diffusion partners V1, V2 with drift potentials U1 = 2 ln rho - 2 chi, U2 = 2 chi(x, -t).

    The first-order charge is rho (d + chi').  Note that U2 yields V2 only
    up to time reversal of chi: V(U2)(x, t) = V2(x, -t).
    """
    _check_positive(fam.rho, t_window, "rho")
    chi, rho = fam.chi, fam.rho

    def V(sign, with_rho):
        def f(x, t):
            v = (chi.partial(x, t, 1, 0) ** 2 + sign * chi.partial(x, t, 2, 0)
                 + chi.partial(x, t, 0, 1))
            if with_rho:
                r = rho.derivs(t, 1)
                v = v - r[1] / r[0]
            return v
        return f

    U1 = _Combo([(2.0, _LogTime(rho)), (-2.0, chi)])
    U2 = _Combo([(2.0, _TimeReversed(chi))])
    charge = ChargeSpec.first_order(lambda x, t: _full(x, rho(t), complex),
                                    lambda x, t: (rho(t) * chi.partial(x, t, 1, 0)).astype(complex))
    prov = {"family": "fokker-planck",
            "params": {"chi": getattr(chi, "describe", lambda: "callable")(),
                       "rho": _describe(rho)},
            "gauge": {"beta": 0.0, "alpha": 0.0}}
    return FokkerPlanckPair(V(1.0, True), V(-1.0, False), U1, U2, charge, prov)


# ------------------------------------------------------------------ Painleve IV


@dataclass
class PainleveIVFamily:
    f: Profile
    m: float
    a: float
    d: float
    m0: float = 1.0

    def describe(self):
        return {"f": _describe(self.f), "m": self.m, "a": self.a, "d": self.d, "m0": self.m0}


def _stationary_charges(f, b, W):
    """M+ = d^2 - 2f d + b and a+ = d + W as charges."""
    M = ChargeSpec.second_order(1.0, lambda x, t: f(x), lambda x, t: b(x),
                                lambda x, t: np.zeros(np.shape(x)), "M+")
    a = ChargeSpec.first_order(lambda x, t: _full(x, 1.0, complex),
                               lambda x, t: W(x).astype(complex), "a+")
    return M, a


def _combined_charge(f, b, W, A):
    """M+ + A(t) a+ as one second-order operator."""
    return ChargeSpec.general([
        lambda x, t: b(x) + A(t) * W(x),
        lambda x, t: -2 * f(x) + A(t),
        lambda x, t: _full(x, 1.0, complex),
    ], "q+")


def painleve4_pair(fam, grid, tol=1e-6):
    """Stationary pair from a Painleve IV solution f, checked on ``grid``.

    Potentials are computed from f, f', f'' directly; the second route
    V1 = W^2 + W', V2 = W^2 - W' - 2m with W = -2f - mx is evaluated too and
    the pointwise agreement is stored in ``extras["route_agreement"]``.
    """
    f = as_profile(fam.f)
    m, a, d = float(fam.m), float(fam.a), float(fam.d)
    if m == 0:
        raise ConfigError("invalid-m", "the Painleve IV family needs m != 0")
    x = grid.x
    D = f.derivs(x, 2)
    if np.any(np.abs(D[0]) < 1e-12):
        raise DomainError("vanishing-f", "f vanishes on the working grid")
    if np.max(np.abs(D[1])) <= 1e-14 * max(1.0, np.max(np.abs(D[0]))):
        raise ConfigError("vanishing-f-derivative-structure",
                          "constant f cannot solve Painleve IV with m != 0")
    res = ode_residual("painleve4", f, (m, a, d), grid=grid)
    if not res.max <= tol:
        raise DomainError("painleve-residual-too-large",
                          f"Painleve IV residual {res.max:.3g} exceeds {tol:g}")

    def direct(sign):
        def V(x, t=0.0):
            F = f.derivs(x, 2)
            return (sign * 2 * F[1] + F[0] ** 2 + F[2] / (2 * F[0]) - F[1] ** 2 / (4 * F[0] ** 2)
                    - d / (4 * F[0] ** 2) - a)
        return V

    def W(x):
        return -2 * f(x) - m * np.asarray(x)

    def via_W(branch):
        def V(x, t=0.0):
            F = f.derivs(x, 1)
            w, wp = -2 * F[0] - m * np.asarray(x), -2 * F[1] - m
            return w * w + wp if branch == 1 else w * w - wp - 2 * m
        return V

    def b(x):
        F = f.derivs(x, 2)
        return (-F[1] + F[0] ** 2 - F[2] / (2 * F[0]) + F[1] ** 2 / (4 * F[0] ** 2)
                + d / (4 * F[0] ** 2))

    V1, V2 = direct(-1.0), direct(1.0)
    agree = float(max(np.max(np.abs(V1(x) - via_W(1)(x))), np.max(np.abs(V2(x) - via_W(2)(x)))))

    def A(t):
        return fam.m0 * np.exp(-2j * m * t)

    M, ap = _stationary_charges(f, b, W)
    prov = {"family": "painleve4", "params": fam.describe(),
            "gauge": {"mtilde": 0.0}, "painleve_residual": res.max}
    extras = {"route_agreement": agree, "V1_W": via_W(1), "V2_W": via_W(2), "M+": M, "a+": ap,
              "A": A, "f": f, "b": b, "W": W, "m": m}
    return PotentialPair(V1, V2, _combined_charge(f, b, W, A), prov, extras)


def painleve4_symmetries(pair, ordering="corrected"):
    """Third-order symmetry operators (R1 for V1, R2 for V2) of the Painleve IV pair.

    ``ordering="printed"`` uses e^{-2imt} M+ a- as the second term of R2
    instead of the hermitian partner e^{-2imt} M- a+.
    """
    e = pair.extras
    M, ap, m = e["M+"], e["a+"], e["m"]
    Mm, am = M.adjoint(), ap.adjoint()
    R1 = SymmetryOpSpec([(lambda t: np.exp(2j * m * t), Composition([M, am])),
                         (lambda t: np.exp(-2j * m * t), Composition([ap, Mm]))], "R1")
    second = Composition([Mm, ap]) if ordering == "corrected" else Composition([M, am])
    R2 = SymmetryOpSpec([(lambda t: np.exp(2j * m * t), Composition([am, M])),
                         (lambda t: np.exp(-2j * m * t), second)], f"R2[{ordering}]")
    return R1, R2


# ------------------------------------------------------------------ Painleve II


@dataclass
class PainleveIIFamily:
    W: Profile
    mtilde: float
    n: float
    k: float

    def describe(self):
        return {"W": _describe(self.W), "mtilde": self.mtilde, "n": self.n, "k": self.k}


def painleve2_pair(fam, grid, tol=1e-6):
    """Stationary pair V = W^2 +- W' from a Painleve II solution W."""
    Wp = as_profile(fam.W)
    mt, n, k = float(fam.mtilde), float(fam.n), float(fam.k)
    x = grid.x
    try:
        D = Wp.derivs(x, 2)
    except (DomainError, ZeroDivisionError, FloatingPointError) as exc:
        raise DomainError("singular-W-on-grid", str(exc)) from exc
    if not np.all(np.isfinite(D)):
        raise DomainError("singular-W-on-grid", "W is singular on the working grid")
    # a pole between nodes: sign flip with both neighbours of size ~1/h
    flip = (D[0][:-1] * D[0][1:] < 0) & (np.minimum(abs(D[0][:-1]), abs(D[0][1:])) * grid.h > 0.5)
    if np.any(flip):
        i = int(np.argmax(flip))
        raise DomainError("singular-W-on-grid", f"W has a pole between x={x[i]:g} and x={x[i + 1]:g}")
    res = ode_residual("painleve2", Wp, (mt, k), grid=grid)
    if not res.max <= tol:
        raise DomainError("painleve-residual-too-large",
                          f"Painleve II residual {res.max:.3g} exceeds {tol:g}")

    def V(sign):
        def f(x, t=0.0):
            w = Wp.derivs(x, 1)
            return w[0] ** 2 + sign * w[1]
        return f

    def f(x):
        return n - Wp(x) / 2

    def b(x):
        w = Wp.derivs(x, 1)
        return 0.5 * (w[1] - w[0] ** 2) - 2 * n * w[0] - mt * np.asarray(x)

    def A(t):
        return -2j * mt * t

    M, ap = _stationary_charges(f, b, Wp)
    prov = {"family": "painleve2", "params": fam.describe(), "gauge": {"A(0)": 0.0},
            "painleve_residual": res.max}
    extras = {"M+": M, "a+": ap, "A": A, "f": f, "b": b, "W": Wp, "mtilde": mt}
    return PotentialPair(V(1.0), V(-1.0), _combined_charge(f, b, Wp, A), prov, extras)


def painleve2_symmetries(pair):
    """R1, R2 (third-order pair) and the hermitian pair R~1, R~2 of the Painleve II family."""
    e = pair.extras
    M, ap, mt = e["M+"], e["a+"], e["mtilde"]
    Mm, am = M.adjoint(), ap.adjoint()
    H1, H2 = Hamiltonian(pair.V1, "H1"), Hamiltonian(pair.V2, "H2")
    R1 = SymmetryOpSpec([
        (1.0, Composition([M, Mm])), (-1.0, Composition([H1, H1])),
        (lambda t: 2j * mt * t, Composition([M, am])), (lambda t: -2j * mt * t, Composition([ap, Mm])),
        (lambda t: 4 * mt * mt * t * t, H1)], "R1")
    R2 = SymmetryOpSpec([
        (1.0, Composition([Mm, M])), (-1.0, Composition([H2, H2])),
        (lambda t: 2j * mt * t, Composition([am, M])), (lambda t: -2j * mt * t, Composition([Mm, ap])),
        (lambda t: 4 * mt * mt * t * t, H2)], "R2")
    Rt1 = SymmetryOpSpec([(1j, Composition([M, am])), (-1j, Composition([ap, Mm])),
                          (lambda t: 4 * mt * t, H1)], "R~1")
    Rt2 = SymmetryOpSpec([(1j, Composition([am, M])), (-1j, Composition([Mm, ap])),
                          (lambda t: 4 * mt * t, H2)], "R~2")
    return R1, R2, Rt1, Rt2


# ------------------------------------------------------------------ fourth order


@dataclass
class FourthOrderFamily:
    f: Profile
    beta: float
    c: float
    a0: float
    x0: float
    theta0: float = 1.0
    lambda0: float = 0.0

    def describe(self):
        return {"f": _describe(self.f), "beta": self.beta, "c": self.c, "a0": self.a0,
                "x0": self.x0, "theta0": self.theta0, "lambda0": self.lambda0}


def fourth_order_family_build(fam, grid, tol=1e-6):
    """Pair intertwined by theta(t) M+ + i lambda(t) x a+; returns (pair, theta, lambda).

    theta' = -2 lambda and lambda' = beta theta are solved in closed form
    with Omega = sqrt(2 beta).  V2 = 2f' + 4f^2 + beta x^2/8 + a0 + U/x^2 where
    U = 2(1-2c) x f + int_{x0}^x [(4c-2) f - 4 z f^2] dz is tabulated on
    ``grid`` and interpolated with its exact derivative.
    """
    beta, c, a0, x0 = float(fam.beta), float(fam.c), float(fam.a0), float(fam.x0)
    if not beta > 0:
        raise ConfigError("nonpositive-beta", "beta must be positive")
    f = as_profile(fam.f)
    x = grid.x
    F = f.derivs(x, 1)
    U = fourth_order_U(x, F[0], F[1], c, x0)
    Up = x * (2 * (1 - 2 * c) * F[1] - 4 * F[0] ** 2)
    U_interp = CubicHermiteSpline(x, U, Up)
    res = ode_residual("eq40", f, (beta, c, a0, x0), grid=grid,
                       exclude=lambda xs: np.abs(xs) < 10 * grid.h)
    if not res.max <= tol:
        raise DomainError("eq40-residual-too-large",
                          f"third-order equation residual {res.max:.3g} exceeds {tol:g}")
    Om = np.sqrt(2 * beta)
    th0, la0 = float(fam.theta0), float(fam.lambda0)
    theta = Trig(th0, Om) + Trig(2 * la0 / Om, Om, np.pi / 2)
    lam = Trig(th0 * Om / 2, Om, -np.pi / 2) + Trig(la0, Om)

    def V2(x, t=0.0):
        x = np.asarray(x, dtype=float)
        F = f.derivs(x, 1)
        return fourth_order_V2(x, F[0], F[1], U_interp(x), beta, c, a0)

    def V1(x, t=0.0):
        return V2(x) - 4 * f.d(x, 1)

    def W(x):
        if c == 0:
            return -2 * f(x)
        with np.errstate(divide="ignore"):
            return -2 * f(x) + c / np.asarray(x)

    def b(x):
        F = f.derivs(x, 1)
        return F[1] + 2 * F[0] ** 2 - V2(x) + beta * np.asarray(x) ** 2 / 4 + a0

    charge = ChargeSpec.general([
        lambda x, t: theta(t) * b(x) + 1j * lam(t) * np.asarray(x) * W(x),
        lambda x, t: -2 * f(x) * theta(t) + 1j * lam(t) * np.asarray(x),
        lambda x, t: _full(x, theta(t), complex),
    ], "q+")
    prov = {"family": "fourth-order", "params": fam.describe(), "eq40_residual": res.max}
    extras = {"f": f, "b": b, "W": W, "U": U_interp}
    return PotentialPair(V1, V2, charge, prov, extras), theta, lam


# ------------------------------------------------------------------ non-stationary / stationary


@dataclass
class NonStatFamily:
    """f1(x) with f0(t) = sigma e^{lambda0 t} + delta e^{-lambda0 t}."""

    f1: Profile
    sigma: float
    delta: float
    lambda0: float

    def __post_init__(self):
        self.f1 = as_profile(self.f1)
        lam = float(self.lambda0)
        self.f0 = Exponential(self.sigma, lam) + Exponential(self.delta, -lam)

    def first_integral(self, x):
        d = self.f1.derivs(x, 3)
        return 2 * d[3] * d[1] - d[2] ** 2 - self.lambda0 ** 2 * d[0] ** 2

    def describe(self):
        return {"f1": _describe(self.f1), "sigma": self.sigma, "delta": self.delta,
                "lambda0": self.lambda0}

    # coefficient functions ------------------------------------------------
    def denom(self, x, t):
        return self.f1(x) + self.f0(t)

    def f(self, x, t):
        return self.f1.d(x, 1) / (2 * self.denom(x, t))

    def fx(self, x, t):
        d = self.f1.derivs(x, 2)
        D = d[0] + self.f0(t)
        return d[2] / (2 * D) - d[1] ** 2 / (2 * D * D)

    def c(self, x, t):
        return self.f0.d(t, 1) / (2 * self.denom(x, t))

    def V2(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        d = self.f1.derivs(x, 4)
        lam = self.lambda0
        num = (lam * lam * self.sigma * self.delta + 0.5 * (d[1] * d[3] - 0.5 * d[2] ** 2)
               - lam * lam * d[0] ** 2 / 4)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = num / d[1] ** 2
        # at a zero of f1' the quotient tends to (f1'''' - lam^2 f1) / (4 f1'')
        crit = np.abs(d[1]) < 1e-7 * np.maximum(np.abs(d[2]), 1e-300)
        if np.any(crit):
            v = np.where(crit, (d[4] - lam * lam * d[0]) / (4 * d[2]), v)
        return v

    def V1(self, x, t):
        return self.V2(x) - 4 * self.fx(x, t)

    def b(self, x, t):
        return self.fx(x, t) + 2 * self.f(x, t) ** 2 - self.V2(x)


def nonstat_stationary_pair(fam, grid=None, t_window=None):
    """Non-stationary V1 intertwined with stationary V2 by d^2 - 2f d + b + ic.

    With ``grid`` and ``t_window`` the denominator f1 + f0 is checked for
    zeros on the space-time window.
    """
    if grid is not None and t_window is not None:
        ts = np.linspace(t_window[0], t_window[1], 21)
        D = fam.f1(grid.x)[None, :] + fam.f0(ts)[:, None]
        if np.any(np.abs(D) < 1e-12) or np.any(np.diff(np.sign(D), axis=1) != 0):
            raise DomainError("vanishing-denominator", "f1 + f0 vanishes on the window")
    charge = ChargeSpec.second_order(1.0, fam.f, fam.b, fam.c, "q+")
    prov = {"family": "nonstat", "params": fam.describe()}
    return PotentialPair(fam.V1, fam.V2, charge, prov, {"family": fam})


def nonstat_symmetries(pair):
    """R1 = q+ q- (time dependent) and R2 = q- q+ = H2^2 + lambda0^2/4."""
    q = pair.charge
    return (SymmetryOpSpec([(1.0, Composition([q, q.adjoint()]))], "R1"),
            SymmetryOpSpec([(1.0, Composition([q.adjoint(), q]))], "R2"))


# ------------------------------------------------------------------ TD oscillator


@dataclass
class TDOscFamily:
    rho: Profile
    nested: NonStatFamily

    def __post_init__(self):
        self.rho = _pos(as_profile(self.rho), "rho")
        self.tau = CachedIntegral(lambda s: self.rho(s) ** -2.0)

    def describe(self):
        return {"rho": _describe(self.rho), "nested": self.nested.describe()}


def td_oscillator_pair(fam, t_window=None):
    """Pair intertwined with the time-dependent oscillator -rho''/(4 rho) x^2.

    In y = x/rho, tau = int dt/rho^2 the nested family supplies the
    potentials; V_i = -rho'' x^2/(4 rho) + V~_i(y, tau)/rho^2.  The charge is
    the nested canonical charge conjugated by the gauge factor of the map.
    """
    _check_positive(fam.rho, t_window, "rho")
    nest, rho, tau = fam.nested, fam.rho, fam.tau

    def V(which):
        def f(x, t):
            r = rho.derivs(t, 2)
            x = np.asarray(x, dtype=float)
            y = x / r[0]
            inner = nest.V2(y) if which == 2 else nest.V1(y, tau(t))
            return -r[2] / (4 * r[0]) * x * x + inner / r[0] ** 2
        return f

    def c1(x, t):
        r = rho.derivs(t, 1)
        x = np.asarray(x, dtype=float)
        return -1j * r[0] * r[1] * x - 2 * r[0] * nest.f(x / r[0], tau(t))

    def c0(x, t):
        r = rho.derivs(t, 1)
        x = np.asarray(x, dtype=float)
        y, s = x / r[0], tau(t)
        ft = nest.f(y, s)
        return (-0.5j * r[0] * r[1] - r[1] ** 2 * x * x / 4 + 1j * r[1] * x * ft
                + nest.b(y, s) + 1j * nest.c(y, s))

    charge = ChargeSpec.general([c0, c1, lambda x, t: _full(x, rho(t) ** 2, complex)], "q+")
    prov = {"family": "td-oscillator", "params": fam.describe(), "gauge": {"g1": 0.0}}
    return PotentialPair(V(1), V(2), charge, prov, {"family": fam, "tau": tau})


def as_h2(pair):
    """Hamiltonian of V2 squared plus helpers for norm identities."""
    return h_power(pair.V2, 2)


def constant_profile(c):
    return Polynomial([float(c)])

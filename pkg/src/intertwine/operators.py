"""Differential operators acting on fields: charges, Hamiltonians, symmetries.

An operator is a sum of monomials ``(coef, k, side)``.  Side ``"L"`` means
``coef(x, t) * d^k``; side ``"R"`` means ``d^k o coef(x, t)``.  Keeping both
sides lets the formal adjoint be represented exactly: the adjoint of
``coef * d^k`` is ``(-1)^k d^k o conj(coef)``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DomainError
from .fields import EDGE, ComplexField, derivative_array, l2
from .profiles import Positive, as_profile

# ---------------------------------------------------------------- coefficients


def _eval(coef, x, t):
    """Evaluate a coefficient ``c(x, t)``; plain numbers are constants."""
    v = coef if np.isscalar(coef) else coef(x, t)
    return np.broadcast_to(np.asarray(v), np.shape(x))


class _Adjoint:
    """``sign * conj(coef)``; wrapping twice returns the original values exactly."""

    def __init__(self, coef, sign):
        self.coef, self.sign = coef, sign

    def __call__(self, x, t):
        return self.sign * np.conj(_eval(self.coef, x, t))


def stationary(profile):
    """Bivariate evaluator ``(x, t) -> profile(x)``."""
    p = as_profile(profile)
    return lambda x, t: p(x)


def constant_coef(c):
    return lambda x, t: np.full(np.shape(x), c, dtype=complex)


def time_coef(profile, scale=1.0):
    """Coefficient depending on t only, ``scale * profile(t)``."""
    p = as_profile(profile)
    return lambda x, t: np.full(np.shape(x), scale * float(p(t)), dtype=complex)


@dataclass(frozen=True)
class Term:
    coef: object
    k: int
    side: str = "L"


class Operator:
    """Base class; subclasses provide ``apply_values`` and ``order``."""

    order = 0
    charges = 0
    h_power = 0

    def apply(self, psi, t):
        vals, grow = self.apply_values(psi.values, psi.grid, t)
        return ComplexField(psi.grid, vals, min(psi.band + grow, psi.grid.n // 2),
                            psi.reduced_accuracy)

    def __matmul__(self, other):
        return Composition([self, other])


class ChargeSpec(Operator):
    """Linear differential operator of order <= 2 with (x, t) coefficients.

    ``canonical`` holds ``(g, f, b, c)`` when built by ``second_order``.
    """

    charges = 1

    def __init__(self, terms, label="", canonical=None, _adjoint_of=None):
        self.terms = tuple(terms)
        for tm in self.terms:
            if tm.k not in (0, 1, 2, 3, 4) or tm.side not in ("L", "R"):
                raise ConfigError("invalid-term", f"bad operator term order={tm.k} side={tm.side}")
        self.label = label
        self.canonical = canonical
        self._adjoint_of = _adjoint_of
        self.order = max((tm.k for tm in self.terms), default=0)

    # constructors -----------------------------------------------------
    @classmethod
    def first_order(cls, c1, c0, label="q+"):
        """``c1 d + c0``."""
        return cls([Term(c1, 1), Term(c0, 0)], label)

    @classmethod
    def second_order(cls, g, f, b, c, label="q+"):
        """Canonical ``g(t) d^2 - 2 f d + b + i c`` with real f, b, c."""
        gp = as_profile(g)

        def c2(x, t):
            return np.full(np.shape(x), float(gp(t)), dtype=complex)

        def c1(x, t):
            return -2.0 * _eval(f, x, t).astype(complex)

        def c0(x, t):
            return _eval(b, x, t) + 1j * _eval(c, x, t)

        return cls([Term(c2, 2), Term(c1, 1), Term(c0, 0)], label, canonical=(gp, f, b, c))

    @classmethod
    def general(cls, coeffs, label="q"):
        """``sum_k coeffs[k] d^k`` (all left-acting)."""
        return cls([Term(cf, k) for k, cf in enumerate(coeffs) if cf is not None], label)

    # algebra ----------------------------------------------------------
    def adjoint(self):
        if self._adjoint_of is not None:
            return self._adjoint_of
        flip = {"L": "R", "R": "L"}
        terms = [Term(_Adjoint(tm.coef, (-1) ** tm.k), tm.k, flip[tm.side]) for tm in self.terms]
        label = self.label[:-1] + "-" if self.label.endswith("+") else self.label + "^dag"
        return ChargeSpec(terms, label, _adjoint_of=self)

    def coefficients(self, x, t):
        """Left-acting coefficient arrays ``[c_0, c_1, ...]`` (right terms expanded by Leibniz)."""
        x = np.asarray(x, dtype=float)
        out = [np.zeros(x.shape, complex) for _ in range(self.order + 1)]
        for tm in self.terms:
            c = _eval(tm.coef, x, t).astype(complex)
            if tm.side == "L":
                out[tm.k] += c
                continue
            # d^k o c = sum_j C(k, j) c^(k-j) d^j; c derivatives by stencils
            for j in range(tm.k + 1):
                dc = c if j == tm.k else derivative_array(c, x[1] - x[0], tm.k - j)
                out[j] += comb(tm.k, j) * dc
        return out

    def apply_values(self, values, grid, t):
        x = grid.x
        out = np.zeros(grid.n, dtype=complex)
        derivs = {}

        def d(v, k, key):
            if k == 0:
                return v
            if key is not None and (key, k) in derivs:
                return derivs[(key, k)]
            r = derivative_array(v, grid.h, k)
            if key is not None:
                derivs[(key, k)] = r
            return r

        grow = 0
        for tm in self.terms:
            c = _eval(tm.coef, x, t)
            if tm.side == "L":
                out += c * d(values, tm.k, "psi")
            else:
                out += d(c * values, tm.k, None)
            if tm.k:
                grow = EDGE
        return out, grow


class Hamiltonian(Operator):
    """``-d^2 + V(x, t)``."""

    order = 2
    h_power = 1

    def __init__(self, V, label="H"):
        self.V = V
        self.label = label

    def apply_values(self, values, grid, t):
        x = grid.x
        return (-derivative_array(values, grid.h, 2) + _eval(self.V, x, t) * values), EDGE


class Composition(Operator):
    """Product of operators, applied right to left."""

    def __init__(self, factors, label=""):
        flat = []
        for fct in factors:
            flat.extend(fct.factors if isinstance(fct, Composition) else [fct])
        self.factors = tuple(flat)
        self.order = sum(f.order for f in self.factors)
        self.charges = sum(f.charges for f in self.factors)
        self.h_power = sum(f.h_power for f in self.factors)
        self.label = label or " ".join(getattr(f, "label", "?") for f in self.factors)

    def apply_values(self, values, grid, t):
        grow = 0
        for fct in reversed(self.factors):
            values, g = fct.apply_values(values, grid, t)
            grow += g
        return values, grow


class Identity(Operator):
    label = "1"

    def apply_values(self, values, grid, t):
        return np.array(values, dtype=complex), 0


def h_power(V, p):
    return Identity() if p == 0 else Composition([Hamiltonian(V)] * p, f"H^{p}")


@dataclass
class SymmetryOpSpec(Operator):
    """``sum_i a_i(t) O_i`` with ``O_i`` compositions of charges and Hamiltonians."""

    terms: list = field(default_factory=list)
    label: str = "R"

    def __post_init__(self):
        for _, op in self.terms:
            if op.order > 4 or op.charges > 2 or op.h_power > 2:
                raise ConfigError("excessive-order",
                                  f"term {getattr(op, 'label', '?')} exceeds 4th order "
                                  "(at most two charges and H^2)")
        self.order = max((op.order for _, op in self.terms), default=0)

    def apply_values(self, values, grid, t):
        out = np.zeros(grid.n, dtype=complex)
        grow = 0
        for a, op in self.terms:
            coef = a(t) if callable(a) else a
            if coef == 0:
                continue
            v, g = op.apply_values(values, grid, t)
            out += coef * v
            grow = max(grow, g)
        return out, grow


def apply_charge(q, psi, t):
    """Apply a charge to a field at time ``t``; the edge band grows by 4 points."""
    return q.apply(psi, t)


def apply_symmetry(R, psi, t):
    return R.apply(psi, t)


# ---------------------------------------------------------------- residuals


def _time_residual(V, snaps, sign_dt, sign_dx2):
    if len(snaps) < 3:
        raise ConfigError("too-few-snapshots", "need at least three snapshots")
    g, tg = snaps.grid, snaps.time_grid
    psi = snaps.values
    dpsi = (psi[2:] - psi[:-2]) / (2 * tg.dt)
    lap = derivative_array(psi[1:-1], g.h, 2)
    x = g.x
    pot = np.array([_eval(V, x, tg.time(k)) for k in range(1, len(snaps) - 1)])
    r = sign_dt * dpsi + lap - pot * psi[1:-1]
    band = snaps.band + EDGE
    return l2(r[:, band:g.n - band], g.h), band


def schrodinger_residual(V, snaps):
    """Interior L2 norm of ``i psi_t + psi_xx - V psi`` at each interior time index."""
    return _time_residual(V, snaps, 1j, 1)[0]


def diffusion_residual(V, snaps):
    """Interior L2 norm of ``-psi_t + psi_xx - V psi`` at each interior time index."""
    return _time_residual(V, snaps, -1.0, 1)[0]


def map_snapshots(op, snaps):
    """Apply an operator snapshot by snapshot."""
    from .fields import Snapshots

    out = np.empty_like(snaps.values)
    grow = 0
    for k, t in enumerate(snaps.times):
        out[k], grow = op.apply_values(snaps.values[k], snaps.grid, t)
    return Snapshots(snaps.grid, snaps.time_grid, out, snaps.kind,
                     min(snaps.band + grow, snaps.grid.n // 2))


# ---------------------------------------------------------------- time quadrature

QUAD_PANEL = 2e-3


def time_integral(func, t, t0=0.0):
    """Composite Simpson of a scalar function of time over [t0, t]."""
    if t == t0:
        return 0.0
    n = max(2, 2 * int(np.ceil(abs(t - t0) / (2 * QUAD_PANEL))))
    s = np.linspace(t0, t, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    return float(np.dot(w, np.asarray(func(s), dtype=float))) * (t - t0) / (3 * n)


class CachedIntegral:
    """``t -> int_0^t func``, memoised per time value."""

    def __init__(self, func):
        self.func = func
        self._cached = lru_cache(maxsize=8192)(self._compute)

    def _compute(self, t):
        return time_integral(self.func, t)

    def __call__(self, t):
        if np.ndim(t):
            return np.array([self._cached(float(s)) for s in np.ravel(t)]).reshape(np.shape(t))
        return self._cached(float(t))

    def invert(self, value, t_guess=1.0):
        """Time at which the integral equals ``value`` (integrand must keep one sign)."""
        if value == 0:
            return 0.0
        lo, hi = 0.0, t_guess if value > 0 else -t_guess
        for _ in range(60):
            if (self(hi) - value) * (self(lo) - value) <= 0:
                break
            lo, hi = hi, 2 * hi
        else:
            raise DomainError("window-violation", "time map cannot reach the requested value")
        a, b = sorted((lo, hi))
        return brentq(lambda s: self._compute(s) - value, a, b, xtol=1e-14, rtol=1e-14)


# ---------------------------------------------------------------- canonicalisation


@dataclass
class VariableMap:
    """``tau = int_0^t ds / g``, ``y = g^{-1/2} x - 2 int_0^t g1 g^{-3/2} ds``."""

    g: object
    g1: object

    def __post_init__(self):
        self.tau = CachedIntegral(lambda s: 1.0 / self.g(s))
        self.shift = CachedIntegral(lambda s: self.g1(s) * self.g(s) ** -1.5)

    def forward(self, x, t):
        y = np.asarray(x) / np.sqrt(self.g(t)) - 2 * self.shift(t)
        return y, self.tau(t)

    def inverse(self, y, tau):
        t = self.tau.invert(tau)
        x = np.sqrt(self.g(t)) * (np.asarray(y) + 2 * self.shift(t))
        return x, t


@dataclass
class CanonicalForm:
    charge: ChargeSpec
    multiplier: object
    variable_map: VariableMap
    potential_shift: object
    charge_y: object = None


def canonicalize_second_order(g, F, B, g1, x_window=(-1.0, 1.0), t_window=(0.0, 1.0),
                              tol=1e-9):
    """Reduce ``g d^2 - 2F d + B`` to the real-coefficient canonical form.

    Checks Im F = g' x / 4 + g1 on a sample of the given window, then returns
    the charge ``g d^2 - 2 Re F d + B~``, the unimodular-weighted multiplier,
    the non-local (y, tau) map and the potential shift added to both
    Hamiltonians.
    """
    g = Positive(g, "g")
    g1 = as_profile(g1)
    xs = np.linspace(*x_window, 11)
    for t in np.linspace(*t_window, 11):
        gd = g.derivs(t, 1)
        expect = gd[1] * xs / 4 + g1(t)
        got = np.imag(_eval(F, xs, t))
        if np.max(np.abs(got - expect)) > tol * (1 + np.max(np.abs(expect))):
            raise ConfigError("imF-constraint-violated",
                              f"Im F differs from g'x/4 + g1 by "
                              f"{np.max(np.abs(got - expect)):.3g} at t={t:g}")

    def Btilde(x, t):
        gd = g.derivs(t, 1)
        s = gd[1] * np.asarray(x) / 4 + g1(t)
        return (_eval(B, x, t) + 0.25j * gd[1] - s * s / gd[0]
                - 2j * _eval(F, x, t) * s / gd[0])

    charge = ChargeSpec.second_order(
        g, lambda x, t: np.real(_eval(F, x, t)),
        lambda x, t: np.real(Btilde(x, t)), lambda x, t: np.imag(Btilde(x, t)), "q~+")
    g1_sq = CachedIntegral(lambda s: g1(s) ** 2 / g(s) ** 2)

    def multiplier(x, t):
        gd = g.derivs(t, 1)
        phase = gd[1] * np.asarray(x) ** 2 / (8 * gd[0]) + g1(t) * np.asarray(x) / gd[0] - g1_sq(t)
        return gd[0] ** -0.25 * np.exp(1j * phase)

    def potential_shift(x, t):
        gd = g.derivs(t, 2)
        g1d = g1.derivs(t, 1)
        x = np.asarray(x)
        return ((gd[2] / gd[0] - gd[1] ** 2 / (2 * gd[0] ** 2)) * x * x / 8
                + (g1d[0] * gd[1] / gd[0] ** 2 - 2 * g1d[1] / gd[0]) * x / 2)

    vmap = VariableMap(g, g1)

    def in_y(func, scale):
        def coef(y, tau):
            x, t = vmap.inverse(y, tau)
            return scale(t) * func(x, t)
        return coef

    charge_y = ChargeSpec.second_order(
        1.0, in_y(lambda x, t: np.real(_eval(F, x, t)), lambda t: g(t) ** -0.5),
        in_y(lambda x, t: np.real(Btilde(x, t)), lambda t: 1.0),
        in_y(lambda x, t: np.imag(Btilde(x, t)), lambda t: 1.0), "q~+(y)")
    return CanonicalForm(charge, multiplier, vmap, potential_shift, charge_y)

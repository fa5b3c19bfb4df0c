"""Real functions of one variable with derivatives up to fourth order.

Every profile implements ``derivs(x, order)`` returning an array of shape
``(order + 1,) + x.shape`` holding the value and the first ``order``
derivatives.  Closed forms are exact; tabulated profiles are splines.
"""

from math import comb

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DomainError

MAX_ORDER = 4


class Profile:
    kind = "profile"
    #: highest derivative order that is accurate to the profile's nominal precision
    exact_order = MAX_ORDER

    def derivs(self, x, order=MAX_ORDER):
        raise NotImplementedError

    def __call__(self, x):
        return self.derivs(x, 0)[0]

    def d(self, x, k=1):
        return self.derivs(x, k)[k]

    def __add__(self, other):
        return Sum([self, as_profile(other)])

    __radd__ = __add__

    def __mul__(self, other):
        return Product(self, as_profile(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Product(Polynomial([-1.0]), self)

    def reduced_accuracy(self, order):
        return order > self.exact_order

    def describe(self):
        return {"kind": self.kind}


def as_profile(p):
    if isinstance(p, Profile):
        return p
    if np.isscalar(p):
        return Polynomial([float(p)])
    raise ConfigError("not-a-profile", repr(p))


def _check_order(order):
    if order < 0 or order > MAX_ORDER:
        raise ConfigError("unsupported-order", f"derivative order must be 0..4, got {order}")


def _x(x):
    return np.asarray(x, dtype=float)


class Polynomial(Profile):
    """``sum(coeffs[k] * x**k)`` with coefficients from low to high degree."""

    kind = "polynomial"

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ConfigError("invalid-coeffs", "polynomial needs a non-empty coefficient list")
        self.coeffs = c

    def derivs(self, x, order=MAX_ORDER):
        _check_order(order)
        x = _x(x)
        out = np.empty((order + 1,) + x.shape)
        c = self.coeffs
        for k in range(order + 1):
            out[k] = np.polynomial.polynomial.polyval(x, c) if c.size else 0.0
            c = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(0)
        return out

    def describe(self):
        return {"kind": self.kind, "coeffs": self.coeffs.tolist()}


def constant(c):
    return Polynomial([float(c)])


class Exponential(Profile):
    """``A * exp(lam * x)``."""

    kind = "exponential"

    def __init__(self, A, lam):
        self.A, self.lam = float(A), float(lam)

    def derivs(self, x, order=MAX_ORDER):
        _check_order(order)
        e = self.A * np.exp(self.lam * _x(x))
        return np.array([self.lam ** k * e for k in range(order + 1)])

    def describe(self):
        return {"kind": self.kind, "A": self.A, "lam": self.lam}


class Trig(Profile):
    """``A * cos(omega * x + phase)``."""

    kind = "trig"

    def __init__(self, A, omega, phase=0.0):
        self.A, self.omega, self.phase = float(A), float(omega), float(phase)

    def derivs(self, x, order=MAX_ORDER):
        _check_order(order)
        arg = self.omega * _x(x) + self.phase
        c, s = np.cos(arg), np.sin(arg)
        cycle = (c, -s, -c, s)
        return np.array([self.A * self.omega ** k * cycle[k % 4] for k in range(order + 1)])

    def describe(self):
        return {"kind": self.kind, "A": self.A, "omega": self.omega, "phase": self.phase}


class Cosh(Profile):
    """``A * cosh(kappa * x)``."""

    kind = "cosh"
    _odd = False

    def __init__(self, A, kappa):
        self.A, self.kappa = float(A), float(kappa)

    def derivs(self, x, order=MAX_ORDER):
        _check_order(order)
        kx = self.kappa * _x(x)
        pair = (np.cosh(kx), np.sinh(kx))
        start = 1 if self._odd else 0
        return np.array([self.A * self.kappa ** k * pair[(start + k) % 2]
                         for k in range(order + 1)])

    def describe(self):
        return {"kind": self.kind, "A": self.A, "kappa": self.kappa}


class Sinh(Cosh):
    """``A * sinh(kappa * x)``."""

    kind = "sinh"
    _odd = True


class Power(Profile):
    """``A * x**p``; non-integer ``p`` requires ``x > 0``."""

    kind = "power"

    def __init__(self, A, p):
        self.A, self.p = float(A), float(p)

    def derivs(self, x, order=MAX_ORDER):
        _check_order(order)
        x = _x(x)
        integral = float(self.p).is_integer()
        if not integral and np.any(x <= 0):
            raise DomainError("window-violation", "non-integer power needs x > 0")
        if self.p < 0 and np.any(x == 0):
            raise DomainError("window-violation", "negative power evaluated at x = 0")
        out = np.empty((order + 1,) + x.shape)
        coef = self.A
        for k in range(order + 1):
            e = self.p - k
            if coef == 0.0:
                out[k] = 0.0
            else:
                out[k] = coef * x ** e
            coef *= e
        return out

    def describe(self):
        return {"kind": self.kind, "A": self.A, "p": self.p}


class Sum(Profile):
    kind = "sum"

    def __init__(self, terms):
        self.terms = [as_profile(t) for t in terms]
        if not self.terms:
            raise ConfigError("invalid-terms", "sum needs at least one term")
        self.exact_order = min(t.exact_order for t in self.terms)

    def derivs(self, x, order=MAX_ORDER):
        return sum(t.derivs(x, order) for t in self.terms)

    def describe(self):
        return {"kind": self.kind, "terms": [t.describe() for t in self.terms]}


class Product(Profile):
    """Product of two profiles, differentiated with the Leibniz rule."""

    kind = "product"

    def __init__(self, a, b):
        self.a, self.b = as_profile(a), as_profile(b)
        self.exact_order = min(self.a.exact_order, self.b.exact_order)

    def derivs(self, x, order=MAX_ORDER):
        da, db = self.a.derivs(x, order), self.b.derivs(x, order)
        out = np.zeros_like(da)
        for k in range(order + 1):
            for j in range(k + 1):
                out[k] += comb(k, j) * da[j] * db[k - j]
        return out

    def describe(self):
        return {"kind": self.kind, "factors": [self.a.describe(), self.b.describe()]}


class Tabulated(Profile):
    """Natural cubic spline through samples; orders 3 and 4 are reduced-accuracy."""

    kind = "tabulated"
    exact_order = 2

    def __init__(self, xs, ys):
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 4:
            raise ConfigError("invalid-samples", "need matching 1-D sample arrays (>= 4 points)")
        if np.any(np.diff(xs) <= 0):
            raise ConfigError("invalid-samples", "sample abscissae must increase")
        self.xs, self.ys = xs, ys
        self._spline = CubicSpline(xs, ys, bc_type="natural")

    def derivs(self, x, order=MAX_ORDER):
        _check_order(order)
        x = _x(x)
        if np.any(x < self.xs[0] - 1e-12) or np.any(x > self.xs[-1] + 1e-12):
            raise DomainError("window-violation", "tabulated profile evaluated outside its samples")
        out = np.empty((order + 1,) + x.shape)
        for k in range(order + 1):
            out[k] = self._spline(x, k) if k <= 3 else 0.0
        return out

    def describe(self):
        return {"kind": self.kind, "x": self.xs.tolist(), "y": self.ys.tolist()}


class Positive(Profile):
    """Wrapper that rejects evaluation points where the value is not positive."""

    def __init__(self, inner, name="profile"):
        self.inner = as_profile(inner)
        self.name = name
        self.kind = self.inner.kind
        self.exact_order = self.inner.exact_order

    def derivs(self, x, order=MAX_ORDER):
        out = self.inner.derivs(x, order)
        if np.any(~(out[0] > 0)):
            raise DomainError(f"nonpositive-{self.name}",
                              f"{self.name} must be positive on the requested window")
        return out

    def describe(self):
        return self.inner.describe()


def from_config(spec, where="profile"):
    """Build a profile from a JSON-like dict such as ``{"kind": "trig", "A": 1, ...}``."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return constant(spec)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("invalid-profile", f"{where}: expected an object with a 'kind' key")
    kind = spec["kind"]
    builders = {
        "polynomial": (Polynomial, ("coeffs",)),
        "constant": (constant, ("value",)),
        "exponential": (Exponential, ("A", "lam")),
        "trig": (Trig, ("A", "omega", "phase")),
        "cosh": (Cosh, ("A", "kappa")),
        "sinh": (Sinh, ("A", "kappa")),
        "power": (Power, ("A", "p")),
        "tabulated": (Tabulated, ("x", "y")),
    }
    if kind == "sum":
        _keys(spec, {"kind", "terms"}, where)
        return Sum([from_config(t, f"{where}.terms[{i}]") for i, t in enumerate(spec["terms"])])
    if kind == "product":
        _keys(spec, {"kind", "factors"}, where)
        fs = spec["factors"]
        if len(fs) < 2:
            raise ConfigError("invalid-profile", f"{where}.factors: need at least two factors")
        p = from_config(fs[0], f"{where}.factors[0]")
        for i, f in enumerate(fs[1:], 1):
            p = Product(p, from_config(f, f"{where}.factors[{i}]"))
        return p
    if kind not in builders:
        raise ConfigError("invalid-profile", f"{where}.kind: unknown profile kind {kind!r}")
    ctor, names = builders[kind]
    optional = {"phase"}
    _keys(spec, {"kind", *names}, where)
    args = []
    for name in names:
        if name not in spec:
            if name in optional:
                continue
            raise ConfigError("invalid-profile", f"{where}.{name}: missing")
        args.append(spec[name])
    return ctor(*args)


def _keys(spec, allowed, where):
    extra = set(spec) - allowed
    if extra:
        raise ConfigError("unknown-key", f"{where}.{sorted(extra)[0]}: unknown key")

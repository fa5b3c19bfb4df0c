"""Riccati integration, ODE residuals and stationary eigenproblems."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BPoly
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import ConfigError, DomainError
from .fields import EDGE, ComplexField, Grid1D, cumulative_integral, derivative_array, integrate
from .profiles import MAX_ORDER, Profile, _check_order

BLOWUP = 1e8


# ------------------------------------------------------------ Riccati kinds
#
# Each entry returns the derivative ladder [y, y', y'', y''', y''''] at (x, y)
# by differentiating the equation itself, so downstream code sees exact
# derivatives of whatever value the integrator produced.

def _ladder_p4(x, y, params):
    m, a = params
    d1 = -2 * y * y - 2 * m * x * y - a
    d2 = -4 * y * d1 - 2 * m * y - 2 * m * x * d1
    d3 = -4 * d1 * d1 - 4 * y * d2 - 4 * m * d1 - 2 * m * x * d2
    d4 = -12 * d1 * d2 - 4 * y * d3 - 6 * m * d2 - 2 * m * x * d3
    return [y, d1, d2, d3, d4]


def _ladder_p2(x, y, params):
    (k,) = params
    d1 = y * y + k * x
    d2 = 2 * y * d1 + k
    d3 = 2 * d1 * d1 + 2 * y * d2
    d4 = 6 * d1 * d2 + 2 * y * d3
    return [y, d1, d2, d3, d4]


def _ladder_eq41(x, y, params):
    beta, d = params
    d1 = 2 * y * y - beta * x * x / 4 + d
    d2 = 4 * y * d1 - beta * x / 2
    d3 = 4 * d1 * d1 + 4 * y * d2 - beta / 2
    d4 = 12 * d1 * d2 + 4 * y * d3
    return [y, d1, d2, d3, d4]


RICCATI = {
    # name: (ladder, parameter names)
    "painleve4-riccati": (_ladder_p4, ("m", "a")),
    "painleve2-riccati": (_ladder_p2, ("k",)),
    "eq41-riccati": (_ladder_eq41, ("beta", "d")),
}


@dataclass(frozen=True)
class OdeSolution:
    """Samples of an ODE solution on a (possibly truncated) grid."""

    grid: Grid1D
    values: np.ndarray
    derivatives: np.ndarray  # shape (5, n): value and derivatives 1..4
    kind: str
    params: tuple
    steps: int
    error_estimate: float
    truncation: dict = field(default_factory=dict)

    def profile(self):
        return RiccatiProfile(self)


def _rk4_run(rhs, xs, y0):
    """Classical RK4 along the node sequence ``xs`` (any direction)."""
    ys = np.empty(len(xs))
    ys[0] = y0
    n_ok = len(xs)
    for i in range(len(xs) - 1):
        x, y = xs[i], ys[i]
        h = xs[i + 1] - x
        k1 = rhs(x, y)
        k2 = rhs(x + h / 2, y + h / 2 * k1)
        k3 = rhs(x + h / 2, y + h / 2 * k2)
        k4 = rhs(x + h, y + h * k3)
        y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(y_new) or abs(y_new) > BLOWUP:
            n_ok = i + 1
            break
        ys[i + 1] = y_new
    return ys[:n_ok]


def integrate_riccati(kind, params, x_start, y_start, grid):
    """Integrate a Riccati equation over ``grid`` from a start node, both directions.

    The step equals the grid spacing.  A second run with halved steps gives
    the error estimate (Richardson: difference * 16/15).  If the solution
    exceeds 1e8 the domain is truncated and the truncation is recorded.
    """
    if kind not in RICCATI:
        raise ConfigError("invalid-kind", f"unknown Riccati kind {kind!r}")
    ladder, names = RICCATI[kind]
    params = tuple(float(p) for p in params)
    if len(params) != len(names):
        raise ConfigError("invalid-params", f"{kind} needs parameters {names}")
    i0 = grid.index_of(x_start)
    if not np.isfinite(y_start) or abs(y_start) > BLOWUP:
        raise DomainError("blow-up-at-start", f"start value {y_start} is not finite")

    def rhs(x, y):
        return ladder(x, y, params)[1]

    x = grid.x
    fine = np.linspace(grid.x_min, grid.x_max, 2 * grid.n - 1)
    fwd = _rk4_run(rhs, x[i0:], y_start)
    bwd = _rk4_run(rhs, x[i0::-1], y_start)
    fwd_f = _rk4_run(rhs, fine[2 * i0:], y_start)[::2]
    bwd_f = _rk4_run(rhs, fine[2 * i0::-1], y_start)[::2]
    hi = i0 + min(len(fwd), len(fwd_f)) - 1
    lo = i0 - (min(len(bwd), len(bwd_f)) - 1)
    if hi - lo + 1 < 9:
        raise DomainError("blow-up-at-start", "solution blows up within a few steps of the start")
    values = np.concatenate([bwd[:i0 - lo + 1][::-1], fwd[1:hi - i0 + 1]])
    fine_vals = np.concatenate([bwd_f[:i0 - lo + 1][::-1], fwd_f[1:hi - i0 + 1]])
    err = float(np.max(np.abs(values - fine_vals)) * 16 / 15)
    sub = grid.sub(lo, hi)
    ladder_vals = np.array(ladder(sub.x, values, params))
    trunc = {}
    if lo > 0 or hi < grid.n - 1:
        trunc = {"requested": [grid.x_min, grid.x_max], "kept": [sub.x_min, sub.x_max],
                 "reason": f"|y| exceeded {BLOWUP:g}"}
    return OdeSolution(sub, values, ladder_vals, kind, params, (hi - lo), err, trunc)


class RiccatiProfile(Profile):
    """Continuous profile from an ``OdeSolution``.

    Values between nodes come from quintic Hermite interpolation of
    (y, y', y''); derivatives are then rebuilt from the equation itself.
    """

    kind = "riccati"

    def __init__(self, sol):
        self.solution = sol
        self._ladder, _ = RICCATI[sol.kind]
        d = sol.derivatives
        self._interp = BPoly.from_derivatives(sol.grid.x, np.stack([d[0], d[1], d[2]], axis=1))

    def derivs(self, x, order=MAX_ORDER):
        _check_order(order)
        x = np.asarray(x, dtype=float)
        g = self.solution.grid
        tol = 1e-9 * max(1.0, abs(g.x_min), abs(g.x_max))
        if np.any(x < g.x_min - tol) or np.any(x > g.x_max + tol):
            raise DomainError("window-violation", "Riccati profile evaluated outside its domain")
        y = self._interp(x)
        return np.array(self._ladder(x, y, self.solution.params)[:order + 1])

    def describe(self):
        s = self.solution
        return {"kind": "riccati", "equation": s.kind, "params": list(s.params),
                "window": [s.grid.x_min, s.grid.x_max]}


# ------------------------------------------------------------ residuals

RESIDUAL_ORDER = {"painleve4": 2, "painleve2": 2, "eq40": 3, "eq411": 4, "first-integral": 3}


@dataclass(frozen=True)
class ResidualResult:
    x: np.ndarray
    residual: np.ndarray
    max: float
    reliable: tuple
    reduced_accuracy: bool = False


def _derivative_table(solution, order, grid):
    """(x, [y, y', ...], band, reduced_accuracy) for an OdeSolution or a Profile."""
    if isinstance(solution, OdeSolution):
        g = solution.grid
        v = solution.values
        ds = [v] + [derivative_array(v, g.h, k) for k in range(1, order + 1)]
        return g, np.array(ds), EDGE, False
    if isinstance(solution, Profile):
        if grid is None:
            raise ConfigError("missing-grid", "a grid is needed to evaluate a profile residual")
        if solution.reduced_accuracy(order):
            raise ConfigError("insufficient-derivative-order",
                              f"profile derivatives beyond order {solution.exact_order} "
                              f"are not accurate enough for this residual")
        return grid, solution.derivs(grid.x, order), 0, False
    raise ConfigError("invalid-solution", "expected an OdeSolution or a Profile")


def ode_residual(kind, solution, params, grid=None, exclude=None):
    """Pointwise residual of a named ODE and its maximum over the reliable window.

    ``OdeSolution`` inputs are differentiated with grid stencils (independent
    of the integrator); ``Profile`` inputs use their analytic derivatives.

    kinds and parameters:
      painleve4      (m, a, d)   f'' = f'^2/2f + 6f^3 + 8mxf^2 + 2(m^2x^2 - m + a)f + d/2f
      painleve2      (mt, k)     W'' = 2W^3 + 4 mt x W + k
      eq40           (beta, c, a0, x0)  third-order equation for f (see below)
      eq411          (lambda0,)  f'''' = lambda0^2 f
      first-integral (lambda0,)  2f'''f' - f''^2 - lambda0^2 f^2 minus its mean
    """
    if kind not in RESIDUAL_ORDER:
        raise ConfigError("invalid-kind", f"unknown residual kind {kind!r}")
    g, D, band, red = _derivative_table(solution, RESIDUAL_ORDER[kind], grid)
    x = g.x
    p = [float(v) for v in params]
    if kind == "painleve4":
        m, a, d = p
        f, f1, f2 = D[0], D[1], D[2]
        r = f2 - (f1 ** 2 / (2 * f) + 6 * f ** 3 + 8 * m * x * f ** 2
                  + 2 * (m * m * x * x - m + a) * f + d / (2 * f))
    elif kind == "painleve2":
        mt, k = p
        W, W2 = D[0], D[2]
        r = W2 - (2 * W ** 3 + 4 * mt * x * W + k)
    elif kind == "eq411":
        (lam,) = p
        r = D[4] - lam ** 2 * D[0]
    elif kind == "first-integral":
        (lam,) = p
        q = 2 * D[3] * D[1] - D[2] ** 2 - lam ** 2 * D[0] ** 2
        r = q - np.mean(q[band:len(q) - band])
    else:
        beta, c, a0, x0 = p
        r = eq40_residual(g, D, beta, c, a0, x0)
    sl = slice(band, len(x) - band)
    mask = np.zeros(len(x), bool)
    mask[sl] = True
    mask &= np.isfinite(r)
    if exclude is not None:
        mask &= ~exclude(x)
    mx = float(np.max(np.abs(r[mask]))) if np.any(mask) else float("nan")
    return ResidualResult(x, r, mx, (band, len(x) - band), red)


def fourth_order_U(x, f, fp, c, x0):
    """U(x) = 2(1 - 2c) x f + int_{x0}^x [(4c - 2) f - 4 z f^2] dz on a uniform grid.

    Uses U' = x w with w = 2(1 - 2c) f' - 4 f^2, integrated by cumulative
    integration (cubic-exact) from the node ``x0``.
    """
    h = x[1] - x[0]
    integrand = x * (2 * (1 - 2 * c) * fp - 4 * f * f)
    cum = cumulative_integral(integrand, h)
    i0 = int(round((x0 - x[0]) / h))
    if i0 < 0 or i0 >= len(x) or abs(x[i0] - x0) > 1e-9 * max(1.0, abs(x0)):
        raise ConfigError("x0-outside-window", f"x0={x0} must be a node of the working grid")
    U0 = 2 * (1 - 2 * c) * x0 * f[i0]
    return U0 + cum - cum[i0]


def fourth_order_V2(x, f, fp, U, beta, c, a0):
    """V2 = 2f' + 4f^2 + beta x^2/8 + a0 + U/x^2 with the x = 0 limit filled in."""
    with np.errstate(divide="ignore", invalid="ignore"):
        T = U / (x * x)
    zero = np.abs(x) < 1e-12
    if np.any(zero):
        # U = x^2 w(0)/2 + O(x^3) near the origin when U(0) = 0
        T[zero] = (2 * (1 - 2 * c) * fp[zero] - 4 * f[zero] ** 2) / 2
    return 2 * fp + 4 * f * f + beta * x * x / 8 + a0 + T


def eq40_residual(g, D, beta, c, a0, x0):
    """Residual -2fV2' + 4bf' + f''' + 4f'^2 + 4ff'' + 2 beta x f - beta c + beta/2.

    b = f' + 2f^2 - V2 + beta x^2/4 + a0; V2' is taken by stencils from grid
    samples of V2.
    """
    x = g.x
    f, f1, f2, f3 = D[0], D[1], D[2], D[3]
    U = fourth_order_U(x, f, f1, c, x0)
    V2 = fourth_order_V2(x, f, f1, U, beta, c, a0)
    V2p = derivative_array(V2, g.h, 1)
    b = f1 + 2 * f * f - V2 + beta * x * x / 4 + a0
    return (-2 * f * V2p + 4 * b * f1 + f3 + 4 * f1 * f1 + 4 * f * f2
            + 2 * beta * x * f - beta * c + beta / 2)


# ------------------------------------------------------------ eigenproblems

@dataclass(frozen=True)
class EigenResult:
    energies: np.ndarray
    states: list
    grid: Grid1D
    order: int = 2

    def state(self, n):
        return self.states[n]



def _refine_pentadiagonal(v, h2, count):
    """Lowest ``count`` eigenpairs of the 4th-order finite-difference Hamiltonian.

    The 2nd-order tridiagonal eigenpairs seed a Rayleigh-quotient iteration on
    the pentadiagonal matrix (one banded solve per sweep). This is O(m) per
    state; a banded eigensolver reduces through a dense O(m^2) transform.
    """
    m = v.size
    E2, seeds = eigh_tridiagonal(2.0 / h2 + v, -np.ones(m - 1) / h2,
                                 select="i", select_range=(0, count - 1))
    c2, c1, c0 = 1.0 / (12 * h2), -16.0 / (12 * h2), 30.0 / (12 * h2) + v

    def apply(u):
        w = c0 * u
        w[1:] += c1 * u[:-1]
        w[:-1] += c1 * u[1:]
        w[2:] += c2 * u[:-2]
        w[:-2] += c2 * u[2:]
        return w

    ab = np.zeros((5, m))
    ab[0, 2:] = ab[4, :-2] = c2
    ab[1, 1:] = ab[3, :-1] = c1
    E = np.empty(count)
    vecs = np.empty((m, count))
    for j in range(count):
        u = seeds[:, j]
        mu = u @ apply(u)
        for _ in range(20):
            ab[2] = c0 - mu
            try:
                w = solve_banded((2, 2), ab, u)
            except np.linalg.LinAlgError:
                break
            u = w / np.linalg.norm(w)
            new = u @ apply(u)
            done = abs(new - mu) <= 1e-14 * max(1.0, abs(new))
            mu = new
            if done:
                break
        E[j], vecs[:, j] = mu, u
    order = np.argsort(E)
    return E[order], vecs[:, order]

def stationary_eigensolve(V, grid, count, order=2):
    """Lowest eigenpairs of -d^2/dy^2 + V with Dirichlet ends.

    ``order=2`` is the symmetric tridiagonal three-point scheme solved by
    bisection and inverse iteration; ``order=4`` uses the symmetric
    five-point operator (pentadiagonal) for higher accuracy.  States are
    real, normalised with Simpson weights, with zero values at both ends.
    """
    if int(count) != count or count < 1 or count > 20:
        raise ConfigError("too-many-states", f"count must be 1..20, got {count}")
    if order not in (2, 4):
        raise ConfigError("unsupported-order", "eigensolver order must be 2 or 4")
    count = int(count)
    x = grid.x
    v = np.asarray(V(x[1:-1]), dtype=float) * np.ones(grid.n - 2)
    if not np.all(np.isfinite(v)):
        raise DomainError("non-finite-potential", "potential is not finite on the grid")
    h2 = grid.h ** 2
    m = grid.n - 2
    if count > m:
        raise ConfigError("too-many-states", "more states than interior points")
    if order == 2:
        E, vecs = eigh_tridiagonal(2.0 / h2 + v, -np.ones(m - 1) / h2,
                                   select="i", select_range=(0, count - 1))
    else:
        E, vecs = _refine_pentadiagonal(v, h2, count)
    states = []
    for j in range(count):
        full = np.zeros(grid.n)
        full[1:-1] = vecs[:, j]
        k = int(np.argmax(np.abs(full)))
        # deterministic sign: positive slope at the left end
        first = full[np.nonzero(np.abs(full) > 1e-8 * abs(full[k]))[0][0]]
        full *= np.sign(first)
        full /= np.sqrt(integrate(full * full, grid.h))
        states.append(ComplexField(grid, full.astype(complex)))
    return EigenResult(np.asarray(E), states, grid, order)

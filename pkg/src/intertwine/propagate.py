"""Time evolution and analytic solution families.

``propagate`` is Crank-Nicolson in time on top of the compact (Numerov)
fourth-order discretisation of ``-d^2``: with ``T`` the second-difference
matrix, ``M = I + T/12`` and ``L = T/h^2`` the step solves

    (M + s K) psi^{n+1} = (M - s K) psi^n,   K = -L + M diag(V(t + dt/2)),

with ``s = i dt/2`` (Schrodinger) or ``s = dt/2`` (diffusion).  All
matrices are tridiagonal, so each step is one banded solve.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline
from scipy.linalg import solve_banded

from .errors import ConfigError, DomainError
from .fields import EDGE, Snapshots, TimeGrid, l2
from .operators import _eval

log = logging.getLogger(__name__)

#: refuse to step when dt * max|V| exceeds this
SAFETY = 50.0
#: boundary-band amplitude (relative to the norm) that raises the leak flag
LEAK = 1e-6


def _bands(V, h, s):
    """Banded (1, 1) storage of ``M + s K`` and ``M - s K`` for potential samples ``V``."""
    n = V.size
    inv = 1.0 / h ** 2
    # M diag(V): row i is V[i-1]/12, 10 V[i]/12, V[i+1]/12
    main = 10.0 / 12.0 + s * (2 * inv + 10.0 / 12.0 * V)
    upper = 1.0 / 12.0 + s * (-inv + V[1:] / 12.0)
    lower = 1.0 / 12.0 + s * (-inv + V[:-1] / 12.0)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:], ab[1], ab[2, :-1] = upper, main, lower
    main_b = 10.0 / 12.0 - s * (2 * inv + 10.0 / 12.0 * V)
    upper_b = 1.0 / 12.0 - s * (-inv + V[1:] / 12.0)
    lower_b = 1.0 / 12.0 - s * (-inv + V[:-1] / 12.0)
    # Dirichlet rows
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = ab[2, -2] = 0.0
    return ab, (lower_b, main_b, upper_b)


def _apply_tri(parts, v):
    lower, main, upper = parts
    out = main * v
    out[:-1] += upper * v[1:]
    out[1:] += lower * v[:-1]
    out[0] = out[-1] = 0.0
    return out


def propagate(V, psi0, tg, kind="schrodinger", stationary=False, record_every=1):
    """Evolve ``psi0`` on ``tg`` under ``i psi_t = H psi`` or ``psi_t = -H psi``.

    ``V(x, t)`` is evaluated at mid-step times; with ``stationary=True`` it
    is evaluated once.  Every ``record_every``-th state is stored; the L2
    norm is recorded after every step.  Boundary values are held at zero.
    """
    if kind not in ("schrodinger", "diffusion"):
        raise ConfigError("invalid-kind", f"unknown propagation kind {kind!r}")
    if record_every < 1 or tg.steps % record_every:
        raise ConfigError("invalid-record-every", "record_every must divide the step count")
    grid = psi0.grid
    x, h, dt = grid.x, grid.h, tg.dt
    s = 0.5j * dt if kind == "schrodinger" else 0.5 * dt
    psi = np.array(psi0.values, dtype=complex)
    psi[0] = psi[-1] = 0.0
    out = [psi.copy()]
    norms = np.empty(tg.steps + 1)
    norms[0] = l2(psi, h)
    flags = {"boundary-leak": False, "boundary-leak-step": None}
    cached = None
    for k in range(tg.steps):
        if cached is None or not stationary:
            with np.errstate(all="ignore"):
                Vk = np.real(np.asarray(_eval(V, x, tg.time(k) + 0.5 * dt), dtype=complex))
            if not np.all(np.isfinite(Vk)):
                raise DomainError("window-violation", f"potential not finite at t={tg.time(k):g}")
            if dt * np.max(np.abs(Vk)) > SAFETY:
                raise DomainError("unstable-potential",
                                  f"dt*max|V| = {dt * np.max(np.abs(Vk)):.3g} exceeds {SAFETY:g}")
            cached = _bands(Vk, h, s)
        ab, rhs_parts = cached
        psi = solve_banded((1, 1), ab, _apply_tri(rhs_parts, psi), check_finite=False)
        if not np.all(np.isfinite(psi)):
            raise DomainError("blow-up", f"non-finite field at step {k + 1}")
        norms[k + 1] = l2(psi, h)
        edge = max(np.max(np.abs(psi[:EDGE + 1])), np.max(np.abs(psi[-EDGE - 1:])))
        if not flags["boundary-leak"] and edge > LEAK * max(norms[k + 1], 1e-300):
            flags["boundary-leak"], flags["boundary-leak-step"] = True, k + 1
            log.warning("boundary band amplitude %.3g at step %d", edge, k + 1)
        if (k + 1) % record_every == 0:
            out.append(psi.copy())
    rec = TimeGrid(tg.t0, tg.dt * record_every, tg.steps // record_every)
    return Snapshots(grid, rec, np.array(out), kind, 0, norms, flags)


# ---------------------------------------------------------------- separated solutions


@dataclass
class SeparatedSolutionSpec:
    family: object
    branch: int
    level: int
    eigen: object

    def __post_init__(self):
        if self.branch not in (1, 2):
            raise ConfigError("invalid-branch", "branch must be 1 or 2")
        if not 0 <= self.level < len(self.eigen.energies):
            raise ConfigError("invalid-level", f"level {self.level} not among the solved states")


def _interp_states(eigen, level):
    g = eigen.grid
    phi = np.real(eigen.states[level].values)
    spline = make_interp_spline(g.x, phi, k=5)
    lo, hi = g.x_min, g.x_max

    def f(y):
        y = np.asarray(y, dtype=float)
        inside = (y >= lo) & (y <= hi)
        return np.where(inside, spline(np.clip(y, lo, hi)), 0.0)
    return f


def separated_solution(spec, tg, grid):
    """Snapshots of rho^{-1/2} e^{-i g} phi_n(y) e^{-i E_n tau(t)} on ``grid``.

    ``phi_n`` is the eigenstate of ``K'^2 +- K''`` in y stored in
    ``spec.eigen`` (interpolated with a quintic spline, zero outside its grid).
    """
    fam = spec.family
    phi = _interp_states(spec.eigen, spec.level)
    E = float(spec.eigen.energies[spec.level])
    x = grid.x
    vals = np.empty((tg.steps + 1, grid.n), dtype=complex)
    for k, t in enumerate(tg.times):
        try:
            r = float(fam.rho(t))
        except DomainError as exc:
            raise DomainError("window-violation", str(exc)) from exc
        vals[k] = (r ** -0.5 * np.exp(-1j * fam.g(x, t)) * phi(fam.y(x, t))
                   * np.exp(-1j * E * fam.tau(t)))
    return Snapshots(grid, tg, vals, "schrodinger")


def r_separation(fam, snaps, direction="forward", y_grid=None):
    """Map psi(x, t) to phi(y, t) = sqrt(rho) e^{i g} psi (forward) or back (inverse).

    Values are moved between the x and y grids with cubic splines; points
    mapped outside the source grid are set to zero.  ``y_grid`` defaults to
    the grid of ``snaps``.
    """
    if direction not in ("forward", "inverse"):
        raise ConfigError("invalid-direction", direction)
    src = snaps.grid
    dst = src if y_grid is None else y_grid
    out = np.empty((len(snaps), dst.n), dtype=complex)
    for k, t in enumerate(snaps.times):
        try:
            r, mu = float(fam.rho(t)), float(fam.mu(t))
        except DomainError as exc:
            raise DomainError("window-violation", str(exc)) from exc
        v = snaps.values[k]
        spline = CubicSpline(src.x, v)
        if direction == "forward":
            # target node y sits at x = rho (y - mu)
            xs = r * (dst.x - mu)
            weight = np.sqrt(r) * np.exp(1j * fam.g(xs, t))
        else:
            xs = dst.x / r + mu
            weight = np.exp(-1j * fam.g(dst.x, t)) / np.sqrt(r)
        inside = (xs >= src.x_min) & (xs <= src.x_max)
        out[k] = np.where(inside, spline(np.clip(xs, src.x_min, src.x_max)), 0.0) * weight
    return Snapshots(dst, snaps.time_grid, out, snaps.kind)


def fp_transform(snaps, U, direction="fp-to-diffusion"):
    """psi = e^{U/2} P (fp-to-diffusion) or P = e^{-U/2} psi (diffusion-to-fp)."""
    if direction not in ("fp-to-diffusion", "diffusion-to-fp"):
        raise ConfigError("invalid-direction", direction)
    if direction == "fp-to-diffusion" and np.any(np.imag(snaps.values) != 0):
        raise ConfigError("complex-input-for-fp", "probability densities must be real")
    sign = 0.5 if direction == "fp-to-diffusion" else -0.5
    x = snaps.grid.x
    out = np.array([snaps.values[k] * np.exp(sign * np.asarray(_eval(U, x, t), dtype=float))
                    for k, t in enumerate(snaps.times)])
    return Snapshots(snaps.grid, snaps.time_grid, out, "diffusion", snaps.band)

"""Residual checks with recorded tolerances and pass/fail flags."""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, DomainError
from .fields import EDGE, ComplexField, TimeGrid, derivative_array, l2
from .operators import _eval, diffusion_residual, map_snapshots, schrodinger_residual
from .propagate import propagate

#: default tolerance ladder
TOL_IDENTITY = 1e-8
TOL_SINGLE = 1e-6
TOL_COMPOSED = 1e-5
TOL_PROPAGATED = 1e-4


@dataclass
class Entry:
    name: str
    value: float
    tolerance: float
    passed: bool
    interior: tuple = None
    note: str = ""

    def to_dict(self):
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance,
                "pass": self.passed, "interior": list(self.interior) if self.interior else None,
                "note": self.note}


@dataclass
class ConvergenceEntry:
    grids: tuple
    ratio: float
    order: float
    declared: float
    passed: bool

    def to_dict(self):
        return {"grids": list(self.grids), "ratio": self.ratio, "order": self.order,
                "declared": self.declared, "pass": self.passed}


@dataclass
class VerificationReport:
    scenario: str = ""
    provenance: dict = field(default_factory=dict)
    entries: list = field(default_factory=list)
    convergence: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def add(self, name, value, tol, interior=None, note="", passed=None):
        value = float(value)
        ok = bool(value <= tol) if passed is None else bool(passed)
        self.entries.append(Entry(name, value, float(tol), ok, interior, note))
        return ok

    def extend(self, other):
        self.entries.extend(other.entries)
        self.convergence.extend(other.convergence)
        self.flags.update(other.flags)
        return self

    def entry(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def passed(self):
        return all(e.passed for e in self.entries) and all(c.passed for c in self.convergence)

    def to_dict(self):
        return {"scenario": self.scenario, "provenance": _jsonable(self.provenance),
                "entries": [e.to_dict() for e in self.entries],
                "convergence": [c.to_dict() for c in self.convergence],
                "flags": _jsonable(self.flags), "pass": self.passed}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)


def _residual(V, snaps):
    if snaps.kind == "diffusion":
        return diffusion_residual(V, snaps)
    return schrodinger_residual(V, snaps)


def _extent(snaps, band):
    g = snaps.grid
    return (g.point(band), g.point(g.n - 1 - band))


# ---------------------------------------------------------------- intertwining


def check_intertwining(pair, source, tol=TOL_PROPAGATED, adjoint_source=None, image=None,
                       scenario="", kernel_tol=1e-8):
    """Map a V2 solution with q+ and measure the V1 residual of the image.

    ``source`` is a Snapshots object or a zero-argument recipe returning
    one.  Its own V2 residual must be below tol/10.  An image that vanishes
    (relative norm below ``kernel_tol``) is reported as a kernel element.
    ``adjoint_source`` (a V1 solution) is mapped back with q-.  ``image``,
    if given, is the analytic ``(x, t) -> q+ psi2`` compared in L2.
    """
    rep = VerificationReport(scenario, dict(getattr(pair, "provenance", {})))
    for label, src, V_src, V_dst, op in (
            ("", source, pair.V2, pair.V1, pair.charge),
            ("adjoint-", adjoint_source, pair.V1, pair.V2, pair.charge.adjoint())):
        if src is None:
            continue
        snaps = src() if callable(src) else src
        r_src = float(np.max(_residual(V_src, snaps)))
        if not r_src <= tol / 10:
            raise DomainError("source-not-a-solution",
                              f"{label}source residual {r_src:.3g} is not below {tol / 10:g}")
        rep.add(f"{label}source-residual", r_src, tol / 10, _extent(snaps, snaps.band + EDGE))
        mapped = map_snapshots(op, snaps)
        band = mapped.band + EDGE
        g = snaps.grid
        inner = slice(band, g.n - band)
        src_norm = float(np.max(l2(snaps.values[:, inner], g.h)))
        img_norm = float(np.max(l2(mapped.values[:, inner], g.h)))
        if img_norm <= kernel_tol * max(src_norm, 1e-300):
            rep.flags[f"{label}kernel-element"] = True
            rep.add(f"{label}image-norm", img_norm / max(src_norm, 1e-300), kernel_tol,
                    _extent(snaps, band), note="kernel element: trivial image")
            continue
        r = float(np.max(_residual(V_dst, mapped)))
        rep.add(f"{label}mapped-residual", r, tol, _extent(mapped, band))
        if image is not None and not label:
            x = g.x
            diff = [l2((mapped.values[k] - image(x, t))[inner], g.h)
                    for k, t in enumerate(snaps.times)]
            rep.add("image-match", max(diff), tol, _extent(mapped, band))
    return rep


# ---------------------------------------------------------------- symmetry


#: time step used to differentiate the coefficients of R
RDOT_STEP = 1e-3


def commutator_values(V, R, psi, grid, t, kind="schrodinger"):
    """``[S[V], R] psi`` at time ``t`` as ``(values, band)``.

    Uses ``[S, R] = i R' + [d^2 - V, R]`` (``-R'`` for diffusion), where R'
    differentiates only the explicit time dependence of R.  Differencing
    ``R(t +- e) psi`` on one fixed field keeps round-off out of the time
    derivative; differencing propagated snapshots instead feeds O(eps/dt)
    noise into a fourth-order operator.
    """
    e = RDOT_STEP
    Rt = [R.apply_values(psi, grid, t + j * e)[0] for j in (-2, -1, 1, 2)]
    Rdot = (Rt[0] - 8 * Rt[1] + 8 * Rt[2] - Rt[3]) / (12 * e)
    Rpsi, grow = R.apply_values(psi, grid, t)
    pot = _eval(V, grid.x, t)
    left = derivative_array(Rpsi, grid.h, 2) - pot * Rpsi
    right = R.apply_values(derivative_array(psi, grid.h, 2) - pot * psi, grid, t)[0]
    dt_part = 1j * Rdot if kind == "schrodinger" else -Rdot
    return dt_part + left - right, grow + EDGE


def commutator_norms(V, R, snaps):
    """Interior L2 norms of ``[S[V], R] psi`` at every snapshot."""
    g = snaps.grid
    out = []
    band = 0
    for k, t in enumerate(snaps.times):
        vals, band = commutator_values(V, R, snaps.values[k], g, t, snaps.kind)
        out.append(l2(vals[band:g.n - band], g.h))
    return np.array(out), band


def check_symmetry(V, R, tests, tg, tol=TOL_COMPOSED, kind="schrodinger", scenario=""):
    """Measure ``[S[V], R]`` on test fields propagated over ``tg``.

    Each test field is evolved with Crank-Nicolson over ``tg``; the
    commutator is evaluated on every snapshot and the largest interior L2
    norm is reported per test.
    """
    rep = VerificationReport(scenario, {"operator": getattr(R, "label", "R")})
    for i, f in enumerate(tests):
        g = f.grid
        _, grow = R.apply_values(f.values, g, tg.t0)
        margin = grow + 2 * EDGE
        peak = np.max(np.abs(f.values))
        edge = max(np.max(np.abs(f.values[:margin])), np.max(np.abs(f.values[-margin:])))
        if peak == 0 or edge > 1e-8 * peak:
            raise DomainError("test-touches-boundary",
                              f"test field {i} is not negligible within {margin} edge points")
        snaps = propagate(V, f, tg, kind)
        norms, band = commutator_norms(V, R, snaps)
        rep.add(f"commutator[{i}]", float(np.max(norms)), tol, _extent(snaps, band))
    return rep


# ---------------------------------------------------------------- norm identity


def check_norm_identity(pair, psi, lambda0, t=0.0, energy=None, window=None, tol=TOL_COMPOSED,
                        scenario=""):
    """Compare ``||q+ psi||^2`` with ``||H2 psi||^2 + lambda0^2/4`` (and E^2 + lambda0^2/4).

    Norms are Simpson integrals over the reliable interior, or over
    ``window = (a, b)`` (grid nodes) when given, e.g. one period of a box.
    """
    from .operators import Hamiltonian

    g = psi.grid
    if window is None:
        sl = slice(EDGE, g.n - EDGE)
    else:
        sl = slice(g.index_of(window[0]), g.index_of(window[1]) + 1)
    n0 = l2(psi.values[sl], g.h)
    zero = not np.any(psi.values)
    if not zero and abs(n0 - 1) > 1e-6:
        raise ConfigError("unnormalized-input", f"test field has norm {n0:.8g}")
    qpsi, _ = pair.charge.apply_values(psi.values, g, t)
    hpsi, _ = Hamiltonian(pair.V2).apply_values(psi.values, g, t)
    lhs = l2(qpsi[sl], g.h) ** 2
    rhs = l2(hpsi[sl], g.h) ** 2 + lambda0 ** 2 / 4 * n0 ** 2
    rep = VerificationReport(scenario, dict(getattr(pair, "provenance", {})))
    rep.flags["norms"] = {"q_psi_sq": float(lhs), "H2_psi_sq": float(rhs - lambda0 ** 2 / 4 * n0 ** 2)}
    rep.add("operator-form", abs(lhs - rhs), tol, (g.point(sl.start), g.point(sl.stop - 1)))
    if energy is not None:
        rep.add("eigen-form", abs(lhs - (energy ** 2 + lambda0 ** 2 / 4) * n0 ** 2), tol)
    return rep


# ---------------------------------------------------------------- zero modes

#: tail cut for the normalisability classification
TAIL_CUT = 50.0


def normalization_integral(K):
    """``(value, normalizable)`` for the integral of exp(-2K(y)) over the line.

    The integral counts as convergent when the mass beyond |y| = 50 is
    below 1e-12 of the core mass and the integrand stays finite; this is a
    numerical classification, not a proof.
    """
    def w(y):
        with np.errstate(over="ignore"):
            return float(np.exp(-2.0 * K(np.float64(y))))

    core = quad(w, -TAIL_CUT, TAIL_CUT, limit=200, points=[0.0])[0]
    ys = np.linspace(TAIL_CUT, 4 * TAIL_CUT, 301)
    with np.errstate(over="ignore"):
        tails = np.exp(-2.0 * np.concatenate([K(ys), K(-ys)]))
    tail_bound = float(np.max(tails)) * 3 * TAIL_CUT if np.all(np.isfinite(tails)) else np.inf
    if not np.isfinite(core) or not tail_bound <= 1e-12 * max(core, 1e-300):
        return float("inf"), False
    value = quad(w, -np.inf, np.inf, limit=400, epsabs=0.0, epsrel=1e-13)[0]
    return value, True


def zero_mode_check(fam, grid, t=0.0, tol=TOL_IDENTITY, scenario=""):
    """Annihilation residual of exp(-h - i g) under q+ and the normalisability of exp(-2K)."""
    from .families import first_order_pair, zero_mode

    pair = first_order_pair(fam)
    psi = ComplexField(grid, zero_mode(fam)(grid.x, t))
    out, grow = pair.charge.apply_values(psi.values, grid, t)
    sl = slice(grow, grid.n - grow)
    rel = l2(out[sl], grid.h) / l2(psi.values[sl], grid.h)
    rep = VerificationReport(scenario, pair.provenance)
    rep.add("annihilation", rel, tol, (grid.point(grow), grid.point(grid.n - 1 - grow)))
    value, ok = normalization_integral(fam.K)
    rep.flags["normalization-integral"] = value
    rep.flags["normalizable"] = ok
    return rep


# ---------------------------------------------------------------- convergence


def _refinement(a, b):
    """2 when level b halves exactly one of (h, dt) of level a, else None."""
    (ga, ta), (gb, tb) = a, b
    same_x = ga.x_min == gb.x_min and ga.x_max == gb.x_max
    half_h = same_x and gb.n - 1 == 2 * (ga.n - 1)
    same_h = same_x and gb.n == ga.n
    half_t = tb is not None and ta is not None and np.isclose(tb.dt, ta.dt / 2, rtol=1e-12) \
        and np.isclose(tb.t_end, ta.t_end, rtol=1e-12)
    same_t = (ta is None and tb is None) or (ta is not None and tb is not None and ta == tb)
    return 2 if (half_h and same_t) or (half_t and same_h) else None


def convergence_study(recipe, levels, declared_order, scenario=""):
    """Observed order from an error or residual measured on successive 2x refinements.

    ``recipe(grid, time_grid)`` returns a positive scalar; ``levels`` is a
    list of ``(Grid1D, TimeGrid or None)``.  Passes when every observed
    order is at least ``declared_order - 0.5``.
    """
    if len(levels) < 2:
        raise ConfigError("non-nested-grids", "need at least two grid levels")
    for a, b in zip(levels, levels[1:]):
        if _refinement(a, b) is None:
            raise ConfigError("non-nested-grids", "each level must halve h or dt of the previous")
    errs = [float(recipe(g, tg)) for g, tg in levels]
    rep = VerificationReport(scenario)
    for (a, b), (ea, eb) in zip(zip(levels, levels[1:]), zip(errs, errs[1:])):
        ratio = ea / eb if eb > 0 else np.inf
        p = float(np.log2(ratio)) if ratio > 0 else -np.inf
        desc = (_level_desc(a), _level_desc(b))
        rep.convergence.append(ConvergenceEntry(desc, float(ratio), p, float(declared_order),
                                                bool(p >= declared_order - 0.5)))
    rep.flags["errors"] = errs
    return rep


def _level_desc(level):
    g, tg = level
    return {"h": g.h, "dt": None if tg is None else tg.dt}


# ---------------------------------------------------------------- non-stationary family


def reflection_ratio(field, k, windows=((-18.0, -8.0), (8.0, 18.0))):
    """Largest |B|/|A| for a Hann-weighted fit A e^{ikx} + B e^{-ikx} in each window."""
    g = field.grid
    x = g.x
    worst = 0.0
    for a, b in windows:
        m = (x >= a) & (x <= b)
        xs, v = x[m], field.values[m]
        if xs.size < 8:
            raise ConfigError("window-violation", f"window {a, b} holds too few grid points")
        w = np.sqrt(np.sin(np.pi * (xs - a) / (b - a)) ** 2 + 1e-12)
        basis = np.stack([np.exp(1j * k * xs), np.exp(-1j * k * xs)], axis=1)
        coef = np.linalg.lstsq(basis * w[:, None], v * w, rcond=None)[0]
        worst = max(worst, abs(coef[1]) / max(abs(coef[0]), 1e-300))
    return worst


def _dt4(func, t, e=1e-3):
    return (-func(t + 2 * e) + 8 * func(t + e) - 8 * func(t - e) + func(t - 2 * e)) / (12 * e)


def nonstat_constraints(fam, grid, times):
    """Max interior residuals of the four compatibility conditions for (f, b, c, V2).

    The conditions are f_t = c', b_t + c'' + 4 c f' = 0,
    f'' - b' - V2' + 4 f f' = 0 and c_t + 2 f V2' - b'' - 4 b f' - V2'' = 0.
    """
    x, h = grid.x, grid.h
    sl = slice(EDGE, grid.n - EDGE)
    V2 = fam.V2(x)
    V2p, V2pp = derivative_array(V2, h, 1), derivative_array(V2, h, 2)
    worst = np.zeros(4)
    for t in times:
        f, fx = fam.f(x, t), fam.fx(x, t)
        b, c = fam.b(x, t), fam.c(x, t)
        ft = _dt4(lambda s: fam.f(x, s), t)
        bt = _dt4(lambda s: fam.b(x, s), t)
        ct = _dt4(lambda s: fam.c(x, s), t)
        cx, cxx = derivative_array(c, h, 1), derivative_array(c, h, 2)
        bx, bxx = derivative_array(b, h, 1), derivative_array(b, h, 2)
        fxx = derivative_array(fx, h, 1)
        res = (ft - cx, bt + cxx + 4 * c * fx, fxx - bx - V2p + 4 * f * fx,
               ct + 2 * f * V2p - bxx - 4 * b * fx - V2pp)
        worst = np.maximum(worst, [np.max(np.abs(r[sl])) for r in res])
    return worst


def check_nonstat(fam, grid, times, tol=TOL_SINGLE, v2_tol=TOL_IDENTITY, scenario=""):
    """V2 identically zero and the four compatibility conditions on a space-time sample."""
    rep = VerificationReport(scenario, {"family": "nonstat", "params": fam.describe()})
    with np.errstate(all="ignore"):
        v2 = fam.V2(grid.x)
    v2max = float(np.max(np.abs(v2))) if np.all(np.isfinite(v2)) else float("inf")
    rep.add("max|V2|", v2max, v2_tol)
    with np.errstate(all="ignore"):
        cons = nonstat_constraints(fam, grid, times)
    for i, r in enumerate(cons, 1):
        r = float(r) if np.isfinite(r) else float("inf")
        rep.add(f"constraint-{i}", r, tol, (grid.point(EDGE), grid.point(grid.n - 1 - EDGE)))
    return rep


def default_time_grid(t0=0.0, dt=1e-4, steps=2):
    return TimeGrid(t0, dt, steps)

"""Scenario configuration, the built-in catalog and the scenario runner.

A scenario is a JSON object with the keys ``family``, ``grid``, ``time``,
``source``, ``checks`` and optionally ``name`` and ``output``.  Unknown keys
are rejected everywhere.  See README.md for the schema.
"""

import copy
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import families as F
from . import profiles as P
from .errors import ConfigError, DomainError
from .fields import ComplexField, TimeGrid, l2, make_grid, sample_snapshots
from .ode import integrate_riccati, ode_residual, stationary_eigensolve
from .operators import Composition, SymmetryOpSpec, map_snapshots
from .propagate import SeparatedSolutionSpec, fp_transform, propagate, separated_solution
from .verify import (TOL_COMPOSED, TOL_IDENTITY, TOL_PROPAGATED, TOL_SINGLE, VerificationReport,
                     check_intertwining, check_nonstat, check_norm_identity, check_symmetry,
                     convergence_study, reflection_ratio, zero_mode_check)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- parsing helpers


def _keys(spec, allowed, required, where):
    if not isinstance(spec, dict):
        raise ConfigError("invalid-config", f"{where}: expected an object")
    extra = set(spec) - set(allowed)
    if extra:
        raise ConfigError("unknown-key", f"{where}.{sorted(extra)[0]}: unknown key")
    for k in required:
        if k not in spec:
            raise ConfigError("missing-key", f"{where}.{k}: required key missing")


def _num(spec, key, where, default=None):
    if key not in spec:
        if default is None:
            raise ConfigError("missing-key", f"{where}.{key}: required key missing")
        return default
    v = spec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError("invalid-value", f"{where}.{key}: expected a finite number")
    return float(v)


def _int(spec, key, where, default=None):
    v = _num(spec, key, where, default)
    if int(v) != v:
        raise ConfigError("invalid-value", f"{where}.{key}: expected an integer")
    return int(v)


def _profile(spec, key, where, default=None):
    if key not in spec:
        if default is None:
            raise ConfigError("missing-key", f"{where}.{key}: required key missing")
        return P.as_profile(default)
    return P.from_config(spec[key], f"{where}.{key}")


def parse_grid(spec, where="grid"):
    _keys(spec, ("x_min", "x_max", "n"), ("x_min", "x_max", "n"), where)
    n = _int(spec, "n", where)
    if n < 9:
        raise ConfigError("too-few-points", f"{where}.n: need n >= 9, got {n}")
    try:
        return make_grid(_num(spec, "x_min", where), _num(spec, "x_max", where), n)
    except ConfigError as exc:
        raise ConfigError(exc.code, f"{where}: {exc.message}") from exc


def parse_time(spec, where="time"):
    _keys(spec, ("t0", "dt", "steps"), ("dt", "steps"), where)
    dt, steps = _num(spec, "dt", where), _int(spec, "steps", where)
    if not dt > 0:
        raise ConfigError("invalid-dt", f"{where}.dt: must be positive")
    if steps < 1:
        raise ConfigError("invalid-steps", f"{where}.steps: must be >= 1")
    return TimeGrid(_num(spec, "t0", where, 0.0), dt, steps)


# ---------------------------------------------------------------- families


@dataclass
class Built:
    """A constructed family with everything the sources and checks need."""

    kind: str
    grid: object
    pair: object = None
    V_source: object = None
    V_target: object = None
    equation: str = "schrodinger"
    family: object = None
    symmetries: dict = field(default_factory=dict)
    residuals: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def _riccati_or_profile(spec, key, where, kind, params, grid):
    """Profile from config, or ``{"kind": "riccati", "x_start", "y_start"}`` integrated on ``grid``."""
    s = spec.get(key)
    if isinstance(s, dict) and s.get("kind") == "riccati":
        w = f"{where}.{key}"
        extra = ("d",) if kind == "eq41-riccati" else ()
        _keys(s, ("kind", "x_start", "y_start") + extra, ("x_start", "y_start") + extra, w)
        if extra:
            params = params + (_num(s, "d", w),)
        sol = integrate_riccati(kind, params, _num(s, "x_start", w), _num(s, "y_start", w), grid)
        return sol.profile(), sol
    return _profile(spec, key, where), None


def _charge_pair_symmetries(pair):
    q = pair.charge
    return {"q+q-": (SymmetryOpSpec([(1.0, Composition([q, q.adjoint()]))], "q+q-"), pair.V1),
            "q-q+": (SymmetryOpSpec([(1.0, Composition([q.adjoint(), q]))], "q-q+"), pair.V2)}


def build_family(spec, grid, where="family"):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("invalid-config", f"{where}: expected an object with a 'kind' key")
    kind = spec["kind"]
    builders = {
        "first-order": _build_first_order, "symmetry": _build_symmetry,
        "fokker-planck": _build_fokker_planck, "painleve4": _build_painleve4,
        "painleve2": _build_painleve2, "fourth-order": _build_fourth_order,
        "nonstat": _build_nonstat, "td-oscillator": _build_td_oscillator,
    }
    if kind not in builders:
        raise ConfigError("invalid-family", f"{where}.kind: unknown family {kind!r}")
    return builders[kind](spec, grid, where)


def _build_first_order(spec, grid, where):
    _keys(spec, ("kind", "rho", "mu", "gamma", "K"), ("kind", "K"), where)
    fam = F.FirstOrderFamily(_profile(spec, "rho", where, 1.0), _profile(spec, "mu", where, 0.0),
                             _profile(spec, "gamma", where, 0.0), _profile(spec, "K", where))
    pair = F.first_order_pair(fam)
    return Built("first-order", grid, pair, pair.V2, pair.V1, family=fam,
                 symmetries=_charge_pair_symmetries(pair), provenance=pair.provenance)


def _build_symmetry(spec, grid, where):
    _keys(spec, ("kind", "omega", "nu", "Phi"), ("kind", "Phi"), where)
    fam = F.SymmetryFamily(_profile(spec, "omega", where, 1.0), _profile(spec, "nu", where, 0.0),
                           _profile(spec, "Phi", where))
    b = F.symmetry_family_build(fam)
    return Built("symmetry", grid, None, b.V, b.V, family=fam, symmetries={"R": (b.R, b.V)},
                 provenance=b.provenance, extras={"build": b})


def _build_fokker_planck(spec, grid, where):
    _keys(spec, ("kind", "chi", "rho"), ("kind", "chi"), where)
    chi = spec["chi"]
    w = f"{where}.chi"
    if not isinstance(chi, list) or not chi:
        raise ConfigError("invalid-chi", f"{w}: expected a list of [X(x), T(t)] pairs")
    terms = []
    for i, t in enumerate(chi):
        if not isinstance(t, list) or len(t) != 2:
            raise ConfigError("invalid-chi", f"{w}[{i}]: expected [X, T]")
        terms.append((P.from_config(t[0], f"{w}[{i}][0]"), P.from_config(t[1], f"{w}[{i}][1]")))
    fam = F.FokkerPlanckFamily(F.Separable(terms), _profile(spec, "rho", where, 1.0))
    fp = F.fokker_planck_pair(fam)
    pair = F.PotentialPair(fp.V1, fp.V2, fp.charge, fp.provenance, {"fp": fp})
    return Built("fokker-planck", grid, pair, fp.V2, fp.V1, "diffusion", fam,
                 provenance=fp.provenance, extras={"fp": fp})


def _build_painleve4(spec, grid, where):
    _keys(spec, ("kind", "f", "m", "a", "d", "m0", "tol"), ("kind", "f", "m", "a", "d"), where)
    m, a, d = (_num(spec, k, where) for k in ("m", "a", "d"))
    f, sol = _riccati_or_profile(spec, "f", where, "painleve4-riccati", (m, a), grid)
    g = sol.grid if sol is not None else grid
    fam = F.PainleveIVFamily(f, m, a, d, _num(spec, "m0", where, 1.0))
    pair = F.painleve4_pair(fam, g, _num(spec, "tol", where, TOL_SINGLE))
    R1, R2 = F.painleve4_symmetries(pair)
    _, R2p = F.painleve4_symmetries(pair, "printed")
    res = ode_residual("painleve4", sol if sol is not None else f, (m, a, d), grid=g)
    return Built("painleve4", g, pair, pair.V2, pair.V1, family=fam,
                 symmetries={"R1": (R1, pair.V1), "R2": (R2, pair.V2), "R2-printed": (R2p, pair.V2)},
                 residuals=[("painleve4-residual", res.max)], provenance=pair.provenance,
                 extras={"route_agreement": pair.extras["route_agreement"], "solution": sol})


def _build_painleve2(spec, grid, where):
    _keys(spec, ("kind", "W", "mtilde", "n", "k", "tol"), ("kind", "W", "mtilde", "k"), where)
    mt, k = _num(spec, "mtilde", where), _num(spec, "k", where)
    W, sol = _riccati_or_profile(spec, "W", where, "painleve2-riccati", (k,), grid)
    g = sol.grid if sol is not None else grid
    fam = F.PainleveIIFamily(W, mt, _num(spec, "n", where, 0.0), k)
    pair = F.painleve2_pair(fam, g, _num(spec, "tol", where, TOL_SINGLE))
    R1, R2, Rt1, Rt2 = F.painleve2_symmetries(pair)
    res = ode_residual("painleve2", sol if sol is not None else W, (mt, k), grid=g)
    return Built("painleve2", g, pair, pair.V2, pair.V1, family=fam,
                 symmetries={"R1": (R1, pair.V1), "R2": (R2, pair.V2), "R~1": (Rt1, pair.V1),
                             "R~2": (Rt2, pair.V2)},
                 residuals=[("painleve2-residual", res.max)], provenance=pair.provenance,
                 extras={"solution": sol})


def _build_fourth_order(spec, grid, where):
    _keys(spec, ("kind", "f", "beta", "c", "a0", "x0", "theta0", "lambda0", "tol"),
          ("kind", "f", "beta"), where)
    beta = _num(spec, "beta", where)
    if not beta > 0:
        raise ConfigError("nonpositive-beta", f"{where}.beta: must be positive")
    f, sol = _riccati_or_profile(spec, "f", where, "eq41-riccati", (beta,), grid)
    g = sol.grid if sol is not None else grid
    c, a0, x0 = (_num(spec, k, where, 0.0) for k in ("c", "a0", "x0"))
    fam = F.FourthOrderFamily(f, beta, c, a0, x0, _num(spec, "theta0", where, 1.0),
                              _num(spec, "lambda0", where, 0.0))
    pair, theta, lam = F.fourth_order_family_build(fam, g, _num(spec, "tol", where, TOL_SINGLE))
    res = pair.provenance["eq40_residual"]
    b = Built("fourth-order", g, pair, pair.V2, pair.V1, family=fam,
              symmetries=_charge_pair_symmetries(pair),
              residuals=[("eq40-residual", res)], provenance=pair.provenance,
              extras={"theta": theta, "lambda": lam, "solution": sol})
    return b


def _nonstat_family(spec, where):
    _keys(spec, ("kind", "f1", "sigma", "delta", "lambda0"), ("f1", "lambda0"), where)
    return F.NonStatFamily(_profile(spec, "f1", where), _num(spec, "sigma", where, 0.0),
                           _num(spec, "delta", where, 0.0), _num(spec, "lambda0", where))


def _build_nonstat(spec, grid, where):
    fam = _nonstat_family(spec, where)
    pair = F.nonstat_stationary_pair(fam)
    R1, R2 = F.nonstat_symmetries(pair)
    res = ode_residual("eq411", fam.f1, (fam.lambda0,), grid=grid)
    fi = ode_residual("first-integral", fam.f1, (fam.lambda0,), grid=grid)
    return Built("nonstat", grid, pair, pair.V2, pair.V1, family=fam,
                 symmetries={"R1": (R1, pair.V1), "R2": (R2, pair.V2)},
                 residuals=[("eq411-residual", res.max), ("first-integral-spread", fi.max)],
                 provenance=pair.provenance)


def _build_td_oscillator(spec, grid, where):
    _keys(spec, ("kind", "rho", "nested"), ("kind", "rho", "nested"), where)
    nested = dict(spec["nested"]) if isinstance(spec["nested"], dict) else spec["nested"]
    if isinstance(nested, dict):
        nested.setdefault("kind", "nonstat")
    fam = F.TDOscFamily(_profile(spec, "rho", where), _nonstat_family(nested, f"{where}.nested"))
    pair = F.td_oscillator_pair(fam)
    return Built("td-oscillator", grid, pair, pair.V2, pair.V1, family=fam,
                 symmetries=_charge_pair_symmetries(pair), provenance=pair.provenance)


# ---------------------------------------------------------------- sources


def _packet(spec, where):
    _keys(spec, ("kind", "center", "width", "k", "propagate"), ("kind", "center", "width"), where)
    c, w, k = _num(spec, "center", where), _num(spec, "width", where), _num(spec, "k", where, 0.0)
    if not w > 0:
        raise ConfigError("invalid-value", f"{where}.width: must be positive")
    return lambda x: np.exp(-(x - c) ** 2 / (2 * w * w) + 1j * k * x)


def build_source(spec, built, tg, where="source"):
    """Snapshots of a solution of the source equation (V2, or V for symmetry families)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("invalid-config", f"{where}: expected an object with a 'kind' key")
    g = built.grid
    kind = spec["kind"]
    if kind == "separated":
        _keys(spec, ("kind", "branch", "level", "propagate"), ("kind", "level"), where)
        if built.kind != "first-order":
            raise ConfigError("invalid-source", f"{where}.kind: separated needs a first-order family")
        branch, level = _int(spec, "branch", where, 2), _int(spec, "level", where)
        if branch not in (1, 2):
            raise ConfigError("invalid-branch", f"{where}.branch: must be 1 or 2")
        if not 0 <= level < 20:
            raise ConfigError("invalid-level", f"{where}.level: must be in 0..19")
        eig = stationary_eigensolve(built.family.branch_potential(branch), g, level + 1, order=4)
        sep = SeparatedSolutionSpec(built.family, branch, level, eig)
        if spec.get("propagate", False):
            first = separated_solution(sep, TimeGrid(tg.t0, tg.dt, 1), g).field(0)
            V = built.V_source if branch == 2 else built.V_target
            return propagate(V, first, tg)
        return separated_solution(sep, tg, g)
    if kind == "packet":
        f = _packet(spec, where)
        psi0 = ComplexField(g, f(g.x))
        return propagate(built.V_source, psi0, tg, built.equation)
    if kind == "plane-wave":
        _keys(spec, ("kind", "k"), ("kind", "k"), where)
        k = _num(spec, "k", where)
        return sample_snapshots(lambda x, t: np.exp(1j * (k * x - k * k * t)), g, tg)
    if kind == "zero-mode":
        _keys(spec, ("kind",), ("kind",), where)
        if built.kind != "first-order":
            raise ConfigError("invalid-source", f"{where}.kind: zero-mode needs a first-order family")
        return sample_snapshots(F.zero_mode(built.family), g, tg)
    if kind == "equilibrium":
        _keys(spec, ("kind",), ("kind",), where)
        if built.kind != "fokker-planck":
            raise ConfigError("invalid-source", f"{where}.kind: equilibrium needs fokker-planck")
        U2 = built.extras["fp"].U2
        P0 = np.exp(-U2(g.x, tg.t0))
        P0 = P0 / (l2(np.sqrt(P0), g.h) ** 2)
        psi0 = ComplexField(g, P0 * np.exp(U2(g.x, tg.t0) / 2))
        return propagate(built.V_source, psi0, tg, "diffusion")
    raise ConfigError("invalid-source", f"{where}.kind: unknown source {kind!r}")


# ---------------------------------------------------------------- checks


def _tests(spec, g, where):
    out = []
    for i, t in enumerate(spec):
        t = dict(t, kind="packet")
        f = _packet(t, f"{where}[{i}]")
        out.append(ComplexField(g, f(g.x)))
    return out


def _check_intertwining(spec, ctx, where):
    _keys(spec, ("kind", "tol"), ("kind",), where)
    if ctx.built.pair is None:
        raise ConfigError("invalid-check", f"{where}: family has no partner pair")
    rep = check_intertwining(ctx.built.pair, ctx.source(), _num(spec, "tol", where, TOL_PROPAGATED))
    ctx.fields["psi1"] = map_snapshots(ctx.built.pair.charge, ctx.source())
    return rep


def _check_symmetry(spec, ctx, where):
    _keys(spec, ("kind", "operator", "tests", "tol", "dt", "steps", "t0", "min"),
          ("kind", "operator", "tests"), where)
    name = spec["operator"]
    if name not in ctx.built.symmetries:
        raise ConfigError("invalid-operator", f"{where}.operator: {name!r} not available for "
                          f"{ctx.built.kind} (have {sorted(ctx.built.symmetries)})")
    R, V = ctx.built.symmetries[name]
    tg = TimeGrid(_num(spec, "t0", where, ctx.tg.t0), _num(spec, "dt", where, 1e-4),
                  _int(spec, "steps", where, 2))
    tests = _tests(spec["tests"], ctx.built.grid, f"{where}.tests")
    rep = check_symmetry(V, R, tests, tg, _num(spec, "tol", where, TOL_COMPOSED),
                         kind=ctx.built.equation)
    if "min" in spec:
        # discrimination: the operator must fail by at least ``min``
        lo = _num(spec, "min", where)
        rep.entries = [type(e)(f"{name}:{e.name}>=min", e.value, lo, e.value >= lo, e.interior,
                               "lower bound") for e in rep.entries]
    else:
        for e in rep.entries:
            e.name = f"{name}:{e.name}"
    return rep


def _check_zero_mode(spec, ctx, where):
    _keys(spec, ("kind", "tol", "t", "expect_normalizable"), ("kind",), where)
    if ctx.built.kind != "first-order":
        raise ConfigError("invalid-check", f"{where}: zero-mode needs a first-order family")
    rep = zero_mode_check(ctx.built.family, ctx.built.grid, _num(spec, "t", where, ctx.tg.t0),
                          _num(spec, "tol", where, TOL_IDENTITY))
    if "expect_normalizable" in spec:
        want = bool(spec["expect_normalizable"])
        got = rep.flags["normalizable"]
        rep.add("normalizable-classification", float(got != want), 0.0,
                note=f"normalizable={got}")
    return rep


def _check_norm_identity(spec, ctx, where):
    _keys(spec, ("kind", "tol", "count", "seed", "t", "window", "modes"), ("kind",), where)
    if ctx.built.kind != "nonstat":
        raise ConfigError("invalid-check", f"{where}: norm-identity needs a nonstat family")
    g = ctx.built.grid
    lam = ctx.built.family.lambda0
    tol = _num(spec, "tol", where, TOL_COMPOSED)
    t = _num(spec, "t", where, ctx.tg.t0)
    rep = VerificationReport()
    if "window" in spec:
        a, b = (float(v) for v in spec["window"])
        L = b - a
        for j in spec.get("modes", [0]):
            q = 2 * np.pi * int(j) / L
            psi = ComplexField(g, np.exp(1j * q * g.x) / np.sqrt(L))
            r = check_norm_identity(ctx.built.pair, psi, lam, t, energy=q * q, window=(a, b), tol=tol)
            for e in r.entries:
                e.name = f"mode[{j}]:{e.name}"
            rep.extend(r)
        return rep
    rng = np.random.default_rng(_int(spec, "seed", where, 0))
    span = g.x_max - g.x_min
    mid = 0.5 * (g.x_min + g.x_max)
    for i in range(_int(spec, "count", where, 5)):
        c = mid + rng.uniform(-0.15, 0.15) * span
        w = rng.uniform(0.6, 1.5)
        k = rng.uniform(-2.0, 2.0)
        v = np.exp(-(g.x - c) ** 2 / (2 * w * w) + 1j * k * g.x)
        from .fields import EDGE
        v = v / l2(v[EDGE:g.n - EDGE], g.h)
        r = check_norm_identity(ctx.built.pair, ComplexField(g, v), lam, t, tol=tol)
        for e in r.entries:
            e.name = f"packet[{i}]:{e.name}"
        rep.extend(r)
    return rep


def _check_ode_residual(spec, ctx, where):
    _keys(spec, ("kind", "tol"), ("kind",), where)
    if not ctx.built.residuals:
        raise ConfigError("invalid-check", f"{where}: family has no ODE residual")
    rep = VerificationReport()
    tol = _num(spec, "tol", where, TOL_SINGLE)
    for name, val in ctx.built.residuals:
        rep.add(name, val, tol)
    sol = ctx.built.extras.get("solution")
    if sol is not None:
        rep.flags["rk4-error-estimate"] = sol.error_estimate
        rep.flags["truncation"] = sol.truncation
    return rep


def _check_route(spec, ctx, where):
    _keys(spec, ("kind", "tol"), ("kind",), where)
    if ctx.built.kind != "painleve4":
        raise ConfigError("invalid-check", f"{where}: route-agreement needs a painleve4 family")
    rep = VerificationReport()
    rep.add("route-agreement", ctx.built.extras["route_agreement"],
            _num(spec, "tol", where, TOL_IDENTITY))
    return rep


def _check_nonstat(spec, ctx, where):
    _keys(spec, ("kind", "tol", "v2_tol", "t_max", "samples"), ("kind",), where)
    if ctx.built.kind != "nonstat":
        raise ConfigError("invalid-check", f"{where}: nonstat-constraints needs a nonstat family")
    times = np.linspace(ctx.tg.t0, _num(spec, "t_max", where, ctx.tg.t0 + 1.0),
                        _int(spec, "samples", where, 5))
    return check_nonstat(ctx.built.family, ctx.built.grid, times,
                         _num(spec, "tol", where, TOL_SINGLE), _num(spec, "v2_tol", where, TOL_IDENTITY))


def _check_reflectionless(spec, ctx, where):
    _keys(spec, ("kind", "k", "tol", "windows"), ("kind", "k"), where)
    k = _num(spec, "k", where)
    g = ctx.built.grid
    src = sample_snapshots(lambda x, t: np.exp(1j * (k * x - k * k * t)), g, ctx.tg)
    mapped = map_snapshots(ctx.built.pair.charge, src)
    windows = spec.get("windows", [[-18.0, -8.0], [8.0, 18.0]])
    ratio = max(reflection_ratio(mapped.field(i), k, windows) for i in range(len(mapped)))
    rep = VerificationReport()
    rep.add("counter-propagating-ratio", ratio, _num(spec, "tol", where, 1e-3))
    return rep


def _check_norm_drift(spec, ctx, where):
    _keys(spec, ("kind", "tol"), ("kind",), where)
    s = ctx.source()
    if s.norms is None:
        raise ConfigError("invalid-check", f"{where}: source was not propagated")
    rep = VerificationReport()
    rep.add("norm-drift", float(np.max(np.abs(s.norms - s.norms[0]))),
            _num(spec, "tol", where, 1e-8))
    rep.flags["boundary-leak"] = s.flags.get("boundary-leak", False)
    return rep


def _free_gaussian(width, k=0.0):
    def psi(x, t):
        a = 1 + 2j * t / width ** 2
        return (np.pi * width ** 2) ** -0.25 / np.sqrt(a) * np.exp(
            -(x - 2 * k * t) ** 2 / (2 * width ** 2 * a) + 1j * k * x - 1j * k * k * t
            + 0j * x)
    return psi


def _check_free_gaussian(spec, ctx, where):
    _keys(spec, ("kind", "width", "tol", "order_tol"), ("kind", "width"), where)
    g, tg = ctx.built.grid, ctx.tg
    w = _num(spec, "width", where)
    exact = _free_gaussian(w)
    V0 = lambda x, t: np.zeros_like(x)  # noqa: E731
    psi0 = ComplexField(g, exact(g.x, tg.t0))
    run = propagate(V0, psi0, tg, stationary=True, record_every=tg.steps)
    rep = VerificationReport()
    rep.add("free-gaussian-error", l2(run.values[-1] - exact(g.x, tg.t_end), g.h),
            _num(spec, "tol", where, 1e-5))
    rep.add("norm-drift", float(np.max(np.abs(run.norms - run.norms[0]))), 1e-8)

    def err(grid, t):
        r = propagate(V0, ComplexField(grid, exact(grid.x, t.t0)), t, stationary=True,
                      record_every=t.steps)
        return l2(r.values[-1] - exact(grid.x, t.t_end), grid.h)

    levels = [(g, TimeGrid(tg.t0, tg.dt * 4 / 2 ** i, tg.steps * 2 ** i // 4)) for i in range(3)]
    if tg.steps % 4:
        raise ConfigError("invalid-steps", f"{where}: time.steps must be divisible by 4")
    conv = convergence_study(err, levels, 2.0)
    order_tol = _num(spec, "order_tol", where, 0.3)
    for c in conv.convergence:
        c.passed = bool(abs(c.order - 2.0) <= order_tol)
    rep.extend(conv)
    return rep


def _check_separated(spec, ctx, where):
    _keys(spec, ("kind", "tol", "level", "branch", "dt", "steps"), ("kind",), where)
    if ctx.built.kind != "first-order":
        raise ConfigError("invalid-check", f"{where}: needs a first-order family")
    g = ctx.built.grid
    tg = TimeGrid(ctx.tg.t0, _num(spec, "dt", where, ctx.tg.dt), _int(spec, "steps", where, ctx.tg.steps))
    branch, level = _int(spec, "branch", where, 2), _int(spec, "level", where, 1)
    eig = stationary_eigensolve(ctx.built.family.branch_potential(branch), g, level + 1, order=4)
    sep = SeparatedSolutionSpec(ctx.built.family, branch, level, eig)
    ends = separated_solution(sep, TimeGrid(tg.t0, tg.t_end - tg.t0, 1), g)
    V = ctx.built.V_source if branch == 2 else ctx.built.V_target
    run = propagate(V, ends.field(0), tg, record_every=tg.steps)
    rep = VerificationReport()
    rep.add("separated-vs-propagated", l2(run.values[-1] - ends.values[-1], g.h),
            _num(spec, "tol", where, TOL_PROPAGATED))
    return rep


def _check_fokker_planck(spec, ctx, where):
    _keys(spec, ("kind", "tol", "positivity", "drift_tol"), ("kind",), where)
    if ctx.built.kind != "fokker-planck":
        raise ConfigError("invalid-check", f"{where}: needs a fokker-planck family")
    g = ctx.built.grid
    fp = ctx.built.extras["fp"]
    psi = ctx.source()
    P = fp_transform(psi, fp.U2, "diffusion-to-fp")
    Pv = np.real(P.values)
    rep = VerificationReport()
    rep.add("equilibrium-drift", float(np.max(l2(Pv - Pv[0], g.h))),
            _num(spec, "tol", where, TOL_SINGLE))
    rep.add("min-P", float(max(-np.min(Pv), 0.0)), _num(spec, "positivity", where, 1e-10),
            note="largest negative excursion")
    chi = ctx.built.family.chi
    ts = np.linspace(-1.0, 1.0, 9)
    drift = max(float(np.max(np.abs(fp.U2(g.x, t) - 2 * chi(g.x, -t)))) for t in ts)
    rep.add("U2-time-reversal", drift, _num(spec, "drift_tol", where, 1e-12))
    return rep


CHECKS = {
    "intertwining": _check_intertwining,
    "symmetry": _check_symmetry,
    "zero-mode": _check_zero_mode,
    "norm-identity": _check_norm_identity,
    "ode-residual": _check_ode_residual,
    "route-agreement": _check_route,
    "nonstat-constraints": _check_nonstat,
    "reflectionless": _check_reflectionless,
    "norm-drift": _check_norm_drift,
    "free-gaussian": _check_free_gaussian,
    "separated-vs-propagated": _check_separated,
    "fokker-planck": _check_fokker_planck,
}


# ---------------------------------------------------------------- scenario


class _Context:
    def __init__(self, built, tg, source_spec):
        self.built, self.tg = built, tg
        self._source_spec = source_spec
        self._source = None
        self.fields = {}

    def source(self):
        if self._source is None:
            if self._source_spec is None:
                raise ConfigError("missing-key", "source: this check needs a solution source")
            self._source = build_source(self._source_spec, self.built, self.tg)
            self.fields["psi2"] = self._source
        return self._source


@dataclass
class Scenario:
    name: str
    config: dict
    built: Built
    time_grid: TimeGrid
    checks: list
    output: dict = None


def parse_config(cfg):
    """Validate a scenario dict and build its family; raises ConfigError on bad input."""
    _keys(cfg, ("name", "family", "grid", "time", "source", "checks", "output"),
          ("family", "grid", "time", "checks"), "config")
    grid = parse_grid(cfg["grid"])
    tg = parse_time(cfg["time"])
    checks = cfg["checks"]
    if not isinstance(checks, list) or not checks:
        raise ConfigError("invalid-config", "config.checks: expected a non-empty list")
    for i, c in enumerate(checks):
        if not isinstance(c, dict) or c.get("kind") not in CHECKS:
            raise ConfigError("invalid-check", f"config.checks[{i}].kind: unknown check "
                              f"{c.get('kind') if isinstance(c, dict) else c!r}")
    out = cfg.get("output")
    if out is not None:
        _keys(out, ("dir", "every"), (), "config.output")
        if "every" in out and _int(out, "every", "config.output") < 1:
            raise ConfigError("invalid-value", "config.output.every: must be >= 1")
    built = build_family(cfg["family"], grid)
    return Scenario(str(cfg.get("name", "scenario")), cfg, built, tg, checks, out)


def run_scenario(scn, threads=None):
    """Run all checks; returns ``(report, fields)``."""
    ctx = _Context(scn.built, scn.time_grid, scn.config.get("source"))
    if any(c["kind"] in ("intertwining", "norm-drift", "fokker-planck") for c in scn.checks):
        ctx.source()
    threads = threads or _threads()

    def one(item):
        i, c = item
        return CHECKS[c["kind"]](c, ctx, f"config.checks[{i}]")

    items = list(enumerate(scn.checks))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, items))
    else:
        parts = [one(it) for it in items]
    rep = VerificationReport(scn.name, dict(scn.built.provenance))
    for (i, c), part in zip(items, parts):
        for e in part.entries:
            e.name = f"{c['kind']}:{e.name}"
        rep.extend(part)
    return rep, ctx.fields


def _threads():
    raw = os.environ.get("INTERTWINE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("invalid-env", f"INTERTWINE_THREADS={raw!r} is not an integer") from None
    return max(1, n)


# ---------------------------------------------------------------- built-in catalog

_HARMONIC_K = {"kind": "polynomial", "coeffs": [0, 0, 0.5]}
_COSH_F1 = {"kind": "cosh", "A": 0.7071067811865476, "kappa": 1.0}
_GAUSS3 = [{"center": -1.0, "width": 1.0, "k": 0.5}, {"center": 0.0, "width": 0.8, "k": 0.5},
           {"center": 1.5, "width": 1.2, "k": 0.5}]
_PIV_TESTS = [{"center": 4.5, "width": 0.6, "k": 0.5}, {"center": 5.0, "width": 0.65, "k": 0.5},
              {"center": 5.5, "width": 0.7, "k": 0.5}]

BUILTINS = {
    "harmonic-first-order": ("Eq. V_1/2", {
        "family": {"kind": "first-order", "K": _HARMONIC_K},
        "grid": {"x_min": -10, "x_max": 10, "n": 2001},
        "time": {"dt": 1e-4, "steps": 2000},
        "source": {"kind": "separated", "branch": 2, "level": 1, "propagate": True},
        "checks": [{"kind": "intertwining", "tol": 1e-5}, {"kind": "norm-drift"},
                   {"kind": "zero-mode", "expect_normalizable": True},
                   {"kind": "symmetry", "operator": "q+q-", "tests": _GAUSS3, "steps": 4},
                   {"kind": "symmetry", "operator": "q-q+", "tests": _GAUSS3, "steps": 4}]}),
    "galilei-first-order": ("Eq. V_1/2, Galilei boost", {
        "family": {"kind": "first-order", "K": _HARMONIC_K,
                   "mu": {"kind": "polynomial", "coeffs": [0, 0.8]},
                   "gamma": {"kind": "polynomial", "coeffs": [0, 0.16]}},
        "grid": {"x_min": -12, "x_max": 12, "n": 2401},
        "time": {"dt": 1e-4, "steps": 1000},
        "source": {"kind": "separated", "branch": 2, "level": 2},
        "checks": [{"kind": "intertwining"},
                   {"kind": "symmetry", "operator": "q+q-", "tests": _GAUSS3, "steps": 4}]}),
    "expanding-first-order": ("Eq. trafo, R-separation", {
        "family": {"kind": "first-order", "K": _HARMONIC_K,
                   "rho": {"kind": "exponential", "A": 1, "lam": 1}},
        "grid": {"x_min": -15, "x_max": 15, "n": 3001},
        "time": {"dt": 1e-4, "steps": 20},
        "source": {"kind": "separated", "branch": 2, "level": 1},
        "checks": [{"kind": "separated-vs-propagated", "tol": 1e-4, "dt": 1e-4, "steps": 5000},
                   {"kind": "intertwining"}, {"kind": "zero-mode", "t": 0.5}]}),
    "zero-mode-quartic": ("zero modes, normalization integral", {
        "family": {"kind": "first-order", "K": {"kind": "polynomial", "coeffs": [0, 0, 0, 0, 0.25]}},
        "grid": {"x_min": -6, "x_max": 6, "n": 2401},
        "time": {"dt": 1e-4, "steps": 4},
        "source": {"kind": "zero-mode"},
        "checks": [{"kind": "zero-mode", "expect_normalizable": True},
                   {"kind": "intertwining", "tol": 1e-4}]}),
    "symmetry-traveling": ("Eq. R, Eq. delta+zeta", {
        "family": {"kind": "symmetry", "nu": 0.6, "Phi": {"kind": "polynomial", "coeffs": [0, 0, 0.25]}},
        "grid": {"x_min": -12, "x_max": 12, "n": 2401},
        "time": {"t0": 0.2, "dt": 1e-4, "steps": 4},
        "checks": [{"kind": "symmetry", "operator": "R", "tests": _GAUSS3, "steps": 4}]}),
    "symmetry-breathing": ("Eq. V", {
        "family": {"kind": "symmetry", "omega": {"kind": "polynomial", "coeffs": [1, 0.3, 0.1]},
                   "nu": {"kind": "polynomial", "coeffs": [0.2, 0.5]},
                   "Phi": {"kind": "polynomial", "coeffs": [0, 0, 0.25]}},
        "grid": {"x_min": -12, "x_max": 12, "n": 2401},
        "time": {"t0": 0.3, "dt": 1e-4, "steps": 4},
        "checks": [{"kind": "symmetry", "operator": "R", "tests": _GAUSS3, "steps": 4}]}),
    "fokker-planck-equilibrium": ("Eq. U1andU2, Eq. VvsU", {
        "family": {"kind": "fokker-planck", "chi": [[{"kind": "polynomial", "coeffs": [0, 0, 0.5]}, 1]]},
        "grid": {"x_min": -10, "x_max": 10, "n": 2001},
        "time": {"dt": 1e-3, "steps": 1000},
        "source": {"kind": "equilibrium"},
        "checks": [{"kind": "fokker-planck"}]}),
    "painleve4-closed-form": ("Eq. 27, Eq. 28, Eq. 30", {
        "family": {"kind": "painleve4", "f": {"kind": "power", "A": 0.5, "p": -1},
                   "m": 1, "a": -1, "d": -1},
        "grid": {"x_min": 0.5, "x_max": 12.5, "n": 1601},
        "time": {"t0": 0.2, "dt": 1e-4, "steps": 4},
        "checks": [{"kind": "ode-residual", "tol": 1e-9}, {"kind": "route-agreement"},
                   {"kind": "symmetry", "operator": "R1", "tests": _PIV_TESTS, "dt": 1e-3, "steps": 4},
                   {"kind": "symmetry", "operator": "R2", "tests": _PIV_TESTS, "dt": 1e-3, "steps": 4},
                   {"kind": "symmetry", "operator": "R2-printed", "tests": _PIV_TESTS,
                    "dt": 1e-3, "steps": 4, "min": 1e-2}]}),
    "painleve4-riccati": ("Eq. 29, Riccati branch d = -a^2", {
        "family": {"kind": "painleve4", "m": 1, "a": 2, "d": -4,
                   "f": {"kind": "riccati", "x_start": 3.0, "y_start": -0.3819660112501051}},
        "grid": {"x_min": 3, "x_max": 8, "n": 1001},
        "time": {"dt": 1e-4, "steps": 4},
        "checks": [{"kind": "ode-residual", "tol": 1e-6}, {"kind": "route-agreement"}]}),
    "painleve2-inverse-square": ("Eq. 31, Eq. 32, W = 1/x", {
        "family": {"kind": "painleve2", "W": {"kind": "power", "A": 1, "p": -1},
                   "mtilde": 1, "k": -4, "n": 0},
        "grid": {"x_min": 0.5, "x_max": 12.5, "n": 1601},
        "time": {"t0": 0.2, "dt": 1e-4, "steps": 4},
        "source": {"kind": "packet", "center": 6.0, "width": 0.7, "k": 1.0},
        "checks": [{"kind": "ode-residual", "tol": 1e-9}, {"kind": "intertwining"},
                   {"kind": "symmetry", "operator": "R~1", "tests": _PIV_TESTS, "dt": 1e-3, "steps": 4},
                   {"kind": "symmetry", "operator": "R~2", "tests": _PIV_TESTS, "dt": 1e-3, "steps": 4}]}),
    "painleve2-riccati": ("Eq. 32, Riccati branch k = 2 mtilde", {
        "family": {"kind": "painleve2", "mtilde": -0.5, "k": -1, "n": 0.3,
                   "W": {"kind": "riccati", "x_start": 1.0, "y_start": -1.0}},
        "grid": {"x_min": 1, "x_max": 6, "n": 1001},
        "time": {"dt": 1e-4, "steps": 4},
        "checks": [{"kind": "ode-residual", "tol": 1e-6}]}),
    "fourth-order-riccati": ("Eq. 36, Eq. 39, Eq. 40, Eq. 41", {
        "family": {"kind": "fourth-order", "beta": 1, "lambda0": 0.3,
                   "f": {"kind": "riccati", "x_start": 0.0, "y_start": 0.0, "d": 0.0}},
        "grid": {"x_min": -4, "x_max": 4, "n": 1601},
        "time": {"dt": 2.5e-5, "steps": 200},
        "source": {"kind": "packet", "center": 0.0, "width": 0.5, "k": 1.0},
        "checks": [{"kind": "ode-residual", "tol": 1e-6}, {"kind": "intertwining"}]}),
    "reflectionless-nonstat": ("§4.1", {
        "family": {"kind": "nonstat", "f1": _COSH_F1, "sigma": 0.5, "delta": 0.5, "lambda0": 1},
        "grid": {"x_min": -20, "x_max": 20, "n": 4001},
        "time": {"dt": 1e-4, "steps": 4},
        "source": {"kind": "plane-wave", "k": 1.0},
        "checks": [{"kind": "nonstat-constraints"}, {"kind": "intertwining"},
                   {"kind": "reflectionless", "k": 1.0},
                   {"kind": "norm-identity", "count": 5, "seed": 1},
                   {"kind": "symmetry", "operator": "R2", "tests": _GAUSS3, "steps": 4}]}),
    "nonstat-periodic-box": ("Eq. norm, Eq. 4.9", {
        "family": {"kind": "nonstat", "lambda0": 2, "sigma": 0.5, "delta": 0.5,
                   "f1": {"kind": "trig", "A": 0.7071067811865476, "omega": 1.4142135623730951,
                          "phase": -1.5707963267948966}},
        "grid": {"x_min": -17.771531752633464, "x_max": 17.771531752633464, "n": 8001},
        "time": {"t0": 0.2, "dt": 1e-4, "steps": 4},
        "checks": [{"kind": "norm-identity", "window": [0.0, 8.885765876316732],
                    "modes": [0, 1, 2]},
                   {"kind": "nonstat-constraints", "t_max": 1.0}]}),
    "td-oscillator-jackiw": ("Eq. 4.15, Jackiw transformation", {
        "family": {"kind": "td-oscillator", "rho": {"kind": "trig", "A": 1, "omega": 2},
                   "nested": {"f1": _COSH_F1, "sigma": 0.5, "delta": 0.5, "lambda0": 1}},
        "grid": {"x_min": -10, "x_max": 10, "n": 2001},
        "time": {"dt": 1e-4, "steps": 1000},
        "source": {"kind": "packet", "center": 1.0, "width": 0.8, "k": 0.5},
        "checks": [{"kind": "intertwining"}, {"kind": "norm-drift", "tol": 1e-8}]}),
    "crank-nicolson-free": ("Eq. S, free packet", {
        "family": {"kind": "first-order", "K": 0},
        "grid": {"x_min": -20, "x_max": 20, "n": 4001},
        "time": {"dt": 1e-4, "steps": 10000},
        "checks": [{"kind": "free-gaussian", "width": 1.0}]}),
}


def builtin_config(name):
    if name not in BUILTINS:
        raise ConfigError("unknown-builtin", f"no built-in scenario named {name!r}")
    cfg = copy.deepcopy(BUILTINS[name][1])
    cfg["name"] = name
    return cfg


def catalog():
    """Lines ``name (reference)`` for every built-in."""
    return [f"{name} ({ref})" for name, (ref, _) in BUILTINS.items()]

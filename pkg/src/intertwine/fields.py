"""Uniform grids, complex fields, finite-difference stencils and quadrature."""

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError

log = logging.getLogger(__name__)

# Points at each edge whose value is produced by one-sided stencils.
EDGE = 4


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n: int
    h: float

    @property
    def x(self):
        return _nodes(self.x_min, self.h, self.n)

    def point(self, i):
        return self.x_min + i * self.h

    def index_of(self, x0, tol=1e-9):
        """Index of the node at ``x0``; raises if ``x0`` is not a node."""
        i = int(round((x0 - self.x_min) / self.h))
        if i < 0 or i >= self.n or abs(self.point(i) - x0) > tol * max(1.0, abs(x0)):
            raise ConfigError("not-a-node", f"x={x0} is not a grid point")
        return i

    def sub(self, lo, hi):
        """Grid made of nodes lo..hi inclusive."""
        return Grid1D(self.point(lo), self.point(hi), hi - lo + 1, self.h)


@lru_cache(maxsize=64)
def _nodes_cached(x_min, h, n):
    x = x_min + np.arange(n) * h
    x.flags.writeable = False
    return x


def _nodes(x_min, h, n):
    return _nodes_cached(float(x_min), float(h), int(n))


def make_grid(x_min, x_max, n):
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or not x_min < x_max:
        raise ConfigError("invalid-extent", f"need x_min < x_max, got {x_min}, {x_max}")
    if int(n) != n or n < 9:
        raise ConfigError("too-few-points", f"need n >= 9 points, got {n}")
    n = int(n)
    return Grid1D(float(x_min), float(x_max), n, (x_max - x_min) / (n - 1))


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("invalid-dt", f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError("invalid-steps", f"steps must be >= 1, got {self.steps}")

    def time(self, k):
        return self.t0 + k * self.dt

    @property
    def times(self):
        return self.t0 + np.arange(self.steps + 1) * self.dt

    @property
    def t_end(self):
        return self.time(self.steps)


@dataclass(frozen=True)
class ComplexField:
    """Samples of a complex function on a grid.

    ``band`` counts the points at each edge whose values came from one-sided
    or repeatedly applied stencils and should not be trusted.
    """

    grid: Grid1D
    values: np.ndarray
    band: int = 0
    reduced_accuracy: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ConfigError("length-mismatch", f"expected {self.grid.n} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("non-finite", "field contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid, func):
        return cls(grid, np.asarray(func(grid.x), dtype=complex) * np.ones(grid.n))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n, dtype=complex))

    @property
    def interior(self):
        """Slice of trustworthy points."""
        return slice(self.band, self.grid.n - self.band)

    def with_values(self, values, band=None):
        return ComplexField(self.grid, values, self.band if band is None else band,
                            self.reduced_accuracy)

    def __add__(self, other):
        _same_grid(self, other)
        return ComplexField(self.grid, self.values + other.values, max(self.band, other.band))

    def __sub__(self, other):
        _same_grid(self, other)
        return ComplexField(self.grid, self.values - other.values, max(self.band, other.band))

    def scale(self, c):
        return self.with_values(c * self.values)


@dataclass(frozen=True)
class Snapshots:
    """Time-ordered field samples; ``values[k]`` lives at ``time_grid.time(k)``."""

    grid: Grid1D
    time_grid: TimeGrid
    values: np.ndarray
    kind: str = "schrodinger"
    band: int = 0
    norms: np.ndarray = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.time_grid.steps + 1, self.grid.n):
            raise ConfigError("length-mismatch",
                              f"snapshot array {v.shape} does not match grids")
        if self.kind not in ("schrodinger", "diffusion"):
            raise ConfigError("invalid-kind", self.kind)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def field(self, k):
        return ComplexField(self.grid, self.values[k], self.band)

    @property
    def times(self):
        return self.time_grid.times


def sample_snapshots(func, grid, tg, kind="schrodinger"):
    """Snapshots of an analytic ``func(x, t)``."""
    x = grid.x
    vals = np.array([np.broadcast_to(func(x, t), x.shape) for t in tg.times], dtype=complex)
    return Snapshots(grid, tg, vals, kind)


def _same_grid(f, g):
    if f.grid != g.grid:
        raise ConfigError("grid-mismatch", "fields live on different grids")


# ---------------------------------------------------------------- stencils

def fd_weights(z, nodes, m):
    """Fornberg weights: ``w[k, j]`` approximates the k-th derivative at ``z``."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@lru_cache(maxsize=None)
def _stencils(order):
    """Integer-offset weights: (central offsets, central w, per-edge-point (offsets, w))."""
    half = 2 if order <= 2 else 3
    offs = np.arange(-half, half + 1)
    central = fd_weights(0.0, offs, order)[order]
    width = order + 4
    left = []
    for i in range(EDGE):
        nodes = np.arange(width)
        left.append((nodes - i, fd_weights(float(i), nodes, order)[order]))
    return offs, central, left


def derivative_array(values, h, order):
    """Derivative along the last axis with 4th-order stencils."""
    if order not in (1, 2, 3, 4):
        raise ConfigError("unsupported-order", f"derivative order must be 1..4, got {order}")
    v = np.asarray(values)
    n = v.shape[-1]
    if n < 9:
        raise ConfigError("too-few-points", "need at least 9 points")
    offs, central, left = _stencils(order)
    half = offs[-1]
    out = np.zeros(v.shape, dtype=np.result_type(v, float))
    # Differences against the centre value make constants map to exact zeros.
    centre = v[..., half:n - half]
    acc = np.zeros(centre.shape, dtype=out.dtype)
    for o, w in zip(offs, central):
        if o != 0:
            acc += w * (v[..., half + o:n - half + o] - centre)
    out[..., half:n - half] = acc
    for i, (rel, w) in enumerate(left):
        lo = v[..., i:i + 1]
        out[..., i] = np.tensordot(v[..., i + rel] - lo, w, axes=([-1], [0]))
        # mirror: right edge uses reversed nodes, odd orders flip sign
        j = n - 1 - i
        hi = v[..., j:j + 1]
        out[..., j] = np.tensordot(v[..., j - rel] - hi, w, axes=([-1], [0])) * (-1) ** order
    return out / h ** order


def differentiate(f, order):
    """Derivative of a field; the unreliable edge band grows by 4 points."""
    vals = derivative_array(f.values, f.grid.h, order)
    return ComplexField(f.grid, vals, min(f.band + EDGE, f.grid.n // 2), f.reduced_accuracy)


# ---------------------------------------------------------------- quadrature

@lru_cache(maxsize=64)
def _simpson_weights(n):
    w = np.ones(n)
    if n % 2 == 1:
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w /= 3.0
    else:
        m = n - 1
        w[:m] = _simpson_weights(m) if m >= 3 else 0.5
        w[m - 1] += 0.5
        w[m] = 0.5
    w.flags.writeable = False
    return w


def simpson_weights(n, h, warn=True):
    if warn and n % 2 == 0:
        log.warning("even point count %d: trapezoid rule on the last interval", n)
    return h * _simpson_weights(n)


def integrate(values, h):
    """Composite Simpson integral along the last axis."""
    v = np.asarray(values)
    n = v.shape[-1]
    if n < 3:
        return h * np.sum(v, axis=-1) - 0.5 * h * (v[..., 0] + v[..., -1])
    return v @ simpson_weights(n, h, warn=False)


def inner_product(f, g):
    """Simpson approximation of the integral of conj(f) g."""
    _same_grid(f, g)
    w = simpson_weights(f.grid.n, f.grid.h)
    return complex(np.sum(w * np.conj(f.values) * g.values))


def norm(f, sl=None):
    """L2 norm, optionally over a slice of the grid."""
    v = f.values if sl is None else f.values[sl]
    return float(np.sqrt(integrate(np.abs(v) ** 2, f.grid.h)))


def l2(values, h):
    """L2 norm of raw samples along the last axis."""
    return np.sqrt(np.abs(integrate(np.abs(np.asarray(values)) ** 2, h)))


def cumulative_integral(values, h):
    """Running integral from the first node, exact for cubics.

    Each interval uses the cubic through its four nearest nodes, so the
    result is 4th-order accurate like composite Simpson but defined at every
    node, not only at even ones.
    """
    y = np.asarray(values)
    n = y.shape[-1]
    if n < 4:
        raise ConfigError("too-few-points", "cumulative integral needs 4 points")
    seg = np.empty(y.shape[:-1] + (n - 1,), dtype=np.result_type(y, float))
    seg[..., 1:n - 2] = (-y[..., 0:n - 3] + 13 * y[..., 1:n - 2]
                         + 13 * y[..., 2:n - 1] - y[..., 3:n]) / 24
    seg[..., 0] = (9 * y[..., 0] + 19 * y[..., 1] - 5 * y[..., 2] + y[..., 3]) / 24
    seg[..., n - 2] = (9 * y[..., n - 1] + 19 * y[..., n - 2] - 5 * y[..., n - 3]
                       + y[..., n - 4]) / 24
    out = np.zeros(y.shape, dtype=seg.dtype)
    out[..., 1:] = np.cumsum(seg, axis=-1) * h
    return out

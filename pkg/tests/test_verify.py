import numpy as np
import pytest

from intertwine import families as F
from intertwine import profiles as P
from intertwine.errors import ConfigError, DomainError
from intertwine.fields import ComplexField, TimeGrid, l2, make_grid, sample_snapshots
from intertwine.operators import Hamiltonian, SymmetryOpSpec, schrodinger_residual
from intertwine.propagate import propagate
from intertwine.verify import (VerificationReport, check_intertwining, check_nonstat, check_norm_identity,
                               check_symmetry, convergence_study, normalization_integral,
                               reflection_ratio, zero_mode_check)


def harmonic_pair():
    return F.first_order_pair(F.FirstOrderFamily(1.0, 0.0, 0.0, P.Polynomial([0, 0, 0.5])))


def phi1(x, t):
    return np.sqrt(2) * np.pi ** -0.25 * x * np.exp(-x * x / 2 - 2j * t)


def test_intertwining_harmonic_image(line_grid):
    src = sample_snapshots(phi1, line_grid, TimeGrid(0, 1e-4, 4))
    image = lambda x, t: np.sqrt(2) * np.pi ** -0.25 * np.exp(-x * x / 2 - 2j * t)  # noqa: E731
    rep = check_intertwining(harmonic_pair(), src, tol=1e-5, image=image)
    assert rep.passed
    assert rep.entry("image-match").value < 1e-5
    assert rep.entry("mapped-residual").value < 1e-5


def test_intertwining_zero_mode_is_kernel_element(line_grid):
    src = sample_snapshots(lambda x, t: np.exp(-x * x / 2 + 0 * t), line_grid, TimeGrid(0, 1e-4, 4))
    rep = check_intertwining(harmonic_pair(), src)
    assert rep.flags["kernel-element"] is True
    assert rep.passed


def test_intertwining_adjoint_direction(line_grid):
    # ground state of V1 = x^2 + 1 (energy 2) maps back under q-
    src = sample_snapshots(phi1, line_grid, TimeGrid(0, 1e-4, 4))
    adj = sample_snapshots(lambda x, t: np.pi ** -0.25 * np.exp(-x * x / 2 - 2j * t), line_grid,
                           TimeGrid(0, 1e-4, 4))
    rep = check_intertwining(harmonic_pair(), src, adjoint_source=adj)
    assert rep.entry("adjoint-mapped-residual").value < 1e-5


def test_intertwining_rejects_non_solution(line_grid):
    src = sample_snapshots(lambda x, t: np.exp(-x * x / 2 + 1j * t), line_grid, TimeGrid(0, 1e-4, 4))
    with pytest.raises(DomainError) as exc:
        check_intertwining(harmonic_pair(), src)
    assert exc.value.code == "source-not-a-solution"


def test_nonstat_plane_wave_mapped_and_reflectionless():
    g = make_grid(-20, 20, 4001)
    fam = F.NonStatFamily(P.Cosh(1 / np.sqrt(2), 1), 0.5, 0.5, 1.0)
    pair = F.nonstat_stationary_pair(fam)
    src = sample_snapshots(lambda x, t: np.exp(1j * (x - t)), g, TimeGrid(0, 1e-4, 4))
    rep = check_intertwining(pair, src)
    assert rep.entry("mapped-residual").value < 1e-4
    from intertwine.operators import map_snapshots
    assert reflection_ratio(map_snapshots(pair.charge, src).field(2), 1.0) < 1e-3


def gaussians(g, centers=(-1.0, 0.5)):
    return [ComplexField(g, np.exp(-(g.x - c) ** 2 + 0.5j * g.x)) for c in centers]


def test_symmetry_hamiltonian_commutes():
    g = make_grid(-10, 10, 2001)
    Phi = lambda x, t: 0.5 * x * x + 0.1 * np.cos(x)  # noqa: E731
    rep = check_symmetry(Phi, SymmetryOpSpec([(1.0, Hamiltonian(Phi))]), gaussians(g), TimeGrid(0, 1e-4, 4))
    assert all(e.value < 1e-6 for e in rep.entries)


def test_symmetry_detects_non_symmetry():
    g = make_grid(-10, 10, 2001)
    rep = check_symmetry(lambda x, t: 0.5 * x * x, SymmetryOpSpec([(1.0, Hamiltonian(0.0))]),
                         gaussians(g), TimeGrid(0, 1e-4, 4))
    assert not rep.passed


def test_symmetry_traveling_family():
    v = 0.3
    b = F.symmetry_family_build(F.SymmetryFamily(1.0, 2 * v, P.Polynomial([0, 0, 0.25])))
    g = make_grid(-12, 12, 2401)
    rep = check_symmetry(b.V, b.R, gaussians(g), TimeGrid(0.2, 1e-4, 4))
    assert rep.passed


def test_symmetry_test_touching_boundary():
    g = make_grid(-5, 5, 501)
    with pytest.raises(DomainError) as exc:
        check_symmetry(0.0, SymmetryOpSpec([(1.0, Hamiltonian(0.0))]), gaussians(g, (4.8,)),
                       TimeGrid(0, 1e-4, 4))
    assert exc.value.code == "test-touches-boundary"


def nonstat_pair(lam=1.0, f1=None):
    fam = F.NonStatFamily(f1 or P.Cosh(1 / np.sqrt(2), 1), 0.5, 0.5, lam)
    return fam, F.nonstat_stationary_pair(fam)


def test_norm_identity_zero_energy_box_mode():
    L = 2 * np.pi * np.sqrt(2)
    fam, pair = nonstat_pair(2.0, P.Trig(1 / np.sqrt(2), np.sqrt(2), -np.pi / 2))
    g = make_grid(-2 * L, 2 * L, 8001)
    psi = ComplexField(g, np.full(g.n, 1 / np.sqrt(L)))
    rep = check_norm_identity(pair, psi, 2.0, t=0.2, energy=0.0, window=(0.0, L))
    assert abs(rep.flags["norms"]["q_psi_sq"] - 1.0) < 1e-5
    assert rep.passed


def test_norm_identity_gaussian():
    fam, pair = nonstat_pair()
    g = make_grid(-15, 15, 3001)
    v = np.exp(-(g.x - 0.4) ** 2 / 2 + 0.7j * g.x)
    v = v / l2(v[4:-4], g.h)
    rep = check_norm_identity(pair, ComplexField(g, v), 1.0, t=0.3)
    assert rep.entry("operator-form").value < 1e-5


def test_norm_identity_zero_field():
    fam, pair = nonstat_pair()
    g = make_grid(-5, 5, 501)
    rep = check_norm_identity(pair, ComplexField.zeros(g), 1.0)
    assert rep.entry("operator-form").value == 0
    assert rep.flags["norms"] == {"q_psi_sq": 0.0, "H2_psi_sq": 0.0}


def test_norm_identity_unnormalized():
    fam, pair = nonstat_pair()
    g = make_grid(-5, 5, 501)
    with pytest.raises(ConfigError) as exc:
        check_norm_identity(pair, ComplexField(g, 2 * np.exp(-g.x ** 2)), 1.0)
    assert exc.value.code == "unnormalized-input"


def first_order(K):
    return F.FirstOrderFamily(1.0, 0.0, 0.0, K)


def test_zero_mode_gaussian(line_grid):
    rep = zero_mode_check(first_order(P.Polynomial([0, 0, 0.5])), line_grid)
    assert rep.entry("annihilation").value < 1e-8
    assert rep.flags["normalizable"]
    assert rep.flags["normalization-integral"] == pytest.approx(np.sqrt(np.pi), abs=1e-8)


@pytest.mark.parametrize("K", [P.Polynomial([0, 0, 0, 1 / 3]), P.Polynomial([0.0])])
def test_zero_mode_not_normalizable(K):
    value, ok = normalization_integral(K)
    assert not ok and value == np.inf


def test_convergence_plane_wave_spatial_order():
    k = 2.0

    def residual(g, tg):
        s = sample_snapshots(lambda x, t: np.exp(1j * (k * x - k * k * t)), g, tg)
        return np.max(schrodinger_residual(0.0, s))

    tg = TimeGrid(0, 1e-5, 2)
    rep = convergence_study(residual, [(make_grid(-10, 10, n), tg) for n in (201, 401, 801)], 4.0)
    for c in rep.convergence:
        assert abs(c.ratio - 16) < 2
    assert rep.passed


def test_convergence_cn_time_order():
    g = make_grid(-20, 20, 4001)

    def err(grid, tg):
        w = lambda x, t: (1 + 2j * t) ** -0.5 * np.exp(-x * x / (2 * (1 + 2j * t)))  # noqa: E731
        run = propagate(0.0, ComplexField(grid, w(grid.x, 0)), tg, stationary=True, record_every=tg.steps)
        return l2(run.values[-1] - w(grid.x, tg.t_end), grid.h)

    rep = convergence_study(err, [(g, TimeGrid(0, 0.02, 10)), (g, TimeGrid(0, 0.01, 20))], 2.0)
    assert abs(rep.convergence[0].order - 2) < 0.3


def test_convergence_rejects_identical_levels():
    g = make_grid(0, 1, 11)
    with pytest.raises(ConfigError) as exc:
        convergence_study(lambda g, t: 1.0, [(g, None), (g, None)], 2.0)
    assert exc.value.code == "non-nested-grids"


def test_nonstat_constraints_and_regression():
    g = make_grid(-10, 10, 2001)
    fam, _ = nonstat_pair()
    rep = check_nonstat(fam, g, np.linspace(0, 1, 3))
    assert rep.passed
    bad = F.NonStatFamily(P.Cosh(1.0, 1), 0.5, 0.5, 1.0)
    rep = check_nonstat(bad, g, np.linspace(0, 1, 3))
    assert not rep.entry("max|V2|").passed


def test_report_serialisation():
    rep = VerificationReport("s", {"a": np.float64(1.5)})
    rep.add("x", 1e-9, 1e-8)
    d = rep.to_dict()
    assert d["pass"] is True and d["provenance"]["a"] == 1.5
    assert rep.entry("x").passed

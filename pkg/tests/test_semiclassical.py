import math

import numpy as np
import pytest

from breather_lab import semiclassical as sc
from breather_lab.analytic import BreatherSpec, breather_action
from breather_lab.experiments import harmonic_potential, uniform_field, uniform_field_action
from breather_lab.potentials import EMPotential
from breather_lab.residuals import refinement_study
from breather_lab.units import ComplexField, Grid, SpacetimePoint


def constant_u(u):
    return EMPotential(U=lambda t, x, y, z: np.full(np.broadcast(t, x, y, z).shape, u))


def field_on(grid, f):
    pts = grid.points()
    return ComplexField(grid, np.broadcast_to(f(pts.t, pts.x) + 0j, grid.shape))


FREE = EMPotential(scale=100.0)


def test_potential_contract():
    with pytest.raises(ValueError, match="scale"):
        EMPotential(scale=10.0)
    with pytest.raises(ValueError, match="gauge"):
        EMPotential(U=lambda t, x, y, z: 1e-3 * np.asarray(t) + 0 * x, scale=100.0)
    for pot in (uniform_field(5e-4), harmonic_potential(0.004, 100.0), constant_u(0.02), FREE):
        assert pot.check_gauge(1000, seed=3) <= 1e-8


def test_free_trajectory():
    tr = sc.integrate_trajectory(FREE, (1.0, 2.0, -1.0), (0.05, -0.02, 0.01), (0.0, 40.0), 0.5, s0=0.3)
    t = tr.times
    assert np.allclose(tr.positions, np.array([1.0, 2.0, -1.0]) + np.outer(t, [0.05, -0.02, 0.01]), atol=1e-13)
    assert np.all(tr.momenta == np.array([0.05, -0.02, 0.01]))
    # Lagrangian p.v - H = p^2 / 2 for a free particle
    assert np.allclose(tr.action.real, 0.3 + 0.5 * (0.05**2 + 0.02**2 + 0.01**2) * t, atol=1e-14)
    assert np.all(tr.action.imag == 0)


def test_uniform_field_trajectory_exact():
    g, p0, x0 = 5e-4, 0.05, -10.0
    pot = uniform_field(g)
    tr = sc.integrate_trajectory(pot, (x0, 0, 0), (p0, 0, 0), (0.0, 100.0), 0.5,
                                 s0=float(uniform_field_action(g, p0, 0.0, x0)))
    t = tr.times
    assert np.max(np.abs(tr.momenta[:, 0] - (p0 + g * t))) < 1e-14
    assert np.max(np.abs(tr.positions[:, 0] - (x0 + p0 * t + 0.5 * g * t * t))) < 1e-12
    # p = dS_c/dx on the path
    assert np.max(np.abs(tr.action.real - uniform_field_action(g, p0, t, tr.positions[:, 0]))) < 1e-10


def test_harmonic_energy_drift():
    w = 0.01
    pot = harmonic_potential(w, 200.0)
    tr = sc.integrate_trajectory(pot, (5.0, 0, 0), (0, 0, 0), (0.0, 2 * math.pi / w), 1.0)
    x, p = tr.positions[:, 0], tr.momenta[:, 0]
    energy = 0.5 * p * p + 0.5 * w * w * x * x
    assert np.max(np.abs(energy - energy[0])) <= 1e-10


def test_trajectory_preconditions():
    with pytest.raises(ValueError, match="nonrelativistic"):
        sc.integrate_trajectory(FREE, (0, 0, 0), (0.2, 0, 0), (0, 1), 0.1)
    with pytest.raises(ValueError, match="resolve"):
        sc.integrate_trajectory(FREE, (0, 0, 0), (0.01, 0, 0), (0, 10), 2.0)
    broken = EMPotential(U=lambda t, x, y, z: np.where(np.asarray(x) > 1.0, np.nan, 0.0) + 0 * t, scale=100.0,
                         dU=lambda t, x, y, z: (0 * x, np.where(x > 1.0, np.nan, 0.0), 0 * x, 0 * x))
    with pytest.raises(ValueError, match="non-finite"):
        sc.integrate_trajectory(broken, (0, 0, 0), (0.1, 0, 0), (0, 20), 0.5)


def test_trajectory_csv(tmp_path):
    tr = sc.integrate_trajectory(FREE, (0, 0, 0), (0.01, 0, 0), (0, 1), 0.5)
    path = tmp_path / "traj.csv"
    tr.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,y,z,px,py,pz,re_S_c,im_S_c"
    assert len(lines) == 4


def test_free_action_residual_zero():
    g = Grid.box(t=(0, 50, 11), x=(-20, 20, 21))
    S = field_on(g, lambda t, x: -0.5 * 0.05**2 * t + 0.05 * x)
    assert sc.classical_action_residual(S).linf < 1e-15


def test_uniform_field_residual_converges():
    g_acc, p0 = 5e-4, 0.05
    pot = uniform_field(g_acc)

    def make(n):
        return field_on(Grid.box(t=(0, 100, n), x=(-40, 40, n)), lambda t, x: uniform_field_action(g_acc, p0, t, x))

    study = refinement_study(make, (21, 41, 81), lambda f, s, **kw: sc.classical_action_residual(f, pot, s))
    assert 1.8 <= study.order <= 2.2


def test_wrong_sign_potential_plateau():
    g_acc, p0 = 5e-4, 0.05
    wrong = EMPotential(U=lambda t, x, y, z: g_acc * np.asarray(x) + 0 * t, scale=100.0)
    grid = Grid.box(t=(0, 100, 81), x=(-40, 40, 81))
    S = field_on(grid, lambda t, x: uniform_field_action(g_acc, p0, t, x))
    # residual is 2 g x; its sup over the interior is 2 g (40 - h)
    expect = 2 * g_acc * (40 - 1.0)
    assert sc.classical_action_residual(S, wrong).linf == pytest.approx(expect, rel=0.05)


def test_correction_vanishes_free_and_linear():
    grid = Grid.box(t=(0, 100, 101), x=(-40, 40, 81))
    free = field_on(grid, lambda t, x: -0.5 * 0.05**2 * t + 0.05 * x)
    out = sc.semiclassical_correction(free, FREE)
    ok = np.isfinite(out.values)
    assert np.max(np.abs(out.values - free.values)[ok]) < 1e-12
    g_acc = 5e-4
    lin = field_on(grid, lambda t, x: uniform_field_action(g_acc, 0.05, t, x))
    out = sc.semiclassical_correction(lin, uniform_field(g_acc))
    ok = np.isfinite(out.values)
    assert ok[-1].sum() > 40
    assert np.max(np.abs(out.values - lin.values)[ok]) < 1e-10


def test_correction_harmonic_closed_form():
    # S_c = K(t) x^2 / 2 with K' = -K^2 - w^2; sigma = -i ln(cos(phi0 - w t) / cos phi0)
    w, kappa = 0.004, 0.002
    grid = Grid.box(t=(0, 100, 201), x=(-40, 40, 161))
    phi0 = math.atan(kappa / w)
    S = field_on(grid, lambda t, x: 0.5 * w * np.tan(phi0 - w * t) * x * x)
    out = sc.semiclassical_correction(S, harmonic_potential(w, 100.0))
    t = grid.coords("t")[:, None]
    exact = -1j * np.log(np.cos(phi0 - w * t) / math.cos(phi0))
    sigma = out.values - S.values
    ok = np.isfinite(sigma)
    assert ok.mean() > 0.9
    assert np.max(np.abs(sigma - exact)[ok]) <= 1e-4 * np.max(np.abs(exact))


def test_correction_matches_direct_solve():
    w, kappa = 0.004, 0.002
    pot = harmonic_potential(w, 100.0)
    grid = Grid.box(t=(0, 100, 201), x=(-40, 40, 161))
    x = grid.coords("x")
    S_c, S_sc = sc.direct_correction(0.5 * kappa * x * x, pot, grid)
    out = sc.semiclassical_correction(S_c, pot)
    sig_t = out.values - S_c.values
    sig_d = S_sc.values - S_c.values
    ok = np.isfinite(sig_t)
    assert np.max(np.abs(sig_t - sig_d)[ok]) <= 1e-4 * np.max(np.abs(sig_d[ok]))


def test_caustic_detected():
    # focusing initial momenta p = -kappa x cross at t = 1 / kappa
    kappa = 0.02
    grid = Grid.box(t=(0, 100, 201), x=(-40, 40, 81))
    S = field_on(grid, lambda t, x: -0.5 * kappa * x * x + 0 * t)
    with pytest.raises(sc.CausticError) as info:
        sc.semiclassical_correction(S, FREE)
    t_first, lo, hi = info.value.region
    assert 1 / kappa <= t_first <= 1 / kappa + 1.0
    assert lo <= hi


def test_correction_grid_checks():
    with pytest.raises(ValueError, match="grid"):
        sc.semiclassical_correction(field_on(Grid.box(x=(-1, 1, 5), y=(-1, 1, 5)), lambda t, x: x), FREE)
    with pytest.raises(ValueError, match="real"):
        g = Grid.box(t=(0, 1, 5), x=(-1, 1, 5))
        sc.semiclassical_correction(ComplexField(g, np.full(g.shape, 1j)), FREE)


def test_slowly_varying_reduces_without_field():
    spec = BreatherSpec(0.3)
    pt = SpacetimePoint(np.linspace(0, 5, 7), 0.4, -0.1, 0.2)
    a = sc.slowly_varying_breather_action(FREE, spec, pt).value
    assert np.array_equal(a, breather_action(spec, pt).value)


def test_constant_potential_alpha_zero():
    spec = BreatherSpec(0.0)
    t = np.linspace(0, 10, 11)
    S = sc.slowly_varying_breather_action(constant_u(0.02), spec, SpacetimePoint(t, 1.0)).value
    assert np.allclose(S, -(1.02) * t, atol=1e-14)


@pytest.mark.parametrize("u", [0.0, 0.01, 0.02])
def test_frequency_lock(u):
    times = np.linspace(0, 200 * math.pi, 20001)
    S = sc.slowly_varying_breather_action(constant_u(u), BreatherSpec(0.3), SpacetimePoint(times)).value
    lock = sc.measure_frequency_lock(times, S)
    assert abs(lock.breather_rate - 1.0) <= 1e-3
    assert abs(lock.plane_rate + 1.0 + u) <= 1e-3


def test_uniform_asymptotic_free_rest():
    spec = BreatherSpec(0.2)
    tr = sc.integrate_trajectory(FREE, (0, 0, 0), (0, 0, 0), (0.0, 10.0), 0.5)
    pt = SpacetimePoint(np.linspace(0, 10, 9), 0.7, -0.3, 1.1)
    a = sc.uniform_asymptotic_action(FREE, tr, spec, pt).value
    assert np.allclose(a, breather_action(spec, pt).value, atol=1e-13)


def test_uniform_asymptotic_moving():
    v, x0 = 0.05, -5.0
    spec = BreatherSpec(0.2)
    tr = sc.integrate_trajectory(FREE, (x0, 0, 0), (v, 0, 0), (0.0, 200.0), 0.5)
    x = np.linspace(-15, 15, 3001)
    for t in (0.0, 100.0, 200.0):
        centre = x0 + v * t
        xs = centre + x
        S = sc.uniform_asymptotic_action(FREE, tr, spec, SpacetimePoint(t, xs)).value
        plain = sc.uniform_asymptotic_action(FREE, tr, BreatherSpec(0.0), SpacetimePoint(t, xs)).value
        # envelope |alpha j0| of the breather factor peaks on the trajectory
        env = np.abs(np.exp(1j * (S - plain)) - 1.0)
        assert abs(xs[np.argmax(env)] - centre) <= 0.01
        # the outer phase gradient is the de Broglie wavenumber
        assert np.allclose(np.gradient(plain.real, xs), v, atol=1e-12)


def test_uniform_asymptotic_rejections():
    tr = sc.integrate_trajectory(FREE, (0, 0, 0), (0.05, 0, 0), (0.0, 10.0), 0.5)
    with pytest.raises(ValueError, match="inner region"):
        sc.uniform_asymptotic_action(FREE, tr, BreatherSpec(0.1), SpacetimePoint(1.0, 30.0))
    with pytest.raises(ValueError, match="spherical"):
        sc.uniform_asymptotic_action(FREE, tr, BreatherSpec(0.1, l=1), SpacetimePoint(1.0))
    with pytest.raises(ValueError, match="span"):
        sc.uniform_asymptotic_action(FREE, tr, BreatherSpec(0.1), SpacetimePoint(11.0))


def test_field_induced_residual_scales_inverse_length():
    box = Grid.box(t=(0, 2 * math.pi, 24), x=(-6, 6, 24), y=(-6, 6, 24), z=(-6, 6, 24))
    values = []
    for L in (50.0, 100.0, 200.0):
        pot = EMPotential(
            U=lambda t, x, y, z, L=L: 0.02 * np.sin(np.asarray(x) / L) + 0 * t,
            scale=L,
            dU=lambda t, x, y, z, L=L: (0 * x, 0.02 / L * np.cos(x / L), 0 * x, 0 * x),
        )
        values.append(sc.field_induced_residual(pot, BreatherSpec(0.2), box))
    slope = np.polyfit(np.log([50, 100, 200]), np.log(values), 1)[0]
    assert abs(slope + 1.0) <= 0.1

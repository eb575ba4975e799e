import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from breather_lab.analytic import (
    BreatherSpec,
    PlaneWaveSpec,
    action_from_psi,
    breather_action,
    breather_envelope,
    breather_psi,
    dispersion_omega,
    envelope_peak,
    far_field_action,
    group_velocity,
    lorentz_boost,
    plane_wave_action,
    unwrap_action_field,
)
from breather_lab.units import InsufficientResolutionError, SingularPointError, SpacetimePoint

S3 = math.sqrt(3.0)


def test_plane_wave_action_examples():
    rest = PlaneWaveSpec(1.0)
    assert plane_wave_action(rest, SpacetimePoint(2.0)).value == -2.0
    assert plane_wave_action(rest, SpacetimePoint(0.0, 5.0, -1.0)).value == 0.0
    moving = PlaneWaveSpec(1.25, (0.75, 0, 0))
    assert plane_wave_action(moving, SpacetimePoint(1.0, 1.0)).value == pytest.approx(-0.5, abs=1e-15)


def test_plane_wave_off_shell_rejected():
    with pytest.raises(ValueError, match="mass shell"):
        PlaneWaveSpec(1.2, (0.75, 0, 0))


def test_group_velocity():
    assert group_velocity(PlaneWaveSpec(1.0)) == (0.0, 0.0, 0.0)
    v = group_velocity(PlaneWaveSpec(1.25, (0.75, 0, 0)))
    assert v[0] == pytest.approx(0.6, abs=1e-15)


def test_dispersion_examples():
    assert dispersion_omega(0.0).omega == 1.0
    assert abs(dispersion_omega(S3).omega - 2.0) <= 1e-14
    assert dispersion_omega(1.0).omega == pytest.approx(1.4142135623730950488, rel=1e-15)


def test_mass_shell_closure():
    for k in np.logspace(-4, 4, 60):
        w = dispersion_omega(k).omega
        assert abs(w * w - k * k - 1.0) <= 1e-12 * w * w


def test_breather_psi_examples():
    assert breather_psi(BreatherSpec(0.0), SpacetimePoint(0.0, 1.0, 2.0, 3.0)) == 1.0
    assert breather_psi(BreatherSpec(1.0), SpacetimePoint()) == pytest.approx(2.0, abs=1e-15)
    r = math.pi / S3
    value = breather_psi(BreatherSpec(0.5), SpacetimePoint(math.pi, r))
    assert abs(value - (-1.0)) < 1e-15


def test_spinning_psi_frozen():
    spec = BreatherSpec(0.3, l=1, n=1)
    value = breather_psi(spec, SpacetimePoint(0.4, 0.3, 0.5, 0.2))
    # mpmath, 50 digits, P_1^1 = +sqrt(1 - u^2)
    assert abs(value - complex(1.0086254068482755731, -0.36888090762048607287)) < 1e-14


def test_breather_spec_validation():
    with pytest.raises(ValueError):
        BreatherSpec(0.1, l=1, n=2)
    with pytest.raises(ValueError):
        BreatherSpec(0.1, boost_v=(0.8, 0.6, 0.0))


def test_boost_examples():
    pt = SpacetimePoint(1.0, 0.5, -2.0, 0.25)
    assert lorentz_boost(pt, (0, 0, 0)) == pt
    b = lorentz_boost(SpacetimePoint(1.0, 0.6), (0.6, 0, 0))
    assert b.t == pytest.approx(0.8, abs=1e-15)
    assert abs(b.x) < 1e-15


speeds = st.floats(min_value=-0.55, max_value=0.55)
coords = st.floats(min_value=-20, max_value=20)


@settings(max_examples=200, deadline=None)
@given(coords, coords, coords, coords, speeds, speeds, speeds)
def test_boost_interval_and_inverse(t, x, y, z, vx, vy, vz):
    pt = SpacetimePoint(t, x, y, z)
    v = (vx, vy, vz)
    b = lorentz_boost(pt, v)
    s0 = t * t - x * x - y * y - z * z
    s1 = b.t**2 - b.x**2 - b.y**2 - b.z**2
    assert abs(s1 - s0) <= 1e-10 * (1 + t * t + x * x + y * y + z * z)
    back = lorentz_boost(b, (-vx, -vy, -vz))
    for a in ("t", "x", "y", "z"):
        assert abs(getattr(back, a) - getattr(pt, a)) <= 1e-12 * 40


@settings(max_examples=100, deadline=None)
@given(coords, coords, st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_collinear_boosts_compose(t, x, u, w):
    pt = SpacetimePoint(t, x)
    two = lorentz_boost(lorentz_boost(pt, (u, 0, 0)), (w, 0, 0))
    one = lorentz_boost(pt, ((u + w) / (1 + u * w), 0, 0))
    scale = 1 + abs(t) + abs(x)
    assert abs(two.t - one.t) <= 1e-10 * scale * 10
    assert abs(two.x - one.x) <= 1e-10 * scale * 10


def test_action_from_psi_constant():
    a = action_from_psi(np.ones(5))
    assert np.all(a.value == 0) and np.all(a.branch == 0)


def test_action_from_psi_crosses_cut():
    t = np.arange(0, 32 + 1) * math.pi / 8
    a = action_from_psi(np.exp(-1j * t))
    assert np.allclose(a.value.real, -t, atol=1e-13)
    assert a.value[-1].real == pytest.approx(-4 * math.pi, abs=1e-13)
    assert a.branch[-1] == -2
    assert np.all(np.abs(np.diff(a.value.real)) < math.pi)


def test_action_from_psi_matches_scalar_breather():
    spec = BreatherSpec(0.1)
    t = np.linspace(0.0, 0.7, 50)
    pt = SpacetimePoint(t, 0.4, 0.2, -0.3)
    a = action_from_psi(breather_psi(spec, pt))
    # mpmath at t = 0.7
    ref = complex(-0.75200333553024131091, -0.065140921098671748339)
    assert abs(a.value[-1] - ref) < 1e-12
    assert abs(breather_action(spec, SpacetimePoint(0.7, 0.4, 0.2, -0.3)).value - ref) < 1e-12


def test_action_from_psi_closed_loop_returns():
    s = np.linspace(0, 2 * math.pi, 400)
    # loop around the origin of space: psi never vanishes for alpha = 0.3
    pt = SpacetimePoint(0.3, 2 * np.cos(s), 2 * np.sin(s), 0.1)
    a = action_from_psi(breather_psi(BreatherSpec(0.3, l=1, n=1), pt))
    assert abs(a.value[-1] - a.value[0]) < 1e-12
    assert a.branch[-1] == a.branch[0]


def test_action_from_psi_errors():
    with pytest.raises(SingularPointError):
        action_from_psi([1.0, 0.0, 1.0])
    with pytest.raises(InsufficientResolutionError):
        action_from_psi(np.exp(1j * np.array([0.0, 2.9])))


def test_unwrap_action_field_staircase():
    t = np.linspace(0, 10, 41)[:, None]
    x = np.linspace(0, 10, 31)[None, :]
    psi = np.exp(1j * (-t + 0.5 * x))
    S, branch = unwrap_action_field(psi)
    assert np.allclose(S.real, -t + 0.5 * x, atol=1e-12)
    assert branch.min() < 0 < branch.max()


def test_far_field_examples():
    pt = SpacetimePoint(0.0, 20.0 / S3)
    assert far_field_action(BreatherSpec(0.0), pt).value == 0.0
    v = far_field_action(BreatherSpec(0.05), pt).value
    assert abs(v - (-0.0022823631268190691359j)) < 1e-15
    with pytest.raises(ValueError):
        far_field_action(BreatherSpec(0.05), SpacetimePoint(0.0, 1.0))


def test_far_field_taylor_bound():
    rng = np.random.default_rng(3)
    spec = BreatherSpec(0.4)
    for _ in range(200):
        r = rng.uniform(10 / S3, 200)
        t = rng.uniform(0, 20)
        pt = SpacetimePoint(t, r)
        z = 0.4 * math.sin(S3 * r) / (S3 * r)
        gap = abs(breather_action(spec, pt).value - far_field_action(spec, pt).value)
        assert gap <= z * z / 2 * (1 + abs(z)) + 1e-15


def test_boosted_center_drift():
    spec = BreatherSpec(0.2, boost_v=(0.3, 0, 0))
    x = np.linspace(-2, 4, 6001)
    centers = []
    times = np.linspace(0, math.pi, 5)
    for t in times:
        env = breather_envelope(spec, SpacetimePoint(t, x))
        centers.append(envelope_peak(x, env))
    slope = np.polyfit(times, centers, 1)[0]
    assert abs(slope - 0.3) < 1e-10


@pytest.mark.parametrize("alpha", [0.01, 0.1, 0.5])
def test_breather_term_frequency_lock(alpha):
    spec = BreatherSpec(alpha)
    pt = SpacetimePoint(np.linspace(0, 2 * math.pi, 2001), 0.3, 0.1)
    psi = breather_psi(spec, pt)
    term = psi - np.exp(-1j * pt.t)
    advance = np.unwrap(np.angle(term))
    assert advance[-1] - advance[0] == pytest.approx(-4 * math.pi, abs=1e-10)
    osc = np.exp(1j * breather_action(spec, pt).value) * np.exp(1j * pt.t) - 1.0
    turns = np.unwrap(np.angle(osc))
    assert turns[-1] - turns[0] == pytest.approx(-2 * math.pi, abs=1e-10)


def test_breather_action_singular():
    # alpha = -1 at the center: psi = e^{-it} (1 - e^{-it}) vanishes at t = 0
    with pytest.raises(SingularPointError):
        breather_action(BreatherSpec(-1.0), SpacetimePoint())


def test_breather_action_branch_consistent():
    spec = BreatherSpec(0.2)
    pt = SpacetimePoint(np.linspace(0, 20, 30), 1.0)
    a = breather_action(spec, pt)
    assert np.allclose(a.psi(), breather_psi(spec, pt), atol=1e-14)
    expect = np.rint((a.value.real - np.angle(breather_psi(spec, pt))) / (2 * math.pi))
    assert np.array_equal(a.branch, expect)
    assert cmath.isclose(a[3].psi(), breather_psi(spec, SpacetimePoint(pt.t[3], 1.0)), abs_tol=1e-14)

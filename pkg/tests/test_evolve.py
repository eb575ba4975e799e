import math

import numpy as np
import pytest

from breather_lab.analytic import BreatherSpec, breather_psi, plane_term
from breather_lab.evolve import (
    EvolutionState,
    kg_evolve,
    leapfrog_energy,
    localization_metric,
    relative_l2,
    sample,
)
from breather_lab.units import ComplexField, Grid

SPEC = BreatherSpec(0.3)


def solution(pt):
    return breather_psi(SPEC, pt)


def cube(hw, n):
    return Grid.box(x=(-hw, hw, n), y=(-hw, hw, n), z=(-hw, hw, n))


def periodic_cube(length, n):
    h = length / n
    return Grid(("x", "y", "z"), (n, n, n), (h, h, h))


def smooth_periodic(g):
    pts = g.points()
    L = g.spacing[0] * g.shape[0]
    k = 2 * math.pi / L
    return (np.exp(1j * k * pts.x) * (1 + 0.3 * np.cos(k * pts.y))
            + 0.2 * np.sin(2 * k * pts.z) * np.exp(-1j * k * pts.y))


def test_zero_data_stays_zero():
    g = cube(1.0, 11)
    zero = ComplexField(g, np.zeros(g.shape))
    state = EvolutionState(zero, zero, 0.0, 0.05)
    for boundary in ("periodic", "analytic-dirichlet"):
        final, _ = kg_evolve(state, 50, boundary, reference=lambda pt: 0.0 * pt.x)
        assert not np.any(final.psi_now.values)


def test_cfl_rejected():
    g = cube(1.0, 11)
    zero = ComplexField(g, np.zeros(g.shape))
    with pytest.raises(ValueError, match="CFL"):
        EvolutionState(zero, zero, 0.0, 0.2 / math.sqrt(3) * 1.01)


def test_dirichlet_needs_reference():
    g = cube(1.0, 11)
    state = EvolutionState.from_solution(solution, g)
    with pytest.raises(ValueError):
        kg_evolve(state, 1)


def test_reversibility():
    g = periodic_cube(6.0, 24)
    dt = 0.4 * g.spacing[0]
    data = smooth_periodic(g)
    evolved = np.exp(-1j * dt) * data
    state = EvolutionState(ComplexField(g, evolved), ComplexField(g, data), dt, dt)
    forward, _ = kg_evolve(state, 200, "periodic")
    back, _ = kg_evolve(forward.reversed(), 200, "periodic")
    # after reversing, psi_prev holds the time level the forward run started from
    assert np.max(np.abs(back.psi_prev.values - evolved)) < 1e-10
    assert np.max(np.abs(back.psi_now.values - data)) < 1e-10


def test_periodic_energy_conserved():
    g = periodic_cube(6.0, 24)
    dt = 0.4 * g.spacing[0]
    data = smooth_periodic(g)
    state = EvolutionState(ComplexField(g, np.exp(-0.9j * dt) * data), ComplexField(g, data), dt, dt)
    e0 = leapfrog_energy(state)
    steps = math.ceil(math.pi / dt)
    final, _ = kg_evolve(state, steps, "periodic")
    assert abs(leapfrog_energy(final) - e0) <= 1e-8 * abs(e0)


def test_localization_metric_examples():
    g = cube(3.0, 121)
    pts = g.points()
    bg = sample(lambda pt: plane_term(SPEC, pt), g, 0.0)
    plain = ComplexField(g, np.broadcast_to(np.exp(0j * pts.x), g.shape))
    assert localization_metric(plain, 1.0, 1.0) == 0.0
    fld = ComplexField(g, sample(solution, g, 0.0))
    ratio = localization_metric(fld, bg, math.pi / math.sqrt(3))
    # |j0| at its second extremum, mpmath
    assert ratio == pytest.approx(0.21723362821122165741, abs=1e-3)


def test_localization_radius_too_small():
    g = cube(1.0, 11)
    fld = ComplexField(g, np.ones(g.shape))
    with pytest.raises(ValueError):
        localization_metric(fld, 0.0, 0.1)


def test_probe_series(tmp_path):
    g = cube(1.0, 21)
    state = EvolutionState.from_solution(solution, g)
    _, series = kg_evolve(state, 20, "analytic-dirichlet", solution, probe=(10, 10, 10), probe_every=5)
    assert len(series.t) == 5
    path = tmp_path / "probe.csv"
    series.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,re_psi,im_psi,localization_ratio"
    assert len(lines) == 6


@pytest.mark.slow
def test_two_period_breather_accuracy():
    h = 0.05
    g = cube(2.7, 109)
    steps = 252
    dt = 2 * math.pi / steps
    state = EvolutionState.from_solution(solution, g, 0.0, dt)
    final, _ = kg_evolve(state, steps, "analytic-dirichlet", solution)
    assert final.time == pytest.approx(2 * math.pi)
    assert dt <= h / 2
    err = relative_l2(final.psi_now.values, sample(solution, g, final.time))
    assert err <= 1e-3

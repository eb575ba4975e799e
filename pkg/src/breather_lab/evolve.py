"""Leapfrog time evolution of the free Klein-Gordon equation.

The update is the standard three-level scheme

    psi_next = 2 psi - psi_prev + dt^2 (lap_h psi - psi)

with the 2nd-order seven-point Laplacian (in 3D).  It is time-reversible and
conserves a discrete quadratic energy on periodic grids.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .units import ComplexField, Grid, SpacetimePoint

DEFAULT_CFL = 0.5 / math.sqrt(3.0)

BOUNDARIES = ("analytic-dirichlet", "periodic")


class DivergenceError(RuntimeError):
    pass


def cfl_limit(grid: Grid) -> float:
    """Largest stable dt / min(h) for the leapfrog scheme on ``grid``."""
    return 1.0 / math.sqrt(len(grid.spatial_axes))


@dataclass(frozen=True)
class EvolutionState:
    psi_now: ComplexField
    psi_prev: ComplexField
    time: float
    dt: float

    def __post_init__(self):
        g = self.psi_now.grid
        if self.psi_prev.grid != g:
            raise ValueError("psi_now and psi_prev must share a grid")
        if "t" in g.axes:
            raise ValueError("evolution grids are spatial only")
        limit = cfl_limit(g) * min(g.spacing)
        if not 0 < abs(self.dt) <= limit * (1 + 1e-12):
            raise ValueError(f"dt = {self.dt!r} violates the CFL bound {limit!r}")

    @property
    def grid(self) -> Grid:
        return self.psi_now.grid

    @classmethod
    def from_solution(
        cls,
        solution: Callable[[SpacetimePoint], np.ndarray],
        grid: Grid,
        t0: float = 0.0,
        dt: float | None = None,
    ) -> "EvolutionState":
        """Exact data at t0 and t0 - dt taken from a known solution."""
        if dt is None:
            dt = DEFAULT_CFL * min(grid.spacing)
        return cls(
            ComplexField(grid, sample(solution, grid, t0)),
            ComplexField(grid, sample(solution, grid, t0 - dt)),
            t0,
            dt,
        )

    def reversed(self) -> "EvolutionState":
        """The same trajectory run backwards: swap levels, negate dt."""
        return EvolutionState(self.psi_prev, self.psi_now, self.time - self.dt, -self.dt)


def sample(solution: Callable[[SpacetimePoint], np.ndarray], grid: Grid, t: float) -> np.ndarray:
    pts = grid.points()
    pt = SpacetimePoint(t, pts.x, pts.y, pts.z)
    return np.broadcast_to(solution(pt), grid.shape).astype(np.complex128)


def _laplacian_interior(psi: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    core = tuple(slice(1, -1) for _ in psi.shape)
    c = psi[core]
    out = np.zeros_like(c)
    for k, h in enumerate(spacing):
        lo = list(core)
        hi = list(core)
        lo[k] = slice(0, -2)
        hi[k] = slice(2, None)
        out += (psi[tuple(lo)] + psi[tuple(hi)] - 2.0 * c) / (h * h)
    return out


def _laplacian_periodic(psi: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    out = np.zeros_like(psi)
    for k, h in enumerate(spacing):
        out += (np.roll(psi, 1, axis=k) + np.roll(psi, -1, axis=k) - 2.0 * psi) / (h * h)
    return out


@dataclass
class ProbeSeries:
    """Samples of psi at one point plus the localization ratio over time."""

    point: tuple[int, ...]
    t: list[float] = field(default_factory=list)
    psi: list[complex] = field(default_factory=list)
    localization: list[float] = field(default_factory=list)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "re_psi", "im_psi", "localization_ratio"])
            for t, p, loc in zip(self.t, self.psi, self.localization):
                w.writerow([f"{t:.16e}", f"{p.real:.16e}", f"{p.imag:.16e}", f"{loc:.16e}"])


def kg_evolve(
    initial: EvolutionState,
    steps: int,
    boundary: str = "analytic-dirichlet",
    reference: Callable[[SpacetimePoint], np.ndarray] | None = None,
    probe: Sequence[int] | None = None,
    probe_every: int = 10,
    background: Callable[[SpacetimePoint], np.ndarray] | None = None,
    radius: float | None = None,
) -> tuple[EvolutionState, ProbeSeries | None]:
    """Advance ``initial`` by ``steps`` leapfrog steps.

    With ``analytic-dirichlet`` the outermost layer of cells is overwritten
    every step with ``reference`` evaluated at the new time.  When ``probe``
    (a grid index) is given, psi there is recorded every ``probe_every``
    steps, together with :func:`localization_metric` of the whole field if
    ``background`` and ``radius`` are supplied.
    """
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    if boundary == "analytic-dirichlet" and reference is None:
        raise ValueError("analytic-dirichlet boundaries need a reference solution")
    g = initial.grid
    h = g.spacing
    dt = initial.dt
    dt2 = dt * dt
    now = initial.psi_now.values.copy()
    prev = initial.psi_prev.values.copy()
    t = initial.time

    series = ProbeSeries(tuple(probe)) if probe is not None else None
    if boundary == "analytic-dirichlet":
        core = tuple(slice(1, -1) for _ in g.shape)
        edge = np.ones(g.shape, dtype=bool)
        edge[core] = False
        pts = g.points()
        ex, ey, ez = (np.broadcast_to(c, g.shape)[edge] for c in pts.spatial)

    def record(step_time, values):
        series.t.append(step_time)
        series.psi.append(complex(values[tuple(probe)]))
        if background is not None and radius is not None:
            bg = sample(background, g, step_time)
            series.localization.append(localization_metric(ComplexField(g, values), bg, radius))
        else:
            series.localization.append(float("nan"))

    if series is not None:
        record(t, now)

    for step in range(1, steps + 1):
        if boundary == "periodic":
            nxt = 2.0 * now - prev + dt2 * (_laplacian_periodic(now, h) - now)
        else:
            nxt = np.empty_like(now)
            c = now[core]
            nxt[core] = 2.0 * c - prev[core] + dt2 * (_laplacian_interior(now, h) - c)
            nxt[edge] = reference(SpacetimePoint(initial.time + step * dt, ex, ey, ez))
        if not np.isfinite(nxt.sum()):
            raise DivergenceError(f"non-finite values after step {step} (t = {t + dt:.6g})")
        prev, now = now, nxt
        t = initial.time + step * dt
        if series is not None and step % probe_every == 0:
            record(t, now)

    final = EvolutionState(ComplexField(g, now), ComplexField(g, prev), t, dt)
    return final, series


def leapfrog_energy(state: EvolutionState) -> float:
    """Conserved quadratic energy of the periodic leapfrog scheme.

    E = |(psi - psi_prev)/dt|^2 + Re <psi, (1 - lap_h) psi_prev>, summed
    with the cell volume.
    """
    g = state.grid
    now, prev = state.psi_now.values, state.psi_prev.values
    dv = math.prod(g.spacing)
    kinetic = np.sum(np.abs((now - prev) / state.dt) ** 2)
    a_prev = prev - _laplacian_periodic(prev, g.spacing)
    potential = np.real(np.vdot(now, a_prev))
    return float((kinetic + potential) * dv)


def relative_l2(values: np.ndarray, exact: np.ndarray) -> float:
    return float(np.linalg.norm(values - exact) / np.linalg.norm(exact))


def localization_metric(
    fld: ComplexField,
    background,
    radius: float,
    center: Sequence[float] | None = None,
) -> float:
    """Share of the excitation found outside a ball around its center.

    Returns max |psi - background| outside the ball of ``radius`` divided by
    the maximum over the whole grid; 0 when there is no excitation.
    ``background`` is an array or scalar of plane-wave values.  The center
    defaults to the grid point of largest deviation.
    """
    g = fld.grid
    if radius < 2 * max(g.spacing):
        raise ValueError(f"radius {radius!r} is below two grid cells")
    dev = np.abs(fld.values - background)
    total = float(dev.max())
    if total == 0.0:
        return 0.0
    pts = g.points()
    if center is None:
        peak = g.coord(np.unravel_index(int(np.argmax(dev)), g.shape))
        center = (peak.x, peak.y, peak.z)
    r = np.broadcast_to(pts.radius(center), g.shape)
    outside = dev[r > radius]
    return float(outside.max()) / total if outside.size else 0.0

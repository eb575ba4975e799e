"""Breathers in slowly varying electromagnetic fields.

The outer (breather-free) action solves the classical Hamilton-Jacobi
equation, handled here by characteristics: a bundle of classical
trajectories carries the action, and the first-order quantum correction
sigma is transported along the same paths with

    d sigma / dt = -i hbar lap S_c.

Internal units throughout, with m = 1 and the nonrelativistic Hamiltonian
H = (p - eA)^2 / 2 + eU.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .analytic import K_LOCK, BreatherSpec, action_from_psi, breather_action
from .potentials import EMPotential
from .residuals import (
    Derivatives,
    PotentialSamples,
    ResidualReport,
    StencilSpec,
    apply_residual,
    qhj_residual,
)
from .special import spherical_bessel
from .units import ActionValue, ComplexField, SingularPointError, SpacetimePoint

NONRELATIVISTIC_SPEED = 0.1
INNER_RADIUS = 20.0

_SPATIAL = ("x", "y", "z")


class CausticError(ValueError):
    """Characteristics crossed; ``region`` holds (t_first, x_lo, x_hi)."""

    def __init__(self, message: str, region: tuple[float, float, float]):
        super().__init__(message)
        self.region = region


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (n, 3)
    momenta: np.ndarray  # (n, 3)
    action: np.ndarray  # complex; imaginary part is the transported correction

    def __post_init__(self):
        n = len(self.times)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.positions.shape != (n, 3) or self.momenta.shape != (n, 3) or self.action.shape != (n,):
            raise ValueError("trajectory arrays have inconsistent lengths")

    def velocity(self, pot: EMPotential) -> np.ndarray:
        t = self.times
        x, y, z = self.positions.T
        A = np.stack(pot.vector(SpacetimePoint(t, x, y, z)), axis=-1)
        return self.momenta - pot.charge * np.broadcast_to(A, self.momenta.shape)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "y", "z", "px", "py", "pz", "re_S_c", "im_S_c"])
            for t, x, p, s in zip(self.times, self.positions, self.momenta, self.action):
                w.writerow([f"{v:.16e}" for v in (t, *x, *p, s.real, s.imag)])


def _forces(pot: EMPotential, t, X: np.ndarray, P: np.ndarray):
    """Hamilton's equations for a bundle; X, P have shape (n, 3)."""
    e = pot.charge
    pt = SpacetimePoint(t, X[:, 0], X[:, 1], X[:, 2])
    U = pot.scalar(pt)
    A = np.stack(np.broadcast_arrays(*pot.vector(pt)), axis=-1)
    v = P - e * A
    dP = np.empty_like(P)
    for i, a in enumerate(_SPATIAL):
        dA = np.stack(np.broadcast_arrays(*pot.dvector(pt, a)), axis=-1)
        dP[:, i] = -e * pot.dscalar(pt, a) + e * np.sum(v * dA, axis=-1)
    # Lagrangian p.xdot - H
    lagrangian = np.sum(P * v, axis=-1) - (0.5 * np.sum(v * v, axis=-1) + e * U)
    return v, dP, lagrangian


def integrate_bundle(
    pot: EMPotential,
    x0: np.ndarray,
    p0: np.ndarray,
    times: np.ndarray,
    s0: np.ndarray | None = None,
    laplacian: Callable[[float, np.ndarray], np.ndarray] | None = None,
    hbar: float = 1.0,
    lagrangian: bool = True,
    allow_exit: bool = False,
):
    """RK4 on many trajectories at once, stepping through ``times``.

    Returns positions and momenta of shape (len(times), n, 3) and the
    complex action of shape (len(times), n).  ``laplacian(t, X)`` supplies
    lap S_c at bundle positions for the quantum correction; with
    ``lagrangian=False`` only that correction is accumulated.  With
    ``allow_exit`` a NaN from ``laplacian`` (a path leaving its domain)
    marks that path instead of aborting.
    """
    X = np.array(x0, dtype=float).reshape(-1, 3)
    P = np.array(p0, dtype=float).reshape(-1, 3)
    n = len(X)
    S = np.zeros(n, dtype=complex) if s0 is None else np.array(s0, dtype=complex).reshape(n)
    times = np.asarray(times, dtype=float)

    def rhs(t, X, P):
        v, dP, lag = _forces(pot, t, X, P)
        dS = lag.astype(complex) if lagrangian else np.zeros(len(X), dtype=complex)
        if laplacian is not None:
            dS = dS - 1j * hbar * laplacian(t, X)
        return v, dP, dS

    xs = np.empty((len(times), n, 3))
    ps = np.empty((len(times), n, 3))
    ss = np.empty((len(times), n), dtype=complex)
    xs[0], ps[0], ss[0] = X, P, S
    for i in range(1, len(times)):
        t, h = times[i - 1], times[i] - times[i - 1]
        k1 = rhs(t, X, P)
        k2 = rhs(t + h / 2, X + h / 2 * k1[0], P + h / 2 * k1[1])
        k3 = rhs(t + h / 2, X + h / 2 * k2[0], P + h / 2 * k2[1])
        k4 = rhs(t + h, X + h * k3[0], P + h * k3[1])
        X = X + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        P = P + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        S = S + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(P))
                and (allow_exit or np.all(np.isfinite(S)))):
            raise ValueError(f"non-finite state at t = {times[i]:.6g}; step rejected")
        xs[i], ps[i], ss[i] = X, P, S
    return xs, ps, ss


def _check_step(pot: EMPotential, dt: float) -> None:
    if dt > pot.scale / 100:
        raise ValueError(f"dt = {dt!r} does not resolve the potential scale {pot.scale!r}")


def integrate_trajectory(
    pot: EMPotential,
    x0: Sequence[float],
    p0: Sequence[float],
    t_span: tuple[float, float],
    dt: float,
    s0: float = 0.0,
) -> Trajectory:
    """Classical path from (x0, p0) with the action accumulated along it.

    The step is shortened slightly so that it divides the span.
    """
    x0 = np.asarray(x0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if np.linalg.norm(p0) > NONRELATIVISTIC_SPEED:
        raise ValueError(f"|p0| = {np.linalg.norm(p0):.3g} is outside the nonrelativistic window")
    _check_step(pot, dt)
    t0, t1 = t_span
    steps = max(1, math.ceil((t1 - t0) / dt - 1e-12))
    times = np.linspace(t0, t1, steps + 1)
    xs, ps, ss = integrate_bundle(pot, x0, p0, times, np.array([s0]))
    return Trajectory(times, xs[:, 0], ps[:, 0], ss[:, 0])


def _classical_operator(d: Derivatives, pot: PotentialSamples) -> np.ndarray:
    e = pot.charge
    kinetic = sum((d.d1(a) - e * pot.A[j]) ** 2 for j, a in enumerate(_SPATIAL))
    return d.d1("t") + 0.5 * kinetic + e * pot.U


def classical_action_residual(
    S_c: ComplexField,
    pot: EMPotential | None = None,
    stencil: StencilSpec = StencilSpec(),
    workers: int | None = None,
) -> ResidualReport:
    """Residual of dS/dt + (grad S - eA)^2 / 2 + eU on the grid interior."""
    return apply_residual(S_c, _classical_operator, stencil, pot, workers)


def _second_derivative_x(values: np.ndarray, h: float, order: int) -> np.ndarray:
    v = values
    out = np.empty_like(v)
    out[:, 1:-1] = (v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]) / (h * h)
    if order == 4:
        out[:, 2:-2] = (-v[:, 4:] + 16 * v[:, 3:-1] - 30 * v[:, 2:-2]
                        + 16 * v[:, 1:-3] - v[:, :-4]) / (12 * h * h)
    # one-sided, second order at the edges
    out[:, 0] = (2 * v[:, 0] - 5 * v[:, 1] + 4 * v[:, 2] - v[:, 3]) / (h * h)
    out[:, -1] = (2 * v[:, -1] - 5 * v[:, -2] + 4 * v[:, -3] - v[:, -4]) / (h * h)
    return out


def _first_derivative_x(row: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(row, h, edge_order=2)


def semiclassical_correction(
    S_c: ComplexField,
    pot: EMPotential,
    stencil: StencilSpec = StencilSpec(),
    hbar: float = 1.0,
) -> ComplexField:
    """S_sc = S_c + sigma on a (t, x) grid, sigma transported to first order in hbar.

    Characteristics start from every x sample at the first time row with
    p = dS_c/dx.  Grid points no characteristic reaches are NaN.  Raises
    :class:`CausticError` if neighbouring characteristics cross.
    """
    g = S_c.grid
    if g.axes != ("t", "x"):
        raise ValueError(f"correction needs a (t, x) grid, got axes {g.axes}")
    if np.any(np.abs(S_c.values.imag) > 0):
        raise ValueError("classical action must be real")
    S = S_c.values.real
    ht, hx = g.spacing
    _check_step(pot, ht)
    times, xg = g.coords("t"), g.coords("x")
    lap = _second_derivative_x(S, hx, stencil.order)
    spline = RectBivariateSpline(times, xg, lap, kx=3, ky=3)
    lo, hi = xg[0], xg[-1]

    def laplacian(t, X):
        x = X[:, 0]
        inside = (x >= lo) & (x <= hi)
        out = np.full(len(x), np.nan)
        out[inside] = spline.ev(np.full(inside.sum(), t), x[inside])
        return out

    n = len(xg)
    X0 = np.zeros((n, 3))
    X0[:, 0] = xg
    P0 = np.zeros((n, 3))
    P0[:, 0] = _first_derivative_x(S[0], hx)
    xs, _, ss = integrate_bundle(pot, X0, P0, times, laplacian=laplacian, hbar=hbar,
                                 lagrangian=False, allow_exit=True)

    sigma = np.full(g.shape, np.nan, dtype=complex)
    sigma[0] = 0.0
    for i in range(1, len(times)):
        ok = np.isfinite(ss[i])
        xp = xs[i, ok, 0]
        if len(xp) < 4:
            continue
        steps = np.diff(xp)
        if np.any(steps <= 0):
            bad = np.flatnonzero(steps <= 0)
            crossed = np.concatenate([xp[bad], xp[bad + 1]])
            raise CausticError(
                f"characteristics cross at t = {times[i]:.6g}",
                (float(times[i]), float(crossed.min()), float(crossed.max())),
            )
        s = ss[i, ok]
        reach = (xg >= xp[0]) & (xg <= xp[-1])
        sigma[i, reach] = (CubicSpline(xp, s.real)(xg[reach])
                           + 1j * CubicSpline(xp, s.imag)(xg[reach]))
    return ComplexField(g, S + sigma)


def slowly_varying_breather_action(
    pot: EMPotential, spec: BreatherSpec, pt: SpacetimePoint
) -> ActionValue:
    """Breather action shifted by the local potentials: S_0 - eU t + eA.x.

    The breather part keeps its unit frequency; only the plane part feels
    the field.
    """
    base = breather_action(spec, pt)
    e = pot.charge
    A = pot.vector(pt)
    shift = -e * pot.scalar(pt) * pt.t + e * sum(a * c for a, c in zip(A, pt.spatial))
    return ActionValue(base.value + shift, base.branch)


def _interp(traj: Trajectory, t):
    if np.any(np.asarray(t) < traj.times[0]) or np.any(np.asarray(t) > traj.times[-1]):
        raise ValueError("time outside the trajectory span")
    xp = CubicSpline(traj.times, traj.positions)(t)
    p = CubicSpline(traj.times, traj.momenta)(t)
    S = CubicSpline(traj.times, traj.action.real)(t) + 1j * CubicSpline(traj.times, traj.action.imag)(t)
    return xp, p, S


def uniform_asymptotic_action(
    pot: EMPotential, traj: Trajectory, spec: BreatherSpec, pt: SpacetimePoint
) -> ActionValue:
    """Inner solution riding on a classical trajectory.

    S = -t + S_sc - i ln(1 + alpha exp(-i(1 + v^2/2) t) exp(i p.x) j_0(sqrt 3 |x - x_p(t)|)),
    with x_p, p and the action interpolated from ``traj`` and S_sc expanded
    to first order about x_p(t).  Only spherical, unboosted ``spec`` is used.
    """
    if spec.l != 0 or spec.is_boosted:
        raise ValueError("the asymptotic form is built on the spherical rest breather")
    t = np.asarray(pt.t, dtype=float)
    xp, p, S_traj = _interp(traj, t)
    here = SpacetimePoint(t, xp[..., 0], xp[..., 1], xp[..., 2])
    A = np.stack(np.broadcast_arrays(*pot.vector(here)), axis=-1)
    v = p - pot.charge * A
    if np.any(np.linalg.norm(v, axis=-1) > NONRELATIVISTIC_SPEED):
        raise ValueError("trajectory speed leaves the nonrelativistic window")
    x = np.stack(np.broadcast_arrays(pt.x, pt.y, pt.z), axis=-1)
    offset = x - xp
    r = np.linalg.norm(offset, axis=-1)
    if np.any(r > INNER_RADIUS):
        raise ValueError(f"point lies outside the inner region |x - x_p| <= {INNER_RADIUS}")
    S_sc = S_traj + np.sum(p * offset, axis=-1)
    phase = -(1.0 + 0.5 * np.sum(v * v, axis=-1)) * t + np.sum(p * x, axis=-1)
    bracket = 1.0 + spec.alpha * np.exp(1j * phase) * spherical_bessel(0, K_LOCK * r)
    if np.any(bracket == 0):
        raise SingularPointError("wave function vanishes; action undefined")
    value = -t + S_sc - 1j * np.log(bracket)
    return ActionValue(value, np.zeros(np.shape(value), dtype=int))


@dataclass(frozen=True)
class FrequencyLock:
    plane_rate: float  # mean dS/dt
    breather_rate: float  # angular frequency of the log term


def measure_frequency_lock(times: np.ndarray, action: np.ndarray) -> FrequencyLock:
    """Split a sampled action S(t) at a fixed point into its two clocks.

    The mean slope of Re S is the plane rate; exp(i (S - mean part)) - 1
    isolates the breather term, whose unwrapped phase gives its rate
    (reported as a positive angular frequency).
    """
    times = np.asarray(times, dtype=float)
    action = np.asarray(action, dtype=complex)
    slope, intercept = np.polyfit(times, action.real, 1)
    osc = np.exp(1j * (action - slope * times - intercept)) - 1.0
    phase = action_from_psi(osc).value.real
    rate = np.polyfit(times, phase, 1)[0]
    return FrequencyLock(float(slope), float(-rate))


def field_induced_residual(
    pot: EMPotential,
    spec: BreatherSpec,
    grid,
    stencil: StencilSpec = StencilSpec(),
) -> float:
    """Max of the pointwise QHJ residual of the field-shifted action minus
    that of the field-free breather on the same grid.

    The discretization error common to both cancels, leaving the part of
    the residual caused by the potential's variation (of order 1/L).
    """
    pts = grid.points()
    free = EMPotential(scale=math.inf)
    fields = [np.broadcast_to(slowly_varying_breather_action(p, spec, pts).value, grid.shape)
              for p in (pot, free)]
    with_field = qhj_residual(ComplexField(grid, fields[0]), stencil, pot, keep=True).residual
    without = qhj_residual(ComplexField(grid, fields[1]), stencil, keep=True).residual
    return float(np.max(np.abs(with_field - without)))


def direct_correction(
    initial: np.ndarray,
    pot: EMPotential,
    grid,
    hbar: float = 1.0,
    substeps: int = 4,
) -> tuple[ComplexField, ComplexField]:
    """Brute-force reference: method-of-lines RK4 for S_c and the full S_sc equation.

    Both start from ``initial`` (real samples on the x axis of a (t, x)
    grid).  Spatial derivatives are second-order differences, one-sided at
    the ends.  The nonlinear (grad sigma)^2 term is kept, so this checks the
    first-order transport independently of characteristics.
    """
    if grid.axes != ("t", "x"):
        raise ValueError(f"direct solve needs a (t, x) grid, got axes {grid.axes}")
    times, x = grid.coords("t"), grid.coords("x")
    hx = grid.spacing[1]
    e = pot.charge

    def hamiltonian(t, S):
        pt = SpacetimePoint(t, x, 0.0, 0.0)
        Sx = np.gradient(S, hx, edge_order=2)
        return 0.5 * (Sx - e * pot.vector(pt)[0]) ** 2 + e * pot.scalar(pt)

    def rhs(t, state):
        Sc, Ssc = state
        lap = _second_derivative_x(Sc[None, :], hx, 2)[0]
        return np.array([-hamiltonian(t, Sc), -hamiltonian(t, Ssc) - 1j * hbar * lap])

    state = np.array([initial, initial], dtype=complex)
    out = np.empty((2,) + grid.shape, dtype=complex)
    out[:, 0] = state
    for i in range(1, len(times)):
        h = (times[i] - times[i - 1]) / substeps
        t = times[i - 1]
        for _ in range(substeps):
            k1 = rhs(t, state)
            k2 = rhs(t + h / 2, state + h / 2 * k1)
            k3 = rhs(t + h / 2, state + h / 2 * k2)
            k4 = rhs(t + h, state + h * k3)
            state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[:, i] = state
    return ComplexField(grid, out[0].real.astype(complex)), ComplexField(grid, out[1])

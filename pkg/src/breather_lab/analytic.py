"""Closed-form solutions of the free Klein-Gordon / quantum Hamilton-Jacobi pair.

Natural units throughout (hbar = m = c = 1).  The rest-frame breather is

    psi = exp(-i t) + alpha * exp(-2 i t + i n phi) * j_l(sqrt(3) r) * P_l^n(cos theta)

whose second term oscillates at twice the rest frequency with the
wavenumber fixed by the mass shell, omega^2 = k^2 + 1.  Moving breathers
are the same expression evaluated at Lorentz-boosted coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .special import assoc_legendre, spherical_bessel
from .units import (
    ActionValue,
    InsufficientResolutionError,
    SingularPointError,
    SpacetimePoint,
)

OMEGA_LOCK = 2.0
K_LOCK = math.sqrt(3.0)

# default refusal threshold for a single phase step when continuing a branch
PHASE_STEP_GUARD = 0.9 * math.pi

_MASS_SHELL_RTOL = 1e-12


def _vec3(v) -> tuple[float, float, float]:
    v = tuple(float(c) for c in v)
    if len(v) != 3:
        raise ValueError(f"expected a 3-vector, got {v}")
    return v


@dataclass(frozen=True)
class PlaneWaveSpec:
    """Free particle with energy E and momentum p on the mass shell E^2 = p^2 + 1."""

    energy: float
    momentum: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        p = _vec3(self.momentum)
        object.__setattr__(self, "momentum", p)
        shell = 1.0 + sum(c * c for c in p)
        if not (self.energy > 0 and abs(self.energy**2 - shell) <= _MASS_SHELL_RTOL * shell):
            raise ValueError(f"off mass shell: E^2 = {self.energy**2!r}, p^2 + 1 = {shell!r}")

    @classmethod
    def from_momentum(cls, p: Sequence[float]) -> "PlaneWaveSpec":
        p = _vec3(p)
        return cls(math.sqrt(1.0 + sum(c * c for c in p)), p)

    @classmethod
    def from_velocity(cls, v: Sequence[float]) -> "PlaneWaveSpec":
        v = np.array(_vec3(v))
        gamma = 1.0 / math.sqrt(1.0 - float(v @ v))
        return cls(gamma, tuple(gamma * v))


@dataclass(frozen=True)
class BreatherSpec:
    """Free parameters of one breather term.

    ``center`` is the spatial position of the core at t = 0; a boosted
    breather moves from there with velocity ``boost_v``.
    """

    alpha: complex = 0.0
    l: int = 0
    n: int = 0
    boost_v: tuple[float, float, float] = (0.0, 0.0, 0.0)
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "boost_v", _vec3(self.boost_v))
        object.__setattr__(self, "center", _vec3(self.center))
        if int(self.l) != self.l or self.l < 0:
            raise ValueError(f"l must be a non-negative integer, got {self.l!r}")
        if int(self.n) != self.n or abs(self.n) > self.l:
            raise ValueError(f"need |n| <= l, got n={self.n!r}, l={self.l!r}")
        if not np.isfinite(complex(self.alpha)):
            raise ValueError("alpha must be finite")
        if sum(c * c for c in self.boost_v) >= 1.0:
            raise ValueError(f"boost speed must be below 1, got {self.boost_v}")

    @property
    def is_boosted(self) -> bool:
        return any(self.boost_v)


@dataclass(frozen=True)
class DispersionPair:
    omega: float
    k: float

    def __post_init__(self):
        if abs(self.omega - math.sqrt(self.k**2 + 1.0)) > 1e-12 * self.omega:
            raise ValueError(f"omega={self.omega!r} violates omega^2 = k^2 + 1 for k={self.k!r}")


def dispersion_omega(k: float) -> DispersionPair:
    if not k >= 0:
        raise ValueError(f"wavenumber must be non-negative, got {k!r}")
    return DispersionPair(math.sqrt(k * k + 1.0), k)


def plane_wave_action(spec: PlaneWaveSpec, pt: SpacetimePoint) -> ActionValue:
    """Classical free-particle action -E t + p.x (real, branch 0)."""
    px, py, pz = spec.momentum
    value = -spec.energy * pt.t + px * pt.x + py * pt.y + pz * pt.z
    return ActionValue(value, np.zeros(np.shape(value), dtype=int) if np.ndim(value) else 0)


def group_velocity(spec: PlaneWaveSpec) -> tuple[float, float, float]:
    return tuple(p / spec.energy for p in spec.momentum)


def lorentz_boost(pt: SpacetimePoint, v: Sequence[float]) -> SpacetimePoint:
    """Coordinates of ``pt`` in the frame moving with velocity ``v``.

    For v along x this is t' = gamma (t - v x), x' = gamma (x - v t).
    """
    v = np.array(_vec3(v))
    v2 = float(v @ v)
    if v2 >= 1.0:
        raise ValueError(f"boost speed must be below 1, got |v| = {math.sqrt(v2)!r}")
    if v2 == 0.0:
        return pt
    gamma = 1.0 / math.sqrt(1.0 - v2)
    x, y, z = pt.spatial
    vx = v[0] * x + v[1] * y + v[2] * z
    # x' = x + ((gamma - 1) (v.x) / v^2 - gamma t) v
    coef = (gamma - 1.0) * vx / v2 - gamma * pt.t
    return SpacetimePoint(
        gamma * (pt.t - vx),
        x + coef * v[0],
        y + coef * v[1],
        z + coef * v[2],
    )


def _rest_frame(spec: BreatherSpec, pt: SpacetimePoint) -> SpacetimePoint:
    cx, cy, cz = spec.center
    local = SpacetimePoint(pt.t, pt.x - cx, pt.y - cy, pt.z - cz)
    return lorentz_boost(local, spec.boost_v)


def _mode(spec: BreatherSpec, rest: SpacetimePoint, k: float = K_LOCK):
    """Spatial mode j_l(k r) P_l^n(cos theta) exp(i n phi) in the rest frame."""
    r = rest.radius()
    radial = spherical_bessel(spec.l, k * r)
    if spec.l == 0:
        return radial
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_theta = np.where(r > 0, rest.z / np.where(r > 0, r, 1.0), 1.0)
    angular = assoc_legendre(spec.l, spec.n, np.clip(cos_theta, -1.0, 1.0))
    if spec.n:
        angular = angular * np.exp(1j * spec.n * np.arctan2(rest.y, rest.x))
    return radial * angular


def plane_term(spec: BreatherSpec, pt: SpacetimePoint):
    """The regular background exp(-i t') of the breather solution."""
    return np.exp(-1j * _rest_frame(spec, pt).t)


def breather_term(spec: BreatherSpec, pt: SpacetimePoint):
    rest = _rest_frame(spec, pt)
    return spec.alpha * np.exp(-1j * OMEGA_LOCK * rest.t) * _mode(spec, rest)


def breather_psi(spec: BreatherSpec, pt: SpacetimePoint):
    """Wave function of the locked breather (omega = 2, k = sqrt 3)."""
    rest = _rest_frame(spec, pt)
    return np.exp(-1j * rest.t) + spec.alpha * np.exp(-1j * OMEGA_LOCK * rest.t) * _mode(spec, rest)


def general_breather_psi(alpha: complex, omega: float, k: float, pt: SpacetimePoint,
                         plane_omega: float = 1.0):
    """Unlocked rest-frame spherical breather, for dispersion experiments.

    Solves the free equation only if omega^2 = k^2 + 1 and plane_omega = 1.
    """
    r = pt.radius()
    return np.exp(-1j * plane_omega * pt.t) + alpha * np.exp(-1j * omega * pt.t) * spherical_bessel(0, k * r)


def breather_envelope(spec: BreatherSpec, pt: SpacetimePoint):
    """|psi - background|, the localized part of the breather."""
    rest = _rest_frame(spec, pt)
    return np.abs(spec.alpha * _mode(spec, rest))


def _branch_of(value, psi):
    return np.rint((np.real(value) - np.angle(psi)) / (2 * np.pi)).astype(int)


def breather_action(spec: BreatherSpec, pt: SpacetimePoint) -> ActionValue:
    """S = -t' - i ln(1 + alpha exp(-i t') mode), logarithm on its principal branch.

    Valid wherever |alpha mode| < 1, which keeps the bracket in the right
    half plane; elsewhere use :func:`action_from_psi` along a path.
    """
    rest = _rest_frame(spec, pt)
    bracket = 1.0 + spec.alpha * np.exp(-1j * rest.t) * _mode(spec, rest)
    if np.any(bracket == 0):
        raise SingularPointError("wave function vanishes; action undefined")
    value = -rest.t - 1j * np.log(bracket)
    psi = np.exp(-1j * rest.t) * bracket
    return ActionValue(value, _branch_of(value, psi))


def far_field_action(spec: BreatherSpec, pt: SpacetimePoint) -> ActionValue:
    """First-order expansion of :func:`breather_action` away from the core.

    Requires sqrt(3) r >= 10 in the rest frame.
    """
    if spec.l != 0:
        raise ValueError("far-field form is defined for spherical breathers (l = 0)")
    rest = _rest_frame(spec, pt)
    kr = K_LOCK * rest.radius()
    if np.any(kr < 10.0):
        raise ValueError("far-field form needs sqrt(3) r >= 10; use breather_action")
    value = -rest.t - 1j * spec.alpha * np.exp(-1j * rest.t) * spherical_bessel(0, kr)
    return ActionValue(value, _branch_of(value, np.exp(1j * value)))


def unwrap_phase(phase: np.ndarray, axis: int = -1, guard: float = PHASE_STEP_GUARD) -> np.ndarray:
    """Continue a wrapped phase along ``axis`` by nearest-branch steps."""
    step = np.diff(phase, axis=axis)
    wrapped = (step + np.pi) % (2 * np.pi) - np.pi
    if wrapped.size and np.max(np.abs(wrapped)) > guard:
        raise InsufficientResolutionError(
            f"phase step {np.max(np.abs(wrapped)):.3f} rad exceeds guard {guard:.3f}; refine the path"
        )
    first = np.take(phase, [0], axis=axis)
    return np.concatenate([first, first + np.cumsum(wrapped, axis=axis)], axis=axis)


def action_from_psi(psi_path, hbar: float = 1.0, guard: float = PHASE_STEP_GUARD) -> ActionValue:
    """S = -i hbar ln(psi) continued along a sampled path.

    The first sample sits on the principal branch; every later sample takes
    the branch nearest to its predecessor.  Returns an ActionValue of arrays.
    """
    psi = np.asarray(psi_path, dtype=np.complex128).reshape(-1)
    if np.any(psi == 0):
        i = int(np.flatnonzero(psi == 0)[0])
        raise SingularPointError(f"psi vanishes at sample {i}; action undefined")
    principal = np.angle(psi)
    phase = unwrap_phase(principal, guard=guard)
    value = hbar * (phase - 1j * np.log(np.abs(psi)))
    branch = np.rint((phase - principal) / (2 * np.pi)).astype(int)
    return ActionValue(value, branch)


def unwrap_action_field(psi: np.ndarray, hbar: float = 1.0,
                        guard: float = PHASE_STEP_GUARD) -> tuple[np.ndarray, np.ndarray]:
    """Branch-continuous action on an n-dimensional sample array.

    The phase is continued along the last axis first, starting from index 0
    of every other axis, then along each earlier axis in turn, so sample
    (i0, ..., ik) is reached by a staircase path from the origin corner.
    Returns (action, branch).
    """
    psi = np.asarray(psi, dtype=np.complex128)
    if np.any(psi == 0):
        index = np.unravel_index(int(np.flatnonzero(psi == 0)[0]), psi.shape)
        raise SingularPointError(f"psi vanishes at index {index}; action undefined")
    principal = np.angle(psi)
    phase = _unwrap_nd(principal, guard)
    action = hbar * (phase - 1j * np.log(np.abs(psi)))
    branch = np.rint((phase - principal) / (2 * np.pi)).astype(int)
    return action, branch


def _unwrap_nd(phase: np.ndarray, guard: float) -> np.ndarray:
    if phase.ndim == 1:
        return unwrap_phase(phase, guard=guard)
    out = unwrap_phase(phase, axis=0, guard=guard)
    base = _unwrap_nd(out[0], guard)
    # base differs from out[0] by whole turns; carry them along axis 0
    turns = np.rint((base - out[0]) / (2 * np.pi))
    return out + 2 * np.pi * turns[None]


def envelope_peak(coords: np.ndarray, values: np.ndarray) -> float:
    """Location of the maximum of sampled values, refined by a parabola."""
    values = np.asarray(values)
    i = int(np.argmax(values))
    if i == 0 or i == len(values) - 1:
        return float(coords[i])
    a, b, c = values[i - 1], values[i], values[i + 1]
    denom = a - 2 * b + c
    shift = 0.0 if denom == 0 else 0.5 * (a - c) / denom
    return float(coords[i] + shift * (coords[i + 1] - coords[i]))

"""Slowly varying electromagnetic potentials."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .units import SpacetimePoint

MIN_SCALE = 50.0
GAUGE_TOL = 1e-8

# central-difference step for potentials without analytic derivatives
_FD_STEP = 1e-3

_AXES = ("t", "x", "y", "z")


def _zero_scalar(t, x, y, z):
    return np.zeros(np.broadcast(t, x, y, z).shape)


def _zero_vector(t, x, y, z):
    zero = _zero_scalar(t, x, y, z)
    return (zero, zero, zero)


@dataclass(frozen=True)
class EMPotential:
    """Scalar potential U(t, x, y, z), vector potential A(t, x, y, z) and charge.

    ``scale`` is the declared smallest variation length/time of the
    potentials in Compton units; it must be at least 50.  ``dU`` and ``dA``
    optionally give exact derivatives: ``dU`` returns the four partials
    (d/dt, d/dx, d/dy, d/dz) of U and ``dA`` returns, for each of those
    four axes, the partials of (Ax, Ay, Az).  Otherwise central differences
    are used.

    Construction spot-checks the Lorentz gauge and slow variation.
    """

    U: Callable = _zero_scalar
    A: Callable = _zero_vector
    charge: float = 1.0
    scale: float = math.inf
    dU: Callable | None = None
    dA: Callable | None = None

    def __post_init__(self):
        if not self.scale >= MIN_SCALE:
            raise ValueError(f"declared variation scale {self.scale!r} is below {MIN_SCALE}")
        rng = np.random.default_rng(0)
        pts = self.sample_points(16, rng)
        gauge = float(np.max(np.abs(self.gauge_residual(pts))))
        if gauge > GAUGE_TOL:
            raise ValueError(f"potentials violate the Lorentz gauge: residual {gauge:.3e}")
        self.check_slow_variation(pts)

    def sample_points(self, n: int, rng: np.random.Generator) -> SpacetimePoint:
        half = min(self.scale, 100.0)
        t, x, y, z = rng.uniform(-half, half, size=(4, n))
        return SpacetimePoint(t, x, y, z)

    def scalar(self, pt: SpacetimePoint):
        return np.asarray(self.U(pt.t, pt.x, pt.y, pt.z), dtype=float)

    def vector(self, pt: SpacetimePoint) -> tuple:
        return tuple(np.asarray(c, dtype=float) for c in self.A(pt.t, pt.x, pt.y, pt.z))

    def is_zero(self) -> bool:
        return self.U is _zero_scalar and self.A is _zero_vector

    def _shift(self, pt: SpacetimePoint, axis: int, h: float) -> SpacetimePoint:
        d = [0.0] * 4
        d[axis] = h
        return pt.shifted(*d)

    def dscalar(self, pt: SpacetimePoint, axis: str):
        """Partial derivative of U along ``axis``."""
        k = _AXES.index(axis)
        if self.dU is not None:
            return np.asarray(self.dU(pt.t, pt.x, pt.y, pt.z)[k], dtype=float)
        h = _FD_STEP
        return (self.scalar(self._shift(pt, k, h)) - self.scalar(self._shift(pt, k, -h))) / (2 * h)

    def dvector(self, pt: SpacetimePoint, axis: str) -> tuple:
        """Partial derivatives of (Ax, Ay, Az) along ``axis``."""
        k = _AXES.index(axis)
        if self.dA is not None:
            return tuple(np.asarray(c, dtype=float) for c in self.dA(pt.t, pt.x, pt.y, pt.z)[k])
        h = _FD_STEP
        plus = self.vector(self._shift(pt, k, h))
        minus = self.vector(self._shift(pt, k, -h))
        return tuple((a - b) / (2 * h) for a, b in zip(plus, minus))

    def gauge_residual(self, pt: SpacetimePoint):
        """dU/dt + div A at the given points."""
        div = sum(self.dvector(pt, a)[j] for j, a in enumerate(("x", "y", "z")))
        return self.dscalar(pt, "t") + div

    def check_gauge(self, n: int = 1000, seed: int = 0) -> float:
        pts = self.sample_points(n, np.random.default_rng(seed))
        worst = float(np.max(np.abs(self.gauge_residual(pts))))
        if worst > GAUGE_TOL:
            raise ValueError(f"Lorentz gauge residual {worst:.3e} exceeds {GAUGE_TOL}")
        return worst

    def check_slow_variation(self, pts: SpacetimePoint) -> None:
        """Second spatial derivatives times the declared scale must stay
        within a small multiple of the largest sampled gradient."""
        if math.isinf(self.scale):
            return
        fields = [self.scalar] + [
            (lambda p, j=j: self.vector(p)[j]) for j in range(3)
        ]
        h = _FD_STEP * 10
        for f in fields:
            grad = max(
                float(np.max(np.abs(f(self._shift(pts, k, h)) - f(self._shift(pts, k, -h))))) / (2 * h)
                for k in (1, 2, 3)
            )
            curv = max(
                float(np.max(np.abs(f(self._shift(pts, k, h)) - 2 * f(pts) + f(self._shift(pts, k, -h))))) / h**2
                for k in (1, 2, 3)
            )
            floor = 1e-6 * (1.0 + float(np.max(np.abs(f(pts)))))
            if curv * self.scale > 4.0 * grad + floor:
                raise ValueError(
                    f"potential varies faster than the declared scale {self.scale}"
                )

"""Breather trains on a periodic interval, the two-wall fold and the toroidal duct.

A particle confined to a period-d interval is modelled by an infinite
row of image breathers spaced d apart.  The image sum over j_0 converges
only conditionally (the terms decay like 1/r), so it is truncated to
2K + 1 images and every result carries a truncation certificate.

The action of a train moving with momentum p is periodic in x only when
p d is a whole multiple of 2 pi; :func:`periodicity_defect` measures the
mismatch directly from a branch-tracked action.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from .analytic import K_LOCK, action_from_psi, envelope_peak
from .special import spherical_bessel
from .units import ActionValue, SingularPointError, SpacetimePoint

MAX_IMAGES = 10_000


def truncation_certificate(d: float, K: int) -> float:
    """Bound on |train(x + d) - train(x)| caused by keeping 2K + 1 images."""
    if K == 0:
        return math.inf
    return 2.0 * (1.0 + math.log(2.0)) / (K_LOCK * K * d)


def images_for_tolerance(d: float, tol: float) -> int:
    """Smallest K whose certificate is below ``tol``."""
    return math.ceil(2.0 * (1.0 + math.log(2.0)) / (K_LOCK * d * tol))


@dataclass(frozen=True)
class TrainSpec:
    """Row of breathers with spatial period ``d`` drifting at speed ``v`` along x."""

    d: float
    v: float = 0.0
    alpha: complex = 0.1
    K: int = 100

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"period must be positive, got {self.d!r}")
        if not abs(self.v) < 1:
            raise ValueError(f"drift speed must be below 1, got {self.v!r}")
        if not abs(self.alpha) < 1:
            raise ValueError(f"|alpha| must be below 1, got {self.alpha!r}")
        if int(self.K) != self.K or not 0 <= self.K <= MAX_IMAGES:
            raise ValueError(f"K must be an integer in [0, {MAX_IMAGES}], got {self.K!r}")

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.v * self.v)

    @property
    def certificate(self) -> float:
        return truncation_certificate(self.d, self.K)


def train_sum(spec: TrainSpec, pt: SpacetimePoint):
    """Sum of j_0(sqrt 3 r_k) over images k = -K..K.

    r_k^2 = (gamma (x - v t - k d))^2 + y^2 + z^2, i.e. the rest train of
    period gamma d seen from the frame where it moves at speed v.
    """
    k = np.arange(-spec.K, spec.K + 1, dtype=float)
    x = np.asarray(pt.x - spec.v * pt.t, dtype=float)[..., None]
    perp2 = np.asarray(pt.y * pt.y + pt.z * pt.z, dtype=float)[..., None]
    r = np.sqrt((spec.gamma * (x - k * spec.d)) ** 2 + perp2)
    # np.sum reduces the contiguous image axis pairwise, independent of threads
    return np.sum(spherical_bessel(0, K_LOCK * r), axis=-1)


def _check_shell(spec: TrainSpec, E: float, p: float) -> None:
    if abs(E * E - p * p - 1.0) > 1e-12 * E * E:
        raise ValueError(f"(E, p) = ({E!r}, {p!r}) is off the mass shell")
    if abs(p / E - spec.v) > 1e-12:
        raise ValueError(f"p / E = {p / E!r} does not match the train speed {spec.v!r}")


def train_psi(spec: TrainSpec, pt: SpacetimePoint, E: float, p: float):
    """exp(i S) of the moving train; single-valued in x for any p."""
    phase = -E * pt.t + p * pt.x
    return np.exp(1j * phase) * (1.0 + spec.alpha * np.exp(1j * phase) * train_sum(spec, pt))


def train_action(spec: TrainSpec, pt: SpacetimePoint, E: float, p: float) -> ActionValue:
    """S = -E t + p x - i ln(1 + alpha exp(i(-E t + p x)) train), principal logarithm."""
    _check_shell(spec, E, p)
    phase = -E * pt.t + p * pt.x
    bracket = 1.0 + spec.alpha * np.exp(1j * phase) * train_sum(spec, pt)
    if np.any(bracket == 0):
        raise SingularPointError("train wave function vanishes; action undefined")
    value = phase - 1j * np.log(bracket)
    psi = np.exp(1j * phase) * bracket
    branch = np.rint((np.real(value) - np.angle(psi)) / (2 * np.pi)).astype(int)
    return ActionValue(value, branch)


def quantized_momenta(d: float, n_max: int) -> np.ndarray:
    """p_n = 2 pi n / d for n = 0..n_max."""
    if not d > 0:
        raise ValueError(f"period must be positive, got {d!r}")
    return 2.0 * np.pi * np.arange(n_max + 1) / d


def periodicity_defect(
    spec: TrainSpec,
    E: float,
    p: float,
    samples: Sequence[SpacetimePoint],
    path_points: int | None = None,
) -> float:
    """sup over samples of |S(x + d) - S(x) - p d|.

    S is continued along the straight path from x to x + d (y, z, t fixed),
    so whole turns of the phase are counted rather than discarded.
    """
    _check_shell(spec, E, p)
    if path_points is None:
        # keep the plane-wave phase step near 1/8 rad and the image spacing resolved
        path_points = max(256, int(8 * abs(p) * spec.d) + 1, int(4 * spec.d) + 1)
    s = np.linspace(0.0, spec.d, path_points)
    worst = 0.0
    for pt in samples:
        path = SpacetimePoint(pt.t, pt.x + s, pt.y, pt.z)
        action = action_from_psi(train_psi(spec, path, E, p))
        delta = action.value[-1] - action.value[0] - p * spec.d
        worst = max(worst, abs(delta))
    return worst


@dataclass(frozen=True)
class ScanRow:
    p: float
    defect: float
    certificate: float
    is_quantized: bool


def default_samples(spec: TrainSpec, t: float = 0.0) -> list[SpacetimePoint]:
    """Points near the core of the central breather, where the train is large."""
    return [SpacetimePoint(t, spec.v * t + dx, 0.0, 0.0) for dx in (-0.4, -0.2, 0.0, 0.2, 0.4)]


def quantization_scan(
    d: float,
    alpha: complex,
    K: int,
    n_max: int = 5,
    points_per_quantum: int = 10,
    t: float = 0.0,
) -> list[ScanRow]:
    """Defect over p in [0, n_max 2 pi / d] on a uniform momentum grid.

    Each momentum gets its own train moving at v = p / E.
    """
    quantum = 2.0 * np.pi / d
    rows = []
    for i in range(n_max * points_per_quantum + 1):
        p = i * quantum / points_per_quantum
        E = math.sqrt(1.0 + p * p)
        spec = TrainSpec(d, p / E, alpha, K)
        defect = periodicity_defect(spec, E, p, default_samples(spec, t))
        rows.append(ScanRow(p, defect, spec.certificate, i % points_per_quantum == 0))
    return rows


def write_scan_csv(rows: Sequence[ScanRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "defect", "certificate", "is_quantized"])
        for r in rows:
            w.writerow([f"{r.p:.16e}", f"{r.defect:.16e}", f"{r.certificate:.16e}", int(r.is_quantized)])


# two perfectly reflecting walls at x = 0 and x = d/2

def fold_two_wall(x, sheet: str, d: float):
    """Map a point of the double-sheeted strip [0, d/2] to the period [0, d).

    Sheet '+' is the identity, sheet '-' the mirror image d - x.
    """
    if sheet not in ("+", "-"):
        raise ValueError(f"sheet must be '+' or '-', got {sheet!r}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > d / 2):
        raise ValueError(f"x must lie in [0, {d / 2}]")
    u = x if sheet == "+" else np.mod(d - x, d)
    return u[()] if u.ndim == 0 else u


def strip_coordinate(u, d: float):
    """Inverse of :func:`fold_two_wall`: (x, sheet) for u in [0, d)."""
    u = float(np.mod(u, d))
    return (u, "+") if u <= d / 2 else (d - u, "-")


def mirror(u, d: float):
    """Reflection u -> d - u of the period; swaps the two sheets."""
    return np.mod(d - np.asarray(u, dtype=float), d)


def two_wall_action(spec: TrainSpec, x, sheet: str, t, E: float, p: float) -> ActionValue:
    """Action of the particle shuttling between the walls, on one sheet."""
    u = fold_two_wall(x, sheet, spec.d)
    return train_action(spec, SpacetimePoint(t, u, 0.0, 0.0), E, p)


@dataclass(frozen=True)
class TorusSpec:
    """Breather circulating in a thin toroidal duct of centerline radius R.

    The azimuthal momentum n / R is fixed by single-valuedness of psi.
    """

    R: float
    d_duct: float
    n: int
    alpha: complex = 0.1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"mode n must be a positive integer, got {self.n!r}")
        if not self.d_duct >= 10.0:
            raise ValueError(f"duct width must be at least 10 Compton lengths, got {self.d_duct!r}")
        if not self.R >= 10.0 * self.d_duct:
            raise ValueError(f"need R >= 10 d_duct, got R={self.R!r}, d_duct={self.d_duct!r}")
        if not self.v_phi <= 0.1:
            raise ValueError(f"azimuthal speed {self.v_phi!r} exceeds 0.1")
        if not abs(self.alpha) < 1:
            raise ValueError(f"|alpha| must be below 1, got {self.alpha!r}")

    @property
    def p_phi(self) -> float:
        return self.n / self.R

    @property
    def v_phi(self) -> float:
        return self.p_phi

    @property
    def energy(self) -> float:
        return 1.0 + 0.5 * self.v_phi**2


def _wrap(angle):
    return np.mod(angle + np.pi, 2 * np.pi) - np.pi


def _torus_geometry(spec: TorusSpec, rho, phi, z, t, offset=None):
    # angular offset from the core; wrapping to the nearest image keeps r 2 pi periodic
    if offset is None:
        offset = _wrap(phi - spec.v_phi * t / spec.R)
    arc = spec.R * offset
    r = np.sqrt(arc**2 + (rho - spec.R) ** 2 + z**2)
    phase = -spec.energy * t + spec.p_phi * spec.R * phi
    return arc, r, phase


def torus_psi(spec: TorusSpec, rho, phi, z, t):
    _, r, phase = _torus_geometry(spec, rho, phi, z, t)
    return np.exp(1j * phase) * (1.0 + spec.alpha * np.exp(1j * phase) * spherical_bessel(0, K_LOCK * r))


def torus_action(spec: TorusSpec, rho, phi, z, t) -> ActionValue:
    """Inner solution in cylindrical coordinates (rho, phi, z).

    Only meaningful near the duct: |rho - R| and |z| of order d_duct.
    """
    _, r, phase = _torus_geometry(spec, rho, phi, z, t)
    bracket = 1.0 + spec.alpha * np.exp(1j * phase) * spherical_bessel(0, K_LOCK * r)
    if np.any(bracket == 0):
        raise SingularPointError("torus wave function vanishes; action undefined")
    value = phase - 1j * np.log(bracket)
    psi = np.exp(1j * phase) * bracket
    branch = np.rint((np.real(value) - np.angle(psi)) / (2 * np.pi)).astype(int)
    return ActionValue(value, branch)


def torus_action_dphi(spec: TorusSpec, rho, phi, z, t, offset=None):
    """Analytic dS/dphi of :func:`torus_action`.

    ``offset`` overrides the wrapped angular distance to the core, which lets
    callers integrate across the antipodal seam without a jump.
    """
    arc, r, phase = _torus_geometry(spec, rho, phi, z, t, offset)
    kr = K_LOCK * r
    j0 = spherical_bessel(0, kr)
    dj0 = -spherical_bessel(1, kr)
    with np.errstate(invalid="ignore", divide="ignore"):
        dr = np.where(r > 0, spec.R * arc / np.where(r > 0, r, 1.0), 0.0)
    n = spec.p_phi * spec.R
    wave = spec.alpha * np.exp(1j * phase)
    return n - 1j * wave * (1j * n * j0 + K_LOCK * dj0 * dr) / (1.0 + wave * j0)


@dataclass(frozen=True)
class Winding:
    tracked: complex
    quadrature: complex
    expected: float


def torus_winding(spec: TorusSpec, t: float = 0.0, points: int = 20000,
                  rho: float | None = None, z: float = 0.0) -> Winding:
    """Circulation of grad S around the duct, two ways.

    ``tracked`` continues the branch of S once around the loop;
    ``quadrature`` integrates the analytic dS/dphi with Simpson's rule,
    starting and ending at the point opposite the core.
    """
    rho = spec.R if rho is None else rho
    core = spec.v_phi * t / spec.R
    u = np.linspace(-np.pi, np.pi, points + 1)
    phi = core + u
    action = action_from_psi(torus_psi(spec, rho, phi, z, t))
    tracked = complex(action.value[-1] - action.value[0])
    grad = torus_action_dphi(spec, rho, phi, z, t, offset=u)
    quadrature = complex(simpson(grad, x=u))
    return Winding(tracked, quadrature, 2 * np.pi * spec.n)


def torus_envelope_center(spec: TorusSpec, t: float, points: int = 40000) -> float:
    """Arc length R phi of the envelope maximum along the centerline, in [-pi R, pi R)."""
    phi = np.linspace(0.0, 2 * np.pi, points, endpoint=False)
    psi = torus_psi(spec, spec.R, phi, 0.0, t)
    background = np.exp(1j * (-spec.energy * t + spec.n * phi))
    env = np.abs(psi - background)
    # refine on local offsets so a peak at the seam needs no special case
    i = int(np.argmax(env))
    dphi = 2 * np.pi / points
    local = envelope_peak(np.array([-dphi, 0.0, dphi]),
                          np.array([env[i - 1], env[i], env[(i + 1) % points]]))
    return float(_wrap(phi[i] + local) * spec.R)

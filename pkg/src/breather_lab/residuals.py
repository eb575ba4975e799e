"""Finite-difference residuals of the Klein-Gordon and quantum Hamilton-Jacobi equations.

Residuals are evaluated with centered stencils on interior points only;
the margin equals half the stencil width on every sampled axis.  Axes the
grid does not sample are treated as directions of zero variation.

Large grids are processed in fixed slabs along the first axis.  Norms are
accumulated slab by slab in index order, so reports are bitwise identical
for any worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .potentials import EMPotential
from .units import ComplexField, Grid, InsufficientResolutionError

# offset -> weight, for unit spacing
_D1 = {
    2: {1: 0.5, -1: -0.5},
    4: {2: -1 / 12, 1: 8 / 12, -1: -8 / 12, -2: 1 / 12},
}
_D2 = {
    2: {1: 1.0, 0: -2.0, -1: 1.0},
    4: {2: -1 / 12, 1: 16 / 12, 0: -30 / 12, -1: 16 / 12, -2: -1 / 12},
}

_SPATIAL = ("x", "y", "z")


@dataclass(frozen=True)
class StencilSpec:
    """Centered stencil of accuracy ``order`` (2 or 4).

    ``spacing`` is optional; when given it must match the grid it is used on.
    """

    order: int = 2
    spacing: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.order not in _D1:
            raise ValueError(f"stencil order must be 2 or 4, got {self.order!r}")
        if self.spacing is not None and any(not h > 0 for h in self.spacing):
            raise ValueError("stencil spacing must be positive")

    @property
    def margin(self) -> int:
        return self.order // 2


@dataclass(frozen=True)
class ResidualReport:
    linf: float
    l2: float
    grid: Grid
    interior_margin: int
    count: int
    residual: np.ndarray | None = None


class Derivatives:
    """Lazy centered derivatives of one slab, cropped to its interior."""

    def __init__(self, values: np.ndarray, grid: Grid, order: int):
        self.values = values
        self.grid = grid
        self.order = order
        self.m = order // 2
        self._cache: dict = {}

    def _crop(self, a: np.ndarray, axis: int | None = None, offset: int = 0) -> np.ndarray:
        m = self.m
        index = []
        for k, n in enumerate(a.shape):
            lo, hi = m, n - m
            if k == axis:
                lo, hi = lo + offset, hi + offset
            index.append(slice(lo, hi))
        return a[tuple(index)]

    @property
    def f(self) -> np.ndarray:
        if "f" not in self._cache:
            self._cache["f"] = self._crop(self.values)
        return self._cache["f"]

    def _apply(self, weights: dict, axis: str, power: int) -> np.ndarray:
        k = self.grid.index_of(axis)
        h = self.grid.spacing[k]
        out = None
        for offset, w in weights.items():
            term = w * self._crop(self.values, k, offset)
            out = term if out is None else out + term
        return out / h**power

    def d1(self, axis: str):
        if axis not in self.grid.axes:
            return 0.0
        key = ("d1", axis)
        if key not in self._cache:
            self._cache[key] = self._apply(_D1[self.order], axis, 1)
        return self._cache[key]

    def d2(self, axis: str):
        if axis not in self.grid.axes:
            return 0.0
        key = ("d2", axis)
        if key not in self._cache:
            self._cache[key] = self._apply(_D2[self.order], axis, 2)
        return self._cache[key]

    def laplacian(self):
        return sum(self.d2(a) for a in _SPATIAL)

    def box(self):
        """d^2/dt^2 - laplacian."""
        return self.d2("t") - self.laplacian()


@dataclass
class PotentialSamples:
    """U, A and the gauge-relevant derivatives on interior points."""

    charge: float
    U: np.ndarray | float = 0.0
    A: tuple = (0.0, 0.0, 0.0)
    U_t: np.ndarray | float = 0.0
    div_A: np.ndarray | float = 0.0

    @classmethod
    def sample(cls, pot: EMPotential | None, grid: Grid, margin: int) -> "PotentialSamples":
        if pot is None:
            return cls(charge=0.0)
        pts = grid.points()
        index = tuple(slice(margin, n - margin) for n in grid.shape)

        def crop(a):
            return np.broadcast_to(a, grid.shape)[index]

        div = sum(pot.dvector(pts, a)[j] for j, a in enumerate(_SPATIAL))
        return cls(
            charge=pot.charge,
            U=crop(pot.scalar(pts)),
            A=tuple(crop(c) for c in pot.vector(pts)),
            U_t=crop(pot.dscalar(pts, "t")),
            div_A=crop(div),
        )


Operator = Callable[[Derivatives, PotentialSamples], np.ndarray]


def _check_field(fld: ComplexField, stencil: StencilSpec) -> None:
    g = fld.grid
    if stencil.spacing is not None and not np.allclose(stencil.spacing, g.spacing, rtol=1e-12):
        raise ValueError(f"stencil spacing {stencil.spacing} does not match grid {g.spacing}")
    need = stencil.order + 1
    short = [a for a, n in zip(g.axes, g.shape) if n < need]
    if short:
        raise ValueError(f"axes {short} have fewer than {need} points for an order-{stencil.order} stencil")
    if not np.all(np.isfinite(fld.values)):
        raise ValueError("field contains non-finite samples")


def apply_residual(
    fld: ComplexField,
    operator: Operator,
    stencil: StencilSpec = StencilSpec(),
    potentials: EMPotential | None = None,
    workers: int | None = None,
    keep: bool = False,
) -> ResidualReport:
    """Evaluate ``operator`` on the interior of ``fld`` and reduce to norms."""
    _check_field(fld, stencil)
    g = fld.grid
    m = stencil.margin
    n0 = g.shape[0]
    rows = max(1, (1 << 21) // max(1, g.size // n0))
    bounds = [(s, min(s + rows, n0 - m)) for s in range(m, n0 - m, rows)]

    def run(b):
        start, stop = b
        sub = g.slab(start - m, stop + m)
        d = Derivatives(fld.values[start - m: stop + m], sub, stencil.order)
        pot = PotentialSamples.sample(potentials, sub, m) if potentials is not None else PotentialSamples(0.0)
        r = np.asarray(operator(d, pot))
        r = np.broadcast_to(r, d.f.shape)
        a = np.abs(r)
        return float(a.max()), float(np.sum(a * a)), a.size, (r.copy() if keep else None)

    if workers and workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]

    linf = max(p[0] for p in parts)
    total = math.fsum(p[1] for p in parts)
    count = sum(p[2] for p in parts)
    residual = np.concatenate([p[3] for p in parts], axis=0) if keep else None
    return ResidualReport(linf, math.sqrt(total / count), g, m, count, residual)


def _kg_operator(d: Derivatives, pot: PotentialSamples) -> np.ndarray:
    psi = d.f
    r = d.box() + psi
    e = pot.charge
    if e:
        U, A = pot.U, pot.A
        r = r + 1j * e * pot.U_t * psi + 2j * e * U * d.d1("t") - e * e * U * U * psi
        r = r - 1j * e * pot.div_A * psi
        r = r - 2j * e * sum(A[j] * d.d1(a) for j, a in enumerate(_SPATIAL))
        r = r + e * e * sum(c * c for c in A) * psi
    return r


def _qhj_operator(d: Derivatives, pot: PotentialSamples) -> np.ndarray:
    e = pot.charge
    energy = d.d1("t") + e * pot.U
    momentum2 = sum((d.d1(a) - e * pot.A[j]) ** 2 for j, a in enumerate(_SPATIAL))
    return energy**2 - momentum2 - 1.0 - 1j * d.box()


def kg_residual(
    fld: ComplexField,
    stencil: StencilSpec = StencilSpec(),
    potentials: EMPotential | None = None,
    workers: int | None = None,
    keep: bool = False,
) -> ResidualReport:
    """Discrete residual of the Klein-Gordon equation, box psi + psi (free)
    or the gauge-covariant form when ``potentials`` are given."""
    return apply_residual(fld, _kg_operator, stencil, potentials, workers, keep)


def check_branch_continuity(fld: ComplexField, hbar: float = 1.0) -> None:
    for k, a in enumerate(fld.grid.axes):
        jump = np.max(np.abs(np.diff(fld.values, axis=k)))
        if jump > np.pi * hbar:
            raise InsufficientResolutionError(
                f"action jumps by {jump:.3f} between neighbours along {a}; unwrap or refine"
            )


def qhj_residual(
    action: ComplexField,
    stencil: StencilSpec = StencilSpec(),
    potentials: EMPotential | None = None,
    workers: int | None = None,
    keep: bool = False,
) -> ResidualReport:
    """Residual (dS/dt + eU)^2 - (grad S - eA)^2 - 1 - i box S of an action field.

    The action must be continuous across the grid (unwrap it first).
    """
    check_branch_continuity(action)
    return apply_residual(action, _qhj_operator, stencil, potentials, workers, keep)


def convergence_order(spacings: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(spacing)."""
    return float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])


def pairwise_orders(spacings: Sequence[float], errors: Sequence[float]) -> list[float]:
    h, e = np.log(spacings), np.log(errors)
    return [float((e[i] - e[i + 1]) / (h[i] - h[i + 1])) for i in range(len(h) - 1)]


@dataclass(frozen=True)
class RefinementStudy:
    levels: tuple[int, ...]
    spacings: tuple[float, ...]
    linf: tuple[float, ...]
    l2: tuple[float, ...]

    @property
    def order(self) -> float:
        return convergence_order(self.spacings, self.linf)

    @property
    def pairwise(self) -> list[float]:
        return pairwise_orders(self.spacings, self.linf)


def refinement_study(
    make_field: Callable[[int], ComplexField],
    levels: Sequence[int],
    residual: Callable[..., ResidualReport] = kg_residual,
    stencil: StencilSpec = StencilSpec(),
    **kwargs,
) -> RefinementStudy:
    """Residual norms of ``make_field(n)`` for each level n.

    The spacing recorded per level is the largest grid step; every level
    should refine all axes by the same factor.
    """
    hs, linf, l2 = [], [], []
    for n in levels:
        fld = make_field(n)
        rep = residual(fld, stencil, **kwargs)
        del fld
        hs.append(max(rep.grid.spacing))
        linf.append(rep.linf)
        l2.append(rep.l2)
    return RefinementStudy(tuple(levels), tuple(hs), tuple(linf), tuple(l2))

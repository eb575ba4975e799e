"""Units, spacetime points, uniform grids and sampled complex fields.

All numerics run in natural units with hbar = m = c = 1.  A
:class:`UnitSystem` is only needed at the boundary, to convert physical
quantities in and out of that system.

Spacetime points and grids may carry numpy arrays instead of scalars; all
functions in this package broadcast over them.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

AXIS_LABELS = ("t", "x", "y", "z")

# name -> (power of hbar, power of m, power of c) of the internal unit
_DIMENSIONS = {
    "length": (1, -1, -1),
    "time": (1, -1, -2),
    "energy": (0, 1, 2),
    "momentum": (0, 1, 1),
    "frequency": (-1, 1, 2),
    "action": (1, 0, 0),
}

FIELD_MAGIC = b"BRTH"
FIELD_FORMAT_VERSION = 1

# samples per chunk for grid evaluation; fixed so results never depend on
# the worker count
CHUNK_POINTS = 1 << 21


class SingularPointError(ValueError):
    """The action is undefined because the wave function vanishes."""


class InsufficientResolutionError(ValueError):
    """Neighbouring samples are too far apart to continue the phase."""


@dataclass(frozen=True)
class UnitSystem:
    """Physical values of hbar (J s), particle mass (kg) and c (m/s).

    Defaults are CODATA values for the electron.
    """

    hbar: float = 1.054571817e-34
    mass: float = 9.1093837015e-31
    c: float = 299792458.0

    def __post_init__(self):
        for name in ("hbar", "mass", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @property
    def compton_length(self) -> float:
        return self.hbar / (self.mass * self.c)

    @property
    def compton_time(self) -> float:
        return self.hbar / (self.mass * self.c**2)

    def scale(self, dimension: str) -> float:
        """Size of one internal unit of ``dimension`` in SI units."""
        try:
            a, b, k = _DIMENSIONS[dimension]
        except KeyError:
            raise ValueError(
                f"unknown dimension {dimension!r}; expected one of {sorted(_DIMENSIONS)}"
            ) from None
        return self.hbar**a * self.mass**b * self.c**k


def to_internal(q, dimension: str, units: UnitSystem):
    """Convert a physical quantity to natural units."""
    return q / units.scale(dimension)


def from_internal(q, dimension: str, units: UnitSystem):
    """Inverse of :func:`to_internal`."""
    return q * units.scale(dimension)


@dataclass(frozen=True)
class SpacetimePoint:
    """An event (t, x, y, z); each coordinate may be a broadcastable array."""

    t: float | np.ndarray = 0.0
    x: float | np.ndarray = 0.0
    y: float | np.ndarray = 0.0
    z: float | np.ndarray = 0.0

    def __post_init__(self):
        for name in AXIS_LABELS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"coordinate {name} is not finite")

    @property
    def spatial(self) -> tuple:
        return (self.x, self.y, self.z)

    def shifted(self, dt=0.0, dx=0.0, dy=0.0, dz=0.0) -> "SpacetimePoint":
        return SpacetimePoint(self.t + dt, self.x + dx, self.y + dy, self.z + dz)

    def radius(self, center: Sequence[float] = (0.0, 0.0, 0.0)):
        cx, cy, cz = center
        return np.sqrt((self.x - cx) ** 2 + (self.y - cy) ** 2 + (self.z - cz) ** 2)


@dataclass(frozen=True)
class Grid:
    """Uniform rectilinear grid over a subset of the axes t, x, y, z.

    ``axes`` lists the sampled axes in canonical order.  Unsampled axes are
    pinned at the corresponding coordinate of ``origin``.
    """

    axes: tuple[str, ...]
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: SpacetimePoint = field(default_factory=SpacetimePoint)

    def __post_init__(self):
        axes = tuple(self.axes)
        if not axes or len(set(axes)) != len(axes) or any(a not in AXIS_LABELS for a in axes):
            raise ValueError(f"axes must be distinct labels from {AXIS_LABELS}, got {axes}")
        if list(axes) != sorted(axes, key=AXIS_LABELS.index):
            raise ValueError(f"axes must be in t, x, y, z order, got {axes}")
        if not (len(self.shape) == len(self.spacing) == len(axes)):
            raise ValueError("axes, shape and spacing must have equal length")
        if any(int(n) < 1 for n in self.shape):
            raise ValueError(f"every axis needs at least one sample, got {self.shape}")
        if any(not (math.isfinite(h) and h > 0) for h in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if any(np.ndim(getattr(self.origin, a)) for a in AXIS_LABELS):
            raise ValueError("grid origin must be a scalar point")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))

    @classmethod
    def box(cls, **extents: tuple[float, float, int]) -> "Grid":
        """Grid with endpoints included, e.g. ``Grid.box(t=(0, 1, 11), x=(-1, 1, 21))``."""
        axes = [a for a in AXIS_LABELS if a in extents]
        if len(axes) != len(extents):
            raise ValueError(f"unknown axis in {sorted(extents)}")
        origin, shape, spacing = {}, [], []
        for a in axes:
            lo, hi, n = extents[a]
            if n < 2 or not hi > lo:
                raise ValueError(f"axis {a}: need n >= 2 and hi > lo")
            origin[a] = float(lo)
            shape.append(int(n))
            spacing.append((hi - lo) / (n - 1))
        return cls(tuple(axes), tuple(shape), tuple(spacing), SpacetimePoint(**origin))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def spatial_axes(self) -> tuple[str, ...]:
        return tuple(a for a in self.axes if a != "t")

    def index_of(self, axis: str) -> int:
        return self.axes.index(axis)

    def step(self, axis: str) -> float:
        return self.spacing[self.index_of(axis)]

    def coords(self, axis: str) -> np.ndarray:
        i = self.index_of(axis)
        return getattr(self.origin, axis) + np.arange(self.shape[i]) * self.spacing[i]

    def coord(self, index: Sequence[int]) -> SpacetimePoint:
        values = {a: getattr(self.origin, a) for a in AXIS_LABELS}
        for a, i, h in zip(self.axes, index, self.spacing):
            values[a] = values[a] + i * h
        return SpacetimePoint(**values)

    def points(self, start: int = 0, stop: int | None = None) -> SpacetimePoint:
        """Sparse broadcastable coordinates, optionally a slab of the first axis."""
        values = {a: getattr(self.origin, a) for a in AXIS_LABELS}
        for k, a in enumerate(self.axes):
            c = self.coords(a)
            if k == 0:
                c = c[start:stop]
            shape = [1] * self.ndim
            shape[k] = c.size
            values[a] = c.reshape(shape)
        return SpacetimePoint(**values)

    def slab(self, start: int, stop: int) -> "Grid":
        """Sub-grid made of first-axis indices ``start:stop``."""
        a0 = self.axes[0]
        origin = {a: getattr(self.origin, a) for a in AXIS_LABELS}
        origin[a0] += start * self.spacing[0]
        shape = (stop - start,) + self.shape[1:]
        return Grid(self.axes, shape, self.spacing, SpacetimePoint(**origin))

    def chunks(self, rows: int | None = None) -> Iterator[tuple[int, int]]:
        """Fixed partition of the first axis into slabs of bounded size."""
        per_row = max(1, self.size // self.shape[0])
        rows = rows or max(1, CHUNK_POINTS // per_row)
        for start in range(0, self.shape[0], rows):
            yield start, min(start + rows, self.shape[0])


@dataclass(frozen=True)
class ComplexField:
    """Complex samples on a grid, stored as an array of shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} samples, got {values.size}")
        object.__setattr__(self, "values", values.reshape(self.grid.shape))

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class ActionValue:
    """Complex action together with the branch of the logarithm it came from.

    ``value`` and ``branch`` may be arrays of equal shape; indexing then
    yields scalar ActionValues.
    """

    value: complex | np.ndarray
    branch: int | np.ndarray = 0

    def psi(self, hbar: float = 1.0):
        return np.exp(1j * np.asarray(self.value) / hbar)

    def shifted(self, k: int, hbar: float = 1.0) -> "ActionValue":
        """Same wave function on branch ``branch + k``."""
        return ActionValue(self.value + 2 * np.pi * hbar * k, self.branch + k)

    def __len__(self) -> int:
        return len(self.value)

    def __getitem__(self, i) -> "ActionValue":
        return ActionValue(self.value[i], self.branch[i])


def eval_on_grid(
    f: Callable[[SpacetimePoint], np.ndarray | complex],
    grid: Grid,
    workers: int | None = None,
) -> ComplexField:
    """Sample ``f`` on every grid point.

    ``f`` receives a :class:`SpacetimePoint` of broadcastable arrays and must
    be vectorized.  The grid is cut into fixed slabs along its first axis;
    ``workers`` only decides how many slabs are evaluated concurrently.
    """
    out = np.empty(grid.shape, dtype=np.complex128)
    slabs = list(grid.chunks())

    def fill(bounds):
        start, stop = bounds
        block = np.broadcast_to(f(grid.points(start, stop)), (stop - start,) + grid.shape[1:])
        out[start:stop] = block

    if workers and workers > 1 and len(slabs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, slabs))
    else:
        for bounds in slabs:
            fill(bounds)

    bad = ~np.isfinite(out)
    if bad.any():
        index = np.unravel_index(int(np.flatnonzero(bad)[0]), grid.shape)
        raise ValueError(f"non-finite value at {grid.coord(index)}")
    return ComplexField(grid, out)


def write_field(path: str | Path, fld: ComplexField) -> None:
    """Write a field in the little-endian ``BRTH`` binary layout."""
    g = fld.grid
    header = [FIELD_MAGIC, struct.pack("<IB", FIELD_FORMAT_VERSION, g.ndim)]
    for a, n, h in zip(g.axes, g.shape, g.spacing):
        header.append(struct.pack("<cQdd", a.encode(), n, getattr(g.origin, a), h))
    with open(path, "wb") as fh:
        fh.write(b"".join(header))
        fh.write(np.ascontiguousarray(fld.values, dtype="<c16").tobytes())


def read_field(path: str | Path) -> ComplexField:
    data = Path(path).read_bytes()
    if data[:4] != FIELD_MAGIC:
        raise ValueError(f"{path}: not a BRTH field dump")
    version, naxes = struct.unpack_from("<IB", data, 4)
    if version != FIELD_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    offset = 9
    axes, shape, spacing, origin = [], [], [], {}
    for _ in range(naxes):
        label, n, o, h = struct.unpack_from("<cQdd", data, offset)
        offset += struct.calcsize("<cQdd")
        a = label.decode()
        axes.append(a)
        shape.append(n)
        spacing.append(h)
        origin[a] = o
    grid = Grid(tuple(axes), tuple(shape), tuple(spacing), SpacetimePoint(**origin))
    values = np.frombuffer(data, dtype="<c16", offset=offset)
    if values.size != grid.size:
        raise ValueError(f"{path}: truncated payload")
    return ComplexField(grid, values.astype(np.complex128))

"""Grids, sampled fields, regions and midpoint quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import spd
from .errors import EmptyRegionError, GridMismatchError, SingularWeightError


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered discretization of the box ``[lo, hi]``.

    Parameters
    ----------
    lo, hi : tuple of float
        Opposite corners of the domain.
    cells_per_axis : tuple of int
        Number of cells along each axis (each at least 2).
    """

    lo: tuple
    hi: tuple
    cells_per_axis: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        cells = tuple(int(c) for c in np.atleast_1d(self.cells_per_axis))
        if not (len(lo) == len(hi) == len(cells)):
            raise ValueError("lo, hi and cells_per_axis must have the same length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"need lo < hi componentwise, got {lo} and {hi}")
        if any(c < 2 for c in cells):
            raise ValueError(f"every axis needs at least 2 cells, got {cells}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "cells_per_axis", cells)

    @classmethod
    def cube(cls, lo: float, hi: float, cells: int, n: int = 2) -> "Grid":
        """Hypercube ``[lo, hi]^n`` with `cells` cells per axis."""
        return cls((lo,) * n, (hi,) * n, (cells,) * n)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return self.cells_per_axis

    @property
    def h(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.cells_per_axis)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def volume(self) -> float:
        return float(np.prod(np.array(self.hi) - np.array(self.lo)))

    def axis(self, k: int) -> np.ndarray:
        """Cell-center coordinates along axis `k`."""
        return self.lo[k] + (np.arange(self.cells_per_axis[k]) + 0.5) * self.h[k]

    def mesh(self) -> list:
        """Coordinate arrays of the cell centers, ``ij`` indexing."""
        return np.meshgrid(*[self.axis(k) for k in range(self.n)], indexing="ij")

    def centers(self) -> np.ndarray:
        """Cell centers as an array of shape ``cells + (n,)``."""
        return np.stack(self.mesh(), axis=-1)

    def is_hypercube(self) -> bool:
        ext = np.array(self.hi) - np.array(self.lo)
        return len(set(self.cells_per_axis)) == 1 and np.allclose(ext, ext[0], rtol=1e-12)

    def with_cells(self, cells) -> "Grid":
        cells = (cells,) * self.n if np.isscalar(cells) else tuple(cells)
        return Grid(self.lo, self.hi, cells)

    def coarsening_factor(self, other: "Grid") -> Optional[int]:
        """Integer factor k with ``self.cells == k * other.cells`` on the same box, else None."""
        if other.lo != self.lo or other.hi != self.hi:
            return None
        ks = {a // b if b and a % b == 0 else None for a, b in zip(self.cells_per_axis, other.cells_per_axis)}
        if len(ks) != 1 or None in ks:
            return None
        return ks.pop()

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "cells_per_axis": list(self.cells_per_axis)}

    @classmethod
    def from_json(cls, d: dict) -> "Grid":
        return cls(tuple(d["lo"]), tuple(d["hi"]), tuple(d["cells_per_axis"]))


def block_mean(values: np.ndarray, factor: int, n: int) -> np.ndarray:
    """Average `values` over blocks of ``factor**n`` cells on the leading `n` axes."""
    if factor == 1:
        return values
    shape = []
    for k in range(n):
        shape += [values.shape[k] // factor, factor]
    shape += list(values.shape[n:])
    return values.reshape(shape).mean(axis=tuple(2 * k + 1 for k in range(n)))


def _check_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError(f"grids differ: {a} vs {b}")


# ---------------------------------------------------------------- regions


@dataclass(frozen=True)
class Cube:
    """Axis-parallel cube with a dyadic refinement level attached."""

    center: tuple
    side: float
    level: int = 0

    def box(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.side / 2, c + self.side / 2

    def mask_on(self, grid: Grid, slices) -> np.ndarray:
        lo, hi = self.box()
        parts = []
        for k, sl in enumerate(slices):
            x = grid.axis(k)[sl]
            parts.append((x > lo[k]) & (x < hi[k]))
        return _outer_and(parts)

    def bbox(self, grid):
        lo, hi = self.box()
        return lo, hi

    def to_json(self):
        return {"center": [float(c) for c in self.center], "side": float(self.side), "level": int(self.level)}


@dataclass(frozen=True)
class Ball:
    """Euclidean ball; cell centers strictly inside count as members."""

    center: tuple
    radius: float

    def bbox(self, grid):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def mask_on(self, grid: Grid, slices) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        r2 = 0.0
        for k, sl in enumerate(slices):
            x = grid.axis(k)[sl] - c[k]
            shp = [1] * grid.n
            shp[k] = x.size
            r2 = r2 + (x * x).reshape(shp)
        return r2 < self.radius**2

    def to_json(self):
        return {"center": [float(c) for c in self.center], "radius": float(self.radius)}


@dataclass(frozen=True)
class Annulus:
    """Open spherical shell ``r_in < |x - center| < r_out``."""

    center: tuple
    r_in: float
    r_out: float

    def bbox(self, grid):
        c = np.asarray(self.center, dtype=float)
        return c - self.r_out, c + self.r_out

    def mask_on(self, grid: Grid, slices) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        r2 = 0.0
        for k, sl in enumerate(slices):
            x = grid.axis(k)[sl] - c[k]
            shp = [1] * grid.n
            shp[k] = x.size
            r2 = r2 + (x * x).reshape(shp)
        return (r2 > self.r_in**2) & (r2 < self.r_out**2)


def _outer_and(parts):
    m = parts[0]
    for k, p in enumerate(parts[1:], start=1):
        m = m[..., None] & p.reshape((1,) * k + (p.size,))
    return m


def region_slices(grid: Grid, region) -> tuple:
    """Index slices of the cells whose centers can lie inside the region's bounding box."""
    lo, hi = region.bbox(grid)
    sl = []
    for k in range(grid.n):
        i0 = int(math.floor((lo[k] - grid.lo[k]) / grid.h[k] - 0.5))
        i1 = int(math.ceil((hi[k] - grid.lo[k]) / grid.h[k] + 0.5))
        i0 = min(max(i0, 0), grid.cells_per_axis[k])
        i1 = min(max(i1, 0), grid.cells_per_axis[k])
        sl.append(slice(i0, i1))
    return tuple(sl)


def region_mask(grid: Grid, region) -> np.ndarray:
    """Boolean mask of cells whose centers lie in `region` (whole grid if None)."""
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    out = np.zeros(grid.shape, dtype=bool)
    sl = region_slices(grid, region)
    if all(s.stop > s.start for s in sl):
        out[sl] = region.mask_on(grid, sl)
    return out


# ---------------------------------------------------------------- fields


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per cell.

    ``source``, when given, re-samples the same function on another grid;
    fields without a source are coarsened by block averaging.
    """

    grid: Grid
    values: np.ndarray
    source: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridMismatchError(f"values of shape {v.shape} do not match grid {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def require_positive(self, what="weight"):
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            bad = np.argwhere(~(self.values > 0) | ~np.isfinite(self.values))[0]
            raise SingularWeightError(f"{what} is not positive and finite at cell {tuple(bad)}")
        return self

    def resample(self, grid: Grid) -> "ScalarField":
        if grid == self.grid:
            return self
        if self.source is not None:
            return ScalarField(grid, self.source(grid), self.source)
        k = self.grid.coarsening_factor(grid)
        if k is None:
            raise GridMismatchError("field has no source and the target grid is not a coarsening")
        return ScalarField(grid, block_mean(self.values, k, grid.n))

    def map(self, fn) -> "ScalarField":
        """Pointwise transform that keeps re-sampling consistent."""
        parent = self
        return ScalarField(self.grid, fn(self.values), lambda g: fn(parent.resample(g).values))


@dataclass(frozen=True, eq=False)
class VectorField:
    """One vector in R^d per cell, stored with shape ``grid.shape + (d,)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[:-1] != self.grid.shape:
            raise GridMismatchError(f"values of shape {v.shape} do not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True, eq=False)
class SpdField:
    """Symmetric positive definite matrix per cell, with stored eigendata.

    All fractional powers of a sample share the same orthogonal factor.
    """

    grid: Grid
    matrices: np.ndarray
    source: Optional[Callable] = field(default=None, repr=False)
    eigvals: np.ndarray = field(default=None, repr=False)
    eigvecs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        M = np.asarray(self.matrices, dtype=float)
        if M.shape[:-2] != self.grid.shape or M.shape[-1] != M.shape[-2]:
            raise GridMismatchError(f"matrices of shape {M.shape} do not match grid {self.grid.shape}")
        object.__setattr__(self, "matrices", M)
        if self.eigvals is None:
            lam, U = spd.spd_decompose(M)
            if not np.all(lam > 0) or not np.all(np.isfinite(lam)):
                bad = np.argwhere(~(lam[..., -1] > 0))
                where = tuple(bad[0]) if bad.size else "?"
                raise SingularWeightError(f"matrix weight is not positive definite at cell {where}")
            object.__setattr__(self, "eigvals", lam)
            object.__setattr__(self, "eigvecs", U)

    @property
    def d(self) -> int:
        return self.matrices.shape[-1]

    def power(self, s: float) -> "SpdField":
        """``W^s`` built from the stored eigendecomposition."""
        lam = self.eigvals**s
        M = spd.compose(self.eigvals, self.eigvecs, s)
        parent = self
        src = lambda g: parent.resample(g).power(s).matrices
        if s < 0:
            # reverse order so eigenvalues stay descending
            lam = lam[..., ::-1]
            U = self.eigvecs[..., ::-1]
        else:
            U = self.eigvecs
        return SpdField(self.grid, M, src, lam, U)

    def resample(self, grid: Grid) -> "SpdField":
        if grid == self.grid:
            return self
        if self.source is not None:
            return SpdField(grid, self.source(grid), self.source)
        k = self.grid.coarsening_factor(grid)
        if k is None:
            raise GridMismatchError("field has no source and the target grid is not a coarsening")
        return SpdField(grid, block_mean(self.matrices, k, grid.n))

    def quadratic_form(self, vec) -> ScalarField:
        """Scalar field ``<W(x) e, e>`` for a fixed vector ``e``."""
        e = np.asarray(vec, dtype=float)
        parent = self
        fn = lambda M: np.einsum("...ij,i,j->...", M, e, e)
        return ScalarField(self.grid, fn(self.matrices), lambda g: fn(parent.resample(g).matrices))


@dataclass(frozen=True, eq=False)
class MappingField:
    """Sampled mapping ``f: Omega -> R^n``.

    ``jacobian`` holds the analytic derivative ``Df[..., i, j] = d f_i / d x_j``
    when the family provides one; ``analytic`` is the family tag.
    """

    grid: Grid
    values: np.ndarray
    analytic: Optional[str] = None
    jacobian: Optional[np.ndarray] = field(default=None, repr=False)
    source: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[:-1] != self.grid.shape:
            raise GridMismatchError(f"values of shape {v.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise SingularWeightError("mapping has non-finite values; singular points must be off-lattice")
        object.__setattr__(self, "values", v)

    def resample(self, grid: Grid) -> "MappingField":
        if grid == self.grid:
            return self
        if self.source is None:
            raise GridMismatchError("mapping has no analytic source to re-sample from")
        values, jac = self.source(grid)
        return MappingField(grid, values, self.analytic, jac, self.source)


# ---------------------------------------------------------------- quadrature


def integrate(f: ScalarField, region=None) -> float:
    """Midpoint-rule integral of `f` over the cells whose centers lie in `region`.

    Summation runs in lexicographic cell order with exactly rounded
    accumulation, so the result does not depend on how it was scheduled.

    Raises
    ------
    EmptyRegionError
        If no cell center lies in the region.
    """
    if region is None:
        vals = f.values.ravel()
    else:
        sl = region_slices(f.grid, region)
        if any(s.stop <= s.start for s in sl):
            raise EmptyRegionError(f"{region} does not meet the grid domain")
        vals = f.values[sl][region.mask_on(f.grid, sl)]
    if vals.size == 0:
        raise EmptyRegionError(f"{region} contains no cell centers")
    return math.fsum(vals.tolist()) * f.grid.cell_volume


def count_cells(grid: Grid, region) -> int:
    """Number of cell centers inside `region`."""
    sl = region_slices(grid, region)
    if any(s.stop <= s.start for s in sl):
        return 0
    return int(np.count_nonzero(region.mask_on(grid, sl)))

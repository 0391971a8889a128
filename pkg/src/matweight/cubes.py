"""Dyadic cube families and block pooling.

A family on an ``N^n`` grid holds the dyadic cubes of levels ``0..max_level``
(level ``j`` has side ``N / 2^j`` cells) and, optionally, the grids shifted by
one and two thirds of a side along each axis.  Cubes sticking out of the
domain are clipped: their averages run over ``Q`` intersected with the domain.

Cube statistics are computed by reshaping the (zero padded) sample array into
blocks, so sums are plain tree reductions over each cube with no cancellation.

The family is evaluated along a resolution ladder: ladder step ``k`` samples
the field on the grid with ``N / 2^(max_level - k)`` cells per axis and uses
cubes of levels ``0..k``.  Each step therefore resolves its smallest cubes
with the same number of cells, and the last step is the field's own grid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .fields import Cube, Grid

MIN_CELLS_PER_SIDE = 4


@dataclass(frozen=True)
class Layout:
    """One tiling of a grid by cubes of ``c`` cells per side."""

    level: int
    shift: tuple  # thirds of a side per axis, each in {0, 1, 2}
    c: int
    pad: tuple  # zero cells prepended on each axis
    nblocks: tuple

    def start(self, idx) -> np.ndarray:
        """First cell index (possibly negative) of block `idx`."""
        return np.asarray(idx) * self.c - np.asarray(self.pad)

    def cube(self, idx, grid: Grid) -> Cube:
        s = self.start(idx)
        lo = np.array(grid.lo) + s * grid.h
        side = float(self.c * grid.h[0])
        return Cube(tuple(float(v) for v in lo + side / 2), side, self.level)

    def key(self, idx) -> tuple:
        return (self.level,) + tuple(self.shift) + tuple(int(i) for i in idx)


def pool(values: np.ndarray, layout: Layout, n: int, fill=0.0) -> np.ndarray:
    """Rearrange samples into blocks.

    Returns an array of shape ``nblocks + (c,)*n + trailing`` where cells
    outside the domain hold `fill`.
    """
    c = layout.c
    trailing = values.shape[n:]
    pads = []
    for k in range(n):
        front = layout.pad[k]
        back = layout.nblocks[k] * c - front - values.shape[k]
        pads.append((front, back))
    pads += [(0, 0)] * len(trailing)
    if any(p != (0, 0) for p in pads):
        values = np.pad(values, pads, mode="constant", constant_values=fill)
    shape = []
    for k in range(n):
        shape += [layout.nblocks[k], c]
    arr = values.reshape(shape + list(trailing))
    order = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    order += list(range(2 * n, 2 * n + len(trailing)))
    return arr.transpose(order)


def flat_blocks(values: np.ndarray, layout: Layout, n: int, fill=0.0) -> np.ndarray:
    """Like :func:`pool` but with blocks and cells flattened: ``(nb, c^n) + trailing``."""
    arr = pool(values, layout, n, fill)
    nb = int(np.prod(layout.nblocks))
    return arr.reshape((nb, layout.c**n) + values.shape[n:])


@dataclass(frozen=True)
class CubeFamily:
    """Finite family of cubes standing in for "all cubes".

    Parameters
    ----------
    grid : Grid
        A hypercube grid with the same number of cells on every axis.
    max_level : int
        Deepest dyadic level; ``N / 2^max_level`` must be an integer of at
        least 4, so the smallest cube holds at least ``4^n`` cell centers.
    shifted : bool
        Also include the grids translated by 1/3 and 2/3 of a side.
    """

    grid: Grid
    max_level: int
    shifted: bool = False

    def __post_init__(self):
        g = self.grid
        if not g.is_hypercube():
            raise ValueError("cube families need a hypercube grid with equal cells per axis")
        N = g.cells_per_axis[0]
        L = int(self.max_level)
        if L < 0 or N % (2**L) or N // 2**L < MIN_CELLS_PER_SIDE:
            raise ValueError(
                f"max_level {L} incompatible with {N} cells per axis: need N divisible by 2^L "
                f"and at least {MIN_CELLS_PER_SIDE} cells per smallest cube"
            )

    @classmethod
    def dyadic(cls, grid: Grid, max_level: int | None = None, shifted: bool = False) -> "CubeFamily":
        """Family with the deepest admissible level unless `max_level` is given."""
        if max_level is None:
            N = grid.cells_per_axis[0]
            max_level = 0
            while N % 2 ** (max_level + 1) == 0 and N // 2 ** (max_level + 1) >= MIN_CELLS_PER_SIDE:
                max_level += 1
        return cls(grid, max_level, shifted)

    @property
    def n(self) -> int:
        return self.grid.n

    def ladder(self) -> list:
        """``(k, grid_k)`` for k = 0..max_level; the last grid is the family's own."""
        N = self.grid.cells_per_axis[0]
        return [(k, self.grid.with_cells(N >> (self.max_level - k))) for k in range(self.max_level + 1)]

    def layouts(self, grid: Grid, upto: int | None = None, shifted: bool | None = None) -> Iterator[Layout]:
        """Tilings of `grid` for levels ``0..upto``."""
        upto = self.max_level if upto is None else upto
        shifted = self.shifted if shifted is None else shifted
        N = grid.cells_per_axis[0]
        n = grid.n
        for j in range(upto + 1):
            c = N >> j
            shifts = itertools.product(range(3), repeat=n) if shifted else [(0,) * n]
            seen = set()
            for sh in shifts:
                off = tuple(int(round(m * c / 3.0)) % c for m in sh)
                if off in seen:
                    continue
                seen.add(off)
                pad = tuple((c - o) % c for o in off)
                nblocks = tuple(-(-(N + p) // c) for p in pad)
                yield Layout(j, tuple(sh), c, pad, nblocks)

    @property
    def cubes(self) -> list:
        """All cubes of the family on its own grid."""
        out = []
        for lay in self.layouts(self.grid):
            for idx in np.ndindex(*lay.nblocks):
                out.append(lay.cube(idx, self.grid))
        return out

    def descriptor(self) -> dict:
        return {"grid": self.grid.to_json(), "max_level": self.max_level, "shifted": self.shifted}

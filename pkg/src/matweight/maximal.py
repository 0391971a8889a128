"""Pair maximal operator, local Hardy-Littlewood maximal function, continuity sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import fftconvolve

from .errors import GridMismatchError
from .fields import Ball, Cube, Grid, ScalarField, integrate, region_mask

STABILITY_TOL = 0.05
MIN_BALL_CELLS = 4


def disk_kernel(grid: Grid, radius: float) -> np.ndarray:
    """Indicator of lattice offsets strictly within `radius` of the origin."""
    R = [int(np.floor(radius / h)) for h in grid.h]
    axes = [np.arange(-r, r + 1) * h for r, h in zip(R, grid.h)]
    Z = np.meshgrid(*axes, indexing="ij")
    return (sum(z * z for z in Z) < radius**2).astype(float)


def ball_sums(f: np.ndarray, grid: Grid, radius: float) -> np.ndarray:
    """Sum of `f` over the cells of the clipped ball of `radius` at every cell center."""
    K = disk_kernel(grid, radius)
    return fftconvolve(f, K, mode="same")


def default_radii(grid: Grid) -> list:
    """Half the shortest side, halved down to two cell widths."""
    r = float(np.min(np.asarray(grid.hi) - np.asarray(grid.lo))) / 2
    floor = 2 * float(np.max(grid.h))
    out = []
    while r >= floor * (1 - 1e-12):
        out.append(r)
        r /= 2
    return out


@dataclass
class PairMaximal:
    """Pair maximal function on the radius ladder with per-cell stability flags."""

    scalar: ScalarField
    stable: np.ndarray
    growth: np.ndarray  # value with all radii / value without the two finest
    radii: list
    tol: float = STABILITY_TOL
    per_radius: list = field(default_factory=list)  # running sup after each rung

    @property
    def values(self):
        return self.scalar.values


def pair_maximal(w: ScalarField, v: ScalarField, radii=None, tol: float = STABILITY_TOL,
                 min_cells: int = MIN_BALL_CELLS) -> PairMaximal:
    """``sup_r v(B(x, r)) / w(B(x, r))`` over a descending radius ladder.

    Balls are clipped to the domain and use the midpoint quadrature of
    :func:`integrate`; balls holding fewer than `min_cells` cell centers are
    skipped.  A cell is stable when adding the two finest radii changes its
    value by less than `tol` (relative).
    """
    if w.grid != v.grid:
        raise GridMismatchError("w and v live on different grids")
    g = w.grid
    radii = sorted((float(r) for r in (radii or default_radii(g))), reverse=True)
    if len(radii) < 3:
        raise ValueError("need at least three radii to judge stability")
    ones = np.ones(g.shape)
    M = np.zeros(g.shape)
    trace = []
    coarse = None
    for k, r in enumerate(radii):
        cnt = np.rint(ball_sums(ones, g, r))
        vs = ball_sums(v.values, g, r)
        ws = ball_sums(w.values, g, r)
        ok = (cnt >= min_cells) & (ws > 0)
        ratio = np.where(ok, vs / np.where(ok, ws, 1.0), 0.0)
        M = np.maximum(M, ratio)
        trace.append(M.copy())
        if k == len(radii) - 3:
            coarse = M.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = np.where(coarse > 0, M / coarse, np.inf)
    stable = growth < 1 + tol
    return PairMaximal(ScalarField(g, M), stable, growth, radii, tol, trace)


@dataclass
class ContinuitySet:
    mask: np.ndarray
    unstable_cells: list
    growth: list

    @property
    def fraction(self) -> float:
        return float(self.mask.mean())


def continuity_set(M: PairMaximal) -> ContinuitySet:
    """Cells where the pair maximal function is judged finite (stable)."""
    mask = M.stable & np.isfinite(M.values)
    bad = np.argwhere(~mask)
    return ContinuitySet(mask, [tuple(int(i) for i in c) for c in bad],
                         [float(M.growth[tuple(c)]) for c in bad])


def _inside(grid, region, radius):
    """Centers whose ball of `radius` lies in `region`."""
    X = grid.mesh()
    if isinstance(region, Ball):
        d2 = sum((x - c) ** 2 for x, c in zip(X, region.center))
        return np.sqrt(d2) + radius <= region.radius * (1 + 1e-12)
    if isinstance(region, Cube):
        lo, hi = region.box()
        m = np.ones(grid.shape, dtype=bool)
        for x, a, b in zip(X, lo, hi):
            m &= (x - radius >= a - 1e-12) & (x + radius <= b + 1e-12)
        return m
    raise TypeError("region must be a Ball or a Cube")


def local_hl_maximal(f: ScalarField, B, ratio: float = np.sqrt(2)) -> ScalarField:
    """Local maximal function of ``|f|`` relative to the ball or cube `B`.

    The ladder starts with the cell itself, then radii grow from one cell
    width by the factor `ratio` while a ball still fits in `B`.  For each radius the averages over balls inside `B`
    are spread to every cell within the inscribed square of half-side
    ``radius/sqrt(n)`` around the ball's center, so each reported value is an
    average over a ball that contains the cell.  Cells outside `B` get 0.
    """
    g = f.grid
    a = np.abs(f.values)
    ones = np.ones(g.shape)
    inB = region_mask(g, B)
    M = np.where(inB, a, 0.0)  # single-cell rung
    size = B.radius if isinstance(B, Ball) else B.side / 2
    r = float(np.max(g.h))
    while r <= size:
        valid = _inside(g, B, r)
        if not valid.any():
            break
        cnt = np.rint(ball_sums(ones, g, r))
        avg = np.where(valid & (cnt > 0), ball_sums(a, g, r) / np.maximum(cnt, 1), -np.inf)
        half = [int(np.floor(r / np.sqrt(g.n) / h)) for h in g.h]
        spread = maximum_filter(avg, size=[2 * k + 1 for k in half], mode="constant", cval=-np.inf)
        M = np.where(inB, np.maximum(M, spread), 0.0)
        r *= ratio
    return ScalarField(g, M)


@dataclass
class WeakTypeReport:
    lambdas: list
    ratios: list
    empirical_C: float
    v_total: float
    w_total: float

    def to_json(self) -> dict:
        return dict(self.__dict__)

    def stable_against(self, other: "WeakTypeReport", rel: float = 0.25) -> bool:
        a, b = self.empirical_C, other.empirical_C
        if a == b == 0:
            return True
        return abs(a - b) <= rel * max(abs(a), abs(b))


def weak_type_check(w: ScalarField, v: ScalarField, M, lambdas) -> WeakTypeReport:
    """``lambda w({M > lambda}) / v(Omega)`` for each lambda and their maximum."""
    Mv = M.values if hasattr(M, "values") else np.asarray(M)
    if Mv.shape != w.grid.shape:
        raise GridMismatchError("maximal function and weights live on different grids")
    vt = integrate(v)
    wt = integrate(w)
    rs = []
    for lam in lambdas:
        sel = Mv > lam
        mass = math.fsum(w.values[sel].tolist()) * w.grid.cell_volume
        rs.append(lam * mass / vt)
    return WeakTypeReport([float(x) for x in lambdas], rs, max(rs), vt, wt)

"""Matrix-weighted norms, averaging operators and mollification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from . import spd
from .characteristics import derived_scalars, matrix_ap, matrix_ap_on_cells
from .cubes import CubeFamily
from .errors import DisjointnessError, ExponentError, GridMismatchError, UnderResolvedError
from .fields import Cube, Grid, ScalarField, SpdField, VectorField, region_mask


def _as_vector(f):
    if isinstance(f, ScalarField):
        return VectorField(f.grid, f.values[..., None])
    return f


def apply_power(W: SpdField, s: float, f: VectorField) -> np.ndarray:
    """Per-cell product ``W(x)^s f(x)`` using the stored eigendecomposition."""
    if W.grid != f.grid:
        raise GridMismatchError("field and weight live on different grids")
    U, lam = W.eigvecs, W.eigvals
    coef = np.einsum("...ki,...k->...i", U, f.values) * lam**s
    return np.einsum("...ik,...k->...i", U, coef)


def lp_w_norm(f: VectorField, W: SpdField, p: float, mask=None) -> float:
    """``(sum |W^{1/p} f|^p vol)^{1/p}`` over the grid or the cells in `mask`."""
    if p < 1:
        raise ExponentError(f"p must be at least 1, got {p}")
    f = _as_vector(f)
    g = np.linalg.norm(apply_power(W, 1.0 / p, f), axis=-1) ** p
    if mask is not None:
        g = g[mask]
    return (math.fsum(np.ravel(g).tolist()) * f.grid.cell_volume) ** (1.0 / p)


def lp_scalar_norm(f, weight: ScalarField | None, p: float, mask=None) -> float:
    """``(sum weight |f|^p vol)^{1/p}`` for a scalar or vector field ``f``."""
    f = _as_vector(f)
    g = np.linalg.norm(f.values, axis=-1) ** p
    if weight is not None:
        g = g * weight.values
    if mask is not None:
        g = g[mask]
    return (math.fsum(np.ravel(g).tolist()) * f.grid.cell_volume) ** (1.0 / p)


def gradient(u: ScalarField) -> VectorField:
    """Second-order centered differences, first-order one-sided on edge cells."""
    g = u.grid
    parts = np.gradient(u.values, *g.h, edge_order=1)
    if g.n == 1:
        parts = [parts]
    return VectorField(g, np.stack(parts, axis=-1))


def edge_mask(grid: Grid) -> np.ndarray:
    """True on cells away from the outer ring, where the gradient stencil is centered."""
    m = np.zeros(grid.shape, dtype=bool)
    m[tuple(slice(1, -1) for _ in range(grid.n))] = True
    return m


def sobolev_w_norm(u: ScalarField, W: SpdField, p: float, interior_only: bool = False):
    """``(total, ||u||_{L^p(v)}, ||grad u||_{L^p_W})`` with ``v = |W|_op``."""
    v, _ = derived_scalars(W)
    mask = edge_mask(u.grid) if interior_only else None
    a = lp_scalar_norm(u, v, p, mask)
    b = lp_w_norm(gradient(u), W, p, mask)
    return a + b, a, b


# ------------------------------------------------------------ averaging


def _cube_cells(grid, cubes):
    masks = [region_mask(grid, Q) for Q in cubes]
    cover = np.zeros(grid.shape, dtype=int)
    for m in masks:
        cover += m
    if np.any(cover > 1):
        raise DisjointnessError(f"{int(np.sum(cover > 1))} cells belong to more than one cube")
    return masks


def averaging_apply(f: VectorField, cubes) -> VectorField:
    """Replace `f` by its cube averages on each cube, zero off the union."""
    scalar = isinstance(f, ScalarField)
    fv = _as_vector(f)
    out = np.zeros_like(fv.values)
    for m in _cube_cells(fv.grid, cubes):
        if m.any():
            out[m] = fv.values[m].mean(axis=0)
    if scalar:
        return ScalarField(f.grid, out[..., 0])
    return VectorField(fv.grid, out)


def averaging_bound_check(f: VectorField, W: SpdField, p: float, cubes, slack: float = 1e-9):
    """Check ``||A_Q f||_{L^p_W} <= (max_Q [W]_{A_p}(Q))^{1/p} ||f||_{L^p_W}``.

    The per-cube constants are exact double sums over the same cells as the
    averages, so the inequality holds exactly at the discrete level.
    """
    masks = _cube_cells(f.grid, cubes)
    const = max(matrix_ap_on_cells(W, p, m) for m in masks if m.any())
    lhs = lp_w_norm(averaging_apply(f, cubes), W, p)
    rhs = const ** (1.0 / p) * lp_w_norm(f, W, p)
    return lhs, rhs, bool(lhs <= rhs * (1.0 + slack))


def random_disjoint_cubes(F: CubeFamily, rng, split=0.5, keep=0.7) -> list:
    """Random disjoint sub-family: split dyadic cubes at random, keep leaves at random."""
    g = F.grid
    N = g.cells_per_axis[0]
    out = []
    stack = [(0, (0,) * g.n)]
    while stack:
        j, idx = stack.pop()
        c = N >> j
        if j < F.max_level and rng.random() < split:
            for off in np.ndindex(*([2] * g.n)):
                stack.append((j + 1, tuple(2 * i + o for i, o in zip(idx, off))))
            continue
        if rng.random() < keep:
            lo = np.array(g.lo) + np.array(idx) * c * g.h
            side = c * g.h[0]
            out.append(Cube(tuple(lo + side / 2), float(side), j))
    if not out:
        out.append(Cube(tuple((np.array(g.lo) + np.array(g.hi)) / 2), float(g.hi[0] - g.lo[0]), 0))
    return out


# ------------------------------------------------------------ mollification


def bump_kernel(grid: Grid, t: float) -> np.ndarray:
    """Discrete ``exp(-1 / (1 - |x/t|^2))`` on the lattice, normalised to mass 1."""
    if t < 2 * np.max(grid.h):
        raise UnderResolvedError(f"kernel radius {t} is below two cell widths ({2 * np.max(grid.h):.3g})")
    R = [int(math.floor(t / h)) for h in grid.h]
    axes = [np.arange(-r, r + 1) * h / t for r, h in zip(R, grid.h)]
    Z = np.meshgrid(*axes, indexing="ij")
    r2 = sum(z * z for z in Z)
    with np.errstate(divide="ignore", over="ignore"):
        K = np.where(r2 < 1, np.exp(-1.0 / (1.0 - np.minimum(r2, 1 - 1e-300))), 0.0)
    return K / K.sum()


def interior_mask(grid: Grid, t: float) -> np.ndarray:
    """Cells whose ``t``-ball stays inside the domain."""
    m = np.ones(grid.shape, dtype=bool)
    for k, x in enumerate(grid.mesh()):
        m &= (x - grid.lo[k] >= t) & (grid.hi[k] - x >= t)
    return m


def mollify(f, t: float):
    """Convolve with the mass-one bump of radius `t`, extending `f` by zero.

    Values are computed on every cell; only cells in ``interior_mask(grid, t)``
    see no boundary effect.
    """
    K = bump_kernel(f.grid, t)
    if isinstance(f, ScalarField):
        return ScalarField(f.grid, fftconvolve(f.values, K, mode="same"))
    comps = [fftconvolve(f.values[..., i], K, mode="same") for i in range(f.d)]
    return VectorField(f.grid, np.stack(comps, axis=-1))


def mollifier_constant(n: int) -> float:
    """Reference constant ``3^n 2^n / |B_1|`` for the mollifier bound.

    Dominates the mass-one bump by an average over the smallest cube holding
    its support, and those cubes by the 3^n shifted dyadic grids.
    """
    omega = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return 3.0**n * 2.0**n / omega


@dataclass
class MollifierTrace:
    t: list
    sup_norm: list
    deviation: list
    norm_f: float
    characteristic: float
    p: float
    empirical_C: float = 0.0
    reference_C: float = 0.0
    bounded: bool = False
    converging: bool = False
    tol: float = 0.05
    local_norm: list = field(default_factory=list)

    @property
    def ratios(self):
        return [s / self.norm_f for s in self.sup_norm]

    @property
    def relative_deviation(self):
        return [d / n if n > 0 else 0.0 for d, n in zip(self.deviation, self.local_norm)]

    @property
    def passed(self):
        return self.bounded and self.converging

    def to_csv(self) -> str:
        rows = ["t,sup_norm,deviation,local_norm"]
        rows += [f"{t:.17g},{s:.17g},{d:.17g},{n:.17g}"
                 for t, s, d, n in zip(self.t, self.sup_norm, self.deviation, self.local_norm)]
        return "\n".join(rows) + "\n"

    def to_json(self) -> dict:
        return {"t": self.t, "sup_norm": self.sup_norm, "deviation": self.deviation,
                "local_norm": self.local_norm, "relative_deviation": self.relative_deviation,
                "norm_f": self.norm_f, "characteristic": self.characteristic, "p": self.p,
                "empirical_C": self.empirical_C, "reference_C": self.reference_C,
                "bounded": self.bounded, "converging": self.converging, "tol": self.tol}


def mollifier_bound_and_convergence(f: VectorField, W: SpdField, p: float, t_sequence,
                                    characteristic: float | None = None, tol: float = 0.05,
                                    family: CubeFamily | None = None) -> MollifierTrace:
    """Norms of ``phi_t * f`` and ``phi_t * f - f`` along a decreasing t-sequence.

    Both norms are taken over ``Omega_t``, the cells whose t-ball lies in the
    domain.  The size ratio divides by ``||f||`` over the whole domain, which
    is the right-hand side of the operator bound (zero extension).  The
    deviation divides by ``||f||`` over the same ``Omega_t``, so it measures
    the approximation error where the mollifier is defined.  ``bounded`` asks
    ``sup_t ratio <= C [W]^{1/p}`` with the reference constant; ``converging``
    asks the relative deviation to decrease strictly to below `tol`.
    """
    ts = [float(t) for t in t_sequence]
    if any(b >= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_sequence must be strictly decreasing")
    f = _as_vector(f)
    if characteristic is None:
        characteristic = matrix_ap(W, p, family or CubeFamily.dyadic(W.grid)).value
    nf = lp_w_norm(f, W, p)
    sup, dev, local = [], [], []
    for t in ts:
        g = mollify(f, t)
        m = interior_mask(f.grid, t)
        sup.append(lp_w_norm(g, W, p, m))
        dev.append(lp_w_norm(VectorField(f.grid, g.values - f.values), W, p, m))
        local.append(lp_w_norm(f, W, p, m))
    tr = MollifierTrace(ts, sup, dev, nf, float(characteristic), p, tol=tol, local_norm=local)
    if nf == 0:
        tr.bounded = tr.converging = all(s == 0 for s in sup)
        return tr
    tr.empirical_C = max(tr.ratios) / characteristic ** (1.0 / p)
    tr.reference_C = mollifier_constant(f.grid.n)
    tr.bounded = bool(np.all(np.isfinite(sup)) and tr.empirical_C <= tr.reference_C)
    rel = tr.relative_deviation
    tr.converging = bool(all(b < a for a, b in zip(rel, rel[1:])) and rel[-1] < tol) or max(rel) == 0
    return tr


# ------------------------------------------------------------ ellipticity


def ellipticity_check(W: SpdField, p: float, trials: int = 1000, seed: int = 0, slack: float = 1e-9) -> dict:
    """Verify ``w |xi|^p <= |W^{1/p} xi|^p <= v |xi|^p`` at random cells and directions."""
    rng = np.random.default_rng(seed)
    flat = W.matrices.reshape(-1, W.d, W.d)
    lam = W.eigvals.reshape(-1, W.d)
    U = W.eigvecs.reshape(-1, W.d, W.d)
    cells = rng.integers(flat.shape[0], size=trials)
    xi = rng.standard_normal((trials, W.d))
    xi /= np.linalg.norm(xi, axis=-1, keepdims=True)
    root = spd.compose(lam[cells], U[cells], 1.0 / p)
    mid = np.linalg.norm(np.einsum("tij,tj->ti", root, xi), axis=-1) ** p
    lo, hi = lam[cells, -1], lam[cells, 0]
    lower_gap = mid / lo - 1.0
    upper_gap = 1.0 - mid / hi
    bad = (lower_gap < -slack) | (upper_gap < -slack)
    k = int(np.argmin(np.minimum(lower_gap, upper_gap)))
    return {
        "trials": trials,
        "pass": not bool(bad.any()),
        "violations": [np.unravel_index(int(c), W.grid.shape) for c in cells[bad]],
        "tightest_cell": tuple(int(i) for i in np.unravel_index(int(cells[k]), W.grid.shape)),
        "tightest_direction": xi[k].tolist(),
        "min_lower_gap": float(lower_gap.min()),
        "min_upper_gap": float(upper_gap.min()),
    }

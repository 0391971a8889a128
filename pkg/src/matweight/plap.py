"""Degenerate p-Laplacian: energy minimization and post-solve diagnostics.

The discrete energy lives on the dual grid whose cells sit between ``2^n``
primal cells.  On dual cell ``i`` the gradient is the forward difference
``g_k = (u[i + e_k] - u[i]) / h_k`` and the weight is ``A = Wbar^(2/p)``,
``Wbar`` the mean of ``W`` over the ``2^n`` surrounding cells, so

    E(u) = sum_dual (g^t A g + eps^2)^(p/2) |cell|.

Every primal edge appears in exactly one dual cell, so ``W = I``, ``p = 2``
gives the standard five-point Laplacian.  The outer ring of cells carries the
Dirichlet data; all other cells are unknowns.  Minimization is Newton's method
with an Armijo line search (monotone energy) and a Levenberg fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .characteristics import derived_scalars
from .errors import ExponentError, GridMismatchError, HypothesisError
from .fields import Ball, Grid, ScalarField, SpdField, VectorField, integrate, region_mask
from .weighted_ops import lp_w_norm

EPS_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
GRAD_TOL = 1e-8
STALL_TOL = 1e-10
STALL_WINDOW = 10
MAX_ITER = 200


# ------------------------------------------------------------ discretization


def dual_grid(grid: Grid) -> Grid:
    h = grid.h
    return Grid(tuple(np.asarray(grid.lo) + h / 2), tuple(np.asarray(grid.hi) - h / 2),
                tuple(m - 1 for m in grid.cells_per_axis))


def _corner_mean(a: np.ndarray, n: int) -> np.ndarray:
    out = 0.0
    for off in np.ndindex(*([2] * n)):
        sl = tuple(slice(o, o + m - 1) for o, m in zip(off, a.shape[:n]))
        out = out + a[sl]
    return out / 2**n


def dual_weight(W: SpdField) -> SpdField:
    """Mean of ``W`` over the ``2^n`` cells around each dual cell."""
    return SpdField(dual_grid(W.grid), _corner_mean(W.matrices, W.grid.n))


def discrete_gradient(u: ScalarField) -> VectorField:
    """Forward-difference gradient on the dual grid."""
    g = u.grid
    n = g.n
    comps = []
    for k in range(n):
        hi = tuple(slice(1, None) if j == k else slice(0, -1) for j in range(n))
        lo = tuple(slice(0, -1) for _ in range(n))
        comps.append((u.values[hi] - u.values[lo]) / g.h[k])
    return VectorField(dual_grid(g), np.stack(comps, axis=-1))


def difference_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse ``D`` with ``D u`` the dual gradient, components stacked block-wise."""
    n = grid.n
    shape = grid.shape
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    base = idx[tuple(slice(0, -1) for _ in range(n))].ravel()
    nd = base.size
    blocks = []
    for k in range(n):
        step = int(np.prod(shape[k + 1:]))
        rows = np.arange(nd)
        inv = 1.0 / grid.h[k]
        blocks.append(sp.csr_matrix(
            (np.concatenate([np.full(nd, inv), np.full(nd, -inv)]),
             (np.concatenate([rows, rows]), np.concatenate([base + step, base]))),
            shape=(nd, idx.size)))
    return sp.vstack(blocks).tocsr()


def boundary_mask(grid: Grid) -> np.ndarray:
    """Outer ring of cells."""
    m = np.ones(grid.shape, dtype=bool)
    m[tuple(slice(1, -1) for _ in range(grid.n))] = False
    return m


def energy(u: ScalarField, W: SpdField, p: float, eps: float = 0.0) -> float:
    """``sum (|W^(1/p) grad u|^2 + eps^2)^(p/2) |cell|`` over the dual grid."""
    if u.grid != W.grid:
        raise GridMismatchError("u and W live on different grids")
    if eps == 0:
        return lp_w_norm(discrete_gradient(u), dual_weight(W), p) ** p
    op = _Operator(W, p)
    return op.energy(u.values.ravel(), eps)


class _Operator:
    """Energy, gradient and Hessian in terms of the flat cell vector."""

    def __init__(self, W: SpdField, p: float):
        self.grid = W.grid
        self.n = W.grid.n
        self.p = float(p)
        self.D = difference_matrix(W.grid)
        A = dual_weight(W).power(2.0 / p).matrices
        self.A = A.reshape(-1, self.n, self.n)
        self.nd = self.A.shape[0]
        self.vol = W.grid.cell_volume

    def _g(self, u):
        return (self.D @ u).reshape(self.n, self.nd).T

    def _s(self, g, eps):
        Ag = np.einsum("dij,dj->di", self.A, g)
        return np.einsum("di,di->d", g, Ag) + eps * eps, Ag

    def energy(self, u, eps):
        s, _ = self._s(self._g(u), eps)
        return math.fsum((s ** (self.p / 2)).tolist()) * self.vol

    def _c1(self, s):
        # p s^(p/2 - 1); equals p at s = 0 when p = 2, blows up there when p < 2
        with np.errstate(divide="ignore"):
            return self.p * s ** (self.p / 2 - 1)

    def gradient(self, u, eps):
        s, Ag = self._s(self._g(u), eps)
        c = self._c1(s)
        flux = (c[:, None] * Ag).T.ravel()
        return self.D.T @ flux * self.vol

    def hessian(self, u, eps):
        s, Ag = self._s(self._g(u), eps)
        p = self.p
        c1 = self._c1(s)
        if p == 2:
            c2 = np.zeros_like(s)
        else:
            # at s = 0 the gradient vanishes, and with it the rank-one term
            with np.errstate(divide="ignore", invalid="ignore"):
                c2 = np.where(s > 0, p * (p - 2) * s ** (p / 2 - 2), 0.0)
        n = self.n
        blocks = [[None] * n for _ in range(n)]
        for a in range(n):
            for b in range(n):
                blocks[a][b] = sp.diags(c1 * self.A[:, a, b] + c2 * Ag[:, a] * Ag[:, b])
        Hg = sp.bmat(blocks, format="csr")
        return (self.D.T @ Hg @ self.D) * self.vol


# ------------------------------------------------------------ problem and solve


BoundaryData = Union[ScalarField, np.ndarray, Callable]


@dataclass
class DirichletProblem:
    """``div(|W^(1/p) grad u|^(p-2) W^(2/p) grad u) = 0`` with data on the outer cell ring.

    ``boundary`` is a field or array on the grid (only the ring is read) or a
    callable taking the coordinate arrays ``x_1, ..., x_n``.
    """

    grid: Grid
    W: SpdField
    p: float
    boundary: BoundaryData
    epsilon: float = 0.0
    max_iter: int = MAX_ITER
    grad_tol: float = GRAD_TOL

    def __post_init__(self):
        if not self.p > 1:
            raise ExponentError(f"p must exceed 1, got {self.p}")
        if self.W.grid != self.grid:
            raise GridMismatchError("W is not sampled on the problem grid")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        vals = self.boundary_values()
        if not np.all(np.isfinite(vals[boundary_mask(self.grid)])):
            raise ValueError("boundary data must be finite")

    def boundary_values(self) -> np.ndarray:
        b = self.boundary
        if callable(b) and not isinstance(b, (ScalarField, np.ndarray)):
            vals = np.asarray(b(*self.grid.mesh()), dtype=float)
        else:
            vals = np.asarray(b.values if isinstance(b, ScalarField) else b, dtype=float)
        if vals.shape != self.grid.shape:
            raise GridMismatchError("boundary data does not match the grid")
        return vals

    def epsilon_schedule(self) -> list:
        """Regularization levels: none for ``p = 2``, else a decreasing ladder."""
        if self.p == 2 and self.epsilon == 0:
            return [0.0]
        final = self.epsilon if self.epsilon > 0 else EPS_SCHEDULE[-1]
        return [e for e in EPS_SCHEDULE if e > final] + [final]


@dataclass
class SolveResult:
    u: ScalarField
    energy_trace: list
    weak_residual: float
    iterations: int
    converged: bool
    epsilon: float = 0.0
    weak_residual_eps: float = 0.0
    gradient_norm: float = 0.0
    stages: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"energy_trace": self.energy_trace, "weak_residual": self.weak_residual,
                "weak_residual_regularized": self.weak_residual_eps, "iterations": self.iterations,
                "converged": self.converged, "epsilon": self.epsilon,
                "gradient_norm": self.gradient_norm, "stages": self.stages}


def _newton(op, u, free, eps, max_iter, grad_tol, trace):
    E = op.energy(u, eps)
    hist = [E]
    it = 0
    gnorm = math.inf
    for it in range(1, max_iter + 1):
        G = op.gradient(u, eps)[free]
        gnorm = float(np.max(np.abs(G))) / op.vol if G.size else 0.0
        if gnorm < grad_tol:
            return u, it - 1, True, gnorm
        H = op.hessian(u, eps)[free][:, free].tocsc()
        d = None
        lam = 0.0
        for _ in range(8):
            try:
                M = H if lam == 0 else H + lam * sp.diags(H.diagonal() + 1e-300)
                d = -spsolve(M, G)
            except RuntimeError:
                d = None
            if d is not None and np.all(np.isfinite(d)) and float(G @ d) < 0:
                break
            lam = 1e-6 if lam == 0 else lam * 100
            d = None
        if d is None:
            d = -G
        slope = float(G @ d)
        t = 1.0
        for _ in range(60):
            trial = u.copy()
            trial[free] += t * d
            Et = op.energy(trial, eps)
            if Et <= E + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            return u, it, False, gnorm
        if Et > E:  # pragma: no cover - Armijo guarantees this cannot happen
            return u, it, False, gnorm
        u, E = trial, Et
        hist.append(E)
        trace.append(E)
        if len(hist) > STALL_WINDOW and hist[-STALL_WINDOW - 1] - E <= STALL_TOL * abs(E):
            G = op.gradient(u, eps)[free]
            return u, it, True, float(np.max(np.abs(G))) / op.vol if G.size else 0.0
    return u, it, False, gnorm


def solve(problem: DirichletProblem) -> SolveResult:
    """Minimize the discrete energy with the boundary ring fixed.

    The first iterate solves the linear problem with the same ``A``; then
    Newton runs once per regularization level.  ``converged`` is reported,
    never enforced: an unconverged result is returned flagged.
    """
    g = problem.grid
    op = _Operator(problem.W, problem.p)
    bmask = boundary_mask(g).ravel()
    free = np.flatnonzero(~bmask)
    u = np.where(bmask, problem.boundary_values().ravel(), 0.0)
    # linear initial guess: sum g^t A g stationary
    op2 = _Operator.__new__(_Operator)
    op2.__dict__.update(op.__dict__)
    op2.p = 2.0
    if free.size:
        H = op2.hessian(u, 0.0)
        rhs = -(H @ u)[free]
        u[free] = spsolve(H[free][:, free].tocsc(), rhs)
    trace = [op.energy(u, problem.epsilon_schedule()[0])]
    total = 0
    ok = True
    stages = []
    gnorm = 0.0
    for eps in problem.epsilon_schedule():
        if stages:
            trace.append(op.energy(u, eps))
        u, its, conv, gnorm = _newton(op, u, free, eps, problem.max_iter, problem.grad_tol, trace)
        total += its
        stages.append({"epsilon": eps, "iterations": its, "converged": conv, "gradient_norm": gnorm})
        ok = conv
    U = ScalarField(g, u.reshape(g.shape))
    eps = problem.epsilon_schedule()[-1]
    return SolveResult(U, trace, weak_residual(U, problem.W, problem.p), total, ok, eps,
                       weak_residual(U, problem.W, problem.p, eps=eps), gnorm, stages)


# ------------------------------------------------------------ diagnostics


def bump_tests(grid: Grid, test_count: int = 16, radius: float | None = None) -> list:
    """Tensor-product bumps ``prod (1 - z_k^2)^2`` strictly inside the domain."""
    n = grid.n
    per = max(1, int(round(test_count ** (1.0 / n))))
    lo, hi = np.asarray(grid.lo), np.asarray(grid.hi)
    span = hi - lo
    rad = span / (per + 1) if radius is None else np.full(n, radius)
    X = grid.mesh()
    out = []
    for idx in np.ndindex(*([per] * n)):
        c = lo + (np.asarray(idx) + 1) * span / (per + 1)
        phi = np.ones(grid.shape)
        for k in range(n):
            z = (X[k] - c[k]) / rad[k]
            phi = phi * np.where(np.abs(z) < 1, (1 - z * z) ** 2, 0.0)
        phi[boundary_mask(grid)] = 0.0
        out.append(phi)
    return out


def weak_residual(u: ScalarField, W: SpdField, p: float, test_count: int = 16, eps: float = 0.0) -> float:
    """Largest normalized weak-form integral over a tensor bump basis.

    For each test ``phi`` this is ``|sum s^((p-2)/2) <A g, D phi>| |cell|``
    divided by ``||D phi||_{L^p_W} ||D u||^(p-1)_{L^p_W}``.
    """
    op = _Operator(W, p)
    flat = u.values.ravel()
    Gu = op.gradient(flat, eps) / p
    dw = dual_weight(W)
    nu = lp_w_norm(discrete_gradient(u), dw, p)
    if nu == 0:
        return 0.0
    worst = 0.0
    for phi in bump_tests(u.grid, test_count):
        num = abs(math.fsum((Gu * phi.ravel()).tolist()))
        den = lp_w_norm(discrete_gradient(ScalarField(u.grid, phi)), dw, p) * nu ** (p - 1)
        worst = max(worst, num / den)
    return worst


def _ball_inside(grid: Grid, B: Ball) -> bool:
    c = np.asarray(B.center)
    return bool(np.all(c - B.radius >= np.asarray(grid.lo)) and np.all(c + B.radius <= np.asarray(grid.hi)))


@dataclass(frozen=True)
class HarnackReport:
    sup: float
    inf: float
    mu: float
    implied_C: float

    def to_json(self):
        return dict(self.__dict__)


def harnack_check(u: ScalarField, W: SpdField, p: float, B: Ball) -> HarnackReport:
    """``log(sup_B u / inf_B u) / mu(B)^(1/p)`` with ``mu(B) = v(B)/w(B)``.

    Raises
    ------
    HypothesisError
        If ``2B`` leaves the domain or ``u`` is not positive on ``2B``.
    """
    B2 = Ball(B.center, 2 * B.radius)
    if not _ball_inside(u.grid, B2):
        raise HypothesisError("2B is not contained in the domain")
    m2 = region_mask(u.grid, B2)
    if np.any(u.values[m2] <= 0):
        raise HypothesisError("u is not positive on 2B")
    m = region_mask(u.grid, B)
    s, i = float(u.values[m].max()), float(u.values[m].min())
    v, w = derived_scalars(W)
    mu = integrate(v, B) / integrate(w, B)
    return HarnackReport(s, i, mu, math.log(s / i) / mu ** (1.0 / p))


def oscillation(u: ScalarField, B: Ball) -> float:
    m = region_mask(u.grid, B)
    vals = u.values[m]
    return float(vals.max() - vals.min()) if vals.size else 0.0


def oscillation_decay(u: ScalarField, x, B: Ball | float, levels: int = 4) -> list:
    """Ratios ``osc(B_{k+1}) / osc(B_k)`` for balls about `x` halving `levels` times.

    Zero oscillation gives ratio 0.
    """
    r0 = B.radius if isinstance(B, Ball) else float(B)
    balls = [Ball(tuple(x), r0 / 2**k) for k in range(levels + 1)]
    if not _ball_inside(u.grid, balls[0]):
        raise HypothesisError("the outer ball is not contained in the domain")
    osc = [oscillation(u, b) for b in balls]
    return [o1 / o0 if o0 > 0 else 0.0 for o0, o1 in zip(osc, osc[1:])]

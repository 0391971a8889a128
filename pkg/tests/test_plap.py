import math

import numpy as np
import pytest

from matweight.errors import ExponentError, GridMismatchError, HypothesisError
from matweight.families import default_grid, sample_family
from matweight.fields import Ball, Grid, ScalarField, SpdField
from matweight.plap import (
    DirichletProblem, _Operator, boundary_mask, energy, harnack_check, oscillation_decay, solve, weak_residual,
)


def const_W(g, M=None):
    M = np.eye(g.n) if M is None else np.asarray(M, float)
    return SpdField(g, np.broadcast_to(M, g.shape + M.shape).copy())


def field(g, fn):
    return ScalarField(g, fn(*g.mesh()))


# ------------------------------------------------------------ energy


def test_energy_of_linear_functions():
    g = Grid.cube(0.0, 1.0, 32)
    h = g.h[0]
    dual_area = (1 - h) ** 2  # the box spanned by the cell centers
    for p in (1.5, 2.0, 4.0):
        u = field(g, lambda x, y: 3 * x - 4 * y)
        assert math.isclose(energy(u, const_W(g), p), 5.0**p * dual_area, rel_tol=1e-12)
        # W = diag(a, b): |W^(1/p) grad u|^p = (a^(2/p) 9 + b^(2/p) 16)^(p/2)
        a, b = 4.0, 0.25
        ref = (a ** (2 / p) * 9 + b ** (2 / p) * 16) ** (p / 2) * dual_area
        assert math.isclose(energy(u, const_W(g, np.diag([a, b])), p), ref, rel_tol=1e-12)


def test_energy_routes_agree_and_scale():
    g = Grid.cube(0.0, 1.0, 24)
    rng = np.random.default_rng(3)
    W = sample_family("example-5.1", default_grid("example-5.1", 24))
    u = ScalarField(W.grid, rng.normal(size=W.grid.shape))
    for p in (1.5, 2.0, 3.0):
        direct = energy(u, W, p)  # weighted-norm route
        flat = _Operator(W, p).energy(u.values.ravel(), 0.0)  # operator route
        assert math.isclose(direct, flat, rel_tol=1e-10)
        assert math.isclose(energy(ScalarField(W.grid, -2 * u.values), W, p), 2**p * direct, rel_tol=1e-10)
        assert energy(u, W, p, eps=1e-3) >= direct
    with pytest.raises(GridMismatchError):
        energy(ScalarField(g, np.zeros(g.shape)), const_W(Grid.cube(0.0, 1.0, 16)), 2.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_operator_gradient_matches_difference_quotients(p):
    W = sample_family("example-5.1", default_grid("example-5.1", 12))
    op = _Operator(W, p)
    rng = np.random.default_rng(7)
    u = rng.normal(size=int(np.prod(W.grid.shape)))
    for eps in (1e-4, 1e-2):
        G = op.gradient(u, eps)
        for k in rng.choice(u.size, 20, replace=False):
            d = 1e-6
            e = np.zeros_like(u)
            e[k] = d
            fd = (op.energy(u + e, eps) - op.energy(u - e, eps)) / (2 * d)
            assert abs(G[k] - fd) <= 1e-5 * max(abs(fd), 1e-3 * np.abs(G).max())


# ------------------------------------------------------------ solver


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_linear_data_is_reproduced(p):
    g = Grid.cube(0.0, 1.0, 32)
    for W in (const_W(g), const_W(g, [[2.0, 0.5], [0.5, 1.0]])):
        res = solve(DirichletProblem(g, W, p, lambda x, y: x + 2 * y))
        X, Y = g.mesh()
        assert np.abs(res.u.values - (X + 2 * Y)).max() < 1e-8
        assert res.converged


def test_harmonic_quadratic():
    g = Grid.cube(-1.0, 1.0, 128)
    res = solve(DirichletProblem(g, const_W(g), 2.0, lambda x, y: x * x - y * y))
    X, Y = g.mesh()
    assert np.abs(res.u.values - (X * X - Y * Y)).max() <= 1e-3
    assert res.weak_residual < 1e-6


def test_energy_trace_and_extremal_properties():
    g = Grid.cube(0.0, 1.0, 48)
    W = const_W(g, [[3.0, 1.0], [1.0, 2.0]])
    bc = lambda x, y: np.sin(3 * x) + np.cos(2 * y) * x
    p = 3.0
    res = solve(DirichletProblem(g, W, p, bc))
    tr = res.energy_trace
    assert all(b <= a * (1 + 1e-12) for a, b in zip(tr, tr[1:]))
    # maximum principle
    ring = boundary_mask(g)
    u = res.u.values
    assert u.max() <= u[ring].max() + 1e-10 and u.min() >= u[ring].min() - 1e-10
    # scaling equivariance
    res2 = solve(DirichletProblem(g, W, p, lambda x, y: 3 * bc(x, y)))
    assert np.abs(res2.u.values - 3 * u).max() < 1e-6 * np.abs(u).max()
    # minimality against interior perturbations
    E = energy(res.u, W, p, eps=res.epsilon)
    rng = np.random.default_rng(0)
    for _ in range(10):
        d = rng.normal(size=g.shape) * 1e-3
        d[ring] = 0
        assert energy(ScalarField(g, u + d), W, p, eps=res.epsilon) >= E


def test_problem_validation():
    g = Grid.cube(0.0, 1.0, 8)
    with pytest.raises(ExponentError):
        DirichletProblem(g, const_W(g), 1.0, lambda x, y: x)
    with pytest.raises(GridMismatchError):
        DirichletProblem(g, const_W(Grid.cube(0.0, 1.0, 16)), 2.0, lambda x, y: x)
    with pytest.raises(ValueError):
        DirichletProblem(g, const_W(g), 2.0, lambda x, y: np.full(x.shape, np.nan))


def test_weak_residual_detects_non_solutions():
    g = Grid.cube(-1.0, 1.0, 64)
    u = field(g, lambda x, y: x * x + y * y)  # subharmonic, not a solution
    assert weak_residual(u, const_W(g), 2.0) > 1e-2
    assert weak_residual(field(g, lambda x, y: 2 * x - y), const_W(g), 3.0) < 1e-12


# ------------------------------------------------------------ Harnack and oscillation


def test_harnack_examples():
    g = Grid.cube(-1.0, 1.0, 128)
    W = const_W(g)
    rep = harnack_check(ScalarField(g, np.full(g.shape, 2.0)), W, 2.0, Ball((0.0, 0.0), 0.3))
    assert rep.implied_C == 0.0 and rep.mu == pytest.approx(1.0)
    u = field(g, lambda x, y: x + 1.5)
    B = Ball((0.0, 0.0), 0.3)
    rep = harnack_check(u, W, 2.0, B)
    inside = np.hypot(*g.mesh()) < 0.3
    ref = math.log(u.values[inside].max() / u.values[inside].min())
    assert math.isclose(rep.implied_C, ref, rel_tol=1e-9)
    assert ref < math.log(1.8 / 1.2) + 1e-12
    with pytest.raises(HypothesisError):
        harnack_check(u, W, 2.0, Ball((0.0, 0.0), 0.6))
    with pytest.raises(HypothesisError):
        harnack_check(field(g, lambda x, y: x), W, 2.0, B)


def test_oscillation_decay_examples():
    g = Grid.cube(-1.0, 1.0, 256)
    ratios = oscillation_decay(field(g, lambda x, y: x - 0.5 * y), (0.0, 0.0), 0.8, levels=4)
    assert all(abs(r - 0.5) < 0.05 for r in ratios)
    assert oscillation_decay(ScalarField(g, np.ones(g.shape)), (0.0, 0.0), 0.8) == [0.0] * 4
    with pytest.raises(HypothesisError):
        oscillation_decay(ScalarField(g, np.ones(g.shape)), (0.5, 0.5), 0.8)


def test_example51_weight_solve_and_harnack_stability():
    Cs = []
    for N in (64, 128):
        g = default_grid("example-5.1", N)
        W = sample_family("example-5.1", g)
        res = solve(DirichletProblem(g, W, 2.0, lambda x, y: 1.0 + x + y))
        assert res.converged and res.weak_residual < 1e-5
        Cs.append(harnack_check(res.u, W, 2.0, Ball((0.5, 0.5), 0.2)).implied_C)
    assert Cs[0] > 0 and abs(Cs[1] / Cs[0] - 1) < 0.3

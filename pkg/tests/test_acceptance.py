"""Acceptance criteria, one test per criterion.

Run with ``pytest -v tests/test_acceptance.py``; each criterion shows as one
PASSED or FAILED line.  Sub-checks are gathered first and asserted together
so a failure message lists every failing part.
"""

import numpy as np
import pytest

from matweight import plap
from matweight import weighted_ops as wo
from matweight.characteristics import (
    a_infinity, derived_scalars, duality_check, matrix_ap, reverse_holder, scalar_a1, scalar_ap,
)
from matweight.cubes import CubeFamily
from matweight.families import REGISTRY, default_grid, sample_family
from matweight.fields import Ball, Grid, ScalarField, SpdField, VectorField
from matweight.maximal import continuity_set, pair_maximal
from matweight.verify import (
    bundle_balance_failure, bundle_ball_map, bundle_plap_harmonic, bundle_remark52, example51_gradients,
    norm_traces,
)


def assert_all(checks):
    failed = [f"{name}: {value}" for name, ok, value in checks if not ok]
    assert not failed, "failing parts:\n" + "\n".join(failed)


def from_bundle(checks, *prefixes):
    return [(c.name, c.passed, c.value) for c in checks if c.name.startswith(prefixes)]


@pytest.fixture(scope="module")
def ball_bundle():
    return bundle_ball_map(256)


# ------------------------------------------------------------ 1


def test_criterion_01_identity_calibration():
    g = Grid.cube(0.0, 1.0, 64)
    I = sample_family("constant", g)
    F = CubeFamily.dyadic(g)
    checks = []
    for p in (1.0, 1.5, 2.0, 3.0):
        val = matrix_ap(I, p, F).value
        checks.append((f"matrix A_{p} of I", abs(val - 1) <= 1e-12, val))
    c = ScalarField(g, np.full(g.shape, 3.7))
    for name, est in (("A_2", scalar_ap(c, 2.0, F)), ("A_1", scalar_a1(c, F)),
                      ("RH_2", reverse_holder(c, 2.0, F)), ("A_inf", a_infinity(c, F))):
        checks.append((f"scalar {name} of a constant", abs(est.value - 1) <= 1e-12, est.value))
    assert_all(checks)


# ------------------------------------------------------------ 2


def test_criterion_02_power_tensor_norms_and_divergence():
    rows = norm_traces([64, 128, 256, 512])
    last = rows[-1]
    fv = [r["f_v"] for r in rows]
    gW = [r["g_W"] for r in rows]
    checks = [
        ("|grad f|^p in L^p_W = 2 within 2%", abs(last["f_W"] - 2) <= 0.04, last["f_W"]),
        ("|grad g|^p in L^p(w) = 2 within 2%", abs(last["g_w"] - 2) <= 0.04, last["g_w"]),
        ("L^p(v) norm of grad f strictly increasing", all(b > a for a, b in zip(fv, fv[1:])), fv),
        ("L^p_W norm of grad g strictly increasing", all(b > a for a, b in zip(gW, gW[1:])), gW),
        ("L^p(v) norm of grad f grows >= 1.4x per level", all(b >= 1.4 * a for a, b in zip(fv, fv[1:])),
         [b / a for a, b in zip(fv, fv[1:])]),
        ("L^p_W norm of grad g grows >= 1.4x per level", all(b >= 1.4 * a for a, b in zip(gW, gW[1:])),
         [b / a for a, b in zip(gW, gW[1:])]),
    ]
    assert_all(checks)


# ------------------------------------------------------------ 3


def test_criterion_03_diagonal_power_dichotomy():
    # 1024 cells with 8 levels keeps at least 4 cells per side in the smallest cube
    checks = bundle_remark52(1024, 8)
    assert len(checks) == 2
    assert_all(from_bundle(checks, "gamma"))


# ------------------------------------------------------------ 4


def test_criterion_04_balance_failure_and_success():
    checks = bundle_balance_failure(512)
    assert_all(from_bundle(checks, "alpha="))


# ------------------------------------------------------------ 5


def test_criterion_05_discrete_averaging_bound():
    g = default_grid("example-5.1", 64)
    W = sample_family("example-5.1", g, alpha=0.5)
    F = CubeFamily.dyadic(g)
    checks = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        fam = wo.random_disjoint_cubes(F, rng)
        f = VectorField(g, rng.standard_normal(g.shape + (2,)))
        lhs, rhs, ok = wo.averaging_bound_check(f, W, 2.0, fam, slack=1e-9)
        checks.append((f"seed {seed}", ok, lhs / rhs))
    assert_all(checks)


# ------------------------------------------------------------ 6


def test_criterion_06_mollifier_suite():
    g = default_grid("example-5.1", 256)
    W = sample_family("example-5.1", g, alpha=0.5)
    gf, _ = example51_gradients(g)
    ts = [2.0**-k for k in range(2, 7)]
    A = matrix_ap(W, 2.0, CubeFamily.dyadic(g)).value
    tr = wo.mollifier_bound_and_convergence(gf, W, 2.0, ts, characteristic=A)
    dev = tr.relative_deviation
    I = sample_family("constant", g)
    f = VectorField(g, np.random.default_rng(0).standard_normal(g.shape + (2,)))
    tri = wo.mollifier_bound_and_convergence(f, I, 2.0, ts, characteristic=1.0)
    checks = [
        ("ratios bounded", tr.bounded, tr.ratios),
        ("deviation strictly decreasing", all(b < a for a, b in zip(dev, dev[1:])), dev),
        ("deviation below 0.05 at the finest t", dev[-1] < 0.05, dev[-1]),
        ("identity weight ratio <= 1 + 1e-9", max(tri.ratios) <= 1 + 1e-9, max(tri.ratios)),
    ]
    assert_all(checks)


# ------------------------------------------------------------ 7


def test_criterion_07_ball_map_oracle(ball_bundle):
    parts = from_bundle(ball_bundle, "analytic", "det G", "energy identity", "finite differences")
    assert len(parts) == 5
    assert_all(parts)


# ------------------------------------------------------------ 8


def test_criterion_08_ball_map_sharpness(ball_bundle):
    parts = from_bundle(ball_bundle, "A_t of 1/K_O", "RH_s of K_I", "quadratic-form A_2")
    assert len(parts) == 5
    assert_all(parts)


# ------------------------------------------------------------ 9


def test_criterion_09_continuity_set_pipeline(ball_bundle):
    parts = from_bundle(ball_bundle, "continuity mask", "instability blob", "weak-type")
    assert len(parts) == 3
    assert_all(parts)


# ------------------------------------------------------------ 10


def test_criterion_10_solver_correctness():
    checks = [(c.name, c.passed, c.value) for c in bundle_plap_harmonic(128)]
    W = sample_family("example-5.1", default_grid("example-5.1", 16))
    rng = np.random.default_rng(0)
    u = rng.normal(size=int(np.prod(W.grid.shape)))
    for p in (1.5, 2.0, 4.0):
        op = plap._Operator(W, p)
        G = op.gradient(u, 1e-3)
        worst = 0.0
        for k in rng.choice(u.size, 20, replace=False):
            e = np.zeros_like(u)
            e[k] = 1e-6
            fd = (op.energy(u + e, 1e-3) - op.energy(u - e, 1e-3)) / 2e-6
            worst = max(worst, abs(G[k] - fd) / max(abs(fd), 1e-3 * np.abs(G).max()))
        checks.append((f"energy gradient vs difference quotients at p={p}", worst <= 1e-5, worst))
    assert_all(checks)


# ------------------------------------------------------------ 11


def test_criterion_11_degenerate_solve_diagnostics():
    checks = []
    Cs = []
    bc = lambda x, y: 1.0 + x + 2 * y
    for N in (64, 128):
        g = default_grid("example-5.1", N)
        W = sample_family("example-5.1", g, alpha=0.5)
        res = plap.solve(plap.DirichletProblem(g, W, 2.0, bc))
        u = res.u.values
        ring = plap.boundary_mask(g)
        lo, hi = u[ring].min(), u[ring].max()
        checks.append((f"N={N}: solution within boundary bounds",
                       u.min() >= lo - 1e-9 and u.max() <= hi + 1e-9, (u.min(), u.max(), lo, hi)))
        checks.append((f"N={N}: weak residual < 1e-5", res.weak_residual < 1e-5, res.weak_residual))
        Cs.append(plap.harnack_check(res.u, W, 2.0, Ball((0.5, 0.5), 0.2)).implied_C)
    checks.append(("Harnack constant stable within 30%", abs(Cs[1] / Cs[0] - 1) < 0.3, Cs))
    # oscillation decay at seeded cells of the continuity set, away from the boundary
    v, w = derived_scalars(W)
    mask = continuity_set(pair_maximal(w, v)).mask
    X, Y = g.mesh()
    r0 = 0.15
    room = (X > r0) & (X < 1 - r0) & (Y > r0) & (Y < 1 - r0)
    cells = np.argwhere(mask & room)
    pick = cells[np.random.default_rng(0).choice(len(cells), 20, replace=False)]
    worst = 0.0
    for i, j in pick:
        ratios = plap.oscillation_decay(res.u, (X[i, j], Y[i, j]), r0, levels=3)
        worst = max(worst, max(ratios))
    checks.append(("oscillation ratios < 1 at 20 stable cells", worst < 1, worst))
    assert_all(checks)


# ------------------------------------------------------------ 12


def test_criterion_12_structural_invariant_sweep():
    checks = []
    # monotone families
    g = default_grid("example-5.1", 128)
    W = sample_family("example-5.1", g)
    v, w = derived_scalars(W)
    small, big, shifted = CubeFamily(g, 3), CubeFamily(g, 5), CubeFamily(g, 5, shifted=True)
    for name, fn in (("A_2", lambda F: scalar_ap(v, 2.0, F)), ("A_1", lambda F: scalar_a1(v, F)),
                     ("RH", lambda F: reverse_holder(v, 1.5, F)), ("A_inf", lambda F: a_infinity(v, F)),
                     ("matrix A_2", lambda F: matrix_ap(W, 2.0, F))):
        a, b, c = fn(small), fn(big), fn(shifted)
        ok = a.value <= b.value * (1 + 1e-12) <= c.value * (1 + 1e-12)
        ok &= all(x <= y for x, y in zip(b.per_level_sup, b.per_level_sup[1:]))
        checks.append((f"monotone family: {name}", ok, (a.value, b.value, c.value)))
    # d = 1 agreement
    gs = Grid.cube(0.0, 1.0, 32)
    F = CubeFamily.dyadic(gs)
    for seed in range(5):
        vals = np.exp(np.random.default_rng(seed).normal(size=gs.shape))
        for p in (1.5, 2.0, 3.0):
            m = matrix_ap(SpdField(gs, vals[..., None, None]), p, F).value
            s = scalar_ap(ScalarField(gs, vals), p, F).value
            checks.append((f"d=1 agreement seed {seed} p={p}", abs(m - s) <= 1e-12 * s, (m, s)))
    # duality on three families
    for name, params in (("constant", {}), ("example-5.1", {}), ("remark-5.2", {"gamma": 0.75})):
        gd = default_grid(name, 256 if name != "constant" else 64, **params)
        r = duality_check(sample_family(name, gd, **params), 2.0, CubeFamily.dyadic(gd))
        checks.append((f"duality verdicts agree: {name}", r["agree"], r["primal_estimate"].verdict))
    # matrix finite implies derived scalars finite, on every registered matrix family
    for name, fam in sorted(REGISTRY.items()):
        if fam.kind != "spd":
            continue
        params = {"value": "identity"} if name == "constant" else {}
        gd = default_grid(name, 128, **params)
        Wd = sample_family(name, gd, **params)
        Fd = CubeFamily.dyadic(gd)
        if matrix_ap(Wd, 2.0, Fd).verdict == "finite":
            vd, wd = derived_scalars(Wd)
            ok = scalar_ap(vd, 2.0, Fd).verdict == "finite" and scalar_ap(wd, 2.0, Fd).verdict == "finite"
            checks.append((f"matrix finite implies scalars finite: {name}", ok, None))
    # norm sandwich on 50 seeded fields
    gn = Grid.cube(0.0, 1.0, 16)
    for seed in range(50):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=gn.shape + (2, 2))
        Wn = SpdField(gn, A @ np.swapaxes(A, -1, -2) + 0.1 * np.eye(2))
        vn, wn = derived_scalars(Wn)
        f = VectorField(gn, rng.normal(size=gn.shape + (2,)))
        for p in (1.5, 2.0, 3.0):
            a, b, c = wo.lp_scalar_norm(f, wn, p), wo.lp_w_norm(f, Wn, p), wo.lp_scalar_norm(f, vn, p)
            checks.append((f"sandwich seed {seed} p={p}", a <= b * (1 + 1e-12) and b <= c * (1 + 1e-12), (a, b, c)))
    assert_all(checks)

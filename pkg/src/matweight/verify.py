"""Verification bundles for the registered worked examples.

Each bundle runs a fixed list of numeric checks and returns one
:class:`Check` per item.  The command line exposes them as
``matweight verify-example NAME``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import balance as bal
from . import maximal as mx
from . import mfd
from . import plap
from . import weighted_ops as wo
from .characteristics import derived_scalars, lauzon_treil_a2, matrix_ap, reverse_holder, scalar_ap
from .cubes import CubeFamily
from .errors import FamilyError
from .families import default_grid, sample_family
from .fields import Annulus, Ball, Grid, ScalarField, VectorField


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value, "detail": self.detail}


def example51_gradients(grid: Grid, alpha: float = 0.5, p: float = 2.0):
    """``grad f`` and ``grad g`` for ``f = c x^e``, ``g = c y^e`` with ``e = (alpha-1)/p + 1``.

    ``c = 1/e`` normalizes the derivative to ``x^(e-1)``.
    """
    X, Y = grid.mesh()
    e = (alpha - 1) / p + 1
    zero = np.zeros(grid.shape)
    gf = VectorField(grid, np.stack([X ** (e - 1), zero], axis=-1))
    gg = VectorField(grid, np.stack([zero, Y ** (e - 1)], axis=-1))
    return gf, gg


def norm_traces(sizes, alpha=0.5, p=2.0):
    """``p``-th powers of the four gradient norms of the ``example-5.1`` family on each grid size."""
    rows = []
    for N in sizes:
        g = default_grid("example-5.1", N)
        W = sample_family("example-5.1", g, alpha=alpha)
        v, w = derived_scalars(W)
        gf, gg = example51_gradients(g, alpha, p)
        rows.append({
            "N": N,
            "f_W": wo.lp_w_norm(gf, W, p) ** p,
            "f_v": wo.lp_scalar_norm(gf, v, p) ** p,
            "g_W": wo.lp_w_norm(gg, W, p) ** p,
            "g_w": wo.lp_scalar_norm(gg, w, p) ** p,
        })
    return rows


def _growth_ok(vals, factor):
    return all(b >= factor * a for a, b in zip(vals, vals[1:]))


def bundle_example_51(N: int = 512, seed: int = 0) -> list:
    out = []
    rows = norm_traces([N // 8, N // 4, N // 2, N])
    last = rows[-1]
    out.append(Check("grad f in L^p_W: norm^p = 2 within 2%", abs(last["f_W"] - 2) <= 0.04, last["f_W"]))
    fv = [r["f_v"] for r in rows]
    out.append(Check("grad f in L^p(v): strictly increasing under refinement",
                     all(b > a for a, b in zip(fv, fv[1:])), fv))
    out.append(Check("grad f in L^p(v): growth >= 1.4x per refinement", _growth_ok(fv, 1.4),
                     [b / a for a, b in zip(fv, fv[1:])]))
    out.append(Check("grad g in L^p(w): norm^p = 2 within 2%", abs(last["g_w"] - 2) <= 0.04, last["g_w"]))
    gW = [r["g_W"] for r in rows]
    out.append(Check("grad g in L^p_W: strictly increasing under refinement",
                     all(b > a for a, b in zip(gW, gW[1:])), gW))
    out.append(Check("grad g in L^p_W: growth >= 1.4x per refinement", _growth_ok(gW, 1.4),
                     [b / a for a, b in zip(gW, gW[1:])]))

    gs = default_grid("example-5.1", 64)
    Ws = sample_family("example-5.1", gs, alpha=0.5)
    F = CubeFamily.dyadic(gs)
    rng = np.random.default_rng(seed)
    worst = 0.0
    ok = True
    for _ in range(100):
        fam = wo.random_disjoint_cubes(F, rng)
        f = VectorField(gs, rng.standard_normal(gs.shape + (2,)))
        lhs, rhs, passed = wo.averaging_bound_check(f, Ws, 2.0, fam)
        ok &= passed
        worst = max(worst, lhs / rhs)
    out.append(Check("averaging bound on 100 random families", ok, worst))

    gm = default_grid("example-5.1", 256)
    Wm = sample_family("example-5.1", gm, alpha=0.5)
    gf, _ = example51_gradients(gm)
    ts = [2.0**-k for k in range(2, 7)]
    tr = wo.mollifier_bound_and_convergence(gf, Wm, 2.0, ts, characteristic=matrix_ap(Wm, 2.0, CubeFamily.dyadic(gm)).value)
    out.append(Check("mollifier: bounded and converging", tr.passed, tr.to_json()))
    I = sample_family("constant", gm)
    f = VectorField(gm, np.random.default_rng(seed).standard_normal(gm.shape + (2,)))
    tri = wo.mollifier_bound_and_convergence(f, I, 2.0, ts, characteristic=1.0)
    out.append(Check("mollifier with W = I: ratio <= 1", max(tri.ratios) <= 1 + 1e-9, max(tri.ratios)))
    return out


def _pair(name, N, **params):
    g = default_grid("power", N)
    v = sample_family("power", g, mode="cell-average", **params)
    w = sample_family("constant", g, value=1.0)
    return g, w, v


def bundle_balance_failure(N: int = 512, seed: int = 0) -> list:
    out = []
    g, w, v = _pair("power", N, exponent=-0.9)
    rep = bal.balance_scan(w, v, 1.5, 2.0, seed=seed)
    target = (2 - 2 * 0.9) / 2 + 1 - 2 / 1.5
    out.append(Check("alpha=0.9, p=1.5, q=2: slope matches -7/30 within 0.05",
                     abs(rep.loglog_slope - target) <= 0.05, rep.loglog_slope))
    out.append(Check("alpha=0.9, p=1.5, q=2: verdict fails", rep.verdict == "fails", rep.verdict))
    g, w, v = _pair("power", N, exponent=-0.5)
    rep = bal.balance_scan(w, v, 2.0, 3.0, seed=seed)
    out.append(Check("alpha=0.5, p=2, q=3: slope matches 1/3 within 0.05",
                     abs(rep.loglog_slope - 1 / 3) <= 0.05, rep.loglog_slope))
    out.append(Check("alpha=0.5, p=2, q=3: verdict holds", rep.verdict == "holds", rep.verdict))
    g, w, v = _pair("power", 256, exponent=-0.9)
    adm = bal.admissible_pair_report(w, v, 1.5, CubeFamily.dyadic(g), [1.75, 2.0, 2.5, 3.0], seed=seed)
    items = adm.to_json()["items"]
    out.append(Check("admissibility items 1-3 hold", items["w_le_v"] and items["w_in_Ap"] and items["v_doubling"], items))
    out.append(Check("balance fails for every q in the grid", not adm.balance_holds,
                     {q: r.verdict for q, r in adm.balance.items()}))
    return out


def bundle_remark52(N: int = 1024, levels: int = 8, seed: int = 0) -> list:
    out = []
    g = default_grid("remark-5.2", N)
    F = CubeFamily(g, levels)
    for gam, want in ((0.25, "finite"), (0.75, "diverging")):
        W = sample_family("remark-5.2", g, gamma=gam)
        e = matrix_ap(W, 2.0, F, seed=seed)
        out.append(Check(f"gamma={gam}: matrix A_2 {want}", e.verdict == want, e.value,
                         {"growth_factors": list(e.growth_factors)}))
    return out


def bundle_ball_map(N: int = 256, seed: int = 0) -> list:
    out = []
    g = default_grid("ball-map", N)
    f = sample_family("ball-map", g)
    X, Y = g.mesh()
    r = np.hypot(X, Y)

    def errors(rep):
        R = np.hypot(*rep.K_O.grid.mesh())
        ann = (R > 0.3) & (R < 0.7)
        mu1, mu2 = 0.5 / np.sqrt(R), 1 / R + 1 / np.sqrt(R)
        K = 2 + 2 / np.sqrt(R)
        return {
            "mu1": float(np.max(np.abs(rep.singular[..., 1] / mu1 - 1)[ann])),
            "mu2": float(np.max(np.abs(rep.singular[..., 0] / mu2 - 1)[ann])),
            "K_O": float(np.max(np.abs(rep.K_O.values / K - 1)[ann])),
            "K_I": float(np.max(np.abs(rep.K_I.values / K - 1)[ann])),
            "detG": float(np.max(np.abs(rep.det_G() - 1)[ann])),
        }

    rep = mfd.analyze(f, "analytic")
    e = errors(rep)
    out.append(Check("analytic eigenvalues match closed forms to 1e-10", max(e["mu1"], e["mu2"]) < 1e-10, e))
    out.append(Check("analytic K_O = K_I = 2 + 2|x|^-1/2 to 1e-8", max(e["K_O"], e["K_I"]) < 1e-8, e))
    out.append(Check("det G = 1 to 1e-8", e["detG"] < 1e-8, e["detG"]))
    ei = mfd.energy_identity_check(f, rep.W, Annulus((0.0, 0.0), 0.3, 0.7), 0, "analytic")
    out.append(Check("energy identity on the annulus to 1e-8", ei["gap"] < 1e-8, ei))
    fd = [errors(mfd.analyze(sample_family("ball-map", default_grid("ball-map", M)), "fd")) for M in (N, 2 * N)]
    worst = [max(x.values()) for x in fd]
    order = float(np.log2(worst[0] / worst[1]))
    out.append(Check("finite differences within 1e-3 after refinement, order >= 1.8",
                     worst[1] <= 1e-3 and order >= 1.8, {"errors": worst, "order": order}))

    F = CubeFamily.dyadic(g)
    w = sample_family("ball-map-KO-inverse", g)
    v = sample_family("ball-map-KI", g)
    for t, want in ((1.2, "diverging"), (1.5, "finite")):
        est = scalar_ap(w, t, F)
        out.append(Check(f"A_t of 1/K_O at t={t}: {want}", est.verdict == want, est.value,
                         {"growth_factors": list(est.growth_factors)}))
    for s, want in ((3.0, "finite"), (4.5, "diverging")):
        est = reverse_holder(v, s, F)
        out.append(Check(f"RH_s of K_I at s={s}: {want}", est.verdict == want, est.value,
                         {"growth_factors": list(est.growth_factors)}))
    lt = lauzon_treil_a2(sample_family("ball-map-W", g), F, 64)
    out.append(Check("quadratic-form A_2 of W uniformly finite over 64 directions", lt["verdict"] == "finite",
                     lt["value"]))

    M = mx.pair_maximal(w, v)
    cs = mx.continuity_set(M)
    out.append(Check("continuity mask covers >= 99% of |x| > 0.1", cs.mask[r > 0.1].mean() >= 0.99,
                     float(cs.mask[r > 0.1].mean())))
    out.append(Check("instability blob contains the four cells nearest 0", _blob_ok(~cs.mask, g),
                     len(cs.unstable_cells)))
    lams = [2, 4, 8, 16, 32]
    g2 = default_grid("ball-map", N // 2)
    w2, v2 = sample_family("ball-map-KO-inverse", g2), sample_family("ball-map-KI", g2)
    wt1 = mx.weak_type_check(w2, v2, mx.pair_maximal(w2, v2), lams)
    wt2 = mx.weak_type_check(w, v, M, lams)
    out.append(Check("weak-type constant stable within 25% under refinement", wt1.stable_against(wt2),
                     [wt1.empirical_C, wt2.empirical_C]))
    return out


def _blob_ok(bad: np.ndarray, g: Grid) -> bool:
    from scipy.ndimage import label

    lab, _ = label(bad)
    c = [m // 2 for m in g.cells_per_axis]
    near = [(c[0] - 1, c[1] - 1), (c[0] - 1, c[1]), (c[0], c[1] - 1), (c[0], c[1])]
    ids = {int(lab[i]) for i in near}
    return len(ids) == 1 and 0 not in ids


def bundle_plap_harmonic(N: int = 128, seed: int = 0) -> list:
    out = []
    g = Grid.cube(0.0, 1.0, N)
    I = sample_family("constant", g)
    X, Y = g.mesh()
    res = plap.solve(plap.DirichletProblem(g, I, 2.0, lambda x, y: x * x - y * y))
    err = float(np.max(np.abs(res.u.values - (X * X - Y * Y))))
    out.append(Check("harmonic polynomial reproduced to 1e-3", err <= 1e-3, err))
    out.append(Check("weak residual below 1e-6", res.weak_residual < 1e-6, res.weak_residual))
    mono = bool(np.all(np.diff(res.energy_trace) <= 0))
    for p in (1.5, 2.0, 4.0):
        r = plap.solve(plap.DirichletProblem(g, I, p, lambda x, y: x))
        e = float(np.max(np.abs(r.u.values - X)))
        mono &= bool(np.all(np.diff(r.energy_trace) <= 0))
        out.append(Check(f"linear data reproduced at p={p} to 1e-8", e <= 1e-8, e))
    out.append(Check("energy traces nonincreasing", mono))
    return out


BUNDLES = {
    "example-5.1": bundle_example_51,
    "example-7-balance-failure": bundle_balance_failure,
    "remark-5.2": bundle_remark52,
    "ball-map": bundle_ball_map,
    "plap-harmonic": bundle_plap_harmonic,
}


def run_bundle(name: str, **kw) -> list:
    try:
        fn = BUNDLES[name]
    except KeyError:
        raise FamilyError(f"unknown example {name!r}; registered: {', '.join(sorted(BUNDLES))}") from None
    return fn(**kw)

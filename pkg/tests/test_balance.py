import json
import math

import numpy as np
import pytest

from matweight.balance import (
    admissible_pair_report, balance_ratio, balance_scan, default_centers, default_radii, exponent_condition,
)
from matweight.cubes import CubeFamily
from matweight.errors import ExponentError, UnderResolvedError
from matweight.families import default_grid, sample_family
from matweight.fields import Ball, Grid, ScalarField, integrate


def ones(g):
    return ScalarField(g, np.ones(g.shape))


def product_pair(alpha, N=256):
    g = default_grid("power", N)
    return g, ones(g), sample_family("power", g, mode="cell-average", exponent=-alpha)


def closed_form_exponent(alpha, p, q):
    return (2 - 2 * alpha) / q + 1 - 2 / p


# ------------------------------------------------------------ single ratio


def test_constant_pair_ratio_is_lebesgue_scaling():
    g = Grid.cube(-1.0, 1.0, 512)
    w = ones(g)
    B = Ball((0.0, 0.0), 0.8)
    for p, q in ((2.0, 3.0), (1.5, 4.0)):
        for r in (0.5, 0.25, 0.125):
            ref = r ** (1 + 2 / q - 2 / p)
            assert abs(balance_ratio(w, w, p, q, B, r) / ref - 1) < 0.02


def test_ratio_matches_radial_product_integral_at_corner():
    # quarter disk about the origin: v(rB)/v(B) = r^(2 - 2 alpha), w(rB)/w(B) = r^2
    for alpha, p, q in ((0.9, 1.5, 2.0), (0.5, 2.0, 3.0)):
        g, w, v = product_pair(alpha, 512)
        B = Ball((0.0, 0.0), 1.0)
        for r in (0.5, 0.25, 0.125):
            ref = r ** closed_form_exponent(alpha, p, q)
            assert abs(balance_ratio(w, v, p, q, B, r) / ref - 1) < 0.03


def test_ratio_errors():
    g = Grid.cube(0.0, 1.0, 16)
    w = ones(g)
    with pytest.raises(ExponentError):
        balance_ratio(w, w, 2.0, 2.0, Ball((0.5, 0.5), 0.4), 0.5)
    with pytest.raises(UnderResolvedError):
        balance_ratio(w, w, 2.0, 3.0, Ball((0.5, 0.5), 0.4), 0.01)


def test_ratio_limit_as_q_grows():
    # with w = v the quotient tends to r (w(rB)/w(B))^(-1/p) as q -> infinity
    g = Grid.cube(0.0, 1.0, 128)
    rng = np.random.default_rng(0)
    w = ScalarField(g, np.exp(rng.normal(size=g.shape)))
    for c in default_centers(g, 8):
        B = Ball(c, 0.5)
        for r in (0.5, 0.25, 0.1):
            mass = integrate(w, Ball(c, r * 0.5)) / integrate(w, B)
            assert math.isclose(balance_ratio(w, w, 2.0, 1e12, B, r), r * mass**-0.5, rel_tol=1e-9)
    # for Lebesgue measure the limit r^(1 - n/p) is at most 1 once p >= n
    one = ones(Grid.cube(-1.0, 1.0, 256))
    for p in (2.0, 3.0):
        for r in (0.5, 0.25, 0.1):
            assert balance_ratio(one, one, p, 1e12, Ball((0.0, 0.0), 0.9), r) <= 1 + 0.02


# ------------------------------------------------------------ scans


def test_constant_pair_scan_slope_one_half():
    g = Grid.cube(0.0, 1.0, 256)
    rep = balance_scan(ones(g), ones(g), 2.0, 4.0)
    assert rep.verdict == "holds" and abs(rep.loglog_slope - 0.5) < 0.05


@pytest.mark.parametrize("alpha,p,q", [(0.9, 1.5, 2.0), (0.5, 2.0, 3.0), (0.7, 1.5, 2.5), (0.3, 2.0, 4.0)])
def test_scan_slope_matches_closed_form(alpha, p, q):
    g, w, v = product_pair(alpha)
    rep = balance_scan(w, v, p, q)
    target = closed_form_exponent(alpha, p, q)
    assert abs(rep.loglog_slope - target) <= 0.05
    assert rep.verdict == ("holds" if target >= 0 else "fails")


def test_scan_report_outputs():
    g, w, v = product_pair(0.9, 128)
    rep = balance_scan(w, v, 1.5, 2.0)
    rows = rep.worst_csv().splitlines()
    assert rows[0] == "r,ratio" and len(rows) == len(rep.radii) + 1
    d = json.loads(json.dumps(rep.to_json()))
    assert d["verdict"] == "fails" and len(d["balls"]) == rep.sampled_balls
    assert rep.worst_ball.center == (0.0, 0.0)


def test_default_centers_and_radii():
    g = Grid.cube(0.0, 1.0, 64)
    cs = default_centers(g, 32, seed=1)
    assert (0.0, 0.0) in cs and (0.5, 0.5) in cs and len(cs) == 4 + 1 + 4 + 32
    assert cs == default_centers(g, 32, seed=1)
    rs = default_radii(g, 1.0)
    assert rs[0] == 0.5 and rs[-1] * 1.0 >= 4 / 64 and rs[-1] / 2 < 4 / 64


# ------------------------------------------------------------ exponent relation


def test_exponent_condition_examples():
    c = exponent_condition(1.5, 2.0, 2.0, 2)
    assert c.satisfied and c.gap == 0.5 == c.bound
    assert c.epsilon == 0.25 and math.isclose(c.q, 4.0) and c.q > 2
    n = 3
    c = exponent_condition(1 + (n - 1) / n, n, n, n)
    assert c.satisfied
    c = exponent_condition(1.01, 1.01, 2.0, 2)
    assert not c.satisfied and "exceeds" in c.reason
    c = exponent_condition(1.2, 2.0, 3.0, 2)
    assert not c.satisfied and "not positive" in c.reason
    with pytest.raises(ExponentError):
        exponent_condition(1.0, 2.0, 2.0, 2)


def test_exponent_condition_q_formula_by_hand():
    t, s, p, n, eps = 1.4, 3.0, 2.0, 2, 0.1
    c = exponent_condition(t, s, p, n, epsilon=eps)
    assert math.isclose(c.q, (n * (1 - 1 / s)) / ((t - eps) * n / p - 1))


# ------------------------------------------------------------ admissibility


def test_constant_pair_admissible():
    g = Grid.cube(0.0, 1.0, 128)
    rep = admissible_pair_report(ones(g), ones(g), 2.0, CubeFamily.dyadic(g), [2.5, 3.0, 4.0])
    assert rep.admissible and rep.best_q == 2.5


def test_failure_pair_items():
    g, w, v = product_pair(0.9, 128)
    rep = admissible_pair_report(w, v, 1.5, CubeFamily.dyadic(g), [1.75, 2.0, 2.5, 3.0])
    assert rep.pointwise and rep.ap_finite and rep.doubling_finite
    assert not rep.balance_holds and rep.best_q is None and not rep.admissible


def test_exponent_relation_implies_balance_for_ball_map_pair():
    g = default_grid("ball-map", 256)
    w = sample_family("ball-map-KO-inverse", g, mode="cell-average")
    v = sample_family("ball-map-KI", g, mode="cell-average")
    c = exponent_condition(1.5, 2.0, 2.0, 2)
    assert c.satisfied
    assert balance_scan(w, v, 2.0, c.q).verdict == "holds"


def test_exponent_relation_implies_balance_for_constant_pair():
    g = Grid.cube(0.0, 1.0, 128)
    c = exponent_condition(1.5, 2.0, 2.0, 2)
    assert balance_scan(ones(g), ones(g), 2.0, c.q).verdict == "holds"

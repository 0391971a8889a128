import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from matweight.families import default_grid, sample_family
from matweight.fields import Ball, Cube, Grid, ScalarField, integrate
from matweight.maximal import (
    continuity_set, default_radii, local_hl_maximal, pair_maximal, weak_type_check,
)


def ball_pair(N):
    g = default_grid("ball-map", N)
    return g, sample_family("ball-map-KO-inverse", g), sample_family("ball-map-KI", g)


# ------------------------------------------------------------ pair maximal


def test_equal_weights_give_one():
    g = Grid.cube(0.0, 1.0, 64)
    rng = np.random.default_rng(0)
    w = ScalarField(g, np.exp(rng.normal(size=g.shape)))
    M = pair_maximal(w, w)
    assert np.abs(M.values - 1).max() <= 1e-12
    assert continuity_set(M).mask.all()


def test_ball_map_origin_matches_radial_integrals():
    g, w, v = ball_pair(512)
    M = pair_maximal(w, v)
    c = (256, 256)  # a cell touching the origin
    h = g.h[0]

    def vmass(r):
        return 2 * math.pi * quad(lambda s: s * (2 + 2 / math.sqrt(s)), 0, r)[0]

    def wmass(r):
        return 2 * math.pi * quad(lambda s: s / (2 + 2 / math.sqrt(s)), 0, r)[0]

    oracle = [vmass(r) / wmass(r) for r in M.radii]
    running = np.maximum.accumulate(oracle)
    for r, ref, trace in zip(M.radii, running, M.per_radius):
        if r >= 16 * h:
            assert abs(trace[c] / ref - 1) < 0.05
    # ratio ~ r^-1: roughly doubling per halving at the finest rungs
    last = [t[c] for t in M.per_radius[-3:]]
    assert 1.5 < last[-1] / last[-2] < 2.5
    assert not M.stable[c]


def test_ball_map_away_from_origin_is_stable():
    g, w, v = ball_pair(256)
    M = pair_maximal(w, v)
    X, Y = g.mesh()
    near = np.abs(np.hypot(X, Y) - 0.5) < 2 * g.h[0]
    assert M.stable[near].all() and np.isfinite(M.values[near]).all()


def test_example51_pair_unstable_at_corner():
    g = default_grid("example-5.1", 256)
    W = sample_family("example-5.1", g)
    from matweight.characteristics import derived_scalars

    v, w = derived_scalars(W)
    cs = continuity_set(pair_maximal(w, v))
    assert not cs.mask[0, 0]
    assert cs.mask[128, 128]
    assert all(g_ > 1.05 for g_ in cs.growth)


def test_pair_maximal_dominates_largest_ball_and_is_monotone():
    g, w, v = ball_pair(128)
    radii = default_radii(g)
    M = pair_maximal(w, v, radii)
    r0 = radii[0]
    X = g.centers()
    for idx in [(10, 10), (64, 64), (100, 30)]:
        B = Ball(tuple(X[idx]), r0)
        assert M.values[idx] >= integrate(v, B) / integrate(w, B) * (1 - 1e-9)
    fewer = pair_maximal(w, v, radii[:-1])
    assert np.all(M.values >= fewer.values)
    assert integrate(w) <= integrate(v)


# ------------------------------------------------------------ local HL


def test_local_hl_constant_and_indicator():
    g = Grid.cube(-1.0, 1.0, 64)
    B = Ball((0.0, 0.0), 0.8)
    from matweight.fields import region_mask

    inB = region_mask(g, B)
    Mc = local_hl_maximal(ScalarField(g, np.full(g.shape, 2.0)), B).values
    assert np.allclose(Mc[inB], 2.0) and np.all(Mc[~inB] == 0)
    X, Y = g.mesh()
    ind = (X < 0).astype(float)
    M = local_hl_maximal(ScalarField(g, ind), B).values
    assert np.all(M[inB] >= ind[inB]) and np.all(M[inB] <= 1 + 1e-12)
    # cells just right of the interface see part of the left half
    near = inB & (X > 0) & (X < 2 * g.h[0]) & (np.abs(Y) < 0.5)
    assert near.any() and np.all(M[near] > 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_local_hl_properties(seed):
    rng = np.random.default_rng(seed)
    g = Grid.cube(0.0, 1.0, 32)
    Q = Cube((0.5, 0.5), 1.0)
    f = ScalarField(g, rng.normal(size=g.shape))
    h = ScalarField(g, rng.normal(size=g.shape))
    Mf = local_hl_maximal(f, Q).values
    assert np.all(Mf >= np.abs(f.values) - 1e-15)
    assert np.array_equal(local_hl_maximal(ScalarField(g, 2 * f.values), Q).values, 2 * Mf)
    Mh = local_hl_maximal(h, Q).values
    Ms = local_hl_maximal(ScalarField(g, f.values + h.values), Q).values
    assert np.all(Ms <= Mf + Mh + 1e-12)


# ------------------------------------------------------------ weak type


def test_weak_type_trivial_cases():
    g = Grid.cube(0.0, 1.0, 64)
    one = ScalarField(g, np.ones(g.shape))
    M = pair_maximal(one, one)
    rep = weak_type_check(one, one, M, [2, 4, 8])
    assert rep.ratios == [0.0, 0.0, 0.0] and rep.empirical_C == 0
    _, w, v = ball_pair(64)
    Mb = pair_maximal(w, v)
    lam = 0.5 * float(Mb.values.min())
    rep = weak_type_check(w, v, Mb, [lam])
    assert math.isclose(rep.ratios[0], lam * integrate(w) / integrate(v))
    assert rep.ratios[0] <= lam


def test_weak_type_ball_map_stable_under_refinement():
    reps = []
    for N in (128, 256):
        _, w, v = ball_pair(N)
        reps.append(weak_type_check(w, v, pair_maximal(w, v), [2, 4, 8, 16, 32]))
    assert reps[0].stable_against(reps[1])
    assert reps[0].empirical_C > 0

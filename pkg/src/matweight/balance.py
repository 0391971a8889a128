"""Two-weight balance condition, p-admissibility and the exponent relation.

The balance quotient compares how fast ``v`` and ``w`` lose mass when a ball
shrinks about its center:

    r (v(rB)/v(B))^(1/q)  /  (w(rB)/w(B))^(1/p).

No finite sample can prove the condition for all balls, so :func:`balance_scan`
reports "holds" when no sampled ball shows the quotient growing as ``r -> 0``
(log-log slope above ``-slope_tol``), and "fails" otherwise.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .characteristics import doubling, scalar_ap
from .cubes import CubeFamily
from .errors import EmptyRegionError, ExponentError, GridMismatchError, UnderResolvedError
from .fields import Ball, Grid, ScalarField, count_cells, integrate

SLOPE_TOL = 0.02
STRATIFIED_CENTERS = 32
MIN_RADIUS_CELLS = 4


def balance_ratio(w: ScalarField, v: ScalarField, p: float, q: float, B: Ball, r: float) -> float:
    """Left side over right side of the balance inequality for one ball and one ``r``."""
    if not q > p:
        raise ExponentError(f"balance needs q > p, got p={p}, q={q}")
    if not 0 < r < 1:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    if w.grid != v.grid:
        raise GridMismatchError("w and v live on different grids")
    small = Ball(B.center, r * B.radius)
    try:
        vs, ws = integrate(v, small), integrate(w, small)
    except EmptyRegionError as exc:
        raise UnderResolvedError(f"rB holds no cell center (radius {small.radius:.3g})") from exc
    vb, wb = integrate(v, B), integrate(w, B)
    return r * (vs / vb) ** (1.0 / q) / (ws / wb) ** (1.0 / p)


def default_centers(grid: Grid, samples: int = STRATIFIED_CENTERS, seed: int = 0) -> list:
    """Vertices, the center, cells nearest each vertex, and stratified random points.

    Power-type degeneracies of the built-in families sit at vertices and
    edges, so those are always included.
    """
    lo, hi = np.asarray(grid.lo), np.asarray(grid.hi)
    out = [tuple(float(x) for x in v) for v in itertools.product(*zip(lo, hi))]
    out.append(tuple(float(x) for x in (lo + hi) / 2))
    for corner in itertools.product(*[(0, m - 1) for m in grid.cells_per_axis]):
        out.append(tuple(float(grid.axis(k)[i]) for k, i in enumerate(corner)))
    if samples:
        pts = qmc.LatinHypercube(d=grid.n, seed=seed).random(samples)
        out += [tuple(float(x) for x in lo + u * (hi - lo)) for u in pts]
    return out


def default_radii(grid: Grid, rho: float) -> list:
    """``2^-1, 2^-2, ...`` while ``r * rho`` spans at least four cells."""
    floor = MIN_RADIUS_CELLS * float(np.max(grid.h))
    out, k = [], 1
    while rho * 2.0**-k >= floor * (1 - 1e-12):
        out.append(2.0**-k)
        k += 1
    return out


def _slope(r, y):
    lr, ly = np.log(r), np.log(y)
    return float(np.polyfit(lr, ly, 1)[0])


@dataclass
class BalanceReport:
    p: float
    q: float
    sampled_balls: int
    radii: list
    sup_ratio: float
    loglog_slope: float
    verdict: str
    slope_tol: float = SLOPE_TOL
    worst_ball: Ball | None = None
    worst_trace: list = field(default_factory=list)
    traces: list = field(default_factory=list)  # (ball, ratios, slope)
    skipped: int = 0

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_json(self) -> dict:
        return {
            "p": self.p, "q": self.q, "sampled_balls": self.sampled_balls, "radii": self.radii,
            "sup_ratio": self.sup_ratio, "loglog_slope": self.loglog_slope, "verdict": self.verdict,
            "slope_tol": self.slope_tol, "skipped_balls": self.skipped,
            "worst_ball": self.worst_ball.to_json() if self.worst_ball else None,
            "balls": [{"ball": b.to_json(), "ratios": rs, "slope": s} for b, rs, s in self.traces],
        }

    def worst_csv(self) -> str:
        rows = ["r,ratio"] + [f"{r:.17g},{x:.17g}" for r, x in zip(self.radii, self.worst_trace)]
        return "\n".join(rows) + "\n"


def balance_scan(w: ScalarField, v: ScalarField, p: float, q: float, ball_samples=None, radii=None,
                 seed: int = 0, slope_tol: float = SLOPE_TOL) -> BalanceReport:
    """Scan the balance quotient over sampled balls and a geometric radius ladder.

    Parameters
    ----------
    ball_samples : list of Ball, optional
        Defaults to balls of radius equal to the shortest domain side,
        centered at :func:`default_centers`.
    radii : sequence of float, optional
        Shrinking factors ``r``; defaults to :func:`default_radii`.

    Notes
    -----
    The verdict uses the worst ball, the one whose quotient has the smallest
    least-squares slope in ``log r``.  A ball is skipped if some ``rB`` holds
    no cell center.
    """
    g = w.grid
    rho = float(np.min(np.asarray(g.hi) - np.asarray(g.lo)))
    if ball_samples is None:
        ball_samples = [Ball(c, rho) for c in default_centers(g, seed=seed)]
    if radii is None:
        radii = default_radii(g, min(b.radius for b in ball_samples))
    radii = [float(r) for r in radii]
    if len(radii) < 2:
        raise UnderResolvedError("need at least two radii for a slope")
    traces, skipped = [], 0
    for B in ball_samples:
        if any(count_cells(g, Ball(B.center, r * B.radius)) == 0 for r in radii):
            skipped += 1
            continue
        rs = [balance_ratio(w, v, p, q, B, r) for r in radii]
        traces.append((B, rs, _slope(radii, rs)))
    if not traces:
        raise UnderResolvedError("every sampled ball was too small for the radius ladder")
    k = int(np.argmin([t[2] for t in traces]))
    sup = max(max(t[1]) for t in traces)
    slope = traces[k][2]
    ok = slope >= -slope_tol and math.isfinite(sup)
    return BalanceReport(p, q, len(traces), radii, float(sup), slope, "holds" if ok else "fails",
                         slope_tol, traces[k][0], traces[k][1], traces, skipped)


# ------------------------------------------------------------ exponent relation


@dataclass(frozen=True)
class ExponentCondition:
    status: str  # "satisfied" or "violated"
    reason: str
    gap: float  # t - p/n
    bound: float  # 1/s'
    epsilon: float
    q: float

    @property
    def satisfied(self) -> bool:
        return self.status == "satisfied"

    def to_json(self) -> dict:
        return dict(self.__dict__)


def exponent_condition(t: float, s: float, p: float, n: int, epsilon: float | None = None,
                       tol: float = 1e-12) -> ExponentCondition:
    """Check ``0 < t - p/n <= 1/s'`` and return the balance exponent it yields.

    ``q = (n/s') / ((t - eps) n/p - 1)``, where ``eps`` defaults to half of
    ``t - p/n``, the room left by the openness of ``A_t``.
    """
    if not (t > 1 and s > 1):
        raise ExponentError(f"t and s must exceed 1, got t={t}, s={s}")
    gap = t - p / n
    bound = 1.0 - 1.0 / s
    if epsilon is None:
        epsilon = gap / 2 if gap > 0 else 0.0
    denom = (t - epsilon) * n / p - 1.0
    q = (n * bound) / denom if denom > 0 else math.inf
    if gap <= 0:
        return ExponentCondition("violated", "t - p/n is not positive", gap, bound, epsilon, q)
    if gap > bound * (1 + tol) + tol:
        return ExponentCondition("violated", "t - p/n exceeds 1/s'", gap, bound, epsilon, q)
    return ExponentCondition("satisfied", "", gap, bound, epsilon, q)


# ------------------------------------------------------------ admissibility


@dataclass
class AdmissibilityReport:
    p: float
    pointwise: bool
    ap_finite: bool
    doubling_finite: bool
    balance: dict  # q -> BalanceReport
    estimates: dict

    @property
    def balance_holds(self) -> bool:
        return any(r.holds for r in self.balance.values())

    @property
    def best_q(self):
        good = [q for q, r in self.balance.items() if r.holds]
        return min(good) if good else None

    @property
    def admissible(self) -> bool:
        return self.pointwise and self.ap_finite and self.doubling_finite and self.balance_holds

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "items": {"w_le_v": self.pointwise, "w_in_Ap": self.ap_finite,
                      "v_doubling": self.doubling_finite, "balance": self.balance_holds},
            "best_q": self.best_q,
            "admissible": self.admissible,
            "balance": {str(q): r.to_json() for q, r in self.balance.items()},
            "estimates": {k: e.to_json() for k, e in self.estimates.items()},
        }


def admissible_pair_report(w: ScalarField, v: ScalarField, p: float, F: CubeFamily, q_grid,
                           seed: int = 0, slope_tol: float = SLOPE_TOL, rel_slack: float = 1e-12,
                           **scan_kw) -> AdmissibilityReport:
    """The four admissibility items for the pair ``(w, v)`` at exponent `p`.

    Items: ``w <= v`` at every cell; ``[w]_{A_p}`` finite; ``v`` doubling;
    the balance condition for some ``q`` in `q_grid` with ``q > p``.
    ``best_q`` is the smallest such ``q``.
    """
    if not p > 1:
        raise ExponentError(f"p must exceed 1, got {p}")
    pointwise = bool(np.all(w.values <= v.values * (1 + rel_slack)))
    ap = scalar_ap(w, p, F)
    dbl = doubling(v, F)
    bal = {}
    for q in sorted(float(x) for x in q_grid):
        if q > p:
            bal[q] = balance_scan(w, v, p, q, seed=seed, slope_tol=slope_tol, **scan_kw)
    return AdmissibilityReport(p, pointwise, ap.finite, dbl.finite, bal, {"ap": ap, "doubling": dbl})


def report_json(obj) -> str:
    return json.dumps(obj.to_json(), indent=2, sort_keys=True)

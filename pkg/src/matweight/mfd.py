"""Mappings of finite distortion: Jacobian data, distortion tensor and functions.

For ``f: Omega -> R^n`` with ``J = det Df > 0`` the distortion tensor is
``G = J^(-2/n) Df^t Df`` (determinant one) and ``W = G^(-n/2)``.  Its
extreme eigenvalues are ``|W|_op = K_I`` and ``|W^-1|_op = K_O``, which makes
``(1/K_O, K_I)`` the natural scalar pair for the ``n``-Laplacian theory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import spd
from .balance import admissible_pair_report, exponent_condition
from .characteristics import lauzon_treil_a2, reverse_holder, scalar_ap
from .cubes import CubeFamily
from .errors import DimensionError
from .fields import Annulus, Grid, MappingField, ScalarField, SpdField, VectorField, region_mask
from .maximal import continuity_set, pair_maximal
from .weighted_ops import apply_power

REL_SLACK = 1e-8


@dataclass
class JacobianData:
    Df: np.ndarray  # Df[..., i, j] = d f_i / d x_j
    J: ScalarField
    violations: np.ndarray  # cells with J <= 0
    method: str

    @property
    def violation_cells(self) -> list:
        return [tuple(int(i) for i in c) for c in np.argwhere(self.violations)]


def fd_jacobian(f: MappingField) -> np.ndarray:
    """Second-order centered differences, second-order one-sided at the edges."""
    g = f.grid
    rows = []
    for i in range(f.values.shape[-1]):
        parts = np.gradient(f.values[..., i], *g.h, edge_order=2)
        if g.n == 1:
            parts = [parts]
        rows.append(np.stack(parts, axis=-1))
    return np.stack(rows, axis=-2)


def jacobian(f: MappingField, method: str = "auto") -> JacobianData:
    """Derivative matrix and Jacobian determinant of a sampled mapping.

    Parameters
    ----------
    method : {"auto", "analytic", "fd"}
        ``auto`` uses the family's analytic derivative when available.
    """
    if method not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown method {method!r}")
    use_analytic = f.jacobian is not None and method in ("auto", "analytic")
    if method == "analytic" and f.jacobian is None:
        raise ValueError("mapping carries no analytic derivative")
    Df = np.asarray(f.jacobian, dtype=float) if use_analytic else fd_jacobian(f)
    if Df.shape[-1] != Df.shape[-2]:
        raise DimensionError("distortion needs a map between spaces of equal dimension")
    J = np.linalg.det(Df) if Df.shape[-1] > 2 else Df[..., 0, 0] * Df[..., 1, 1] - Df[..., 0, 1] * Df[..., 1, 0]
    bad = ~(J > 0) | ~np.isfinite(J)
    return JacobianData(Df, ScalarField(f.grid, J), bad, "analytic" if use_analytic else "fd")


def _safe(jd: JacobianData):
    """Df and J with violation cells replaced by the identity."""
    n = jd.Df.shape[-1]
    Df = np.where(jd.violations[..., None, None], np.eye(n), jd.Df)
    J = np.where(jd.violations, 1.0, jd.J.values)
    return Df, J


def singular_values(Df: np.ndarray) -> np.ndarray:
    """Singular values of each ``Df`` in descending order."""
    if Df.shape[-1] == 2:
        s1 = spd.spectral_norm(Df)
        return np.stack([s1, spd.smallest_singular_value(Df)], axis=-1)
    DtD = np.einsum("...ki,...kj->...ij", Df, Df)
    lam, _ = spd.spd_decompose(0.5 * (DtD + np.swapaxes(DtD, -1, -2)))
    return np.sqrt(np.maximum(lam, 0.0))


def distortion_tensor(jd: JacobianData):
    """``(G, W)`` with ``G = J^(-2/n) Df^t Df`` and ``W = G^(-n/2)``.

    Violation cells carry the identity and are listed in ``jd``.
    """
    Df, J = _safe(jd)
    n = Df.shape[-1]
    DtD = np.einsum("...ki,...kj->...ij", Df, Df)
    G = J[..., None, None] ** (-2.0 / n) * 0.5 * (DtD + np.swapaxes(DtD, -1, -2))
    Gf = SpdField(jd.J.grid, G)
    return Gf, Gf.power(-n / 2.0)


def distortion_functions(jd: JacobianData):
    """``(K_O, K_I, K_M)`` from singular values; violation cells get 1."""
    Df, J = _safe(jd)
    n = Df.shape[-1]
    s = singular_values(Df)
    KO = s[..., 0] ** n / J
    KI = J / s[..., -1] ** n
    g = jd.J.grid
    return ScalarField(g, KO), ScalarField(g, KI), ScalarField(g, np.maximum(KO, KI))


@dataclass
class DistortionReport:
    J: ScalarField
    K_O: ScalarField
    K_I: ScalarField
    K_M: ScalarField
    G: SpdField
    W: SpdField
    violation_cells: list
    Df: np.ndarray = field(repr=False, default=None)
    singular: np.ndarray = field(repr=False, default=None)
    method: str = "analytic"

    @property
    def n(self) -> int:
        return self.Df.shape[-1]

    @property
    def valid(self) -> np.ndarray:
        m = np.ones(self.J.grid.shape, dtype=bool)
        for c in self.violation_cells:
            m[c] = False
        return m

    def det_G(self) -> np.ndarray:
        return np.prod(self.G.eigvals, axis=-1)

    def to_json(self) -> dict:
        v = self.valid
        return {
            "method": self.method,
            "violation_cells": [list(c) for c in self.violation_cells],
            "J_range": [float(self.J.values[v].min()), float(self.J.values[v].max())],
            "K_O_max": float(self.K_O.values[v].max()),
            "K_I_max": float(self.K_I.values[v].max()),
            "det_G_error": float(np.max(np.abs(self.det_G()[v] - 1.0))),
        }


def analyze(f: MappingField, method: str = "auto") -> DistortionReport:
    """Run the Jacobian, distortion tensor and distortion functions on `f`."""
    jd = jacobian(f, method)
    G, W = distortion_tensor(jd)
    KO, KI, KM = distortion_functions(jd)
    Df, _ = _safe(jd)
    return DistortionReport(jd.J, KO, KI, KM, G, W, jd.violation_cells, jd.Df, singular_values(Df), jd.method)


def tensor_consistency(rep: DistortionReport) -> dict:
    """Relative gaps ``|W^-1|_op`` vs ``K_O`` and ``|W|_op`` vs ``K_I`` on valid cells."""
    v = rep.valid
    lam = rep.W.eigvals
    a = np.abs(1.0 / lam[..., -1] - rep.K_O.values) / rep.K_O.values
    b = np.abs(lam[..., 0] - rep.K_I.values) / rep.K_I.values
    return {"K_O": float(a[v].max()), "K_I": float(b[v].max())}


def distortion_inequality_check(rep: DistortionReport, n: int | None = None, slack: float = REL_SLACK) -> dict:
    """Per-cell check of ``K_O <= K_I^(n-1)``, ``K_I <= K_O^(n-1)`` and ``K_I <= K_M <= K_I^(n-1)``.

    Returns a table ``name -> {"pass", "failures", "cells"}``.
    """
    n = rep.n if n is None else n
    KO, KI, KM = rep.K_O.values, rep.K_I.values, rep.K_M.values
    pairs = {
        "K_O<=K_I^(n-1)": (KO, KI ** (n - 1)),
        "K_I<=K_O^(n-1)": (KI, KO ** (n - 1)),
        "K_I<=K_M": (KI, KM),
        "K_M<=K_I^(n-1)": (KM, KI ** (n - 1)),
    }
    v = rep.valid
    out = {}
    for name, (a, b) in pairs.items():
        bad = (a > b * (1 + slack)) & v
        out[name] = {"pass": not bool(bad.any()), "failures": int(bad.sum()),
                     "cells": [tuple(int(i) for i in c) for c in np.argwhere(bad)[:20]]}
    return out


def mfd_ellipticity_check(W: SpdField, K_O: ScalarField, K_I: ScalarField, K_M: ScalarField, n: int,
                          trials: int = 10_000, seed: int = 0, slack: float = REL_SLACK,
                          valid: np.ndarray | None = None) -> dict:
    """Check the three two-sided bounds on ``|W^(1/n) xi|^n`` at random cells and unit vectors.

    Bounds: ``[1/K_M, K_M]``, ``[1/K_O, K_O^(n-1)]`` and ``[K_I^(1-n), K_I]``.
    """
    rng = np.random.default_rng(seed)
    cells = np.flatnonzero(np.ones(W.grid.shape, bool) if valid is None else valid)
    pick = cells[rng.integers(cells.size, size=trials)]
    xi = rng.standard_normal((trials, W.d))
    xi /= np.linalg.norm(xi, axis=-1, keepdims=True)
    lam = W.eigvals.reshape(-1, W.d)[pick]
    U = W.eigvecs.reshape(-1, W.d, W.d)[pick]
    root = spd.compose(lam, U, 1.0 / n)
    q = np.linalg.norm(np.einsum("tij,tj->ti", root, xi), axis=-1) ** n
    ko, ki, km = (K.values.ravel()[pick] for K in (K_O, K_I, K_M))
    chains = {
        "maximal": (1.0 / km, km),
        "outer": (1.0 / ko, ko ** (n - 1)),
        "inner": (ki ** (1 - n), ki),
    }
    out = {"trials": trials}
    for name, (lo, hi) in chains.items():
        bad = (q < lo * (1 - slack)) | (q > hi * (1 + slack))
        out[name] = {"pass": not bool(bad.any()), "failures": int(bad.sum()),
                     "min_lower_gap": float(np.min(q / lo - 1)), "min_upper_gap": float(np.min(1 - q / hi))}
    out["pass"] = all(out[k]["pass"] for k in chains)
    return out


def energy_identity_check(f: MappingField, W: SpdField, region, component: int = 0,
                          method: str = "auto", rel_tol: float | None = None) -> dict:
    """Compare ``int |W^(1/n) grad f_i|^n``, ``int <G^-1 grad f_i, grad f_i>^(n/2)`` and ``int J``.

    All three use the same midpoint quadrature over `region`.  The default
    tolerance is 1e-8 with an analytic derivative and 1% with finite
    differences.
    """
    jd = jacobian(f, method)
    n = jd.Df.shape[-1]
    mask = region_mask(f.grid, region) & ~jd.violations
    grad = jd.Df[..., component, :]
    a = np.linalg.norm(apply_power(W, 1.0 / n, VectorField(f.grid, grad)), axis=-1) ** n
    Ginv = W.power(2.0 / n)  # G^-1 = W^(2/n)
    b = np.einsum("...i,...ij,...j->...", grad, Ginv.matrices, grad) ** (n / 2.0)
    vol = f.grid.cell_volume
    lhs = math.fsum(a[mask].tolist()) * vol
    mid = math.fsum(b[mask].tolist()) * vol
    rhs = math.fsum(jd.J.values[mask].tolist()) * vol
    tol = rel_tol if rel_tol is not None else (1e-8 if jd.method == "analytic" else 1e-2)
    gap = max(abs(lhs - rhs), abs(mid - rhs)) / abs(rhs)
    return {"lhs": lhs, "middle": mid, "rhs": rhs, "gap": gap, "tol": tol, "pass": gap < tol, "method": jd.method}


def frobenius_bound_check(rep: DistortionReport, n: int | None = None, slack: float = REL_SLACK) -> dict:
    """Per-cell ``|Df W^(1/n)|_op^n <= n^(n/2) J``."""
    n = rep.n if n is None else n
    Df, J = _safe(JacobianData(rep.Df, rep.J, ~rep.valid, rep.method))
    root = rep.W.power(1.0 / n).matrices
    lhs = spd.spectral_norm(np.einsum("...ij,...jk->...ik", Df, root)) ** n
    rhs = n ** (n / 2.0) * J
    bad = (lhs > rhs * (1 + slack)) & rep.valid
    return {"pass": not bool(bad.any()), "failures": int(bad.sum()),
            "max_ratio": float(np.max((lhs / J)[rep.valid])), "bound": n ** (n / 2.0)}


# ------------------------------------------------------------ continuity pipeline


@dataclass
class ContinuityConfig:
    max_level: int | None = None
    q_grid: tuple | None = None
    directions: int = 64
    radii: tuple | None = None
    seed: int = 0
    method: str = "auto"


def _scalar_source(f, method, which):
    def src(g):
        rep = analyze(f.resample(g), method)
        return getattr(rep, which).values
    return src if f.source is not None else None


def mfd_continuity_report(f: MappingField, exponents=(1.5, 2.0), config: ContinuityConfig | None = None) -> dict:
    """Distortion analysis followed by the weight hypotheses and the continuity set.

    Returns a JSON-ready bundle; ``result["objects"]`` keeps the computed
    fields (maximal function, mask) for further use and is not serialized.
    """
    cfg = config or ContinuityConfig()
    t, s = exponents
    rep = analyze(f, cfg.method)
    n = rep.n
    g = f.grid
    srcO = _scalar_source(f, cfg.method, "K_O")
    srcI = _scalar_source(f, cfg.method, "K_I")
    w = ScalarField(g, 1.0 / rep.K_O.values, (lambda h: 1.0 / srcO(h)) if srcO else None)
    v = ScalarField(g, rep.K_I.values, srcI)
    F = CubeFamily.dyadic(g, cfg.max_level)
    Wsrc = (lambda h: analyze(f.resample(h), cfg.method).W.matrices) if f.source is not None else None
    W = SpdField(g, rep.W.matrices, Wsrc, rep.W.eigvals, rep.W.eigvecs)

    cond = exponent_condition(t, s, float(n), n)
    ap = scalar_ap(w, t, F)
    rh = reverse_holder(v, s, F)
    lt = lauzon_treil_a2(W, F, cfg.directions) if n == 2 else None
    qs = cfg.q_grid or _q_grid(cond.q, n)
    adm = admissible_pair_report(w, v, float(n), F, qs, seed=cfg.seed)
    M = pair_maximal(w, v, list(cfg.radii) if cfg.radii else None)
    cs = continuity_set(M)
    hyp = {
        "A_t": ap.finite,
        "RH_s": rh.finite,
        "exponent_relation": cond.satisfied,
        "lauzon_treil": (lt["verdict"] == "finite") if lt else None,
        "admissible": adm.admissible,
    }
    return {
        "distortion": rep.to_json(),
        "exponents": {"t": t, "s": s},
        "exponent_condition": cond.to_json(),
        "A_t": ap.to_json(),
        "RH_s": rh.to_json(),
        "lauzon_treil": {k: lt[k] for k in ("value", "verdict")} if lt else None,
        "admissibility": adm.to_json(),
        "continuity": {"fraction": cs.fraction, "unstable_cells": len(cs.unstable_cells),
                       "radii": M.radii, "tol": M.tol},
        "hypotheses": hyp,
        "hypotheses_hold": all(x for x in hyp.values() if x is not None),
        "objects": {"report": rep, "maximal": M, "continuity": cs, "w": w, "v": v},
    }


def _q_grid(q, n):
    base = [n + 0.5, n + 1.0]
    if math.isfinite(q):
        base += [0.75 * q, q]
    return tuple(sorted({round(x, 6) for x in base if x > n}))


def disk_mask(grid: Grid, r_max: float = 1.0, r_min: float = 0.0) -> np.ndarray:
    """Cells whose centers satisfy ``r_min < |x| < r_max``."""
    return region_mask(grid, Annulus((0.0,) * grid.n, r_min, r_max))

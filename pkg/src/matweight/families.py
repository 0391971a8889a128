"""Registry of built-in weight and mapping families.

Every family samples at cell centers by default.  Families with an integrable
singularity on a cell boundary can also be sampled as exact cell averages
(``mode="cell-average"``), which removes the midpoint bias at the singular
corner; product-power families use closed-form antiderivatives, the rest a
tensor Gauss-Legendre rule inside each cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import FamilyError
from .fields import Grid, MappingField, ScalarField, SpdField

MODES = ("center", "cell-average")
_GL_POINTS = 4


@dataclass(frozen=True)
class Family:
    name: str
    kind: str  # "scalar", "spd" or "mapping"
    defaults: dict
    domain: Callable  # params -> (lo, hi)
    build: Callable  # (grid, params, mode) -> field
    check: Callable = field(default=lambda p: None)
    doc: str = ""


REGISTRY: dict = {}


def register(fam: Family):
    REGISTRY[fam.name] = fam
    return fam


def family_names():
    return sorted(REGISTRY)


def default_grid(name: str, cells: int, n: int = 2, **params) -> Grid:
    """Grid on the family's natural domain."""
    fam = _lookup(name)
    p = _params(fam, params)
    lo, hi = fam.domain(p)
    if np.isscalar(lo):
        return Grid.cube(lo, hi, cells, n)
    return Grid(lo, hi, (cells,) * len(lo))


def _lookup(name):
    try:
        return REGISTRY[name]
    except KeyError:
        raise FamilyError(f"unknown family {name!r}; registered: {', '.join(family_names())}") from None


def _params(fam, params):
    unknown = set(params) - set(fam.defaults)
    if unknown:
        raise FamilyError(f"family {fam.name!r} has no parameter(s) {sorted(unknown)}")
    p = dict(fam.defaults)
    p.update(params)
    fam.check(p)
    return p


def sample_family(name: str, grid: Grid, mode: str = "center", **params):
    """Sample a registered family on `grid`.

    Parameters
    ----------
    name : str
        Registered family name, see :func:`family_names`.
    grid : Grid
        Target grid.
    mode : {"center", "cell-average"}
        Point samples at cell centers, or exact cell averages.
    **params
        Family parameters; unspecified ones take the family defaults.

    Returns
    -------
    ScalarField, SpdField or MappingField
        The sampled field.  Its ``source`` re-samples on other grids.

    Raises
    ------
    FamilyError
        Unknown name, unknown parameter, or a parameter out of range.
    """
    fam = _lookup(name)
    if mode not in MODES:
        raise FamilyError(f"mode must be one of {MODES}, got {mode!r}")
    p = _params(fam, params)
    return fam.build(grid, p, mode)


# ------------------------------------------------------------ helpers


def _need(cond, msg):
    if not cond:
        raise FamilyError(msg)


def power_cell_average(lo, hi, a):
    """Exact average of ``|x|**a`` over each interval ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if a <= -1:
        if np.any((lo <= 0) & (hi >= 0)):
            raise FamilyError(f"|x|^{a} is not integrable on a cell touching 0")

    def prim(x):
        # antiderivative of |x|^a, odd in x
        return np.sign(x) * np.abs(x) ** (a + 1) / (a + 1)

    return (prim(hi) - prim(lo)) / (hi - lo)


def _axis_power(grid, k, a, mode, shift=0.0):
    x = grid.axis(k) - shift
    if mode == "center":
        return np.abs(x) ** a
    h = grid.h[k]
    return power_cell_average(x - h / 2, x + h / 2, a)


def _outer_product(factors, n):
    out = np.ones([f.size for f in factors])
    for k, f in enumerate(factors):
        shp = [1] * n
        shp[k] = f.size
        out = out * f.reshape(shp)
    return out


def _gauss_average(grid, fn):
    """Cell averages of a pointwise function by a tensor Gauss-Legendre rule."""
    t, wts = np.polynomial.legendre.leggauss(_GL_POINTS)
    acc = None
    n = grid.n
    for idx in np.ndindex(*([_GL_POINTS] * n)):
        X = [grid.axis(k) + 0.5 * t[idx[k]] * grid.h[k] for k in range(n)]
        mesh = np.meshgrid(*X, indexing="ij")
        wgt = np.prod([wts[i] / 2 for i in idx])
        val = wgt * fn(np.stack(mesh, axis=-1))
        acc = val if acc is None else acc + val
    return acc


def _pointwise(grid, fn, mode):
    if mode == "center":
        return fn(grid.centers())
    return _gauss_average(grid, fn)


def _scalar(build_values):
    def build(grid, p, mode):
        src = lambda g: build_values(g, p, mode)
        return ScalarField(grid, src(grid), src)

    return build


def _spd(build_values):
    def build(grid, p, mode):
        src = lambda g: build_values(g, p, mode)
        return SpdField(grid, src(grid), src)

    return build


def _diag(*entries):
    d = len(entries)
    M = np.zeros(entries[0].shape + (d, d))
    for i, e in enumerate(entries):
        M[..., i, i] = e
    return M


# ------------------------------------------------------------ scalar families


def _constant_build(grid, p, mode):
    val = p["value"]
    if np.isscalar(val) and not isinstance(val, str):
        src = lambda g: np.full(g.shape, float(val))
        return ScalarField(grid, src(grid), src)
    M = np.eye(int(p["d"])) if isinstance(val, str) else np.asarray(val, dtype=float)
    src = lambda g: np.broadcast_to(M, g.shape + M.shape).copy()
    return SpdField(grid, src(grid), src)


def _constant_check(p):
    val = p["value"]
    if isinstance(val, str):
        _need(val == "identity", "constant value must be a number, a matrix or 'identity'")
    elif np.isscalar(val):
        _need(float(val) > 0, "constant weight must be positive")


register(Family(
    "constant", "scalar|spd", {"value": "identity", "d": 2},
    lambda p: (0.0, 1.0), _constant_build, _constant_check,
    "constant scalar weight, constant matrix, or the identity matrix"))


def _product_power(g, p, mode):
    return _outer_product([_axis_power(g, k, p["exponent"], mode) for k in range(g.n)], g.n)


register(Family(
    "power", "scalar", {"exponent": 0.5},
    lambda p: (0.0, 1.0), _scalar(_product_power),
    lambda p: _need(np.isfinite(p["exponent"]), "exponent must be finite"),
    "product power weight prod_k x_k^a"))


def _radial_power(g, p, mode):
    a = p["exponent"]
    return _pointwise(g, lambda X: np.linalg.norm(X, axis=-1) ** a, mode)


register(Family(
    "radial-power", "scalar", {"exponent": -0.5},
    lambda p: (-1.0, 1.0), _scalar(_radial_power),
    lambda p: _need(np.isfinite(p["exponent"]), "exponent must be finite"),
    "radial power weight |x|^a"))


# ------------------------------------------------------------ matrix families


def _ex51_values(g, p, mode):
    if g.n != 2:
        raise FamilyError("example-5.1 is two-dimensional")
    a = p["alpha"]
    v = _outer_product([_axis_power(g, k, -a, mode) for k in range(2)], 2)
    return _diag(np.ones(g.shape), v)


def _ex51_check(p):
    _need(0 < p["alpha"] < 1, "alpha must lie in (0, 1)")


register(Family(
    "example-5.1", "spd", {"alpha": 0.5},
    lambda p: (0.0, 1.0), _spd(_ex51_values), _ex51_check,
    "diag(1, (xy)^-alpha) on the unit square"))


def _ex7_check(p):
    _need(0 < p["alpha"] < 1, "alpha must lie in (0, 1)")
    _need(1 < p["p"] < 2, "p must lie in (1, 2)")
    _need((2 - 2 * p["alpha"]) / p["p"] + 1 < 2 / p["p"],
          "alpha too small: the balance exponent is non-negative for q close to p")


register(Family(
    "example-7-balance-failure", "spd", {"alpha": 0.9, "p": 1.5},
    lambda p: (0.0, 1.0), _spd(_ex51_values), _ex7_check,
    "same tensor as example-5.1 with alpha in the balance-failure range"))


def _rem52_values(g, p, mode):
    if g.n != 2:
        raise FamilyError("remark-5.2 is two-dimensional")
    first = _axis_power(g, 0, 2 * p["gamma"], mode)
    a = _outer_product([first, np.ones(g.cells_per_axis[1])], 2)
    return _diag(a, np.ones(g.shape))


register(Family(
    "remark-5.2", "spd", {"gamma": 0.25},
    lambda p: (-1.0 / 3.0, 1.0 / 3.0), _spd(_rem52_values),
    lambda p: _need(p["gamma"] > 0, "gamma must be positive"),
    "diag(|x_1|^(2 gamma), 1) on (-1/3, 1/3)^2"))


# ------------------------------------------------------------ mappings


def ball_map_parts(X):
    """Radial data of the map ``(|x|^-1 + |x|^-1/2) x``.

    Returns ``r, R, dR`` with ``R = 1 + r^(1/2)`` the image radius and
    ``dR = R'(r)``.
    """
    r = np.linalg.norm(X, axis=-1)
    return r, 1.0 + np.sqrt(r), 0.5 / np.sqrt(r)


def ball_map_values(X):
    r, R, _ = ball_map_parts(X)
    return (R / r)[..., None] * X


def ball_map_jacobian(X):
    """Analytic ``Df`` of the ball map: ``(R/r) I + (R' - R/r) x x^t / r^2``."""
    r, R, dR = ball_map_parts(X)
    n = X.shape[-1]
    u = X / r[..., None]
    mu2 = R / r
    return mu2[..., None, None] * np.eye(n) + (dR - mu2)[..., None, None] * (u[..., :, None] * u[..., None, :])


def ball_map_distortion(X):
    """Closed-form distortion ``K_O = K_I = 2 + 2 r^(-1/2)``."""
    r = np.linalg.norm(X, axis=-1)
    return 2.0 + 2.0 / np.sqrt(r)


def ball_map_tensor(X):
    """Closed-form ``W = G^{-n/2}`` of the ball map in the plane.

    Radially the eigenvalue is ``K``, tangentially ``1/K``.
    """
    r = np.linalg.norm(X, axis=-1)
    u = X / r[..., None]
    K = ball_map_distortion(X)
    P = u[..., :, None] * u[..., None, :]
    return K[..., None, None] * P + (1.0 / K)[..., None, None] * (np.eye(X.shape[-1]) - P)


def _mapping(tag, values_fn, jac_fn):
    def build(grid, p, mode):
        def src(g):
            X = g.centers()
            return values_fn(X, p), jac_fn(X, p)

        vals, jac = src(grid)
        return MappingField(grid, vals, tag, jac, src)

    return build


register(Family(
    "ball-map", "mapping", {},
    lambda p: (-1.0, 1.0),
    _mapping("ball-map", lambda X, p: ball_map_values(X), lambda X, p: ball_map_jacobian(X)),
    doc="(|x|^-1 + |x|^-1/2) x on the punctured disk, sampled on [-1, 1]^2"))

register(Family(
    "ball-map-W", "spd", {}, lambda p: (-1.0, 1.0),
    _spd(lambda g, p, mode: _pointwise(g, ball_map_tensor, mode)), doc="closed-form distortion tensor W of the ball map"))

register(Family(
    "ball-map-KO-inverse", "scalar", {}, lambda p: (-1.0, 1.0),
    _scalar(lambda g, p, mode: _pointwise(g, lambda X: 1.0 / ball_map_distortion(X), mode)),
    doc="1/K_O of the ball map"))

register(Family(
    "ball-map-KI", "scalar", {}, lambda p: (-1.0, 1.0),
    _scalar(lambda g, p, mode: _pointwise(g, ball_map_distortion, mode)),
    doc="K_I of the ball map"))

register(Family(
    "identity-map", "mapping", {}, lambda p: (0.0, 1.0),
    _mapping("identity-map", lambda X, p: X.copy(),
             lambda X, p: np.broadcast_to(np.eye(X.shape[-1]), X.shape + (X.shape[-1],)).copy())))

register(Family(
    "scaling-map", "mapping", {"factor": 2.0}, lambda p: (0.0, 1.0),
    _mapping("scaling-map", lambda X, p: p["factor"] * X,
             lambda X, p: p["factor"] * np.broadcast_to(np.eye(X.shape[-1]), X.shape + (X.shape[-1],)).copy()),
    lambda p: _need(p["factor"] > 0, "factor must be positive")))


def _square_values(X, p):
    x, y = X[..., 0], X[..., 1]
    return np.stack([x * x - y * y, 2 * x * y], axis=-1)


def _square_jac(X, p):
    x, y = X[..., 0], X[..., 1]
    return np.stack([np.stack([2 * x, -2 * y], -1), np.stack([2 * y, 2 * x], -1)], -2)


register(Family(
    "conformal-square", "mapping", {}, lambda p: (0.5, 1.5),
    _mapping("conformal-square", _square_values, _square_jac),
    doc="(x^2 - y^2, 2xy), conformal away from the origin"))

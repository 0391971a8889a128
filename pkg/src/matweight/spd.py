"""Symmetric positive definite matrix calculus.

All routines accept a single matrix of shape ``(d, d)`` or a batch of shape
``(..., d, d)``.  Eigenvalues are returned in descending order.  For ``d == 2``
a closed form is used; for ``d >= 3`` a cyclic Jacobi iteration.
"""

from __future__ import annotations

import numpy as np

from .errors import AsymmetryError, SingularWeightError

SYM_TOL = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def asymmetry(M):
    """Relative asymmetry ``max |M - M^t| / max |M|`` over a batch."""
    M = np.asarray(M, dtype=float)
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(M - np.swapaxes(M, -1, -2))) / scale)


def _eig2(M):
    # closed form for symmetric 2x2; the smaller root is taken from the
    # determinant to keep relative accuracy when the spread is large
    a = M[..., 0, 0]
    c = M[..., 1, 1]
    b = 0.5 * (M[..., 0, 1] + M[..., 1, 0])
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    lam1 = mean + rad
    det = a * c - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        lam2 = np.where(lam1 > 0, det / np.where(lam1 > 0, lam1, 1.0), mean - rad)
    # guard against cancellation in det producing a value above lam1
    lam2 = np.minimum(lam2, lam1)
    theta = 0.5 * np.arctan2(2.0 * b, a - c)
    cs, sn = np.cos(theta), np.sin(theta)
    U = np.empty(M.shape, dtype=float)
    U[..., 0, 0] = cs
    U[..., 1, 0] = sn
    U[..., 0, 1] = -sn
    U[..., 1, 1] = cs
    return np.stack([lam1, lam2], axis=-1), U


def _jacobi(M, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigensolver, vectorised over the batch axis."""
    A = np.array(M, dtype=float, copy=True)
    d = A.shape[-1]
    batch = A.shape[:-2]
    A = A.reshape(-1, d, d)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    V = np.broadcast_to(np.eye(d), A.shape).copy()
    scale = np.sqrt(np.sum(A * A, axis=(-1, -2)))
    scale[scale == 0] = 1.0
    off_mask = ~np.eye(d, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A[:, off_mask] ** 2, axis=-1))
        if np.all(off <= tol * scale):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[:, p, q]
                active = np.abs(apq) > 1e-300
                if not np.any(active):
                    continue
                app = A[:, p, p]
                aqq = A[:, q, q]
                tau = np.where(active, (aqq - app) / np.where(active, 2.0 * apq, 1.0), 0.0)
                t = np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
                t = np.where(tau == 0, 1.0, t)
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # rotate columns then rows
                Ap = A[:, :, p].copy()
                Aq = A[:, :, q].copy()
                A[:, :, p] = c[:, None] * Ap - s[:, None] * Aq
                A[:, :, q] = s[:, None] * Ap + c[:, None] * Aq
                Ap = A[:, p, :].copy()
                Aq = A[:, q, :].copy()
                A[:, p, :] = c[:, None] * Ap - s[:, None] * Aq
                A[:, q, :] = s[:, None] * Ap + c[:, None] * Aq
                Vp = V[:, :, p].copy()
                Vq = V[:, :, q].copy()
                V[:, :, p] = c[:, None] * Vp - s[:, None] * Vq
                V[:, :, q] = s[:, None] * Vp + c[:, None] * Vq
    lam = np.diagonal(A, axis1=-2, axis2=-1).copy()
    order = np.argsort(-lam, axis=-1)
    lam = np.take_along_axis(lam, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    return lam.reshape(batch + (d,)), V.reshape(batch + (d, d))


def spd_decompose(M, tol=SYM_TOL):
    """Eigendecomposition of a symmetric matrix or batch of matrices.

    Parameters
    ----------
    M : array_like, shape (..., d, d)
        Symmetric matrices.
    tol : float
        Allowed relative asymmetry.

    Returns
    -------
    lam : ndarray, shape (..., d)
        Eigenvalues in descending order.
    U : ndarray, shape (..., d, d)
        Orthogonal matrices whose columns are the eigenvectors, so that
        ``M = U diag(lam) U^t``.

    Raises
    ------
    AsymmetryError
        If the relative asymmetry exceeds `tol`.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {M.shape}")
    asym = asymmetry(M)
    if asym > tol:
        raise AsymmetryError(asym, tol)
    d = M.shape[-1]
    if d == 1:
        return M[..., 0].copy(), np.ones_like(M)
    if d == 2:
        return _eig2(M)
    return _jacobi(M)


def compose(lam, U, s=1.0):
    """Return ``U diag(lam**s) U^t`` for stored eigendata."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise SingularWeightError("non-positive eigenvalue in fractional power")
    ls = lam if s == 1.0 else lam**s
    return np.einsum("...ik,...k,...jk->...ij", U, ls, U)


def matrix_power(M, s):
    """Fractional power of a symmetric positive definite matrix.

    >>> matrix_power(np.diag([4.0, 9.0]), 0.5)
    array([[2., 0.],
           [0., 3.]])
    """
    lam, U = spd_decompose(M)
    if np.any(lam <= 0):
        raise SingularWeightError(f"eigenvalue {np.min(lam):.3e} is not positive")
    return compose(lam, U, s)


def operator_norm(M):
    """Operator norm of a symmetric positive semi-definite matrix (largest eigenvalue)."""
    lam, _ = spd_decompose(M)
    return lam[..., 0]


def spectral_norm(A):
    """Operator norm ``|A|_op`` of general square matrices (batched).

    Uses the trace/determinant closed form for 2x2 and singular values otherwise.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[-1]
    if d == 1:
        return np.abs(A[..., 0, 0])
    if d == 2:
        fro2 = np.sum(A * A, axis=(-1, -2))
        det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
        disc = np.maximum(0.25 * fro2 * fro2 - det * det, 0.0)
        return np.sqrt(0.5 * fro2 + np.sqrt(disc))
    return np.linalg.svd(A, compute_uv=False)[..., 0]


def smallest_singular_value(A):
    """Smallest singular value of general square matrices (batched)."""
    A = np.asarray(A, dtype=float)
    d = A.shape[-1]
    if d == 1:
        return np.abs(A[..., 0, 0])
    if d == 2:
        det = np.abs(A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0])
        return det / spectral_norm(A)
    return np.linalg.svd(A, compute_uv=False)[..., -1]

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matweight.errors import AsymmetryError, SingularWeightError
from matweight.spd import matrix_power, operator_norm, spd_decompose, spectral_norm


def random_spd(rng, d, batch=(), spread=3.0):
    A = rng.normal(size=batch + (d, d))
    Q, _ = np.linalg.qr(A)
    lam = np.exp(rng.uniform(-spread, spread, size=batch + (d,)))
    return np.einsum("...ik,...k,...jk->...ij", Q, lam, Q)


seeds = st.integers(0, 2**32 - 1)


def test_identity_and_diagonal():
    lam, U = spd_decompose(np.eye(2))
    assert np.allclose(lam, [1, 1]) and np.allclose(U @ U.T, np.eye(2))
    lam, _ = spd_decompose(np.diag([9.0, 4.0]))
    assert np.allclose(lam, [9, 4])
    lam, _ = spd_decompose(np.diag([4.0, 9.0]))
    assert np.allclose(lam, [9, 4])  # descending order


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_2x2_eigenvalues_match_quadratic_formula(seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.normal(size=3) * 10 ** rng.uniform(-3, 3)
    M = np.array([[a, b], [b, c]])
    lam, U = spd_decompose(M)
    tr, det = a + c, a * c - b * b
    disc = np.sqrt(tr * tr / 4 - det)
    ref = np.array([tr / 2 + disc, tr / 2 - disc])
    scale = max(abs(a), abs(b), abs(c))
    assert np.allclose(lam, ref, atol=1e-10 * scale, rtol=0)
    assert np.abs(U.T @ U - np.eye(2)).max() <= 1e-10
    assert np.abs(U @ np.diag(lam) @ U.T - M).max() <= 1e-10 * scale


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(3, 6))
def test_jacobi_matches_eigh(seed, d):
    rng = np.random.default_rng(seed)
    M = random_spd(rng, d)
    lam, U = spd_decompose(M)
    ref = np.sort(np.linalg.eigvalsh(M))[::-1]
    assert np.allclose(lam, ref, rtol=1e-10)
    assert np.abs(U.T @ U - np.eye(d)).max() <= 1e-10
    assert np.abs(U @ np.diag(lam) @ U.T - M).max() <= 1e-10 * np.abs(M).max()


def test_batched_decomposition():
    rng = np.random.default_rng(1)
    M = random_spd(rng, 2, (7, 5))
    lam, U = spd_decompose(M)
    assert lam.shape == (7, 5, 2) and U.shape == (7, 5, 2, 2)
    assert np.allclose(np.einsum("...ik,...k,...jk->...ij", U, lam, U), M, rtol=1e-10)


def test_asymmetry_rejected_with_magnitude():
    with pytest.raises(AsymmetryError) as exc:
        spd_decompose(np.array([[1.0, 0.5], [0.0, 1.0]]))
    assert exc.value.magnitude > 0.1


def test_power_examples():
    assert np.allclose(matrix_power(np.eye(3), 0.37), np.eye(3))
    assert np.allclose(matrix_power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]))
    with pytest.raises(SingularWeightError):
        matrix_power(np.diag([1.0, -1.0]), 0.5)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(2, 4), st.floats(-2, 2), st.floats(-2, 2))
def test_power_composition_and_square_root(seed, d, a, b):
    rng = np.random.default_rng(seed)
    M = random_spd(rng, d, spread=2.0)
    R = matrix_power(M, 0.5)
    assert np.abs(R @ R - M).max() <= 1e-10 * np.abs(M).max()
    lhs = matrix_power(M, a) @ matrix_power(M, b)
    rhs = matrix_power(M, a + b)
    assert np.allclose(lhs, rhs, rtol=1e-8, atol=1e-8 * np.abs(rhs).max())
    P = matrix_power(M, 1 / 1.7)
    assert np.allclose(P @ matrix_power(M, -1 / 1.7), np.eye(d), atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 4))
def test_operator_norm_random_vector_oracle(seed, d):
    rng = np.random.default_rng(seed)
    M = random_spd(rng, d, spread=1.0)
    op = operator_norm(M)
    v = rng.normal(size=(10_000, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    sampled = np.linalg.norm(v @ M, axis=1).max()
    assert sampled <= op * (1 + 1e-12)
    # maximizing over the eigenvector closes the gap exactly
    _, U = spd_decompose(M)
    assert abs(np.linalg.norm(M @ U[:, 0]) - op) <= 1e-6 * op
    assert op <= np.trace(M) <= d * op * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_submultiplicative_and_spectral_norm(seed):
    rng = np.random.default_rng(seed)
    A, B = random_spd(rng, 2), random_spd(rng, 2)
    nab = spectral_norm(A @ B)
    assert np.isclose(nab, np.linalg.norm(A @ B, 2), rtol=1e-10)
    assert nab <= operator_norm(A) * operator_norm(B) * (1 + 1e-12)

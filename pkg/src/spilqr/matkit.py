"""Dense real-matrix kernels used by every solver module.

Provides symmetric (half-)vectorization and its inverse, quadratic-form
monomial vectors, Kronecker products, spectral radius, singular-value
helpers, a matrix exponential, and a direct discrete Lyapunov solver.
All functions are pure and operate on plain ``numpy`` arrays.

Conventions
-----------
``vecs(S)`` packs the upper triangle of a symmetric matrix row by row,
diagonal entries once and off-diagonal entries doubled::

    vecs(S) = [s11, 2 s12, ..., 2 s1n, s22, 2 s23, ..., snn]

``vecv(z)`` lists the monomials ``z_i z_j`` for ``i <= j`` in the same
ordering, squares un-doubled, so that ``vecv(x) @ vecs(S) == x' S x``.

``vec(M)`` stacks columns (Fortran order), matching the identity
``(y' ⊗ x') vec(M) == x' M y``.
"""

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatchError,
    EigenvalueConvergenceError,
    IllConditionedError,
    InvalidProblemError,
    UnstableMatrixError,
)

__all__ = [
    "vecs", "unvecs", "vecv", "vecv_rows", "vec", "unvec", "kron",
    "spectral_radius", "min_singular_value", "numerical_rank",
    "matrix_exp", "solve_discrete_lyapunov",
    "is_positive_definite", "pd_tolerance", "sym_sqrt", "check_symmetric",
]

# Reject Lyapunov factors closer to the unit circle than this; the
# vectorized system becomes near-singular beyond it.
STABILITY_MARGIN = 1e-9


def _as_matrix(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise InvalidProblemError(f"{name} has non-finite entries")
    return A


def check_symmetric(S, name="matrix", rtol=1e-10):
    """Validate (near-)symmetry and return the exactly symmetrized copy."""
    S = _as_matrix(S, name)
    if S.shape[0] != S.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got {S.shape}")
    scale = 1.0 + np.abs(S).max()
    if np.abs(S - S.T).max() > rtol * scale:
        raise InvalidProblemError(f"{name} is not symmetric")
    return (S + S.T) / 2.0


def _triu_indices(n):
    return np.triu_indices(n)


def vecs(S):
    """Half-vectorize a symmetric matrix, doubling off-diagonal entries.

    The result has length ``n (n + 1) / 2`` and satisfies
    ``vecv(x) @ vecs(S) == x' S x`` for every vector ``x``.
    """
    S = check_symmetric(S, "S")
    n = S.shape[0]
    i, j = _triu_indices(n)
    return S[i, j] * np.where(i == j, 1.0, 2.0)


def unvecs(v):
    """Inverse of :func:`vecs`: rebuild the symmetric matrix.

    The length of ``v`` must be a triangular number ``n (n + 1) / 2``.
    """
    v = np.asarray(v, dtype=float).ravel()
    n = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if n * (n + 1) // 2 != v.size:
        raise DimensionMismatchError(
            f"length {v.size} is not a packed symmetric size n(n+1)/2")
    S = np.zeros((n, n))
    i, j = _triu_indices(n)
    S[i, j] = np.where(i == j, v, v / 2.0)
    S[j, i] = S[i, j]
    return S


def vecv(z):
    """Quadratic monomials ``z_i z_j`` for ``i <= j``, squares un-doubled."""
    z = np.asarray(z, dtype=float).ravel()
    i, j = _triu_indices(z.size)
    return z[i] * z[j]


def vecv_rows(Z):
    """Row-wise :func:`vecv` of an ``l x n`` array; returns ``l x n(n+1)/2``."""
    Z = np.asarray(Z, dtype=float)
    i, j = _triu_indices(Z.shape[1])
    return Z[:, i] * Z[:, j]


def vec(M):
    """Column-stacking vectorization of a matrix."""
    return np.asarray(M, dtype=float).ravel(order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec` for the given shape."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != rows * cols:
        raise DimensionMismatchError(
            f"length {v.size} does not match shape ({rows}, {cols})")
    return v.reshape((rows, cols), order="F")


def kron(A, B):
    """Kronecker product (thin wrapper kept for a uniform kernel surface)."""
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def spectral_radius(A):
    """Largest eigenvalue modulus of a square matrix."""
    A = _as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"A must be square, got {A.shape}")
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenvalueConvergenceError(
            f"eigenvalue iteration did not converge: {exc}") from exc
    return float(np.abs(w).max())


def min_singular_value(A):
    """Smallest singular value of a (possibly rectangular) matrix."""
    A = _as_matrix(A, "A")
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def numerical_rank(A, tol):
    """Number of singular values above ``tol`` times the largest one."""
    if tol <= 0:
        raise InvalidProblemError("tol must be positive")
    A = _as_matrix(A, "A")
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def matrix_exp(A, t=1.0):
    """Matrix exponential ``exp(A t)`` (scaling-and-squaring Pade core)."""
    A = _as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"A must be square, got {A.shape}")
    if not np.isfinite(t):
        raise InvalidProblemError("t must be finite")
    return scipy.linalg.expm(A * t)


def solve_discrete_lyapunov(F, W, stability_margin=STABILITY_MARGIN):
    """Solve ``F' P F - P + W = 0`` for symmetric ``P``.

    Uses the exact Kronecker vectorization
    ``(I - F' ⊗ F') vec(P) = vec(W)``; the O(n^6) cost is acceptable at
    the desk scales (n <= 20) this package targets.  The result is
    exactly symmetrized, and is positive (semi)definite whenever ``W``
    is and ``F`` is Schur stable.

    Raises
    ------
    UnstableMatrixError
        If ``spectral_radius(F) >= 1 - stability_margin``; the equation
        is then not safely solvable.
    IllConditionedError
        If the vectorized system is numerically singular anyway.
    """
    F = _as_matrix(F, "F")
    W = check_symmetric(W, "W")
    n = F.shape[0]
    if F.shape[0] != F.shape[1] or W.shape[0] != n:
        raise DimensionMismatchError(
            f"F {F.shape} and W {W.shape} must be square of equal size")
    rho = spectral_radius(F)
    if rho >= 1.0 - stability_margin:
        raise UnstableMatrixError(
            f"F must be Schur stable, spectral radius is {rho:.6g}", rho=rho)
    lhs = np.eye(n * n) - np.kron(F.T, F.T)
    try:
        p = np.linalg.solve(lhs, vec(W))
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(
            "vectorized Lyapunov system is numerically singular") from exc
    P = unvec(p, n, n)
    return (P + P.T) / 2.0


def pd_tolerance(S):
    """Eigenvalue threshold below which a symmetric matrix does not count
    as positive definite: ``1e-10 (1 + ||S||_2)``."""
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return 1e-10
    return 1e-10 * (1.0 + float(np.linalg.norm(S, 2)))


def is_positive_definite(S, tol=None):
    """Whether all eigenvalues of symmetric ``S`` exceed the tolerance."""
    S = check_symmetric(S, "S")
    w = np.linalg.eigvalsh(S)
    if tol is None:
        tol = 1e-10 * (1.0 + float(np.abs(w).max(initial=0.0)))
    return bool(np.all(w > tol))


def sym_sqrt(S):
    """Symmetric square root of a positive semidefinite matrix.

    Small negative eigenvalues from round-off are clipped to zero.
    """
    S = check_symmetric(S, "S")
    w, V = np.linalg.eigh(S)
    if w.min(initial=0.0) < -pd_tolerance(S):
        raise InvalidProblemError("matrix is not positive semidefinite")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T

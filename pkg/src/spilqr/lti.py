"""Discrete-time LTI plants: representation, zero-order-hold discretization,
trajectory simulation, and structural (controllability/observability) checks.
"""

from dataclasses import dataclass

import numpy as np

from . import matkit
from .exceptions import (
    DimensionMismatchError,
    DivergenceError,
    InvalidProblemError,
)

__all__ = [
    "LinearSystem", "CostWeights", "Trajectory",
    "zoh_discretize", "simulate", "exploration_input",
    "gain_policy", "zero_policy",
    "controllability_matrix", "observability_matrix",
    "is_controllable", "is_observable",
]

RANK_TOL = 1e-8
DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class LinearSystem:
    """Plant ``x_{k+1} = A x_k + B u_k`` with state matrix A (n x n) and
    input matrix B (n x m)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatchError(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionMismatchError(
                f"B must have {A.shape[0]} rows, got {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise InvalidProblemError("system matrices must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


@dataclass(frozen=True)
class CostWeights:
    """Running cost weights: Q symmetric positive semidefinite on the state,
    R symmetric positive definite on the input."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = matkit.check_symmetric(self.Q, "Q")
        R = matkit.check_symmetric(self.R, "R")
        if np.linalg.eigvalsh(Q).min() < -matkit.pd_tolerance(Q):
            raise InvalidProblemError("Q must be positive semidefinite")
        if not matkit.is_positive_definite(R):
            raise InvalidProblemError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class Trajectory:
    """Recorded rollout: ``states`` holds x_0..x_l (l+1 rows), ``inputs``
    holds u_0..u_{l-1} (l rows)."""

    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.states, dtype=float)
        U = np.asarray(self.inputs, dtype=float)
        if X.ndim != 2 or U.ndim != 2:
            raise DimensionMismatchError("states and inputs must be 2-D")
        if X.shape[0] != U.shape[0] + 1:
            raise DimensionMismatchError(
                f"{X.shape[0]} states require {X.shape[0] - 1} inputs, "
                f"got {U.shape[0]}")
        object.__setattr__(self, "states", X)
        object.__setattr__(self, "inputs", U)

    @property
    def length(self):
        """Number of recorded transitions."""
        return self.inputs.shape[0]

    @property
    def n(self):
        return self.states.shape[1]

    @property
    def m(self):
        return self.inputs.shape[1]


def zoh_discretize(A_c, B_c, T):
    """Zero-order-hold discretization of a continuous plant.

    Computes ``A = exp(A_c T)`` and ``B = (int_0^T exp(A_c s) ds) B_c``
    in one shot from the exponential of the augmented block matrix
    ``[[A_c, B_c], [0, 0]]``, so both share the same truncation-free
    code path.
    """
    A_c = np.asarray(A_c, dtype=float)
    B_c = np.asarray(B_c, dtype=float)
    if A_c.ndim != 2 or A_c.shape[0] != A_c.shape[1]:
        raise DimensionMismatchError(f"A_c must be square, got {A_c.shape}")
    if B_c.ndim != 2 or B_c.shape[0] != A_c.shape[0]:
        raise DimensionMismatchError(
            f"B_c must have {A_c.shape[0]} rows, got {B_c.shape}")
    if not (T > 0 and np.isfinite(T)):
        raise InvalidProblemError("sample time T must be positive and finite")
    n, m = A_c.shape[0], B_c.shape[1]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A_c
    M[:n, n:] = B_c
    E = matkit.matrix_exp(M, T)
    return LinearSystem(E[:n, :n], E[:n, n:])


def simulate(sys, x0, policy, steps, divergence_limit=DIVERGENCE_LIMIT):
    """Roll the plant forward for ``steps`` transitions.

    ``policy`` is any callable ``(k, x) -> u`` producing the input at
    step ``k`` given the current state; see :func:`gain_policy` and
    :func:`exploration_input`.

    Raises
    ------
    DivergenceError
        When the state norm exceeds ``divergence_limit``; the exception
        carries the step index and the truncated trajectory.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.n:
        raise DimensionMismatchError(
            f"x0 has length {x0.size}, expected {sys.n}")
    X = np.zeros((steps + 1, sys.n))
    U = np.zeros((steps, sys.m))
    X[0] = x0
    for k in range(steps):
        u = np.atleast_1d(np.asarray(policy(k, X[k]), dtype=float)).ravel()
        if u.size != sys.m:
            raise DimensionMismatchError(
                f"policy returned {u.size} inputs, expected {sys.m}")
        U[k] = u
        X[k + 1] = sys.A @ X[k] + sys.B @ u
        if np.linalg.norm(X[k + 1]) > divergence_limit:
            raise DivergenceError(
                f"state norm exceeded {divergence_limit:g} at step {k + 1}",
                step=k + 1,
                partial=Trajectory(X[:k + 2], U[:k + 1]))
    return Trajectory(X, U)


def exploration_input(m, num_terms=100, freq_low=-10.0, freq_high=10.0,
                      seed=0):
    """Persistently exciting probe input: per channel, a sum of
    ``num_terms`` sinusoids ``sin(w_h k)`` with frequencies drawn
    uniformly from ``[freq_low, freq_high]``.

    Draws are independent per channel and fully determined by ``seed``
    (64-bit PCG state), so trajectories are reproducible across runs
    and platforms.  Returns a policy callable ``(k, x) -> u``.
    """
    if num_terms < 1:
        raise InvalidProblemError("num_terms must be at least 1")
    if freq_low > freq_high:
        raise InvalidProblemError("freq_low must not exceed freq_high")
    rng = np.random.default_rng(seed)
    omega = rng.uniform(freq_low, freq_high, size=(m, num_terms))

    def policy(k, x):
        return np.sin(omega * k).sum(axis=1)

    policy.frequencies = omega
    return policy


def gain_policy(K):
    """State feedback ``u = -K x``."""
    K = np.asarray(K, dtype=float)

    def policy(k, x):
        return -K @ x

    return policy


def zero_policy(m):
    """Open loop: ``u = 0``."""
    u = np.zeros(m)

    def policy(k, x):
        return u

    return policy


def controllability_matrix(sys):
    """Block matrix ``[B, AB, ..., A^{n-1} B]``."""
    blocks = []
    M = sys.B
    for _ in range(sys.n):
        blocks.append(M)
        M = sys.A @ M
    return np.hstack(blocks)


def observability_matrix(A, C):
    """Block matrix ``[C; CA; ...; CA^{n-1}]``."""
    A = np.asarray(A, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[1] != A.shape[0]:
        raise DimensionMismatchError(
            f"C must have {A.shape[0]} columns, got {C.shape}")
    blocks = []
    M = C
    for _ in range(A.shape[0]):
        blocks.append(M)
        M = M @ A
    return np.vstack(blocks)


def is_controllable(sys, tol=RANK_TOL):
    """Whether the pair (A, B) is controllable (numerical rank test)."""
    return matkit.numerical_rank(controllability_matrix(sys), tol) == sys.n


def is_observable(A, C, tol=RANK_TOL):
    """Whether the pair (A, C) is observable (numerical rank test)."""
    A = np.asarray(A, dtype=float)
    return matkit.numerical_rank(observability_matrix(A, C), tol) == A.shape[0]

"""Exact LQ oracles and the baseline optimizer / controller.

Riccati indexing: the backward recursion runs ``j = N, ..., 0`` with
``P[N] = S``.  The "horizon-N" solution reported for a problem is ``(P[0], K[0])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite, NonInvertible
from .ocp import LossOracle


@dataclass
class RiccatiSolution:
    P: list[np.ndarray]  # P[j], j = 0..N
    K: list[np.ndarray]  # K[j], j = 0..N-1

    @property
    def horizon(self) -> int:
        return len(self.K)


def riccati_recursion(A, B, Q, R, S, N: int) -> RiccatiSolution:
    """Finite-horizon LQ recursion for ``u_j = -K_j x_j``."""
    A, B, Q, R, S = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R, S))
    P = [None] * (N + 1)
    K = [None] * N
    P[N] = S.copy()
    for j in range(N - 1, -1, -1):
        Pn = P[j + 1]
        G = R + B.T @ Pn @ B
        if np.linalg.cond(G) > 1e12:
            raise NonInvertible("R + B'PB is singular")
        K[j] = np.linalg.solve(G, B.T @ Pn @ A)
        Pj = Q + A.T @ Pn @ A - A.T @ Pn @ B @ K[j]
        P[j] = 0.5 * (Pj + Pj.T)
    return RiccatiSolution(P, K)


def lq_q_matrix(P_next, A, B, Q, R) -> np.ndarray:
    """Block matrix ``H`` with ``Q_j(x, u) = [x; u]' H [x; u]``."""
    A, B, Q, R, P = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R, P_next))
    return np.block([
        [Q + A.T @ P @ A, A.T @ P @ B],
        [B.T @ P @ A, R + B.T @ P @ B],
    ])


def gd_minimize(loss: LossOracle, w0, lr: float, tol: float, max_iters: int):
    """Plain gradient descent ``w <- w - lr * grad``.

    Stops when ``lr * ||grad||_inf <= tol`` (that step is not applied) or after
    ``max_iters`` gradient evaluations.  Returns ``(w, iterations)`` where
    iterations counts gradient evaluations, including the final check.
    """
    if not lr > 0:
        raise ValueError("lr must be positive")
    w = np.array(w0, dtype=float).reshape(loss.dim)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, max_iters + 1):
            step = lr * loss.gradient(w)
            if not (np.all(np.isfinite(step)) and np.all(np.isfinite(w))):
                raise NonFinite(f"gradient descent diverged after {i} iterations")
            if np.max(np.abs(step)) <= tol:
                return w, i
            w = w - step
        if not np.all(np.isfinite(w)):
            raise NonFinite("gradient descent diverged")
    return w, max_iters


@dataclass
class PidGains:
    K_P: np.ndarray = field(default_factory=lambda: np.array([0.9, 0.8]))
    K_I: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    K_D: np.ndarray = field(default_factory=lambda: np.array([0.01, 0.01]))
    integral: np.ndarray = field(default_factory=lambda: np.zeros(2))
    prev_error: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def reset(self):
        self.integral = np.zeros(2)
        self.prev_error = np.zeros(2)


def pid_step(gains: PidGains, e) -> float:
    """Componentwise PID law summed over both error channels.

    The integrator includes the current error; the derivative is ``e_k - e_{k-1}``
    with ``e_{-1} = 0``.  Mutates ``gains``.
    """
    e = np.asarray(e, dtype=float)
    gains.integral = gains.integral + e
    de = e - gains.prev_error
    gains.prev_error = e.copy()
    return float(-(gains.K_P @ e) - gains.K_I @ gains.integral - gains.K_D @ de)

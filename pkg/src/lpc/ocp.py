"""Regularized recursive-gain minimizer (the "OCP method").

The minimizer treats ``min L(w)`` as a control problem on ``w_{i+1} = w_i - g_i``
with a quadratic control penalty ``R_d``.  Every step has the shape

    g_i = alpha @ L'(w_i) + beta @ g_prev,   alpha = (R_d + L'')^-1,   beta = alpha @ R_d

and only the choice of ``g_prev`` differs between the three modes:

``interleaved``
    ``g_prev`` is the step actually taken at the previous iterate.
``unrolled``
    ``g_prev`` is the previous gain re-evaluated at the *current* iterate, i.e.
    the recursion is unrolled ``i + 1`` times at ``w_i``.  On a quadratic the
    error contracts by ``beta^(i+1)`` at iteration ``i``.
``inner_loop``
    the recursion is run to its fixed point at every iterate; with a
    non-singular Hessian that fixed point is the Newton step.

Because ``R_d`` is positive definite, ``R_d + L''`` stays invertible when the
Hessian is singular, so the iteration keeps running where Newton's method
would stop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import NonFinite, NonInvertible

COND_LIMIT = 1e12
MODES = ("interleaved", "unrolled", "inner_loop")
REFRESH = ("frozen", "every_step")


@dataclass(frozen=True)
class LossOracle:
    """Value / gradient / Hessian view of a twice differentiable scalar loss."""

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]


def quadratic_loss(H, b=None, c=0.0) -> LossOracle:
    """``L(w) = 0.5 w'Hw - b'w + c`` with the exact derivatives."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    d = H.shape[0]
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float).reshape(d)
    return LossOracle(
        dim=d,
        value=lambda w: float(0.5 * w @ H @ w - b @ w + c),
        gradient=lambda w: H @ w - b,
        hessian=lambda w: H,
    )


def as_matrix(r, dim: int) -> np.ndarray:
    """Scalar ``r`` becomes ``r * I``; matrices pass through."""
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        return float(r) * np.eye(dim)
    return np.atleast_2d(r)


@dataclass(frozen=True)
class OcpConfig:
    R_d: object = 0.1
    max_iters: int = 100
    tol: float = 1e-5
    mode: Literal["interleaved", "unrolled", "inner_loop"] = "interleaved"
    hessian_refresh: Literal["frozen", "every_step"] = "frozen"
    regularization_fallback_max: int = 8
    inner_max_doublings: int = 16

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.hessian_refresh not in REFRESH:
            raise ValueError(f"unknown hessian_refresh {self.hessian_refresh!r}")
        R = np.asarray(self.R_d, dtype=float)
        eig = np.array([R]) if R.ndim == 0 else np.linalg.eigvalsh(np.atleast_2d(R))
        if not np.all(eig > 0):
            raise ValueError("R_d must be positive definite")


@dataclass
class OcpRecord:
    w: np.ndarray
    grad_norm: float
    step_norm: float
    loss: float


@dataclass
class OcpTrace:
    records: list[OcpRecord] = field(default_factory=list)
    stop_reason: str = "max_iters"

    def __len__(self):
        return len(self.records)

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss

    @property
    def iterates(self) -> np.ndarray:
        return np.array([r.w for r in self.records])


def gain_pair(H, R_d, fallback_max: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(alpha, beta) = ((R_d + H)^-1, alpha @ R_d)``.

    If ``R_d + H`` is ill-conditioned (condition number above 1e12) or, for an
    indefinite ``H``, not positive definite, ``R_d`` is doubled and the
    inversion retried, at most ``fallback_max`` times.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = as_matrix(R_d, H.shape[0])
    for _ in range(fallback_max + 1):
        M = R + H
        if np.all(np.isfinite(M)) and _positive_definite(M) and np.linalg.cond(M) <= COND_LIMIT:
            alpha = np.linalg.inv(M)
            return alpha, alpha @ R
        R = 2.0 * R
    raise NonInvertible(f"R_d + H not well-conditioned positive definite after {fallback_max} doublings of R_d")


def _positive_definite(M) -> bool:
    try:
        np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError:
        return False
    return True


def ocp_step(w, g_prev, alpha, beta, grad):
    """One weight update: ``g = alpha grad + beta g_prev`` and ``w_next = w - g``."""
    g = alpha @ grad + beta @ g_prev
    return w - g, g


def fixed_point_gain(alpha, beta, max_doublings: int = 16) -> np.ndarray:
    """Matrix ``S`` with ``S @ grad`` the fixed point of ``g <- alpha grad + beta g``.

    Partial sums ``S_T = sum_{t<T} beta^t alpha`` are built by doubling,
    ``S_2T = S_T + beta^T S_T``, until ``beta^T`` vanishes.  A singular Hessian
    leaves an eigenvalue 1 in ``beta``; the sum is then truncated at
    ``T = 2**max_doublings``.

    An indefinite Hessian gives ``beta`` eigenvalues above 1, where the series
    diverges although the fixed point exists; it is then solved for directly
    from ``(I - beta) S = alpha``.
    """
    if alpha.size and max(abs(np.linalg.eigvals(beta))) > 1.0 + 1e-9:
        M = np.eye(beta.shape[0]) - beta
        if np.linalg.cond(M) > COND_LIMIT:
            raise NonInvertible("gain recursion does not contract and I - beta is singular")
        return np.linalg.solve(M, alpha)
    S = alpha.copy()
    P = beta.copy()
    for _ in range(max_doublings):
        S = S + P @ S
        P = P @ P
        if np.max(np.abs(P)) < 1e-17:
            break
    return S


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("loss or iterate became non-finite")


def ocp_minimize(loss: LossOracle, w0, cfg: OcpConfig = OcpConfig()) -> tuple[np.ndarray, OcpTrace]:
    """Minimize ``loss`` from ``w0``.

    Stops when the proposed change ``||w_{i+1} - w_i||_inf`` and the fresh
    gradient step ``||alpha grad||_inf`` are both at most ``cfg.tol`` (that
    last sub-tolerance step is not applied) or after ``cfg.max_iters`` applied
    steps.  ``trace.iterations`` counts applied steps.
    """
    w = np.array(w0, dtype=float).reshape(loss.dim)
    R = as_matrix(cfg.R_d, loss.dim)
    fb = cfg.regularization_fallback_max

    def gains(at):
        H = loss.hessian(at)
        _check_finite(H)
        return gain_pair(H, R, fb)

    alpha, beta = gains(w)
    S = fixed_point_gain(alpha, beta, cfg.inner_max_doublings) if cfg.mode == "inner_loop" else None
    S_unrolled = np.zeros_like(alpha)
    g = np.zeros(loss.dim)
    trace = OcpTrace()

    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(cfg.max_iters + 1):
            val = loss.value(w)
            grad = loss.gradient(w)
            _check_finite(w, val, grad)
            gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
            if i == cfg.max_iters:
                trace.records.append(OcpRecord(w.copy(), gnorm, float("nan"), float(val)))
                trace.stop_reason = "max_iters"
                break

            if cfg.hessian_refresh == "every_step" and i > 0:
                alpha, beta = gains(w)
                if cfg.mode == "inner_loop":
                    S = fixed_point_gain(alpha, beta, cfg.inner_max_doublings)

            if cfg.mode == "interleaved":
                g = alpha @ grad + beta @ g
            elif cfg.mode == "unrolled":
                if cfg.hessian_refresh == "every_step":
                    S_unrolled = np.zeros_like(alpha)
                    for _ in range(i + 1):
                        S_unrolled = alpha + beta @ S_unrolled
                else:
                    S_unrolled = alpha + beta @ S_unrolled
                g = S_unrolled @ grad
            else:
                g = S @ grad
            _check_finite(g)

            step = float(np.max(np.abs(g))) if g.size else 0.0
            trace.records.append(OcpRecord(w.copy(), gnorm, step, float(val)))
            # the momentum term can cancel a nonzero gradient step exactly, so
            # the fresh step alpha @ grad must be small as well
            fresh = float(np.max(np.abs(alpha @ grad))) if grad.size else 0.0
            if step <= cfg.tol and fresh <= cfg.tol:
                trace.stop_reason = "tolerance"
                break
            w = w - g

    return w, trace

"""Receding-horizon fitted Q-iteration with linear-in-weights critic and actor.

For each time step the horizon is solved backwards, ``j = N_p - 1, ..., 0``:

* critic targets ``U(x, u) + Q^{j+1}(x', pi^{j+1}(x'))`` (terminal cost at the
  last stage) are computed once from the pool, then ``W_c^j`` is fitted;
* ``W_a^j`` is fitted so that ``pi^j(x) = W_a^j . theta(x)`` minimizes the
  fitted ``Q^j`` over the pool states.

Only pooled transitions are used, never the plant model.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Literal

import numpy as np

from .baselines import gd_minimize
from .errors import DimensionMismatch, MissingSuccessorWeights, NonFinite, PoolEmpty
from .features import BasisSpec, basis_grad_u, basis_hess_u, eval_basis
from .ocp import LossOracle, OcpConfig, ocp_minimize
from .plants import Plant


# ---------------------------------------------------------------- data pool

@dataclass(frozen=True)
class DataPoint:
    x: np.ndarray
    u: np.ndarray
    x_next: np.ndarray


class DataPool:
    """Bounded FIFO of transitions; pushing onto a full pool drops the oldest."""

    def __init__(self, capacity: int, points: Iterable[DataPoint] = ()):
        if capacity < 1:
            raise ValueError("pool capacity must be >= 1")
        self.capacity = capacity
        self._buf: collections.deque[DataPoint] = collections.deque(maxlen=capacity)
        for p in points:
            self.push(p)

    def push(self, point: DataPoint):
        self._buf.append(point)

    def add(self, x, u, x_next):
        self.push(DataPoint(
            np.asarray(x, dtype=float).reshape(-1),
            np.asarray(u, dtype=float).reshape(-1),
            np.asarray(x_next, dtype=float).reshape(-1),
        ))

    def copy(self) -> "DataPool":
        return DataPool(self.capacity, self._buf)

    def __len__(self):
        return len(self._buf)

    def __iter__(self):
        return iter(self._buf)

    def __getitem__(self, i):
        return self._buf[i]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self._buf:
            raise PoolEmpty("data pool is empty")
        X = np.array([p.x for p in self._buf])
        U = np.array([p.u for p in self._buf])
        Xn = np.array([p.x_next for p in self._buf])
        return X, U, Xn


def seed_pool(plant: Plant, count: int, state_box, input_box, rng: np.random.Generator,
              capacity: int | None = None) -> DataPool:
    """Offline pool: ``x`` and ``u`` uniform in their boxes, one plant step each."""
    if count < 0:
        raise ValueError("count must be >= 0")
    sbox = np.broadcast_to(np.asarray(state_box, dtype=float), (plant.n, 2))
    ibox = np.broadcast_to(np.asarray(input_box, dtype=float), (plant.m, 2))
    pool = DataPool(capacity or max(count, 1))
    X = rng.uniform(sbox[:, 0], sbox[:, 1], size=(count, plant.n))
    U = rng.uniform(ibox[:, 0], ibox[:, 1], size=(count, plant.m))
    for x, u in zip(X, U):
        pool.add(x, u, plant.step(x, u))
    return pool


# ---------------------------------------------------------------- costs

@dataclass(frozen=True)
class CostSpec:
    """``U(x, u) = e'Qe + u'Ru`` and ``P(x) = e'Se`` where ``e = error_map(x)`` (or ``x``)."""

    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    error_map: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        for name in ("Q", "R", "S"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        for name, strict in (("Q", False), ("R", True), ("S", False)):
            M = getattr(self, name)
            if not np.allclose(M, M.T):
                raise ValueError(f"{name} must be symmetric")
            lo = np.linalg.eigvalsh(M).min()
            if (strict and lo <= 0) or lo < -1e-12:
                raise ValueError(f"{name} must be positive {'definite' if strict else 'semidefinite'}")

    def error(self, x):
        x = np.asarray(x, dtype=float)
        e = x if self.error_map is None else self.error_map(x)
        if e.shape[-1] != self.Q.shape[0]:
            raise DimensionMismatch(f"cost expects {self.Q.shape[0]} error entries, got {e.shape[-1]}")
        return e


def _quad(M, v):
    return np.einsum("...i,ij,...j->...", v, M, v)


def stage_cost(cost: CostSpec, x, u):
    u = np.asarray(u, dtype=float)
    e = cost.error(x)
    if u.ndim == e.ndim - 1:
        u = u[..., None]
    if u.shape[-1] != cost.R.shape[0]:
        raise DimensionMismatch(f"cost expects {cost.R.shape[0]} inputs, got {u.shape[-1]}")
    return _quad(cost.Q, e) + _quad(cost.R, u)


def terminal_cost(cost: CostSpec, x):
    return _quad(cost.S, cost.error(x))


# ---------------------------------------------------------------- configuration

@dataclass
class HorizonWeights:
    critic: list[np.ndarray]
    actor: list[np.ndarray]
    fits: list[tuple[int, str, int, float]] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.critic)

    def copy(self) -> "HorizonWeights":
        return HorizonWeights([w.copy() for w in self.critic], [w.copy() for w in self.actor])


@dataclass(frozen=True)
class LpcConfig:
    critic_basis: BasisSpec
    actor_basis: BasisSpec
    horizon: int = 10
    critic: OcpConfig = OcpConfig(R_d=0.1, max_iters=100, tol=1e-5)
    actor: OcpConfig = OcpConfig(R_d=0.1, max_iters=100, tol=1e-5)
    solver: Literal["ocp", "gd"] = "ocp"
    lr: float = 0.05
    gd_max_iters: int = 100_000
    warm_start: Literal["per_stage", "rerandomize_each_step"] = "per_stage"
    init_range: tuple[float, float] = (-1.0, 1.0)
    actor_objective: Literal["q_squared", "q_mean"] = "q_squared"
    divergence_bound: float = 1e6

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not np.all(np.isfinite(self.init_range)):
            raise ValueError("init_range must be finite")
        if self.solver not in ("ocp", "gd"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.warm_start not in ("per_stage", "rerandomize_each_step"):
            raise ValueError(f"unknown warm_start {self.warm_start!r}")
        if self.actor_objective not in ("q_squared", "q_mean"):
            raise ValueError(f"unknown actor_objective {self.actor_objective!r}")
        if self.critic_basis.kind != "critic" or self.actor_basis.kind != "actor":
            raise ValueError("critic_basis / actor_basis have the wrong kind")

    def with_solver(self, solver: str) -> "LpcConfig":
        return replace(self, solver=solver)


# ---------------------------------------------------------------- losses

def critic_loss(Phi: np.ndarray, targets: np.ndarray) -> LossOracle:
    """Pool-averaged squared residual ``mean (Phi w - t)^2``; constant Hessian."""
    S = Phi.shape[0]
    H = (2.0 / S) * Phi.T @ Phi
    b = (2.0 / S) * Phi.T @ targets

    def value(w):
        r = Phi @ w - targets
        return float(r @ r / S)

    return LossOracle(Phi.shape[1], value, lambda w: H @ w - b, lambda w: H)


def actor_loss(W_c, critic_basis: BasisSpec, actor_basis: BasisSpec, X,
               objective: str = "q_squared") -> LossOracle:
    """Loss of the actor weights through the fitted critic at the pool states.

    ``q_squared``: ``mean Q(x, W.theta(x))^2``;  ``q_mean``: ``mean Q(x, W.theta(x))``.
    Derivatives follow from the chain rule with ``du/dW = theta(x)``.
    """
    Theta = eval_basis(actor_basis, X)
    S = Theta.shape[0]
    W_c = np.asarray(W_c, dtype=float)

    def parts(w, order):
        u = Theta @ w
        q = eval_basis(critic_basis, X, u) @ W_c
        qu = basis_grad_u(critic_basis, X, u) @ W_c if order >= 1 else None
        quu = basis_hess_u(critic_basis, X, u) @ W_c if order >= 2 else None
        return q, qu, quu

    if objective == "q_squared":
        def value(w):
            q, _, _ = parts(w, 0)
            return float(q @ q / S)

        def gradient(w):
            q, qu, _ = parts(w, 1)
            return (2.0 / S) * Theta.T @ (q * qu)

        def hessian(w):
            q, qu, quu = parts(w, 2)
            return (2.0 / S) * (Theta.T * (qu * qu + q * quu)) @ Theta
    elif objective == "q_mean":
        def value(w):
            return float(parts(w, 0)[0].mean())

        def gradient(w):
            return Theta.T @ parts(w, 1)[1] / S

        def hessian(w):
            return (Theta.T * parts(w, 2)[2]) @ Theta / S
    else:
        raise ValueError(f"unknown actor objective {objective!r}")

    return LossOracle(actor_basis.size, value, gradient, hessian)


# ---------------------------------------------------------------- fitting

@dataclass
class GdTrace:
    iterations: int
    final_loss: float
    stop_reason: str


def _minimize(loss: LossOracle, w0, ocp_cfg: OcpConfig, cfg: LpcConfig):
    if cfg.solver == "ocp":
        w, trace = ocp_minimize(loss, w0, ocp_cfg)
        return w, trace
    w, its = gd_minimize(loss, w0, cfg.lr, ocp_cfg.tol, cfg.gd_max_iters)
    val = loss.value(w)
    if not np.isfinite(val):
        raise NonFinite("gradient descent produced a non-finite loss")
    return w, GdTrace(its, val, "tolerance" if its < cfg.gd_max_iters else "max_iters")


def critic_targets(j: int, X, U, Xn, cost: CostSpec, cfg: LpcConfig,
                   W_c_next=None, W_a_next=None) -> np.ndarray:
    """Fitted-Q targets for stage ``j`` over a batch of transitions."""
    U = np.asarray(U, dtype=float)
    base = stage_cost(cost, X, U)
    if j == cfg.horizon - 1:
        return base + terminal_cost(cost, Xn)
    if W_c_next is None or W_a_next is None:
        raise MissingSuccessorWeights(f"stage {j} needs the weights of stage {j + 1}")
    u_next = eval_basis(cfg.actor_basis, Xn) @ W_a_next
    return base + eval_basis(cfg.critic_basis, Xn, u_next) @ W_c_next


def critic_target(j: int, dp: DataPoint, cost: CostSpec, cfg: LpcConfig,
                  W_c_next=None, W_a_next=None) -> float:
    return float(critic_targets(j, dp.x[None], dp.u[None], dp.x_next[None], cost, cfg,
                                W_c_next, W_a_next)[0])


def fit_critic(j: int, pool: DataPool, targets, cfg: LpcConfig, w0=None):
    """Fit ``W_c^j`` to the given per-transition targets."""
    X, U, _ = pool.arrays()
    Phi = eval_basis(cfg.critic_basis, X, U)
    if w0 is None:
        w0 = np.zeros(cfg.critic_basis.size)
    return _minimize(critic_loss(Phi, np.asarray(targets, dtype=float)), w0, cfg.critic, cfg)


def fit_actor(j: int, pool: DataPool, W_c_j, cfg: LpcConfig, w0=None):
    """Fit ``W_a^j`` against the stage-``j`` critic at the pool states."""
    X, _, _ = pool.arrays()
    loss = actor_loss(W_c_j, cfg.critic_basis, cfg.actor_basis, X, cfg.actor_objective)
    if w0 is None:
        w0 = np.zeros(cfg.actor_basis.size)
    return _minimize(loss, w0, cfg.actor, cfg)


def initial_weights(cfg: LpcConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = cfg.init_range
    return (rng.uniform(lo, hi, cfg.critic_basis.size),
            rng.uniform(lo, hi, cfg.actor_basis.size))


def policy(cfg: LpcConfig, W_a, x) -> float:
    return float(eval_basis(cfg.actor_basis, x) @ W_a)


def solve_horizon(x_k, pool: DataPool, cost: CostSpec, cfg: LpcConfig,
                  prev: HorizonWeights | None = None,
                  rng: np.random.Generator | None = None,
                  init: tuple[np.ndarray, np.ndarray] | None = None):
    """Backward pass over the horizon; returns ``(weights, u_k)``.

    Stage ``N_p - 1`` starts from ``prev`` if given, else from ``init`` or a
    uniform draw from ``cfg.init_range``.  Earlier stages start from ``prev``
    or from the freshly fitted stage ``j + 1``.  ``weights.fits`` holds one
    ``(j, network, iterations, final_loss)`` entry per fit.
    """
    if len(pool) == 0:
        raise PoolEmpty("data pool is empty")
    X, U, Xn = pool.arrays()
    N = cfg.horizon
    if prev is None and init is None:
        init = initial_weights(cfg, rng if rng is not None else np.random.default_rng())

    critic = [None] * N
    actor = [None] * N
    fits = []
    for j in range(N - 1, -1, -1):
        if prev is not None:
            wc0, wa0 = prev.critic[j], prev.actor[j]
        elif j == N - 1:
            wc0, wa0 = init
        else:
            wc0, wa0 = critic[j + 1], actor[j + 1]

        if j == N - 1:
            t = critic_targets(j, X, U, Xn, cost, cfg)
        else:
            t = critic_targets(j, X, U, Xn, cost, cfg, critic[j + 1], actor[j + 1])
        critic[j], tr = fit_critic(j, pool, t, cfg, wc0)
        fits.append((j, "critic", tr.iterations, tr.final_loss))

        actor[j], tr = fit_actor(j, pool, critic[j], cfg, wa0)
        fits.append((j, "actor", tr.iterations, tr.final_loss))

    weights = HorizonWeights(critic, actor, fits)
    return weights, policy(cfg, actor[0], np.asarray(x_k, dtype=float))


# ---------------------------------------------------------------- closed loop

@dataclass
class RunLog:
    states: np.ndarray            # (N + 1, n)
    inputs: np.ndarray            # (N,)
    stage_costs: np.ndarray       # (N,)
    weights: list[HorizonWeights]
    fits: list[tuple[int, int, str, int, float]]  # (k, j, network, iterations, final_loss)

    @property
    def total_cost(self) -> float:
        return float(self.stage_costs.sum())

    def horizon_iterations(self) -> np.ndarray:
        """Optimizer iterations summed over all fits of each time step."""
        out = np.zeros(len(self.inputs), dtype=int)
        for k, _, _, its, _ in self.fits:
            out[k] += its
        return out


def lpc_run(plant: Plant, cost: CostSpec, cfg: LpcConfig, N: int, pool0: DataPool, x0,
            rng: np.random.Generator | None = None,
            policy_override: Callable[[np.ndarray], float] | None = None) -> RunLog:
    """Online loop: solve the horizon at ``x_k``, apply ``u_k``, store the
    observed transition in the pool (evicting the oldest), repeat ``N`` times.

    ``policy_override`` bypasses learning and applies a fixed feedback instead.
    Raises ``NonFinite`` when ``||x||_inf`` exceeds ``cfg.divergence_bound``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if len(pool0) == 0:
        raise PoolEmpty("initial data pool is empty")
    rng = rng if rng is not None else np.random.default_rng()
    pool = pool0.copy()
    x = np.asarray(x0, dtype=float).reshape(plant.n)
    states, inputs, costs, weights, fits = [x], [], [], [], []
    prev = None
    for k in range(N):
        if policy_override is not None:
            u = float(policy_override(x))
        else:
            hw, u = solve_horizon(x, pool, cost, cfg, prev=prev, rng=rng)
            weights.append(hw)
            fits.extend((k, j, net, its, loss) for j, net, its, loss in hw.fits)
            prev = hw if cfg.warm_start == "per_stage" else None
        x_next = plant.step(x, [u], k)
        if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next)) > cfg.divergence_bound:
            raise NonFinite(f"closed loop diverged at step {k}: |x| > {cfg.divergence_bound:g}")
        costs.append(float(stage_cost(cost, x, [u])))
        inputs.append(u)
        pool.add(x, [u], x_next)
        x = x_next
        states.append(x)
    return RunLog(np.array(states), np.array(inputs), np.array(costs), weights, fits)

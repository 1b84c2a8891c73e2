"""Deterministic discrete-time plants and the sinusoidal reference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

LINEAR_A = np.array([[0.6, 2.0], [1.5, 0.85]])
LINEAR_B = np.array([[0.0], [0.5]])
REFERENCE_RATE = 0.1


@dataclass(frozen=True)
class Plant:
    """Base plant: ``x_{k+1} = step(x_k, u_k, k)``."""

    name: str = field(init=False, default="")
    n: int = field(init=False, default=2)
    m: int = field(init=False, default=1)

    def step(self, x, u, k: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        if x.size != self.n or u.size != self.m:
            raise DimensionMismatch(
                f"{self.name}: expected x in R^{self.n}, u in R^{self.m}, "
                f"got {x.size} and {u.size}"
            )
        return self._step(x, u, k)

    def step_batch(self, X, U) -> np.ndarray:
        return np.array([self.step(x, u) for x, u in zip(X, U)])

    def _step(self, x, u, k):
        raise NotImplementedError


@dataclass(frozen=True)
class LinearPlant(Plant):
    A: np.ndarray = field(default_factory=lambda: LINEAR_A.copy())
    B: np.ndarray = field(default_factory=lambda: LINEAR_B.copy())

    def __post_init__(self):
        object.__setattr__(self, "name", "linear")
        object.__setattr__(self, "n", self.A.shape[0])
        object.__setattr__(self, "m", self.B.shape[1])

    def _step(self, x, u, k):
        return self.A @ x + self.B @ u


@dataclass(frozen=True)
class PolyNonlinearPlant(Plant):
    def __post_init__(self):
        object.__setattr__(self, "name", "poly")

    def _step(self, x, u, k):
        x1, x2 = x
        u = u[0]
        return np.array([
            np.sin(x1) + 0.1 * x2 + 0.1 * x1**2,
            -1.2 * x1 + 0.8 * x2 + 0.1 * np.sin(u + x1) + 0.2 * x2 * u,
        ])


@dataclass(frozen=True)
class VanDerPolPlant(Plant):
    """Euler map of the forced oscillator ``x1' = x2, x2' = (1 - x1^2) x2 - x1 + 5u``.

    At ``dt = 0.1`` this is the printed map, input gain ``0.5 = 5 dt``.
    """

    dt: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "name", "vdp")

    def _step(self, x, u, k):
        x1, x2 = x
        dt = self.dt
        return np.array([
            x1 + dt * x2,
            x2 + dt * (1.0 - x1**2) * x2 - dt * x1 + 5.0 * dt * u[0],
        ])


def reference_at(k) -> np.ndarray:
    """``r_k = (sin(0.1 k), cos(0.1 k))``."""
    a = REFERENCE_RATE * np.asarray(k, dtype=float)
    return np.stack([np.sin(a), np.cos(a)], axis=-1)


_ROT = np.array([
    [np.cos(REFERENCE_RATE), np.sin(REFERENCE_RATE)],
    [-np.sin(REFERENCE_RATE), np.cos(REFERENCE_RATE)],
])


def reference_step(r) -> np.ndarray:
    """Advance a reference sample one step: ``reference_step(reference_at(k)) == reference_at(k + 1)``.

    The reference is a rotation, so the augmented system stays time-invariant
    and off-trajectory reference samples (seeded data) can be stepped too.
    """
    return _ROT @ np.asarray(r, dtype=float)


def tracking_error(X) -> np.ndarray:
    """``e = (x1 - r1, x2 - r2)`` for augmented states ``(x1, x2, r1, r2)``."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != 4:
        raise DimensionMismatch(f"augmented state needs 4 entries, got {X.shape[-1]}")
    return X[..., :2] - X[..., 2:]


@dataclass(frozen=True)
class AugmentedTrackingPlant(Plant):
    inner: Plant = field(default_factory=VanDerPolPlant)

    def __post_init__(self):
        object.__setattr__(self, "name", f"{self.inner.name}-tracking")
        object.__setattr__(self, "n", self.inner.n + 2)
        object.__setattr__(self, "m", self.inner.m)

    def _step(self, X, u, k):
        x = self.inner.step(X[: self.inner.n], u, k)
        return np.concatenate([x, reference_step(X[self.inner.n:])])


def make_plant(name: str, dt: float = 0.1) -> Plant:
    if name == "linear":
        return LinearPlant()
    if name == "poly":
        return PolyNonlinearPlant()
    if name == "vdp":
        return VanDerPolPlant(dt)
    if name == "vdp-tracking":
        return AugmentedTrackingPlant(VanDerPolPlant(dt))
    raise KeyError(name)


PLANT_NAMES = ("linear", "poly", "vdp", "vdp-tracking")

"""Monomial feature bases for the critic ``phi(x, u)`` and the actor ``theta(x)``.

A basis is an ordered list of exponent tuples.  Critic exponents index the
concatenated vector ``(x, u)``; actor exponents index ``x`` alone.  There is
never a constant monomial, so every feature vanishes at the origin.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnknownPreset

# Exponents over (x1, x2, u) for critic presets and over (x1, x2) for actor presets.
_PRESETS = {
    "lq6": ("critic", [(2, 0, 0), (0, 2, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1), (0, 0, 2)]),
    "cubic13": (
        "critic",
        [
            (2, 0, 0), (0, 2, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1), (0, 0, 2),
            (3, 0, 0), (0, 3, 0), (2, 1, 0), (1, 2, 0), (2, 0, 1), (0, 2, 1), (1, 1, 1),
        ],
    ),
    "lin2": ("actor", [(1, 0), (0, 1)]),
    "quad5": ("actor", [(1, 0), (0, 1), (2, 0), (0, 2), (1, 1)]),
}
PRESET_NAMES = tuple(_PRESETS)


@dataclass(frozen=True)
class BasisSpec:
    name: str
    kind: str
    n: int
    m: int
    exponents: np.ndarray  # (features, variables), integer

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    @property
    def n_vars(self) -> int:
        return self.exponents.shape[1]

    @property
    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)

    def monomials(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.exponents]


def graded_monomials(n_vars: int, degree: int) -> list[tuple[int, ...]]:
    """All monomials of total degree 1..degree, graded-lexicographic order."""
    out = []
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_vars), d):
            e = [0] * n_vars
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    return out


def build_basis(preset_or_degree, n: int, m: int, kind: str = "critic") -> BasisSpec:
    """Build a named preset (``lq6``, ``cubic13``, ``lin2``, ``quad5``) or a
    generated basis.  Generated bases are requested by an integer degree or by
    a name like ``poly3``."""
    if kind not in ("critic", "actor"):
        raise ValueError(f"kind must be 'critic' or 'actor', got {kind!r}")
    if n < 1 or m < 0:
        raise DimensionMismatch(f"need n >= 1 and m >= 0, got n={n}, m={m}")

    degree = None
    if isinstance(preset_or_degree, (int, np.integer)):
        degree = int(preset_or_degree)
    else:
        match = re.fullmatch(r"poly(\d+)", str(preset_or_degree))
        if match:
            degree = int(match.group(1))

    if degree is not None:
        if not 1 <= degree <= 3:
            raise UnknownPreset(f"generated bases support degree 1..3, got {degree}")
        n_vars = n + m if kind == "critic" else n
        mons = graded_monomials(n_vars, degree)
        name = f"poly{degree}"
    else:
        if preset_or_degree not in _PRESETS:
            raise UnknownPreset(f"unknown basis preset {preset_or_degree!r}")
        preset_kind, mons = _PRESETS[preset_or_degree]
        if preset_kind != kind:
            raise UnknownPreset(f"preset {preset_or_degree!r} is a {preset_kind} basis")
        if n != 2 or m != 1:
            raise DimensionMismatch(f"preset {preset_or_degree!r} requires n=2, m=1")
        name = preset_or_degree

    return BasisSpec(name, kind, n, m, np.array(mons, dtype=int).reshape(len(mons), -1))


def _stack(spec: BasisSpec, x, u):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise DimensionMismatch(f"state has {x.shape[-1]} entries, basis expects {spec.n}")
    if spec.kind == "actor":
        return x
    u = np.asarray(u, dtype=float)
    if u.ndim == x.ndim - 1:
        u = u[..., None]
    if u.shape[-1] != spec.m:
        raise DimensionMismatch(f"input has {u.shape[-1]} entries, basis expects {spec.m}")
    return np.concatenate([x, u], axis=-1)


def eval_basis(spec: BasisSpec, x, u=None) -> np.ndarray:
    """Feature vector(s).  ``x`` may be a single state or a batch ``(S, n)``;
    for a batch, ``u`` is ``(S,)`` or ``(S, m)``."""
    z = _stack(spec, x, u)
    return np.prod(z[..., None, :] ** spec.exponents, axis=-1)


def _u_derivative(spec: BasisSpec, x, u, order: int) -> np.ndarray:
    if spec.kind == "actor":
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (spec.size,))
    if spec.m != 1:
        raise DimensionMismatch("analytic input derivatives need a scalar input")
    z = _stack(spec, x, u)
    e = spec.exponents.copy()
    p = e[:, -1]
    coef = p.astype(float)
    if order == 2:
        coef = coef * (p - 1)
    e[:, -1] = np.maximum(p - order, 0)
    return coef * np.prod(z[..., None, :] ** e, axis=-1)


def basis_grad_u(spec: BasisSpec, x, u) -> np.ndarray:
    """``d phi / d u`` per feature, scalar input only."""
    return _u_derivative(spec, x, u, 1)


def basis_hess_u(spec: BasisSpec, x, u) -> np.ndarray:
    """``d^2 phi / d u^2`` per feature, scalar input only."""
    return _u_derivative(spec, x, u, 2)

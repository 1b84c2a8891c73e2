"""Flat ``key = value`` experiment configuration.

One assignment per line, ``#`` starts a comment.  Values are numbers, bare
words, comma-separated vectors (``x0 = 1, -0.5``) or JSON-style nested lists
for matrices and boxes (``Q = [[5, 0], [0, 5]]``).  A scalar cost weight means
that scalar times the identity.  Every key except ``plant`` has a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, UnknownPreset
from .features import build_basis
from .ocp import MODES, REFRESH, OcpConfig
from .plants import PLANT_NAMES, Plant, make_plant, reference_at, tracking_error
from .solver import CostSpec, LpcConfig

PLANT_DEFAULTS = {
    "linear": dict(x0=(1.0, -0.5), Q=5.0, S=5.0, critic_basis="lq6", actor_basis="lin2",
                   state_box=((-1.0, 1.0),), input_box=((-3.0, 3.0),)),
    "poly": dict(x0=(0.9, -0.7), Q=2.0, S=2.0, critic_basis="cubic13", actor_basis="quad5",
                 state_box=((-1.0, 1.0),), input_box=((-1.0, 1.0),)),
    "vdp": dict(x0=(2.0, -1.0), Q=10.0, S=10.0, critic_basis="poly3", actor_basis="poly2",
                state_box=((-2.5, 2.5),), input_box=((-2.0, 2.0),)),
    "vdp-tracking": dict(x0=(2.0, -1.0), Q=10.0, S=10.0, critic_basis="poly3", actor_basis="poly2",
                         state_box=((-2.5, 2.5), (-2.5, 2.5), (-1.0, 1.0), (-1.0, 1.0)),
                         input_box=((-2.0, 2.0),)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    plant: str
    x0: tuple | None = None
    Q: object = None
    R: object = 1.0
    S: object = None
    horizon: int = 10
    steps: int = 30
    pool_size: int = 30
    solver: str = "ocp"
    R_dc: float = 0.1
    R_da: float = 0.1
    lr: float = 0.05
    gamma: float = 1e-5
    max_iters: int = 100
    gd_max_iters: int = 100_000
    ocp_mode: str = "inner_loop"
    hessian_refresh: str = "frozen"
    critic_basis: str | None = None
    actor_basis: str | None = None
    warm_start: str = "per_stage"
    actor_objective: str = "q_squared"
    seed: int = 0
    state_box: tuple | None = None
    input_box: tuple | None = None
    divergence_bound: float = 1e6
    init_range: tuple = (-1.0, 1.0)
    dt: float = 0.1

    def __post_init__(self):
        if self.plant not in PLANT_NAMES:
            raise ConfigError("plant", f"unknown plant {self.plant!r}; expected one of {PLANT_NAMES}")
        for key, val in PLANT_DEFAULTS[self.plant].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, val)
        for key in ("horizon", "steps", "pool_size", "max_iters", "gd_max_iters"):
            if getattr(self, key) < 1:
                raise ConfigError(key, f"{key} must be a positive integer")
        for key in ("R_dc", "R_da", "lr", "gamma", "divergence_bound", "dt"):
            if not getattr(self, key) > 0:
                raise ConfigError(key, f"{key} must be positive")
        if self.seed < 0:
            raise ConfigError("seed", "seed must be >= 0")
        choices = {
            "solver": ("ocp", "gd"),
            "ocp_mode": MODES,
            "hessian_refresh": REFRESH,
            "warm_start": ("per_stage", "rerandomize_each_step"),
            "actor_objective": ("q_squared", "q_mean"),
        }
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(key, f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        lo, hi = self.init_range
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ConfigError("init_range", "init_range must be a finite interval lo, hi with lo < hi")
        if len(self.x0) != 2:
            raise ConfigError("x0", "x0 must have two entries")
        self._check_boxes()
        # resolve derived objects once so that bad values surface as config errors
        self.cost()
        self.lpc()

    def _check_boxes(self):
        for key, dim in (("state_box", self.make_plant().n), ("input_box", 1)):
            box = np.asarray(getattr(self, key), dtype=float)
            if box.ndim == 1:
                box = box[None]
            if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] not in (1, dim):
                raise ConfigError(key, f"{key} must be one interval or {dim} intervals [lo, hi]")
            if not (np.all(np.isfinite(box)) and np.all(box[:, 0] < box[:, 1])):
                raise ConfigError(key, f"{key} intervals must be finite with lo < hi")

    @property
    def tracking(self) -> bool:
        return self.plant == "vdp-tracking"

    def make_plant(self) -> Plant:
        return make_plant(self.plant, self.dt)

    def initial_state(self) -> np.ndarray:
        x = np.asarray(self.x0, dtype=float)
        if self.tracking:
            return np.concatenate([x, reference_at(0)])
        return x

    def box(self, key: str) -> np.ndarray:
        box = np.asarray(getattr(self, key), dtype=float)
        return box[None] if box.ndim == 1 else box

    def cost(self) -> CostSpec:
        mats = {}
        for key, dim in (("Q", 2), ("R", 1), ("S", 2)):
            M = np.asarray(getattr(self, key), dtype=float)
            M = float(M) * np.eye(dim) if M.ndim == 0 else np.atleast_2d(M)
            if M.shape != (dim, dim):
                raise ConfigError(key, f"{key} must be a scalar or a {dim}x{dim} matrix")
            mats[key] = M
        try:
            return CostSpec(**mats, error_map=tracking_error if self.tracking else None)
        except ValueError as exc:
            key = str(exc).split()[0]
            raise ConfigError(key if key in mats else "Q", str(exc)) from None

    def lpc(self) -> LpcConfig:
        n = self.make_plant().n
        bases = {}
        for key, kind in (("critic_basis", "critic"), ("actor_basis", "actor")):
            try:
                bases[key] = build_basis(getattr(self, key), n, 1, kind)
            except (UnknownPreset, ValueError) as exc:
                raise ConfigError(key, str(exc)) from None
        ocp = dict(max_iters=self.max_iters, tol=self.gamma, mode=self.ocp_mode,
                   hessian_refresh=self.hessian_refresh)
        return LpcConfig(
            critic_basis=bases["critic_basis"],
            actor_basis=bases["actor_basis"],
            horizon=self.horizon,
            critic=OcpConfig(R_d=self.R_dc, **ocp),
            actor=OcpConfig(R_d=self.R_da, **ocp),
            solver=self.solver,
            lr=self.lr,
            gd_max_iters=self.gd_max_iters,
            warm_start=self.warm_start,
            init_range=tuple(self.init_range),
            actor_objective=self.actor_objective,
            divergence_bound=self.divergence_bound,
        )

    def with_values(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


_INT_KEYS = {"horizon", "steps", "pool_size", "max_iters", "gd_max_iters", "seed"}
_FLOAT_KEYS = {"R_dc", "R_da", "lr", "gamma", "divergence_bound", "dt"}
_WORD_KEYS = {"plant", "solver", "ocp_mode", "hessian_refresh", "critic_basis", "actor_basis",
              "warm_start", "actor_objective"}
_ARRAY_KEYS = {"x0", "Q", "R", "S", "state_box", "input_box", "init_range"}
KNOWN_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def _parse_array(key: str, text: str):
    src = text if text.lstrip().startswith("[") else f"[{text}]"
    try:
        val = json.loads(src)
    except json.JSONDecodeError:
        raise ConfigError(key, f"cannot parse {text!r} as a number list") from None
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse {text!r} as a number list") from None
    if arr.size == 0:
        raise ConfigError(key, f"empty value for {key!r}")
    if key in ("Q", "R", "S") and arr.size == 1 and not text.lstrip().startswith("["):
        return float(arr.reshape(-1)[0])
    return arr.tolist()


def _to_tuple(v):
    return tuple(_to_tuple(x) for x in v) if isinstance(v, list) else v


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; raises ``ConfigError`` naming the offending key."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(key, f"unknown key {key!r}")
        if key in values:
            raise ConfigError(key, f"duplicate key {key!r}")
        if not val:
            raise ConfigError(key, f"empty value for {key!r}")
        if key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ConfigError(key, f"{key} must be an integer, got {val!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigError(key, f"{key} must be a number, got {val!r}") from None
        elif key in _WORD_KEYS:
            values[key] = val
        else:
            values[key] = _to_tuple(_parse_array(key, val))
    if "plant" not in values:
        raise ConfigError("plant", "missing required key 'plant'")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    """Read and parse a config file; ``OSError`` propagates for I/O failures."""
    return parse_config(Path(path).read_text())

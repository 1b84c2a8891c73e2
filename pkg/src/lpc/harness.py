"""Config-driven experiments writing CSV artifacts.

All randomness comes from ``numpy.random.default_rng`` (PCG64).  A run is
seeded with ``default_rng(seed)``; benchmark trial ``t`` with
``default_rng([seed, t])``.  Numbers are written with 17 significant digits so
repeated runs produce byte-identical files.  Everything is computed before
anything is written: a failed run leaves no files behind.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import PidGains, pid_step, riccati_recursion
from .config import ExperimentConfig
from .errors import ConfigError
from .plants import LINEAR_A, LINEAR_B, tracking_error
from .solver import RunLog, initial_weights, lpc_run, seed_pool, solve_horizon


def fmt(v) -> str:
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def csv_text(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    lines += [",".join("" if v is None else fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_files(out_dir, files: dict[str, str]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths


def _pool(cfg: ExperimentConfig, rng):
    return seed_pool(cfg.make_plant(), cfg.pool_size, cfg.box("state_box"), cfg.box("input_box"), rng)


def simulate(cfg: ExperimentConfig) -> RunLog:
    """``seed_pool`` then ``lpc_run`` with a single generator seeded by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    pool = _pool(cfg, rng)
    return lpc_run(cfg.make_plant(), cfg.cost(), cfg.lpc(), cfg.steps, pool, cfg.initial_state(), rng=rng)


# ---------------------------------------------------------------- CSV tables

def trajectory_table(log: RunLog, tracking: bool = False) -> str:
    header = ["k", "x1", "x2", "u", "stage_cost"]
    if tracking:
        header += ["r1", "r2", "e1", "e2"]
    rows = []
    for k, x in enumerate(log.states):
        last = k == len(log.inputs)
        row = [k, x[0], x[1], None if last else log.inputs[k], None if last else log.stage_costs[k]]
        if tracking:
            row += [x[2], x[3], *tracking_error(x)]
        rows.append(row)
    return csv_text(header, rows)


def weights_table(log: RunLog) -> str:
    nc = len(log.weights[0].critic[0])
    na = len(log.weights[0].actor[0])
    header = ["k"] + [f"wc{i}" for i in range(nc)] + [f"wa{i}" for i in range(na)]
    rows = [[k, *hw.critic[0], *hw.actor[0]] for k, hw in enumerate(log.weights)]
    return csv_text(header, rows)


def iterations_table(log: RunLog) -> str:
    header = ["k", "j", "network", "iterations", "final_loss"]
    return csv_text(header, [list(f) for f in log.fits])


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict[str, Path]:
    """Closed-loop run; writes trajectory.csv, weights.csv, iterations.csv."""
    log = simulate(cfg)
    files = {
        "trajectory.csv": trajectory_table(log, cfg.tracking),
        "weights.csv": weights_table(log),
        "iterations.csv": iterations_table(log),
    }
    return dict(zip(files, write_files(out_dir, files)))


# ---------------------------------------------------------------- solver bench

@dataclass
class BenchRow:
    system: str
    solver: str
    mean_runtime_s: float
    mean_iterations: float


def bench_rows(cfg: ExperimentConfig, trials: int) -> list[BenchRow]:
    """Cold-start horizon solves at ``x0``, one fresh pool per trial.

    Both solvers see the same pool and the same initial weights in a trial.
    Iterations are summed over all ``(j, network)`` fits of the horizon and
    averaged over trials.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cost, lpc = cfg.cost(), cfg.lpc()
    x0 = cfg.initial_state()
    totals = {"ocp": ([], []), "gd": ([], [])}
    for t in range(trials):
        rng = np.random.default_rng([cfg.seed, t])
        pool = _pool(cfg, rng)
        init = initial_weights(lpc, rng)
        for solver, (times, its) in totals.items():
            t0 = time.perf_counter()
            hw, _ = solve_horizon(x0, pool, cost, lpc.with_solver(solver), init=init)
            times.append(time.perf_counter() - t0)
            its.append(sum(f[2] for f in hw.fits))
    return [BenchRow(cfg.plant, s, float(np.mean(tm)), float(np.mean(it)))
            for s, (tm, it) in totals.items()]


def bench_table(rows: list[BenchRow]) -> str:
    return csv_text(["system", "solver", "mean_runtime_s", "mean_iterations"],
                    [[r.system, r.solver, r.mean_runtime_s, r.mean_iterations] for r in rows])


def bench_solvers(cfg: ExperimentConfig, trials: int, out_dir) -> Path:
    rows = bench_rows(cfg, trials)
    return write_files(out_dir, {"bench.csv": bench_table(rows)})[0]


# ---------------------------------------------------------------- tracking

@dataclass
class TrackingResult:
    lpc: RunLog
    pid_states: np.ndarray   # (N + 1, 4) augmented states
    pid_inputs: np.ndarray   # (N,)

    def errors(self, which: str) -> np.ndarray:
        X = self.lpc.states if which == "lpc" else self.pid_states
        return tracking_error(X)


def pid_run(cfg: ExperimentConfig, gains: PidGains | None = None):
    plant = cfg.make_plant()
    gains = gains or PidGains()
    x = cfg.initial_state()
    states, inputs = [x], []
    for k in range(cfg.steps):
        u = pid_step(gains, tracking_error(x))
        x = plant.step(x, [u], k)
        states.append(x)
        inputs.append(u)
    return np.array(states), np.array(inputs)


def compare_tracking_result(cfg: ExperimentConfig) -> TrackingResult:
    if not cfg.tracking:
        raise ConfigError("plant", "tracking comparison needs plant = vdp-tracking")
    log = simulate(cfg)
    Xp, Up = pid_run(cfg)
    return TrackingResult(log, Xp, Up)


def tracking_table(res: TrackingResult) -> str:
    header = ["k", "r1", "r2", "x1_lpc", "x2_lpc", "u_lpc", "x1_pid", "x2_pid", "u_pid",
              "e1_lpc", "e2_lpc", "e1_pid", "e2_pid"]
    El, Ep = res.errors("lpc"), res.errors("pid")
    rows = []
    n = len(res.lpc.inputs)
    for k in range(n + 1):
        xl, xp = res.lpc.states[k], res.pid_states[k]
        ul = res.lpc.inputs[k] if k < n else None
        up = res.pid_inputs[k] if k < n else None
        rows.append([k, xl[2], xl[3], xl[0], xl[1], ul, xp[0], xp[1], up, *El[k], *Ep[k]])
    return csv_text(header, rows)


def compare_tracking(cfg: ExperimentConfig, out_dir) -> Path:
    res = compare_tracking_result(cfg)
    return write_files(out_dir, {"tracking.csv": tracking_table(res)})[0]


# ---------------------------------------------------------------- Riccati

def riccati_for(cfg: ExperimentConfig):
    """Horizon-``N_p`` LQ solution ``(P_0, K_0)`` for the linear benchmark and the configured cost."""
    if cfg.plant != "linear":
        raise ConfigError("plant", "riccati needs plant = linear")
    c = cfg.cost()
    sol = riccati_recursion(LINEAR_A, LINEAR_B, c.Q, c.R, c.S, cfg.horizon)
    return sol.P[0], sol.K[0]

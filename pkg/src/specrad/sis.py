"""SIS epidemic dynamics on a weighted network.

Each node carries an infection probability s_i(t) that evolves as

    ds/dt = -delta s + beta diag(1 - s) A s.

The infection dies out when beta / delta < 1 / rho(A).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .eigen import PerronPair
from .graph import SparseAdjacency

DIED_OUT = 1e-6
_BOUNDS_SLACK = 1e-6


class IntegrationInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class SisParams:
    beta: float
    delta: float
    s0: np.ndarray | float
    t_end: float
    dt: float | None = None

    def __post_init__(self):
        if not self.beta > 0 or not self.delta > 0:
            raise ValueError("beta and delta must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        s0 = np.asarray(self.s0, dtype=float)
        if np.any(s0 < 0) or np.any(s0 > 1):
            raise ValueError("initial states must lie in [0, 1]")
        if self.dt is not None and not 0 < self.dt <= self.t_end:
            raise ValueError("dt must lie in (0, t_end]")


@dataclass(frozen=True)
class SisTrajectory:
    times: np.ndarray
    states: np.ndarray
    max_final: float
    died_out: bool
    dt: float

    def summary(self) -> dict:
        return {
            "t_end": float(self.times[-1]),
            "dt": self.dt,
            "steps": int(round(float(self.times[-1]) / self.dt)),
            "max_final": self.max_final,
            "died_out": self.died_out,
        }


def default_dt(A: SparseAdjacency, beta: float, delta: float) -> float:
    """0.01 over the fastest rate in the system."""
    return 0.01 / max(beta * A.inf_norm(), delta)


def simulate_sis(A: SparseAdjacency, p: SisParams, record_every: int = 1) -> SisTrajectory:
    """Classical fixed-step RK4.

    The step is shrunk slightly if needed so that a whole number of steps
    ends exactly at ``t_end``.  States are kept every ``record_every`` steps
    and always at the final time.
    """
    if record_every < 1:
        raise ValueError("record_every must be at least 1")
    n = A.n
    s = np.broadcast_to(np.asarray(p.s0, dtype=float), (n,)).copy()
    dt = p.dt if p.dt is not None else default_dt(A, p.beta, p.delta)
    steps = max(1, math.ceil(p.t_end / dt - 1e-9))
    dt = p.t_end / steps
    M = A.to_csr()
    beta, delta = p.beta, p.delta

    def rhs(x: np.ndarray) -> np.ndarray:
        return -delta * x + beta * (1.0 - x) * M.dot(x)

    times, states = [0.0], [s.copy()]
    for step in range(1, steps + 1):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * dt * k1)
        k3 = rhs(s + 0.5 * dt * k2)
        k4 = rhs(s + dt * k3)
        s = s + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(s)) or s.min() < -_BOUNDS_SLACK or s.max() > 1 + _BOUNDS_SLACK:
            raise IntegrationInstabilityError(
                f"state left [0, 1] at t = {step * dt:.6g}; try a smaller dt (current {dt:.3g})"
            )
        if step % record_every == 0 or step == steps:
            times.append(step * dt)
            states.append(s.copy())
    max_final = float(np.max(np.abs(s))) if n else 0.0
    return SisTrajectory(np.array(times), np.array(states), max_final, max_final < DIED_OUT, dt)


def epidemic_threshold(pair: PerronPair) -> float:
    """1 / rho; infinite when rho is zero."""
    return math.inf if pair.rho == 0 else 1.0 / pair.rho


@dataclass(frozen=True)
class SweepPoint:
    beta: float
    ratio: float
    max_final: float
    died_out: bool


def threshold_sweep(
    A: SparseAdjacency,
    betas,
    delta: float,
    s0,
    t_end: float,
    dt: float | None = None,
    threads: int = 1,
) -> list[SweepPoint]:
    """Final infection level for each beta, in the order given."""

    def run(beta: float) -> SweepPoint:
        traj = simulate_sis(A, SisParams(beta, delta, s0, t_end, dt), record_every=10**9)
        return SweepPoint(beta, beta / delta, traj.max_final, traj.died_out)

    betas = [float(b) for b in betas]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, betas))
    return [run(b) for b in betas]


def write_trajectory_csv(traj: SisTrajectory, dest, fmt=repr) -> None:
    """Columns t, s_1, ..., s_n."""
    w = csv.writer(dest, lineterminator="\n")
    n = traj.states.shape[1]
    w.writerow(["t"] + [f"s_{i}" for i in range(1, n + 1)])
    for t, s in zip(traj.times, traj.states):
        w.writerow([fmt(float(t))] + [fmt(float(x)) for x in s])

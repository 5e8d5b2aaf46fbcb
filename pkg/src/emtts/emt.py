"""Backward-Euler (EMT) time stepping of a linear DAE."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import DaeSystem
from .errors import SingularH, SingularMatrix
from .linalg import LUFactor


def stepped_matrix(dae: DaeSystem, dt: float) -> np.ndarray:
    """``H`` of ``H w^{n+1} = Theta w^n + f``.

    Differential rows hold ``M + dt K``, algebraic rows keep ``K`` unscaled, so
    changing ``dt`` only touches the differential rows.
    """
    d = dae.differential_rows
    H = dae.stiffness.copy()
    H[d] = dae.mass[d] + dt * dae.stiffness[d]
    return H


def theta_matrix(dae: DaeSystem) -> np.ndarray:
    d = dae.differential_rows
    T = np.zeros_like(dae.mass)
    T[d] = dae.mass[d]
    return T


def forcing_scale(dae: DaeSystem, dt: float) -> np.ndarray:
    """Row weights turning ``g(t)`` into the right-hand side forcing."""
    return np.where(dae.differential_rows, dt, 1.0)


@dataclass(frozen=True, eq=False)
class SteppedSystem:
    dae: DaeSystem
    dt: float
    H: np.ndarray
    Theta: np.ndarray
    _lu: LUFactor

    @property
    def names(self):
        return self.dae.names

    @property
    def n(self) -> int:
        return self.dae.n

    def forcing(self, t: float) -> np.ndarray:
        return forcing_scale(self.dae, self.dt) * self.dae.forcing(t)

    def rhs(self, w_prev, t_next: float) -> np.ndarray:
        return self.Theta @ w_prev + self.forcing(t_next)

    def solve(self, rhs) -> np.ndarray:
        return self._lu.solve(rhs)


def build_stepped(dae: DaeSystem, dt: float) -> SteppedSystem:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    H = stepped_matrix(dae, dt)
    try:
        lu = LUFactor(H)
    except SingularMatrix as exc:
        raise SingularH(f"H(dt={dt:g}) is singular: {exc}") from exc
    H.flags.writeable = False
    T = theta_matrix(dae)
    T.flags.writeable = False
    return SteppedSystem(dae, float(dt), H, T, lu)


def step(sys: SteppedSystem, w_prev, t_next: float) -> np.ndarray:
    w_prev = np.asarray(w_prev, dtype=float)
    if w_prev.shape != (sys.n,):
        raise ValueError(f"state has shape {w_prev.shape}, expected ({sys.n},)")
    return sys.solve(sys.rhs(w_prev, t_next))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, n_vars)
    names: tuple[str, ...]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.states[:, self.names.index(name)]

    def to_csv(self, path) -> None:
        write_trajectory_csv(path, self.times, self.states, self.names)


def n_steps(t0: float, t1: float, dt: float) -> int:
    # guard against 0.1/1e-4 = 1000.0000000000001
    return int(math.ceil((t1 - t0) / dt - 1e-9))


def integrate(sys: SteppedSystem, t0: float, t1: float, w0=None) -> Trajectory:
    if not t1 > t0:
        raise ValueError("t1 must be greater than t0")
    w = sys.dae.x0.copy() if w0 is None else np.array(w0, dtype=float)
    N = n_steps(t0, t1, sys.dt)
    times = t0 + sys.dt * np.arange(N + 1)
    states = np.empty((N + 1, sys.n))
    states[0] = w
    for k in range(1, N + 1):
        w = step(sys, w, times[k])
        states[k] = w
    return Trajectory(times, states, sys.names)


def write_trajectory_csv(path, times, states, names) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", *names])
        for t, row in zip(times, states):
            wr.writerow([f"{t:.17g}", *(f"{v:.17g}" for v in row)])


def read_trajectory_csv(path) -> Trajectory:
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        data = np.array([[float(v) for v in row] for row in rd])
    return Trajectory(data[:, 0], data[:, 1:], tuple(header[1:]))

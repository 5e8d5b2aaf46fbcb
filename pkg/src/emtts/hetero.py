"""Heterogeneous EMT / TS Schwarz coupling.

One subdomain is integrated with small EMT steps ``dt``, the other with
phasor (TS) steps ``dT = m * dt``.  Each macro step gathers the ``m`` EMT
steps into one block lower-bidiagonal system and iterates the exchange

* TS  <- harmonics of one trailing period of EMT interface samples,
* EMT <- TS interface phasors recombined at the small-step instants,

until the numeric error operator of the exchanged values is known; Aitken
then jumps to the fixed point.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import DaeSystem
from .emt import Trajectory, build_stepped, integrate, n_steps, theta_matrix
from .errors import ConfigError, RankDeficientTrace, RankDeficientWarning, SingularMatrix, SingularSubdomain
from .linalg import LUFactor, dft_harmonics
from .partition import DEFAULT_SPLIT, circuit_partition
from .schwarz import ADDITIVE, MULTIPLICATIVE, SchwarzTrace, aitken_accelerate, normalize_mode, numeric_error_operator, write_convergence_csv
from .ts import HarmonicSet, PhasorState, build_ts, reconstruct, write_phasors_csv


@dataclass(frozen=True)
class HeteroConfig:
    dt: float = 2e-4
    m: int = 100
    # fundamental only: the DC mode adds a slow real error mode (see README)
    harmonics: tuple = (1,)
    # multiplicative: additive exchange has +-lambda eigenvalue pairs, so its
    # iterate errors alternate instead of decaying log-linearly
    mode: str = MULTIPLICATIVE
    n_iterates: int = 9
    # subdomain of the circuit split run with EMT; the other one runs TS
    emt_side: int = 2
    overlap: int = 0
    warmup: str = "zero"
    accelerate: bool = True
    stagnation_tol: float = 1e-13

    def __post_init__(self):
        object.__setattr__(self, "mode", normalize_mode(self.mode))
        object.__setattr__(self, "harmonics", tuple(int(k) for k in self.harmonics))
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m must be a positive integer, got {self.m}")
        if self.n_iterates < 3:
            raise ConfigError("n_iterates must be >= 3 to build a numeric operator")
        if self.emt_side not in (1, 2):
            raise ConfigError("emt_side must be 1 or 2")
        if self.warmup not in ("zero", "monodomain"):
            raise ConfigError(f"unknown warmup {self.warmup!r}")

    @property
    def dT(self) -> float:
        return self.m * self.dt

    def history_samples(self, omega0: float) -> int:
        period = 2.0 * np.pi / omega0
        n = period / self.dt
        if abs(n - round(n)) > 1e-6:
            raise ConfigError(f"dt={self.dt:g} does not divide the period {period:g}")
        return int(round(n))


# --- transfer operators -------------------------------------------------------

def ts_to_emt(p: PhasorState, times) -> np.ndarray:
    """Interface samples ``(len(times), n)`` recombined from phasors."""
    return reconstruct(p, np.asarray(times, dtype=float))


def emt_to_ts(history, hs: HarmonicSet, t_first: float = 0.0, dt: float | None = None) -> PhasorState:
    """Phasors of one period of samples ``history`` (time along axis 0).

    ``t_first`` is the time of ``history[0]``; with ``dt`` given the window
    length is checked against the fundamental period.
    """
    h = np.asarray(history, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if dt is not None and abs(h.shape[0] * dt - hs.period) > 1e-9 * hs.period:
        raise ValueError(f"history spans {h.shape[0] * dt:g} s, expected one period {hs.period:g} s")
    c = dft_harmonics(h, hs.harmonics, t0=t_first, omega0=hs.omega0)
    return PhasorState(hs, c)


# --- gathered EMT system ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GatheredEmtSystem:
    """The ``m`` EMT steps of one macro step stacked into one system.

    ``H w^{n+1} = Theta w^n + E_theta s^n + E_h s^{n+1} + F^{n+1}`` for
    ``n = 0..m-1``, with ``w^0`` given and ``s^n`` the external samples.
    """

    H: np.ndarray
    Theta: np.ndarray
    E_h: np.ndarray
    E_theta: np.ndarray
    w0: np.ndarray
    times: np.ndarray          # t^0 .. t^m
    samples: np.ndarray        # (m+1, n_ext)
    forcing: np.ndarray        # (m+1, n), row 0 unused
    lu: LUFactor | None = None

    @property
    def m(self) -> int:
        return len(self.times) - 1

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def coupled_rhs(self, k: int) -> np.ndarray:
        return self.E_theta @ self.samples[k - 1] + self.E_h @ self.samples[k] + self.forcing[k]

    def matrix(self) -> np.ndarray:
        """Explicit block lower-bidiagonal matrix."""
        n, m = self.n, self.m
        M = np.zeros(((m + 1) * n, (m + 1) * n))
        M[:n, :n] = np.eye(n)
        for k in range(1, m + 1):
            M[k * n:(k + 1) * n, k * n:(k + 1) * n] = self.H
            M[k * n:(k + 1) * n, (k - 1) * n:k * n] = -self.Theta
        return M

    def stacked_rhs(self) -> np.ndarray:
        return np.concatenate([self.w0] + [self.coupled_rhs(k) for k in range(1, self.m + 1)])


def solve_gathered(g: GatheredEmtSystem) -> np.ndarray:
    """Forward block substitution; returns states ``(m+1, n)``."""
    lu = g.lu if g.lu is not None else LUFactor(g.H)
    W = np.empty((g.m + 1, g.n))
    W[0] = g.w0
    for k in range(1, g.m + 1):
        W[k] = lu.solve(g.Theta @ W[k - 1] + g.coupled_rhs(k))
    return W


def gathered_from_stepped(sys, w0, t0: float, m: int) -> GatheredEmtSystem:
    """Gathered form of an uncoupled ``SteppedSystem`` (no external samples)."""
    times = t0 + sys.dt * np.arange(m + 1)
    F = np.array([np.zeros(sys.n)] + [sys.forcing(t) for t in times[1:]])
    z = np.zeros((sys.n, 0))
    return GatheredEmtSystem(sys.H, sys.Theta, z, z, np.asarray(w0, float), times,
                             np.zeros((m + 1, 0)), F, sys._lu)


# --- coupler ------------------------------------------------------------------

@dataclass
class HeteroState:
    T: float
    w_emt: np.ndarray          # EMT-side local state at T
    z_ts: PhasorState          # TS-side local phasors at T
    history: np.ndarray        # (Nh, n_ext_ts) EMT samples ending at T


@dataclass
class StepInfo:
    T: float
    trace: SchwarzTrace
    errors: np.ndarray         # (iterations, 2): TS-side, EMT-side interface changes
    residual: float
    rank: int
    eigenvalues: np.ndarray
    accelerated: bool


class HeteroCoupler:
    """Heterogeneous EMT-TS Schwarz on a two-way split of a circuit DAE."""

    def __init__(self, dae: DaeSystem, cfg: HeteroConfig = HeteroConfig(), split=DEFAULT_SPLIT):
        self.dae, self.cfg = dae, cfg
        self.hs = HarmonicSet(cfg.harmonics, dae.omega0)
        self.emt = build_stepped(dae, cfg.dt)
        self.ts = build_ts(dae, self.hs, cfg.dT)
        part = circuit_partition(self.emt.H, dae.names, split, cfg.overlap)
        se, st = part[cfg.emt_side - 1], part[2 - cfg.emt_side]
        self.We, self.ext_e = se.W, se.ext
        self.Wt, self.ext_t = st.W, st.ext
        self.Nh = cfg.history_samples(dae.omega0)
        n = dae.n
        # EMT side
        H, Th = self.emt.H, self.emt.Theta
        self.H_e = H[np.ix_(self.We, self.We)]
        self.E_e = -H[np.ix_(self.We, self.ext_e)]
        self.Th_e = Th[np.ix_(self.We, self.We)]
        self.Thx_e = Th[np.ix_(self.We, self.ext_e)]
        try:
            self.lu_e = LUFactor(self.H_e)
        except SingularMatrix as exc:
            raise SingularSubdomain(f"EMT subdomain matrix is singular: {exc}") from exc
        # TS side, in the packed real layout
        copies = self.hs.real_dim(n) // n
        self.Wp = np.concatenate([self.Wt + c * n for c in range(copies)])
        self.extp = np.concatenate([self.ext_t + c * n for c in range(copies)])
        Hts, Tts = self.ts.H_TS, self.ts.Theta_TS
        self.A_t = Hts[np.ix_(self.Wp, self.Wp)]
        self.E_t = Hts[np.ix_(self.Wp, self.extp)]
        self.Th_t = Tts[np.ix_(self.Wp, self.Wp)]
        self.Thx_t = Tts[np.ix_(self.Wp, self.extp)]
        try:
            self.lu_t = LUFactor(self.A_t)
        except SingularMatrix as exc:
            raise SingularSubdomain(f"TS subdomain matrix is singular: {exc}") from exc
        # where the exchanged variables live inside each side
        self.ext_t_in_e = np.searchsorted(self.We, self.ext_t)
        self.ext_e_in_t = np.searchsorted(self.Wt, self.ext_e)
        if not (np.array_equal(self.We[self.ext_t_in_e], self.ext_t)
                and np.array_equal(self.Wt[self.ext_e_in_t], self.ext_e)):
            raise ValueError("exchanged variables are not owned by the opposite side")

    # names
    @property
    def emt_names(self):
        return [self.dae.names[i] for i in self.We]

    @property
    def ts_names(self):
        return [self.dae.names[i] for i in self.Wt]

    @property
    def trace_dim(self) -> int:
        return self.hs.real_dim(len(self.ext_t)) + self.hs.real_dim(len(self.ext_e))

    # initial states
    def initial_state(self) -> HeteroState:
        if self.cfg.warmup == "zero":
            x0 = self.dae.x0
            return HeteroState(0.0, x0[self.We].copy(),
                               PhasorState.zeros(self.hs, len(self.Wt)),
                               np.tile(x0[self.ext_t], (self.Nh, 1)))
        # one period of monodomain EMT
        traj = integrate(self.emt, 0.0, self.Nh * self.cfg.dt)
        Tw = traj.times[-1]
        win = traj.states[1:]
        z = emt_to_ts(win[:, self.Wt], self.hs, traj.times[1])
        return HeteroState(Tw, win[-1, self.We].copy(), z, win[:, self.ext_t].copy())

    # pieces of one macro step
    def _history_phasors(self, history, T_end) -> PhasorState:
        t_first = T_end - (self.Nh - 1) * self.cfg.dt
        return emt_to_ts(history, self.hs, t_first)

    def _split_trace(self, u):
        q1 = self.hs.real_dim(len(self.ext_t))
        phi = PhasorState.unpack(self.hs, u[:q1], len(self.ext_t))
        zeta = PhasorState.unpack(self.hs, u[q1:], len(self.ext_e))
        return phi, zeta

    def _ts_solve(self, st: HeteroState, phi_N: PhasorState, phi: PhasorState, T1: float) -> PhasorState:
        b = (self.Th_t @ st.z_ts.pack() + self.Thx_t @ phi_N.pack()
             + self.ts.forcing(T1)[self.Wp] - self.E_t @ phi.pack())
        return PhasorState.unpack(self.hs, self.lu_t.solve(b), len(self.Wt))

    def gathered(self, st: HeteroState, zeta: PhasorState) -> GatheredEmtSystem:
        m, dt = self.cfg.m, self.cfg.dt
        times = st.T + dt * np.arange(m + 1)
        zeta_N = PhasorState(self.hs, st.z_ts.z[:, self.ext_e_in_t])
        samples = np.vstack([ts_to_emt(zeta_N, times[:1]), ts_to_emt(zeta, times[1:])])
        F = np.zeros((m + 1, len(self.We)))
        for k in range(1, m + 1):
            F[k] = self.emt.forcing(times[k])[self.We]
        return GatheredEmtSystem(self.H_e, self.Th_e, self.E_e, self.Thx_e, st.w_emt, times,
                                 samples, F, self.lu_e)

    def _emt_solve(self, st: HeteroState, zeta: PhasorState):
        W = solve_gathered(self.gathered(st, zeta))
        hist = np.vstack([st.history, W[1:, self.ext_t_in_e]])[-self.Nh:]
        return W, hist

    def _map(self, st, phi_N, T1, u, mode):
        """One Schwarz sweep on the joint interface vector."""
        phi, zeta = self._split_trace(u)
        z = self._ts_solve(st, phi_N, phi, T1)
        zeta_new = PhasorState(self.hs, z.z[:, self.ext_e_in_t])
        W, hist = self._emt_solve(st, zeta_new if mode != ADDITIVE else zeta)
        phi_new = self._history_phasors(hist, T1)
        u_new = np.concatenate([phi_new.pack(), zeta_new.pack()])
        return u_new, z, W, hist

    def step(self, st: HeteroState, u0=None):
        """Advance one macro step; returns ``(new_state, W_emt, StepInfo)``."""
        cfg = self.cfg
        T1 = st.T + cfg.dT
        phi_N = self._history_phasors(st.history, st.T)
        if u0 is None:
            zeta_N = PhasorState(self.hs, st.z_ts.z[:, self.ext_e_in_t])
            u0 = np.concatenate([phi_N.pack(), zeta_N.pack()])
        q1 = self.hs.real_dim(len(self.ext_t))
        trace = SchwarzTrace([np.asarray(u0, float)], slices=(slice(q1, None), slice(0, q1)))
        u = trace.traces[0]
        while len(trace) < cfg.n_iterates:
            u_new = self._map(st, phi_N, T1, u, cfg.mode)[0]
            trace.traces.append(u_new)
            step = np.max(np.abs(u_new - u), initial=0.0)
            u = u_new
            if self.trace_dim == 0 or step <= cfg.stagnation_tol * max(1.0, np.max(np.abs(u), initial=0.0)):
                break
        accelerated, rank, eig = False, self.trace_dim, np.zeros(0, complex)
        if cfg.accelerate and len(trace) >= 3:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficientWarning)
                try:
                    op = numeric_error_operator(trace)
                except RankDeficientTrace:
                    op = None
            if op is not None:
                U = trace.as_array()
                u = aitken_accelerate(op, U[:, 0], U[:, 1])
                rank = op.P.shape[0]
                eig = op.eigenvalues()
                accelerated = True
        # consistent final solves from the accepted interface values
        u_chk, z, W, hist = self._map(st, phi_N, T1, u, ADDITIVE)
        residual = float(np.max(np.abs(u_chk - u), initial=0.0))
        info = StepInfo(T1, trace, trace.errors(), residual, rank, eig, accelerated)
        new = HeteroState(T1, W[-1].copy(), z, hist)
        return new, W, info


def hetero_schwarz_step(coupler: HeteroCoupler, state: HeteroState, u0=None):
    return coupler.step(state, u0)


@dataclass
class HeteroResult:
    coupler: HeteroCoupler
    emt_times: np.ndarray
    emt_states: np.ndarray     # EMT-side locals
    macro_times: np.ndarray
    ts_states: list            # PhasorState per macro time
    infos: list = field(default_factory=list)

    def info_at(self, t: float) -> StepInfo:
        """Macro step whose interval ``(T^N, T^{N+1}]`` contains ``t``."""
        for info in self.infos:
            if info.T >= t - 1e-12:
                return info
        raise KeyError(t)

    def trajectory(self) -> Trajectory:
        """Every variable on the EMT grid; TS-side values recombined from phasors."""
        c = self.coupler
        names = c.dae.names
        out = np.zeros((len(self.emt_times), len(names)))
        # TS values on each (T^N, T^{N+1}] use the phasors at T^{N+1}
        idx = np.searchsorted(self.macro_times, self.emt_times - 1e-12)
        idx = np.clip(idx, 0, len(self.ts_states) - 1)
        for j, p in enumerate(self.ts_states):
            sel = idx == j
            if np.any(sel):
                out[np.ix_(sel, c.Wt)] = reconstruct(p, self.emt_times[sel])
        out[:, c.We] = self.emt_states
        return Trajectory(self.emt_times, out, names)

    def write(self, outdir, stem: str = "hetero") -> dict:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {"trajectory": outdir / f"{stem}_trajectory.csv",
                 "phasors": outdir / f"{stem}_phasors.csv"}
        self.trajectory().to_csv(paths["trajectory"])
        write_phasors_csv(paths["phasors"], self.macro_times, self.ts_states, self.coupler.ts_names)
        for info in self.infos:
            p = outdir / f"{stem}_convergence_T{info.T:.6g}.csv"
            write_convergence_csv(p, info.errors, ["ts", "emt"])
            paths[f"convergence_{info.T:.6g}"] = p
        return paths


def hetero_run(dae: DaeSystem, cfg: HeteroConfig = HeteroConfig(), t1: float = 0.1,
               split=DEFAULT_SPLIT) -> HeteroResult:
    """Coupled run from the warm-up end to ``t1``."""
    c = HeteroCoupler(dae, cfg, split)
    st = c.initial_state()
    N = n_steps(st.T, t1, cfg.dT)
    emt_t = [st.T]
    emt_w = [st.w_emt]
    macro_t = [st.T]
    ts_p = [st.z_ts]
    infos = []
    for _ in range(N):
        T0 = st.T
        st, W, info = c.step(st)
        emt_t.extend(T0 + cfg.dt * np.arange(1, cfg.m + 1))
        emt_w.extend(W[1:])
        macro_t.append(st.T)
        ts_p.append(st.z_ts)
        infos.append(info)
    return HeteroResult(c, np.array(emt_t), np.array(emt_w), np.array(macro_t), ts_p, infos)

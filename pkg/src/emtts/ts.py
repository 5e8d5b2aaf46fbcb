"""Dynamic-phasor (TS) modelling.

A real signal is represented as ``Re(sum_k z_k(t) exp(i k w0 t))`` over a
set of non-negative harmonics.  Substituting this into ``M w' + K w = g``
and applying backward Euler with step ``dT`` gives, per harmonic ``k``,
the real 2x2 block system::

    [ H        -k w0 S ] [Re z]   [Theta Re z_prev + dT Re g_k]
    [ k w0 S    H      ] [Im z] = [Theta Im z_prev + dT Im g_k]

with ``H`` the EMT matrix at step ``dT`` and ``S = dT * Theta``.  For
``k = 0`` only the real half is kept.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .circuit import DaeSystem
from .emt import forcing_scale, stepped_matrix, theta_matrix
from .errors import SingularH, SingularMatrix
from .linalg import LUFactor


@dataclass(frozen=True)
class HarmonicSet:
    harmonics: tuple[int, ...] = (0, 1)
    omega0: float = 2.0 * np.pi * 50.0

    def __post_init__(self):
        hs = tuple(int(k) for k in self.harmonics)
        if any(k < 0 for k in hs):
            raise ValueError("harmonics must be non-negative")
        if len(set(hs)) != len(hs) or list(hs) != sorted(hs):
            raise ValueError(f"harmonics must be distinct and sorted, got {hs}")
        if not hs:
            raise ValueError("empty harmonic set")
        object.__setattr__(self, "harmonics", hs)

    def __iter__(self):
        return iter(self.harmonics)

    def __len__(self):
        return len(self.harmonics)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega0

    def block_sizes(self, n: int) -> list[int]:
        return [n if k == 0 else 2 * n for k in self.harmonics]

    def real_dim(self, n: int) -> int:
        return sum(self.block_sizes(n))


@dataclass(frozen=True, eq=False)
class PhasorState:
    """Complex phasors, one row per harmonic of ``hs``."""

    hs: HarmonicSet
    z: np.ndarray  # (len(hs), n) complex

    def __post_init__(self):
        z = np.array(self.z, dtype=complex)
        if z.ndim != 2 or z.shape[0] != len(self.hs):
            raise ValueError("phasor array must have one row per harmonic")
        for r, k in enumerate(self.hs):
            if k == 0:
                z[r] = z[r].real
        object.__setattr__(self, "z", z)

    @classmethod
    def zeros(cls, hs: HarmonicSet, n: int) -> "PhasorState":
        return cls(hs, np.zeros((len(hs), n), dtype=complex))

    @property
    def n(self) -> int:
        return self.z.shape[1]

    @property
    def re(self) -> np.ndarray:
        return self.z.real

    @property
    def im(self) -> np.ndarray:
        return self.z.imag

    def harmonic(self, k: int) -> np.ndarray:
        return self.z[self.hs.harmonics.index(k)]

    def pack(self) -> np.ndarray:
        return pack_phasors(self.hs, self.z)

    @classmethod
    def unpack(cls, hs: HarmonicSet, vec, n: int) -> "PhasorState":
        return cls(hs, unpack_phasors(hs, vec, n))


def pack_phasors(hs: HarmonicSet, z) -> np.ndarray:
    """Real layout used by the TS matrices: ``[Re z_0, Re z_1, Im z_1, ...]``."""
    parts = []
    for r, k in enumerate(hs):
        parts.append(z[r].real)
        if k != 0:
            parts.append(z[r].imag)
    return np.concatenate(parts)


def unpack_phasors(hs: HarmonicSet, vec, n: int) -> np.ndarray:
    z = np.zeros((len(hs), n), dtype=complex)
    pos = 0
    for r, k in enumerate(hs):
        z[r] = vec[pos:pos + n]
        pos += n
        if k != 0:
            z[r] += 1j * np.asarray(vec[pos:pos + n])
            pos += n
    return z


def harmonic_block(H: np.ndarray, S: np.ndarray, k: int, omega0: float) -> np.ndarray:
    if k == 0:
        return H.copy()
    c = k * omega0
    return np.block([[H, -c * S], [c * S, H]])


def block_diag(blocks: Iterable[np.ndarray]) -> np.ndarray:
    blocks = list(blocks)
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    pos = 0
    for b in blocks:
        m = b.shape[0]
        out[pos:pos + m, pos:pos + m] = b
        pos += m
    return out


@dataclass(frozen=True, eq=False)
class TsSystem:
    dae: DaeSystem
    hs: HarmonicSet
    dT: float
    H: np.ndarray  # EMT matrix at dT
    S: np.ndarray
    blocks: tuple[np.ndarray, ...]
    _lus: tuple[LUFactor, ...]

    @property
    def n(self) -> int:
        return self.dae.n

    @property
    def H_TS(self) -> np.ndarray:
        return block_diag(self.blocks)

    @property
    def Theta(self) -> np.ndarray:
        return self.S / self.dT

    @property
    def Theta_TS(self) -> np.ndarray:
        T = self.Theta
        return block_diag(T if k == 0 else block_diag([T, T]) for k in self.hs)

    def forcing(self, t: float) -> np.ndarray:
        """Packed real forcing vector at ``t`` for every harmonic."""
        scale = forcing_scale(self.dae, self.dT)
        z = np.array([scale * self.dae.phasor_forcing(k, t) for k in self.hs])
        return pack_phasors(self.hs, z)

    def rhs(self, p_prev: PhasorState, t_next: float) -> np.ndarray:
        return self.Theta_TS @ p_prev.pack() + self.forcing(t_next)

    def solve(self, rhs) -> np.ndarray:
        out = np.empty_like(np.asarray(rhs, dtype=float))
        pos = 0
        for blk, lu in zip(self.blocks, self._lus):
            m = blk.shape[0]
            out[pos:pos + m] = lu.solve(rhs[pos:pos + m])
            pos += m
        return out


def build_ts(dae: DaeSystem, hs: HarmonicSet, dT: float) -> TsSystem:
    if not dT > 0:
        raise ValueError(f"dT must be > 0, got {dT}")
    H = stepped_matrix(dae, dT)
    S = dT * theta_matrix(dae)
    blocks = tuple(harmonic_block(H, S, k, hs.omega0) for k in hs)
    try:
        lus = tuple(LUFactor(b) for b in blocks)
    except SingularMatrix as exc:
        raise SingularH(f"H_TS(dT={dT:g}) is singular: {exc}") from exc
    return TsSystem(dae, hs, float(dT), H, S, blocks, lus)


def ts_step(sys: TsSystem, p_prev: PhasorState, t_next: float) -> PhasorState:
    if p_prev.n != sys.n or p_prev.hs != sys.hs:
        raise ValueError("phasor state does not match the TS system")
    w = sys.solve(sys.rhs(p_prev, t_next))
    return PhasorState.unpack(sys.hs, w, sys.n)


def ts_integrate(sys: TsSystem, t0: float, t1: float, p0: PhasorState | None = None):
    """March the phasors from ``t0`` to ``t1``; returns ``(times, [PhasorState])``."""
    from .emt import n_steps

    p = PhasorState.zeros(sys.hs, sys.n) if p0 is None else p0
    N = n_steps(t0, t1, sys.dT)
    times = t0 + sys.dT * np.arange(N + 1)
    states = [p]
    for k in range(1, N + 1):
        p = ts_step(sys, p, times[k])
        states.append(p)
    return times, states


def reconstruct(p: PhasorState, t) -> np.ndarray:
    """Time-domain values ``Re(sum_k z_k exp(i k w0 t))``.

    Scalar ``t`` gives a vector of length ``n``; an array of times gives an
    array of shape ``(len(t), n)``.
    """
    ks = np.asarray(p.hs.harmonics)
    t_arr = np.asarray(t, dtype=float)
    basis = np.exp(1j * p.hs.omega0 * np.multiply.outer(t_arr, ks))  # (..., K)
    return np.real(basis @ p.z)


def write_phasors_csv(path, times, states: list[PhasorState], names) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    hs = states[0].hs
    header = ["t"]
    for k in hs:
        for nm in names:
            header += [f"{nm}_k{k}_re", f"{nm}_k{k}_im"]
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for t, p in zip(times, states):
            row = [f"{t:.17g}"]
            for r, _ in enumerate(hs):
                for z in p.z[r]:
                    row += [f"{z.real:.17g}", f"{z.imag:.17g}"]
            wr.writerow(row)

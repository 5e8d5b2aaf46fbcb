"""Small dense kernels: pivoted LU solves, eigenvalues, direct DFT.

Everything here works on plain numpy arrays; matrices in this package are at
most a few hundred rows, so nothing is sparse.
"""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import InsufficientSamples, NoConvergence, SingularMatrix

PIVOT_RTOL = 1e-14


class LUFactor:
    """Partial-pivoting LU factorization that can be reused for many solves.

    Raises SingularMatrix when a pivot falls below ``PIVOT_RTOL * max|M|``.
    """

    def __init__(self, M):
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("matrix has non-finite entries")
        self.n = M.shape[0]
        scale = np.max(np.abs(M)) if M.size else 0.0
        if self.n == 0:
            self._lu = None
            return
        if scale == 0.0:
            raise SingularMatrix("zero matrix")
        with warnings.catch_warnings():
            # exact zero pivots are reported below as SingularMatrix
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
        pivots = np.abs(np.diag(lu))
        k = int(np.argmin(pivots))
        if pivots[k] < PIVOT_RTOL * scale:
            raise SingularMatrix(
                f"pivot {k} has magnitude {pivots[k]:.3e} < {PIVOT_RTOL:g}*max|M| ({scale:.3e})"
            )
        self._lu = (lu, piv)

    def solve(self, rhs):
        rhs = np.asarray(rhs)
        if self.n == 0:
            return np.zeros_like(rhs, dtype=float)
        return scipy.linalg.lu_solve(self._lu, rhs, check_finite=False)


def lu_solve(M, rhs):
    """Solve ``M w = rhs`` by LU with partial pivoting."""
    return LUFactor(M).solve(rhs)


def eigenvalues(M, max_dim: int = 200):
    """All eigenvalues of a small dense matrix, sorted by descending modulus.

    Ties in modulus are ordered by descending imaginary part so that complex
    pairs come out as (a+bi, a-bi).
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] > max_dim:
        raise ValueError(f"dimension {M.shape[0]} exceeds {max_dim}")
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        # LAPACK geev: Hessenberg reduction followed by shifted QR sweeps
        ev = scipy.linalg.eigvals(M, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NoConvergence(str(exc)) from exc
    ev = np.asarray(ev, dtype=complex)
    mod = np.round(np.abs(ev), 12)
    order = np.lexsort((-ev.imag, -mod))
    return ev[order]


def dft_harmonics(samples, harmonics, t0: float = 0.0, omega0: float | None = None):
    """Fourier coefficients of one period of uniformly spaced samples.

    ``samples[n]`` is taken at ``t0 + n * T / N`` where ``T`` is the
    fundamental period. The returned ``c[k]`` satisfy
    ``signal(t) ~ Re(sum_k c_k exp(i k w0 t))``: ``c_0`` is the mean and
    ``c_k = (2/N) sum_n samples[n] exp(-i k w0 t_n)`` for ``k > 0``.

    Phases are referenced to absolute time, so ``t0`` and ``omega0`` matter
    only when ``t0`` is not a multiple of the period.  Several signals can be
    transformed at once by passing a 2-D array with time along axis 0.
    """
    x = np.asarray(samples, dtype=float)
    ks = np.asarray(list(harmonics), dtype=int)
    N = x.shape[0]
    if np.any(ks < 0):
        raise ValueError("harmonic indices must be non-negative")
    kmax = int(ks.max()) if ks.size else 0
    if N < 2 * kmax + 1 or N < 1:
        raise InsufficientSamples(f"{N} samples cannot resolve harmonic {kmax}")
    phase = 2.0 * np.pi * np.arange(N) / N
    if t0 != 0.0:
        if omega0 is None:
            raise ValueError("omega0 is required when t0 != 0")
        phase = phase + omega0 * t0
    basis = np.exp(-1j * np.outer(ks, phase))  # (K, N), direct O(N*K) sum
    weights = np.where(ks == 0, 1.0 / N, 2.0 / N)
    c = weights[:, None] * (basis @ x.reshape(N, -1))
    return c.reshape((len(ks),) + x.shape[1:])

"""Restricted additive / multiplicative Schwarz, error operators and Aitken.

For a linear problem the Schwarz error obeys ``e^{p+1} = P e^p`` with ``P``
independent of ``p``.  Knowing ``P`` (exactly, from the partition, or
numerically, from a few iterates of the exchanged interface values) the
fixed point follows from two iterates even when the iteration diverges::

    x_inf = (I - P)^{-1} (x_1 - P x_0)
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RankDeficientTrace, RankDeficientWarning, SingularMatrix, UnitEigenvalue
from .linalg import LUFactor, eigenvalues
from .partition import Partition

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"
_MODE_ALIASES = {"additive": ADDITIVE, "ras": ADDITIVE, "multiplicative": MULTIPLICATIVE, "rms": MULTIPLICATIVE}


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[str(mode).lower()]
    except KeyError:
        raise ValueError(f"unknown Schwarz mode {mode!r}") from None


@dataclass(frozen=True)
class SchwarzConfig:
    mode: str = ADDITIVE
    max_iter: int = 9
    stagnation_tol: float = 1e-13
    record_iterates: bool = True
    # reuse one numeric operator for every time step instead of rebuilding it
    frozen_operator: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", normalize_mode(self.mode))
        if self.max_iter < 2:
            raise ValueError("max_iter must be >= 2")


@dataclass
class SchwarzTrace:
    """Interface values ``u^p`` seen along a Schwarz run."""

    traces: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    slices: tuple = ()

    def __len__(self):
        return len(self.traces)

    def as_array(self) -> np.ndarray:
        return np.array(self.traces).T  # (q, iterations)

    def errors(self) -> np.ndarray:
        """``||u^{p+1} - u^p||_inf`` per recorded step and per block of ``slices``."""
        U = self.as_array()
        D = np.abs(np.diff(U, axis=1))
        slices = self.slices or (slice(0, U.shape[0]),)
        return np.array([[D[s, p].max(initial=0.0) for s in slices] for p in range(D.shape[1])])

    def to_csv(self, path, labels=None) -> None:
        write_convergence_csv(path, self.errors(), labels)


def write_convergence_csv(path, errors, labels=None) -> None:
    errors = np.atleast_2d(errors)
    labels = labels or [f"subdomain{i + 1}" for i in range(errors.shape[1])]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", *(f"log10_err_{lb}" for lb in labels)])
        for p, row in enumerate(errors):
            wr.writerow([p + 1, *(f"{np.log10(e) if e > 0 else -np.inf:.17g}" for e in row)])


@dataclass(frozen=True, eq=False)
class ErrorOperator:
    """Iteration matrix of a linear fixed-point map.

    When ``basis`` is set, ``P`` acts on coordinates in that orthonormal basis
    (the subspace actually explored by the iterates) and is zero elsewhere.
    The basis need not be orthonormal; ``cobasis`` gives the dual rows.
    """

    P: np.ndarray
    space: str = "full"
    basis: np.ndarray | None = None
    invariance_defect: float = 0.0
    # coordinates of a vector in ``basis`` are ``cobasis.T @ v``
    cobasis: np.ndarray | None = None

    @property
    def dense(self) -> np.ndarray:
        if self.basis is None:
            return self.P
        return self.basis @ self.P @ self._co.T

    @property
    def _co(self) -> np.ndarray:
        return self.basis if self.cobasis is None else self.cobasis

    def eigenvalues(self) -> np.ndarray:
        return eigenvalues(self.P)


# --- sweeps -------------------------------------------------------------------

def _local_solve(part: Partition, i: int, b, w):
    s = part[i]
    return s.solve(b[s.W], w[s.ext])


def sweep(part: Partition, b, w, mode: str = ADDITIVE) -> np.ndarray:
    """One Schwarz iterate ``w -> w'`` for ``H w = b``."""
    b = np.asarray(b)
    w = np.asarray(w)
    if normalize_mode(mode) == ADDITIVE:
        out = np.zeros_like(w, dtype=float)
        for i, s in enumerate(part.subdomains):
            out += s.Rt.T @ _local_solve(part, i, b, w)
        return out
    out = np.array(w, dtype=float)
    for i, s in enumerate(part.subdomains):
        x = _local_solve(part, i, b, out)
        out = out + s.Rt.T @ (x - s.R @ out)
    return out


def solve_from_trace(part: Partition, b, u) -> np.ndarray:
    """Global vector from one solve per subdomain given interface values ``u``."""
    b = np.asarray(b)
    s1, s2 = part.trace_slices
    out = np.zeros(part.n)
    for s, sl in zip(part.subdomains, (s1, s2)):
        out += s.Rt.T @ s.solve(b[s.W], u[sl])
    return out


def ras_iterate(H, b, part: Partition, w_start, cfg: SchwarzConfig = SchwarzConfig()):
    """Run Schwarz iterations; returns ``(iterates, trace)``.

    Iterates include ``w_start``.  Stops after ``cfg.max_iter`` iterates or
    when successive interface values stop moving.
    """
    if H is not None and H is not part.H and not np.array_equal(np.asarray(H), part.H):
        raise ValueError("partition was built from a different matrix")
    w = np.asarray(w_start, dtype=float)
    trace = SchwarzTrace(slices=part.trace_slices)
    iterates = [w]
    trace.traces.append(part.trace(w))
    while len(iterates) < cfg.max_iter:
        w_new = sweep(part, b, w, cfg.mode)
        iterates.append(w_new)
        u_old, u_new = trace.traces[-1], part.trace(w_new)
        trace.traces.append(u_new)
        w = w_new
        if part.decoupled:
            break
        scale = max(1.0, float(np.max(np.abs(u_old), initial=0.0)))
        if np.max(np.abs(u_new - u_old), initial=0.0) <= cfg.stagnation_tol * scale and len(iterates) > 2:
            break
    if cfg.record_iterates:
        trace.iterates = list(iterates)
    return iterates, trace


# --- error operators ----------------------------------------------------------

def exact_error_operator(H, part: Partition, mode: str = ADDITIVE) -> ErrorOperator:
    """Full-space ``P`` from the partition matrices."""
    n = part.n
    if normalize_mode(mode) == ADDITIVE:
        P = np.zeros((n, n))
        for s in part.subdomains:
            if s.ext.size:
                P -= s.Rt.T @ s.lu.solve(s.E) @ s.Re
        return ErrorOperator(P, "full")
    Hm = part.H
    P = np.eye(n)
    for s in part.subdomains:
        G = np.eye(n) - s.Rt.T @ s.lu.solve(s.R @ Hm)
        P = G @ P
    return ErrorOperator(P, "full")


def _fit_window(D, rank_rtol):
    norms = np.linalg.norm(D, axis=0)
    keep = norms[:-1] > 0.0
    scale = np.where(norms > 0.0, norms, 1.0)
    D0 = (D[:, :-1] / scale[:-1])[:, keep]
    D1 = (D[:, 1:] / scale[:-1])[:, keep]
    Uo, sv, _ = np.linalg.svd(D0, full_matrices=False)
    r = int(np.sum(sv > rank_rtol * sv[0]))
    basis = Uo[:, :r]
    C1 = basis.T @ D1
    P_r = C1 @ np.linalg.pinv(basis.T @ D0)
    # how far the explored subspace is from being invariant
    defect = float(np.linalg.norm(D1 - basis @ C1) / max(np.linalg.norm(D1), 1e-300))
    return basis, P_r, defect


def numeric_error_operator(trace, rank_rtol: float = 1e-9, defect_tol: float = 1e-12,
                           warn: bool = True) -> ErrorOperator:
    """Trace-space ``P`` fitted to successive interface differences.

    Solves ``P [d^0 ... d^{K-1}] = [d^1 ... d^K]`` in the subspace spanned by
    the differences.  The shortest leading window whose subspace is invariant
    (to ``defect_tol``) is used, since late iterates of a divergent run carry
    amplified rounding.  A rank below the trace dimension triggers a warning:
    the operator is then only known on that subspace.
    """
    U = trace.as_array() if isinstance(trace, SchwarzTrace) else np.asarray(trace, dtype=float)
    if U.ndim != 2 or U.shape[1] < 3:
        raise RankDeficientTrace("need at least three iterates (two differences)")
    q = U.shape[0]
    Dr = np.diff(U, axis=1)
    if not np.any(Dr[:, :-1]):
        raise RankDeficientTrace("iterates stagnated: no information on the error operator")
    for K in range(2, Dr.shape[1] + 1):
        if not np.any(Dr[:, :K - 1]):
            continue
        # per-component scaling: a diagonal similarity, so the spectrum is unchanged
        rs = np.abs(Dr[:, :K]).max(axis=1)
        rs = np.where(rs > 0.0, rs, 1.0)
        basis, P_r, defect = _fit_window(Dr[:, :K] / rs[:, None], rank_rtol)
        if defect <= defect_tol:
            break
    r = basis.shape[1]
    if r < q and warn:
        warnings.warn(f"interface differences span {r} of {q} dimensions; "
                      "operator restricted to that subspace", RankDeficientWarning, stacklevel=2)
    Sd = np.diag(rs)
    if r == q:
        # back to unscaled canonical coordinates
        return ErrorOperator(Sd @ basis @ P_r @ basis.T @ np.diag(1.0 / rs), "trace", None, defect)
    # scaled basis B = S Q, with left inverse Q^T S^{-1}
    return ErrorOperator(P_r, "trace", Sd @ basis, defect, np.diag(1.0 / rs) @ basis)


def aitken_accelerate(op: ErrorOperator | np.ndarray, x0, x1) -> np.ndarray:
    """Fixed point of a linear iteration from two iterates and its operator."""
    if not isinstance(op, ErrorOperator):
        op = ErrorOperator(np.atleast_2d(np.asarray(op, dtype=float)))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    P = op.P
    I = np.eye(P.shape[0])
    try:
        lu = LUFactor(I - P)
    except SingularMatrix as exc:
        raise UnitEigenvalue(f"I - P is singular: {exc}") from exc
    if op.basis is None:
        return lu.solve(x1 - P @ x0)
    # x_inf = x0 + (I - P)^{-1} (x1 - x0), taken in the explored subspace
    d = x1 - x0
    a = op._co.T @ d
    # the part of d outside the explored subspace is annihilated by P
    return x0 + op.basis @ lu.solve(a) + (d - op.basis @ a)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    verdict: str

    @property
    def dominant(self) -> complex:
        return complex(self.eigenvalues[0]) if self.eigenvalues.size else 0j

    @property
    def spectral_radius(self) -> float:
        return float(abs(self.dominant))


def spectrum_report(op: ErrorOperator | np.ndarray, zero_tol: float = 1e-12) -> SpectrumReport:
    P = op.P if isinstance(op, ErrorOperator) else np.asarray(op)
    ev = eigenvalues(P)
    rho = float(np.abs(ev).max(initial=0.0))
    if rho <= zero_tol:
        verdict = "convergent-in-one-step"
    elif rho > 1.0:
        verdict = "divergent"
    else:
        verdict = "convergent"
    return SpectrumReport(ev, verdict)


# --- accelerated solves -------------------------------------------------------

@dataclass
class SolveInfo:
    iterations: int
    trace: SchwarzTrace
    residual: float
    accelerated: bool


def schwarz_solve(part: Partition, b, w_start, cfg: SchwarzConfig, accel: str | None = "exact",
                  P: ErrorOperator | None = None):
    """Solve ``H w = b`` by Schwarz, optionally Aitken-accelerated.

    ``accel='exact'`` uses ``P`` (or the partition's full-space operator) after
    the first sweep; ``accel='numeric'`` fits ``P`` on the interface trace of
    ``cfg.max_iter`` iterates unless a trace-space ``P`` is supplied.
    """
    b = np.asarray(b, dtype=float)
    if accel == "exact":
        if P is None:
            P = exact_error_operator(part.H, part, cfg.mode)
        w0 = np.asarray(w_start, dtype=float)
        w1 = sweep(part, b, w0, cfg.mode)
        w = aitken_accelerate(P, w0, w1)
        trace = SchwarzTrace([part.trace(w0), part.trace(w1)], slices=part.trace_slices)
        n_it = 1
    elif accel == "numeric":
        if P is not None:
            iterates, trace = ras_iterate(None, b, part, w_start, SchwarzConfig(cfg.mode, 2, cfg.stagnation_tol))
        else:
            iterates, trace = ras_iterate(None, b, part, w_start, cfg)
        n_it = len(iterates) - 1
        U = trace.as_array()
        if P is None and not part.decoupled:
            try:
                P = numeric_error_operator(trace, warn=False)
            except RankDeficientTrace:
                P = None
        u = U[:, -1] if P is None else aitken_accelerate(P, U[:, 0], U[:, 1])
        w = solve_from_trace(part, b, u)
    elif accel is None:
        iterates, trace = ras_iterate(None, b, part, w_start, cfg)
        n_it = len(iterates) - 1
        w = iterates[-1]
    else:
        raise ValueError(f"unknown acceleration {accel!r}")
    res = float(np.max(np.abs(part.H @ w - b), initial=0.0))
    return w, SolveInfo(n_it, trace, res, accel is not None), P


def _reusable(P) -> bool:
    # an operator restricted to one step's explored subspace says nothing
    # about error components outside it, so only full-rank fits are frozen
    return P is not None and getattr(P, "basis", None) is None


def ddm_integrate(sys, part: Partition, t0: float, t1: float, cfg: SchwarzConfig = SchwarzConfig(),
                  accel: str | None = "exact", w0=None):
    """March an EMT ``SteppedSystem`` with one Schwarz solve per step."""
    from .emt import Trajectory, n_steps

    if not np.array_equal(part.H, sys.H):
        raise ValueError("partition does not match the stepped matrix")
    w = sys.dae.x0.copy() if w0 is None else np.asarray(w0, dtype=float)
    N = n_steps(t0, t1, sys.dt)
    times = t0 + sys.dt * np.arange(N + 1)
    states = np.empty((N + 1, sys.n))
    states[0] = w
    infos = []
    P = None
    for k in range(1, N + 1):
        b = sys.rhs(w, times[k])
        reuse = P if (accel == "exact" or cfg.frozen_operator) else None
        w, info, P_used = schwarz_solve(part, b, w, cfg, accel, reuse)
        if accel == "exact" or (cfg.frozen_operator and _reusable(P_used)):
            P = P_used
        states[k] = w
        infos.append(info)
    return Trajectory(times, states, sys.names), infos


def ddm_integrate_ts(tsys, part: Partition, t0: float, t1: float, cfg: SchwarzConfig = SchwarzConfig(MULTIPLICATIVE),
                     accel: str | None = "exact", p0=None):
    """Phasor counterpart of :func:`ddm_integrate`; ``part`` spans ``H_TS``."""
    from .emt import n_steps
    from .ts import PhasorState

    H = tsys.H_TS
    if not np.array_equal(part.H, H):
        raise ValueError("partition does not match H_TS")
    p = PhasorState.zeros(tsys.hs, tsys.n) if p0 is None else p0
    N = n_steps(t0, t1, tsys.dT)
    times = t0 + tsys.dT * np.arange(N + 1)
    states = [p]
    infos = []
    P = None
    for k in range(1, N + 1):
        b = tsys.rhs(p, times[k])
        reuse = P if (accel == "exact" or cfg.frozen_operator) else None
        w, info, P_used = schwarz_solve(part, b, p.pack(), cfg, accel, reuse)
        if accel == "exact" or (cfg.frozen_operator and _reusable(P_used)):
            P = P_used
        p = PhasorState.unpack(tsys.hs, w, tsys.n)
        states.append(p)
        infos.append(info)
    return times, states, infos

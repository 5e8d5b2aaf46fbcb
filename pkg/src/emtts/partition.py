"""Two-subdomain splits of a square system and their Schwarz operators."""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DecoupledPartitionWarning, SingularMatrix, SingularSubdomain
from .linalg import LUFactor

# Default cut of the reference loop: source, L1, R1 and node 4 on one side,
# R2, L2 and both capacitor currents' far side on the other.
DEFAULT_SPLIT = ("v1", "v2", "v3", "v4", "i12", "i23", "i45")

_NODE_VOLTAGE = re.compile(r"^v\d+$")


def restriction(indices, n: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=int)
    R = np.zeros((len(idx), n))
    R[np.arange(len(idx)), idx] = 1.0
    return R


def external_set(H, W) -> np.ndarray:
    """Unknowns outside ``W`` that some row of ``W`` depends on."""
    H = np.asarray(H)
    W = np.asarray(W, dtype=int)
    outside = np.setdiff1d(np.arange(H.shape[0]), W)
    if W.size == 0 or outside.size == 0:
        return np.zeros(0, dtype=int)
    hit = np.any(H[np.ix_(W, outside)] != 0.0, axis=0)
    return outside[hit]


def grow_overlap(H, W, layers: int, growable=None) -> np.ndarray:
    """Add ``layers`` rings of neighbours (symmetrised pattern of ``H``).

    Only unknowns flagged in ``growable`` may join; ``None`` allows all.
    """
    H = np.asarray(H)
    n = H.shape[0]
    adj = (H != 0.0) | (H.T != 0.0)
    allow = np.ones(n, bool) if growable is None else np.asarray(growable, bool)
    mask = np.zeros(n, bool)
    mask[np.asarray(W, dtype=int)] = True
    for _ in range(layers):
        mask = mask | (np.any(adj[mask], axis=0) & allow)
    return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class Subdomain:
    W: np.ndarray       # unknowns including overlap
    owned: np.ndarray   # unknowns this subdomain writes back
    ext: np.ndarray     # external dependencies
    R: np.ndarray
    Rt: np.ndarray      # R with the rows of non-owned unknowns zeroed
    Re: np.ndarray
    A: np.ndarray
    E: np.ndarray       # R H Re^T
    lu: LUFactor

    def solve(self, b_local, ext_values) -> np.ndarray:
        """``A^{-1} (b_local - E x_ext)``."""
        return self.lu.solve(np.asarray(b_local) - self.E @ np.asarray(ext_values))


@dataclass(frozen=True, eq=False)
class Partition:
    H: np.ndarray
    subdomains: tuple[Subdomain, Subdomain]
    overlap: int = 0

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def decoupled(self) -> bool:
        return all(s.ext.size == 0 for s in self.subdomains)

    def __getitem__(self, i) -> Subdomain:
        return self.subdomains[i]

    @property
    def trace_slices(self) -> tuple[slice, slice]:
        a = self.subdomains[0].ext.size
        return slice(0, a), slice(a, a + self.subdomains[1].ext.size)

    def trace(self, w) -> np.ndarray:
        """Stacked external values ``(x_{1,e}, x_{2,e})`` of a global vector."""
        w = np.asarray(w)
        return np.concatenate([w[s.ext] for s in self.subdomains])

    def unity_defect(self) -> float:
        S = sum(s.Rt.T @ s.R for s in self.subdomains)
        return float(np.max(np.abs(S - np.eye(self.n))))


def build_partition(H, W1, W2, owned1=None, owned2=None, overlap: int = 0) -> Partition:
    """Materialise all operators for explicit (possibly overlapping) sets."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    W1 = np.unique(np.asarray(W1, dtype=int))
    W2 = np.unique(np.asarray(W2, dtype=int))
    if W1.size == 0 or W2.size == 0:
        raise ValueError("both subdomains must be non-empty")
    if np.union1d(W1, W2).size != n:
        raise ValueError("subdomains do not cover all unknowns")
    # overlap unknowns are written by the lower-numbered subdomain
    owned1 = W1 if owned1 is None else np.asarray(owned1, dtype=int)
    owned2 = np.setdiff1d(W2, owned1) if owned2 is None else np.asarray(owned2, dtype=int)
    subs = []
    for i, (W, own) in enumerate(((W1, owned1), (W2, owned2))):
        ext = external_set(H, W)
        R = restriction(W, n)
        Rt = R * np.isin(W, own)[:, None]
        Re = restriction(ext, n)
        A = H[np.ix_(W, W)]
        E = H[np.ix_(W, ext)]
        try:
            lu = LUFactor(A)
        except SingularMatrix as exc:
            raise SingularSubdomain(f"subdomain {i + 1} matrix is singular: {exc}") from exc
        subs.append(Subdomain(W, np.sort(own), ext, R, Rt, Re, A, E, lu))
    part = Partition(H, (subs[0], subs[1]), overlap)
    if part.unity_defect() != 0.0:
        raise ValueError("owned sets do not form a partition of unity")
    if part.decoupled:
        warnings.warn("subdomains exchange no values; Schwarz converges in one sweep",
                      DecoupledPartitionWarning, stacklevel=2)
    return part


def partition_by_sets(H, W1, overlap: int = 0, growable=None) -> Partition:
    """Split unknowns into ``W1`` and its complement, then grow ``overlap`` layers."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    W1 = np.unique(np.asarray(W1, dtype=int))
    if W1.size == 0 or W1.size >= n:
        raise ValueError("W1 must be a non-empty proper subset")
    if overlap < 0:
        raise ValueError("overlap must be >= 0")
    W2 = np.setdiff1d(np.arange(n), W1)
    W1o = grow_overlap(H, W1, overlap, growable)
    W2o = grow_overlap(H, W2, overlap, growable)
    return build_partition(H, W1o, W2o, overlap=overlap)


def replicate(part: Partition, H_big, copies: int) -> Partition:
    """Same index sets repeated over ``copies`` stacked blocks of ``H_big``."""
    n = part.n

    def rep(idx):
        return np.concatenate([idx + c * n for c in range(copies)])

    s1, s2 = part.subdomains
    return build_partition(H_big, rep(s1.W), rep(s2.W), rep(s1.owned), rep(s2.owned), part.overlap)


def node_voltage_mask(names: Sequence[str]) -> np.ndarray:
    return np.array([bool(_NODE_VOLTAGE.match(nm)) for nm in names])


def names_to_indices(names: Sequence[str], selection: Sequence[str]) -> np.ndarray:
    missing = [s for s in selection if s not in names]
    if missing:
        raise KeyError(f"unknown variables {missing}")
    return np.array(sorted(names.index(s) for s in selection), dtype=int)


def default_circuit_split(names: Sequence[str] | None = None) -> np.ndarray:
    """Indices of the reference split's first subdomain."""
    if names is None:
        from .circuit import assemble_dae, reference_netlist

        names = assemble_dae(reference_netlist()).names
    return names_to_indices(list(names), DEFAULT_SPLIT)


def circuit_partition(H, names: Sequence[str], W1_names: Sequence[str] = DEFAULT_SPLIT,
                      overlap: int = 0) -> Partition:
    """Partition of a circuit matrix; overlap layers add shared node voltages."""
    names = list(names)
    return partition_by_sets(H, names_to_indices(names, W1_names), overlap,
                             growable=node_voltage_mask(names))

"""Netlists of linear R/L/C circuits and their DAE assembly.

Every branch ``a -> b`` carries one current unknown ``i_ab`` and every node
one voltage unknown ``v_k``.  Equations follow a uniform orientation
(``v_b - v_a`` equals the branch drop), e.g. for the reference loop::

    v1 = 0
    v2 - v1 - E cos(wt) - Zs i12 = 0
    v3 - v2 - L1 di23/dt = 0
    C1 (dv5/dt - dv4/dt) - i45 = 0
    i12 - i23 = 0                      (one KCL row per non-ground node)

The DAE is stored in residual form ``M w' + K w = g(t)``.  Row ``r`` of
``M`` and ``K`` is the equation *paired* with unknown ``r``; the pairing
decides which equations a subdomain owns once unknowns are split, so it is
fixed deterministically by a breadth-first spanning tree grown from ground:

* the ground row ``v_g = 0`` pairs with ``v_g``;
* a tree branch pairs with the voltage of the node it reaches;
* the KCL row of a node pairs with the current of its parent branch;
* a chord (non-tree branch) pairs with its own current.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DisconnectedCircuit, UnsupportedComponent

_KIND_ALIASES = {
    "r": "R", "resistor": "R",
    "l": "L", "inductor": "L",
    "c": "C", "capacitor": "C",
    "v": "V", "source": "V", "sinusoidalvoltagesource": "V",
}

OMEGA0_50HZ = 2.0 * math.pi * 50.0


@dataclass(frozen=True)
class Component:
    """One branch of a netlist.

    ``value`` is in ohm, henry or farad.  A source (kind ``"V"``) is an ideal
    sinusoid ``amplitude * cos(omega t)`` in series with the resistance
    ``zs``; its ``value`` is ignored.
    """

    kind: str
    nodes: tuple[int, int]
    value: float = 0.0
    name: str = ""
    amplitude: float = 0.0
    omega: float = OMEGA0_50HZ
    zs: float = 0.0

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).lower().replace("-", "").replace("_", ""))
        if kind is None:
            raise UnsupportedComponent(f"unsupported component kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        a, b = (int(n) for n in self.nodes)
        object.__setattr__(self, "nodes", (a, b))
        if a == b:
            raise ValueError(f"component {self.name or kind} connects node {a} to itself")
        if kind == "V":
            if not self.zs > 0:
                raise ValueError("source series impedance zs must be > 0")
            if not self.omega > 0:
                raise ValueError("source angular frequency must be > 0")
        elif not self.value > 0:
            raise ValueError(f"{self.name or kind}: value must be > 0, got {self.value}")

    @property
    def current_name(self) -> str:
        a, b = self.nodes
        return f"i{a}{b}" if a < 10 and b < 10 else f"i{a}_{b}"


@dataclass(frozen=True)
class Netlist:
    n_nodes: int
    components: tuple[Component, ...]
    ground: int = 1
    omega0: float = OMEGA0_50HZ
    # optional explicit ordering (differential names first, then algebraic)
    variable_order: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.variable_order is not None:
            object.__setattr__(self, "variable_order", tuple(self.variable_order))
        if not 1 <= self.ground <= self.n_nodes:
            raise ValueError(f"ground node {self.ground} outside 1..{self.n_nodes}")
        for c in self.components:
            for k in c.nodes:
                if not 1 <= k <= self.n_nodes:
                    raise ValueError(f"component {c.name} references unknown node {k}")

    @property
    def source(self) -> Component | None:
        src = [c for c in self.components if c.kind == "V"]
        return src[0] if src else None


def reference_netlist(amplitude: float = 100.0) -> Netlist:
    """The 7-node series RLC loop: L1=L2=0.7 H, C1=C2=1 uF, R1=R2=77 ohm."""
    w0 = OMEGA0_50HZ
    comps = (
        Component("V", (1, 2), name="E", amplitude=amplitude, omega=w0, zs=1e-6),
        Component("L", (2, 3), 0.7, name="L1"),
        Component("R", (3, 4), 77.0, name="R1"),
        Component("C", (4, 5), 1e-6, name="C1"),
        Component("R", (5, 6), 77.0, name="R2"),
        Component("L", (6, 7), 0.7, name="L2"),
        Component("C", (7, 1), 1e-6, name="C2"),
    )
    order = ("v1", "i23", "v4", "v5", "i67", "v7",
             "v2", "i12", "v3", "i34", "i45", "i56", "v6", "i71")
    return Netlist(7, comps, ground=1, omega0=w0, variable_order=order)


@dataclass(frozen=True, eq=False)
class DaeSystem:
    """Linear DAE ``M w' + K w = g(t)`` with ``w = (x, y)``.

    ``x`` (the first ``len(diff_vars)`` entries) are the unknowns whose
    derivative appears somewhere; ``y`` are the others.  ``g`` is zero except
    on ``source_row`` where it equals ``E(t) cos(omega t)``; ``E(t)`` starts
    at ``amplitude`` and follows ``events`` (time, new amplitude).
    """

    diff_vars: tuple[str, ...]
    alg_vars: tuple[str, ...]
    mass: np.ndarray
    stiffness: np.ndarray
    omega0: float = OMEGA0_50HZ
    source_row: int | None = None
    omega: float = OMEGA0_50HZ
    amplitude: float = 0.0
    events: tuple[tuple[float, float], ...] = ()
    x0: np.ndarray | None = None
    row_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = len(self.diff_vars) + len(self.alg_vars)
        M = np.array(self.mass, dtype=float)
        K = np.array(self.stiffness, dtype=float)
        if M.shape != (n, n) or K.shape != (n, n):
            raise ValueError(f"mass/stiffness must be {n}x{n}")
        M.flags.writeable = False
        K.flags.writeable = False
        object.__setattr__(self, "mass", M)
        object.__setattr__(self, "stiffness", K)
        x0 = np.zeros(n) if self.x0 is None else np.array(self.x0, dtype=float)
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "events", tuple(sorted((float(t), float(e)) for t, e in self.events)))

    @property
    def names(self) -> tuple[str, ...]:
        return self.diff_vars + self.alg_vars

    @property
    def n(self) -> int:
        return len(self.diff_vars) + len(self.alg_vars)

    @property
    def n_diff(self) -> int:
        return len(self.diff_vars)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def differential_rows(self) -> np.ndarray:
        """Boolean mask of rows that carry a time derivative."""
        return np.any(self.mass != 0.0, axis=1)

    @property
    def source_harmonic(self) -> int:
        return int(round(self.omega / self.omega0))

    def amplitude_at(self, t: float) -> float:
        E = self.amplitude
        for te, val in self.events:
            # events at a grid instant apply to that instant
            if t >= te - 1e-9 * max(1.0, abs(te)):
                E = val
        return E

    def forcing(self, t: float) -> np.ndarray:
        g = np.zeros(self.n)
        if self.source_row is not None:
            g[self.source_row] = self.amplitude_at(t) * math.cos(self.omega * t)
        return g

    def phasor_forcing(self, k: int, t: float) -> np.ndarray:
        """Complex forcing of harmonic ``k`` (one-sided, ``Re`` convention)."""
        g = np.zeros(self.n, dtype=complex)
        if self.source_row is not None and k == self.source_harmonic and k > 0:
            g[self.source_row] = self.amplitude_at(t)
        return g

    def residual(self, x, xdot, y, t: float) -> np.ndarray:
        w = np.concatenate([np.asarray(x, float), np.asarray(y, float)])
        wdot = np.zeros(self.n)
        wdot[: self.n_diff] = xdot
        return self.mass @ wdot + self.stiffness @ w - self.forcing(t)

    def with_events(self, events: Sequence[tuple[float, float]], amplitude: float | None = None) -> "DaeSystem":
        return DaeSystem(
            self.diff_vars, self.alg_vars, self.mass, self.stiffness, self.omega0,
            self.source_row, self.omega,
            self.amplitude if amplitude is None else amplitude,
            tuple(events), self.x0, self.row_labels,
        )

    def blocks(self, dt: float):
        """``(I - dt A, B, C, D)``-style blocks of the stepped matrix for the x/y split."""
        from .emt import stepped_matrix

        H = stepped_matrix(self, dt)
        p = self.n_diff
        return H[:p, :p], H[:p, p:], H[p:, :p], H[p:, p:]


def _pairing(net: Netlist):
    """Return ``{equation_key: unknown_name}`` from the BFS spanning tree."""
    adj: dict[int, list[tuple[int, int]]] = {k: [] for k in range(1, net.n_nodes + 1)}
    for ci, c in enumerate(net.components):
        a, b = c.nodes
        adj[a].append((b, ci))
        adj[b].append((a, ci))
    parent_branch: dict[int, int] = {}
    seen = {net.ground}
    queue = deque([net.ground])
    while queue:
        u = queue.popleft()
        for v, ci in sorted(adj[u]):
            if v not in seen:
                seen.add(v)
                parent_branch[v] = ci
                queue.append(v)
    if len(seen) != net.n_nodes:
        missing = sorted(set(range(1, net.n_nodes + 1)) - seen)
        raise DisconnectedCircuit(f"nodes {missing} are not connected to ground {net.ground}")
    pairs = {("ground", net.ground): f"v{net.ground}"}
    tree = set(parent_branch.values())
    for node, ci in parent_branch.items():
        pairs[("branch", ci)] = f"v{node}"
        pairs[("kcl", node)] = net.components[ci].current_name
    for ci, c in enumerate(net.components):
        if ci not in tree:
            pairs[("branch", ci)] = c.current_name
    return pairs


def assemble_dae(net: Netlist) -> DaeSystem:
    """Assemble ``M w' + K w = g`` for a netlist of R, L, C and one source."""
    if sum(c.kind == "V" for c in net.components) > 1:
        raise UnsupportedComponent("at most one voltage source is supported")
    currents = [c.current_name for c in net.components]
    if len(set(currents)) != len(currents):
        raise UnsupportedComponent("parallel branches between the same node pair are not supported")
    pairs = _pairing(net)

    voltages = [f"v{k}" for k in range(1, net.n_nodes + 1)]
    all_names = voltages + currents
    col = {name: j for j, name in enumerate(all_names)}
    n = len(all_names)
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    row_of: dict[tuple, int] = {}
    labels: list[str] = []
    source_row = None

    def new_row(key, label):
        row_of[key] = len(labels)
        labels.append(label)
        return row_of[key]

    r = new_row(("ground", net.ground), f"v{net.ground} = 0")
    K[r, col[f"v{net.ground}"]] = 1.0
    for ci, c in enumerate(net.components):
        a, b = c.nodes
        va, vb, i = col[f"v{a}"], col[f"v{b}"], col[c.current_name]
        r = new_row(("branch", ci), f"{c.name or c.kind} branch {a}->{b}")
        if c.kind == "R":
            K[r, vb], K[r, va], K[r, i] = 1.0, -1.0, -c.value
        elif c.kind == "L":
            K[r, vb], K[r, va] = 1.0, -1.0
            M[r, i] = -c.value
        elif c.kind == "C":
            M[r, vb], M[r, va] = c.value, -c.value
            K[r, i] = -1.0
        else:
            K[r, vb], K[r, va], K[r, i] = 1.0, -1.0, -c.zs
            source_row = r
    for node in range(1, net.n_nodes + 1):
        if node == net.ground:
            continue
        r = new_row(("kcl", node), f"KCL node {node}")
        for c in net.components:
            if c.nodes[1] == node:
                K[r, col[c.current_name]] += 1.0
            if c.nodes[0] == node:
                K[r, col[c.current_name]] -= 1.0

    # permute rows so that row j is the equation paired with unknown j
    perm_rows = np.empty(n, dtype=int)
    for key, name in pairs.items():
        perm_rows[col[name]] = row_of[key]
    M, K = M[perm_rows], K[perm_rows]
    labels = [labels[r] for r in perm_rows]
    if source_row is not None:
        source_row = int(np.where(perm_rows == source_row)[0][0])

    is_diff = np.any(M != 0.0, axis=0)
    if net.variable_order is not None:
        order = list(net.variable_order)
        if sorted(order) != sorted(all_names):
            raise ValueError("variable_order must be a permutation of the circuit unknowns")
        n_diff = int(sum(is_diff[col[v]] for v in order))
        if not all(is_diff[col[v]] for v in order[:n_diff]):
            raise ValueError("variable_order must list differential unknowns first")
    else:
        order = [v for v in all_names if is_diff[col[v]]] + [v for v in all_names if not is_diff[col[v]]]
        n_diff = int(is_diff.sum())
    p = np.array([col[v] for v in order])
    M, K = M[np.ix_(p, p)], K[np.ix_(p, p)]
    labels = [labels[j] for j in p]
    if source_row is not None:
        source_row = int(np.where(p == source_row)[0][0])

    src = net.source
    return DaeSystem(
        diff_vars=tuple(order[:n_diff]),
        alg_vars=tuple(order[n_diff:]),
        mass=M,
        stiffness=K,
        omega0=net.omega0,
        source_row=source_row,
        omega=src.omega if src else net.omega0,
        amplitude=src.amplitude if src else 0.0,
        row_labels=tuple(labels),
    )


def series_loop_phasors(net: Netlist, amplitude: float | None = None) -> dict[str, complex]:
    """Steady AC phasors of a single-loop netlist from its series impedance.

    Walks the loop from ground accumulating branch drops ``v_b - v_a``; this
    never touches the assembled matrices, so it serves as an independent
    check on them.
    """
    src = net.source
    if src is None:
        raise ValueError("netlist has no source")
    E = src.amplitude if amplitude is None else amplitude
    w = src.omega

    def z(c: Component) -> complex:
        if c.kind == "R":
            return c.value
        if c.kind == "L":
            return 1j * w * c.value
        if c.kind == "C":
            return 1.0 / (1j * w * c.value)
        return c.zs

    # loop KVL: sum(v_b - v_a) = 0 = E + I * sum(Z)  (all branches oriented along the loop)
    nxt = {c.nodes[0]: c for c in net.components}
    if len(nxt) != len(net.components) or len(net.components) != net.n_nodes:
        raise ValueError("netlist is not a single oriented loop")
    I = -E / sum(z(c) for c in net.components)
    out = {f"v{net.ground}": 0j}
    node = net.ground
    for _ in range(net.n_nodes):
        c = nxt[node]
        drop = z(c) * I + (E if c.kind == "V" else 0.0)
        out[f"v{c.nodes[1]}"] = out[f"v{node}"] + drop if c.nodes[1] != net.ground else 0j
        out[c.current_name] = I
        node = c.nodes[1]
    return out

"""Hardware-aware finalization: placement, SWAP insertion, verification.

Placement is greedy: the most-interacting logical pair lands on the coupled
physical pair with the highest degree sum, remaining logicals attach one at a
time next to their strongest already-placed partner (BFS-nearest free seat).
Routing then scans left to right and walks the lesser-degree endpoint of each
uncoupled 2-qubit gate along a shortest coupling path, one SWAP per hop. All
tie-breaks take the lowest index, so the whole pass is a pure function of
(circuit, profile); the seed parameter is accepted for interface stability
but never consulted.

Layout maps are full bijections over the routed circuit's wires: entries
beyond the logical count cover the unused physical wires, so the recorded
permutation accounts for SWAPs that pass through them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .backend import DeviceProfile
from .circuit import Circuit, Gate, GateKind, QubitCapExceeded, equiv_up_to_phase, unitary


class InsufficientQubits(Exception):
    """Circuit needs more qubits than the device has."""


@dataclass(frozen=True)
class Layout:
    initial: tuple[int, ...]  # wire i of the pre-routing circuit -> physical qubit
    final: tuple[int, ...]  # same wire after all inserted SWAPs


@dataclass(frozen=True)
class RoutedCircuit:
    circuit: Circuit
    layout: Layout


def _adjacency(p: DeviceProfile) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {q: [] for q in range(p.num_qubits)}
    for a, b in sorted(p.coupling):
        adj[a].append(b)
        adj[b].append(a)
    return {q: sorted(ns) for q, ns in adj.items()}


def _bfs_dist(adj: dict[int, list[int]], src: int) -> dict[int, int]:
    dist = {src: 0}
    queue = deque([src])
    while queue:
        q = queue.popleft()
        for nb in adj[q]:
            if nb not in dist:
                dist[nb] = dist[q] + 1
                queue.append(nb)
    return dist


def _bfs_path(adj: dict[int, list[int]], src: int, dst: int) -> list[int]:
    """Shortest src-to-dst path; sorted adjacency makes it deterministic."""
    parent: dict[int, int] = {src: src}
    queue = deque([src])
    while queue:
        q = queue.popleft()
        if q == dst:
            break
        for nb in adj[q]:
            if nb not in parent:
                parent[nb] = q
                queue.append(nb)
    if dst not in parent:
        raise InsufficientQubits("coupling graph is disconnected; no route between qubits")
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    return path[::-1]


def _interaction_counts(c: Circuit) -> dict[tuple[int, int], int]:
    counts: dict[tuple[int, int], int] = {}
    for g in c.gates:
        if len(g.qubits) == 2:
            a, b = g.qubits
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    return counts


def _initial_layout(c: Circuit, p: DeviceProfile) -> list[int]:
    """Full bijection wire -> physical; wires >= c.num_qubits are fillers."""
    n, m = c.num_qubits, p.num_qubits
    adj = _adjacency(p)
    deg = {q: len(adj[q]) for q in range(m)}
    counts = _interaction_counts(c)
    pos: dict[int, int] = {}
    free = set(range(m))

    weight: dict[int, dict[int, int]] = {l: {} for l in range(n)}
    for (a, b), w in counts.items():
        weight[a][b] = weight[b][a] = w

    if counts:
        (a, b), _ = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        edge = min(p.coupling, key=lambda e: (-(deg[e[0]] + deg[e[1]]), e))
        pos[a], pos[b] = edge
        free -= set(edge)
        placed = {a, b}
        remaining = {l for l in range(n) if l not in placed}
        while True:
            scored = [
                (sum(w for q, w in weight[l].items() if q in placed), l)
                for l in remaining
                if any(q in placed for q in weight[l])
            ]
            if not scored:
                break
            _, l = min(scored, key=lambda t: (-t[0], t[1]))
            anchor = min(weight[l].items(),
                         key=lambda qw: (-qw[1], qw[0]) if qw[0] in placed else (1, qw[0]))[0]
            dist = _bfs_dist(adj, pos[anchor])
            seat = min(free, key=lambda q: (dist.get(q, m + 1), q))
            pos[l] = seat
            free.discard(seat)
            placed.add(l)
            remaining.discard(l)

    for l in range(n):
        if l not in pos:
            seat = min(free)
            pos[l] = seat
            free.discard(seat)
    layout = [pos[l] for l in range(n)]
    layout.extend(sorted(free))
    return layout


def _already_coupled(c: Circuit, p: DeviceProfile) -> bool:
    return all(len(g.qubits) != 2 or p.coupled(*g.qubits) for g in c.gates)


def route(c: Circuit, p: DeviceProfile, seed: int = 0) -> RoutedCircuit:
    """Place, then insert SWAPs until every 2-qubit gate sits on an edge."""
    if c.num_qubits > p.num_qubits:
        raise InsufficientQubits(
            f"circuit uses {c.num_qubits} qubits, device has {p.num_qubits}")
    if _already_coupled(c, p):
        ident = tuple(range(c.num_qubits))
        return RoutedCircuit(c, Layout(ident, ident))

    adj = _adjacency(p)
    deg = {q: len(adj[q]) for q in range(p.num_qubits)}
    layout = _initial_layout(c, p)
    m = p.num_qubits
    pos = list(layout)  # wire -> physical
    occ = [0] * m  # physical -> wire
    for w, q in enumerate(pos):
        occ[q] = w

    def do_swap(a: int, b: int) -> None:
        out.append(Gate.swap(a, b))
        wa, wb = occ[a], occ[b]
        occ[a], occ[b] = wb, wa
        pos[wa], pos[wb] = b, a

    out: list[Gate] = []
    for g in c.gates:
        if len(g.qubits) == 1:
            out.append(Gate(g.kind, (pos[g.qubits[0]],), g.params))
            continue
        u, v = pos[g.qubits[0]], pos[g.qubits[1]]
        if not p.coupled(u, v):
            path = _bfs_path(adj, u, v)
            move_first = (deg[u], u) <= (deg[v], v)
            if move_first:
                for i in range(len(path) - 2):
                    do_swap(path[i], path[i + 1])
            else:
                for i in range(len(path) - 1, 1, -1):
                    do_swap(path[i], path[i - 1])
            u, v = pos[g.qubits[0]], pos[g.qubits[1]]
        out.append(Gate(g.kind, (u, v), g.params))
    return RoutedCircuit(Circuit(m, tuple(out)),
                         Layout(tuple(layout), tuple(pos)))


def verify_routed(c: Circuit, p: DeviceProfile, layout: Layout,
                  allow_swap: bool = True) -> bool:
    """Every 2-qubit gate on a coupling edge, kinds within the allowed set.

    With allow_swap (the pre-translation check) 2-qubit kinds must be native
    or SWAP and 1-qubit kinds are unrestricted; without it every kind must be
    native. The layout must be a recorded bijection over the circuit's wires.
    """
    ini, fin = layout.initial, layout.final
    if len(ini) != len(fin) or len(ini) != c.num_qubits:
        return False
    if sorted(ini) != sorted(fin) or len(set(ini)) != len(ini):
        return False
    if any(not 0 <= q < p.num_qubits for q in ini):
        return False
    for g in c.gates:
        if len(g.qubits) == 2:
            if not p.coupled(*g.qubits):
                return False
            if g.kind not in p.native_gates and not (allow_swap and g.kind is GateKind.SWAP):
                return False
        elif not allow_swap and g.kind not in p.native_gates:
            return False
    return True


def _wire_permutation_matrix(pi: dict[int, int], m: int) -> np.ndarray:
    """Operator moving the state of wire w to wire pi(w)."""
    dim = 1 << m
    mat = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        t = 0
        for w in range(m):
            if (s >> w) & 1:
                t |= 1 << pi[w]
        mat[t, s] = 1.0
    return mat


def permuted_equivalence(original: Circuit, routed: Circuit, layout: Layout,
                         tol: float = 1e-9) -> bool:
    """unitary(routed) == relabel(final after initial) . unitary(embedded original)."""
    m = routed.num_qubits
    if m > 10 or original.num_qubits > 10:
        raise QubitCapExceeded("permutation oracle capped at 10 qubits")
    if len(layout.initial) != m or original.num_qubits > m:
        return False
    embedded = Circuit(m, tuple(
        Gate(g.kind, tuple(layout.initial[q] for q in g.qubits), g.params)
        for g in original.gates))
    pi = {layout.initial[w]: layout.final[w] for w in range(m)}
    relabel = _wire_permutation_matrix(pi, m)
    return equiv_up_to_phase(unitary(routed), relabel @ unitary(embedded), tol)

"""Integer rounding of flows along component boundaries.

For a finite, connected, hole-free vertex set S', the graph on its boundary
edges where two edges are adjacent when they share a triangle of the orbit
graph has all degrees even, and is connected, so it carries an Eulerian
circuit.  Walking the circuit and adding, at each step, the circulation on
the witness triangle that makes the current boundary edge integral fixes all
boundary values except the last, which the integer flow-out of S' then
forces.  The initial adjustment pins that flow-out to the nearest integer,
which under the gate equals the true count |A cap S'| - |B cap S'|.

Completion then solves, inside every residual component enclosed by rounded
boundaries, for an integer flow meeting the demands exactly, with minimal
sup-norm and a deterministic lexicographic tie-break.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import CompletionError, EquidecompError, GateViolationError
from .gridsets import GridComponent, boundary_edges, components, label_components
from .window import Window, canonical_directions, directions

Edge = tuple[tuple[int, ...], tuple[int, ...]]


def nearest_integer(x: Fraction) -> int:
    """[x]: floor if the fractional part is below 1/2, else ceil."""
    fl = x.numerator // x.denominator
    frac = x - fl
    return fl if frac < Fraction(1, 2) else fl + 1


def triangle_count(gamma: Sequence[int], d: int) -> int:
    """Number of triangles of the orbit graph containing an edge of step
    gamma: (3^|T0| - 1) 2^|T1| + 2^|T1| - 2 with T0 the zero coordinates."""
    if all(g == 0 for g in gamma):
        raise ValueError("gamma must be nonzero")
    t0 = sum(1 for g in gamma if g == 0)
    t1 = d - t0
    return (3 ** t0 - 1) * 2 ** t1 + 2 ** t1 - 2


def triangle_count_bruteforce(gamma: Sequence[int], d: int) -> int:
    """Count common neighbors of 0 and gamma by direct enumeration."""
    g = tuple(gamma)
    count = 0
    for w in itertools.product((-1, 0, 1), repeat=d):
        if all(x == 0 for x in w) or w == g:
            continue
        diff = tuple(a - b for a, b in zip(w, g))
        if max(abs(x) for x in diff) == 1:
            count += 1
    return count


class EdgeFlow:
    """Sparse antisymmetric edge values keyed by ordered vertex pairs."""

    def __init__(self):
        self._vals: dict[Edge, Fraction] = {}

    @staticmethod
    def _canon(u, v):
        return (u, v) if u < v else (v, u)

    def get(self, u, v) -> Fraction:
        key = self._canon(u, v)
        val = self._vals.get(key, Fraction(0))
        return val if key == (u, v) else -val

    def add(self, u, v, delta: Fraction) -> None:
        key = self._canon(u, v)
        cur = self._vals.get(key, Fraction(0))
        self._vals[key] = cur + (delta if key == (u, v) else -delta)

    def set(self, u, v, value: Fraction) -> None:
        key = self._canon(u, v)
        self._vals[key] = value if key == (u, v) else -value

    def items(self):
        return self._vals.items()


@dataclass
class TriangleGraph:
    """Nodes are the boundary edges of a surface; two nodes are adjacent when
    they lie in a common triangle of the orbit graph.  Any two adjacent nodes
    share exactly one vertex and exactly one triangle, so the graph is simple
    and the triangle of a traversal step is recoverable from the node pair."""

    nodes: list[Edge]
    adjacency: dict[int, list[int]]

    @staticmethod
    def build(surface_edges: list[Edge], inside: set[tuple[int, ...]],
              d: int) -> "TriangleGraph":
        node_index = {e: i for i, e in enumerate(surface_edges)}
        adj: dict[int, list[int]] = defaultdict(list)
        dirs = directions(d)
        for i, (u, v) in enumerate(surface_edges):
            for g in dirs:
                w = tuple(a + b for a, b in zip(u, g))
                if w == v:
                    continue
                if max(abs(a - b) for a, b in zip(w, v)) != 1:
                    continue  # w must also neighbor v
                partner = (w, v) if w in inside else (u, w)
                j = node_index.get(partner)
                if j is None:
                    raise EquidecompError(
                        "triangle partner missing from the boundary edge set")
                adj[i].append(j)
        for i in adj:
            adj[i].sort(key=lambda j: surface_edges[j])
        return TriangleGraph(nodes=surface_edges, adjacency=dict(adj))

    def degrees_even(self) -> bool:
        return all(len(v) % 2 == 0 for v in self.adjacency.values())

    def edge_count(self) -> int:
        return sum(len(v) for v in self.adjacency.values()) // 2

    def step_witness(self, i: int, j: int) -> tuple[int, ...]:
        """Third vertex for the triangle circulation of the step i -> j: the
        vertex of node j not shared with node i."""
        si = set(self.nodes[i])
        uj, vj = self.nodes[j]
        if uj in si and vj in si:
            raise EquidecompError("adjacent boundary edges share both vertices")
        return vj if uj in si else uj


def euler_circuit(tg: TriangleGraph) -> list[int]:
    """Closed walk using every triangle-graph edge exactly once, as the node
    sequence e_1 .. e_t with e_t = e_1; deterministic via locally lex-minimal
    edge choices (a consistent rule, not the globally lex-minimal circuit)."""
    if not tg.nodes:
        return []
    if not tg.degrees_even():
        raise EquidecompError("triangle graph has an odd-degree node")
    total = tg.edge_count()
    avail: dict[tuple[int, int], int] = defaultdict(int)
    for i, lst in tg.adjacency.items():
        for j in lst:
            if i < j:
                avail[(i, j)] += 1
    ptr: dict[int, int] = defaultdict(int)

    def take(i):
        lst = tg.adjacency.get(i, ())
        k = ptr[i]
        while k < len(lst):
            j = lst[k]
            key = (i, j) if i < j else (j, i)
            if avail[key] > 0:
                avail[key] -= 1
                ptr[i] = k + 1
                return j
            k += 1
        ptr[i] = k
        return None

    start = min(range(len(tg.nodes)), key=lambda i: tg.nodes[i])
    route: list[int] = []
    stack: list[int] = [start]
    while stack:
        nxt = take(stack[-1])
        if nxt is None:
            route.append(stack.pop())
        else:
            stack.append(nxt)
    route.reverse()
    if len(route) != total + 1:
        raise EquidecompError("triangle graph is disconnected")
    return route


@dataclass
class RoundingTrace:
    surface_size: int
    boundary_edges: int
    circuit_len: int
    adjustment: Fraction
    adjustment_edge: Edge | None
    displacement: dict[Edge, Fraction] = field(default_factory=dict)

    def max_displacement(self) -> Fraction:
        return max(self.displacement.values(), default=Fraction(0))

    def to_json(self):
        return {"surface_size": self.surface_size,
                "boundary_edges": self.boundary_edges,
                "circuit_len": self.circuit_len,
                "adjustment": str(self.adjustment),
                "max_displacement": str(self.max_displacement())}


def _surface_fout(phi: EdgeFlow, surface_edges: list[Edge]) -> Fraction:
    return sum((phi.get(u, v) for u, v in surface_edges), Fraction(0))


def round_boundary(phi: EdgeFlow, surface_edges: list[Edge],
                   inside: set[tuple[int, ...]], d: int,
                   target: int | None = None,
                   displacement: dict[Edge, Fraction] | None = None
                   ) -> RoundingTrace:
    """Round phi along the boundary of a hole-free connected surface.

    The adjustment pins fout(S') to `target` when given (the rounding of a
    toast layer passes the nearest integer, which the gate makes equal to
    the true count), else to the nearest integer of the current flow-out.
    Mutates phi; returns the trace.
    """
    if d < 2:
        raise EquidecompError("rounding requires d >= 2 (no triangles in d = 1)")
    tg = TriangleGraph.build(surface_edges, inside, d)
    if not tg.degrees_even():
        raise EquidecompError("odd degree in triangle graph: bookkeeping bug")
    circ = euler_circuit(tg)
    disp = displacement if displacement is not None else {}

    def bump(u, v, delta):
        key = (u, v) if u < v else (v, u)
        disp[key] = disp.get(key, Fraction(0)) + abs(delta)

    fout = _surface_fout(phi, surface_edges)
    tgt = nearest_integer(fout) if target is None else target
    adjust = tgt - fout
    if not circ:
        if adjust != 0:
            raise EquidecompError("empty boundary cannot absorb an adjustment")
        return RoundingTrace(len(inside), 0, 0, Fraction(0), None)
    # circuit nodes e_1 .. e_t with e_t = e_1; adjustment edge is e_{t-1}
    t = len(circ)
    adj_edge = tg.nodes[circ[t - 2]] if t >= 2 else tg.nodes[circ[0]]
    if adjust != 0:
        phi.add(*adj_edge, adjust)
        bump(*adj_edge, adjust)
    for s in range(t - 2):
        u, v = tg.nodes[circ[s]]
        val = phi.get(u, v)
        delta = nearest_integer(val) - val
        if delta != 0:
            w = tg.step_witness(circ[s], circ[s + 1])
            phi.add(u, v, delta)
            phi.add(v, w, delta)
            phi.add(w, u, delta)
            bump(u, v, delta)
            bump(v, w, delta)
            bump(w, u, delta)
    # the closing edge must now be integral
    for u, v in surface_edges:
        if phi.get(u, v).denominator != 1:
            raise EquidecompError("boundary value left non-integral")
    trace = RoundingTrace(surface_size=len(inside),
                          boundary_edges=len(surface_edges),
                          circuit_len=t,
                          adjustment=adjust, adjustment_edge=adj_edge,
                          displacement=disp)
    return trace


def equalise_boundary(phi: EdgeFlow, psi: EdgeFlow, surface_edges: list[Edge],
                      inside: set[tuple[int, ...]], d: int) -> None:
    """Make phi equal psi on every boundary pair except possibly the last
    circuit edge, by triangle circulations (never changes any flow-out)."""
    if d < 2:
        raise EquidecompError("equalising requires d >= 2")
    tg = TriangleGraph.build(surface_edges, inside, d)
    circ = euler_circuit(tg)
    t = len(circ)
    for s in range(t - 2):
        u, v = tg.nodes[circ[s]]
        delta = psi.get(u, v) - phi.get(u, v)
        if delta != 0:
            w = tg.step_witness(circ[s], circ[s + 1])
            phi.add(u, v, delta)
            phi.add(v, w, delta)
            phi.add(w, u, delta)


# -- completion ---------------------------------------------------------------


class Dinic:
    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add(self, u: int, v: int, cap: int, rcap: int = 0) -> int:
        i = len(self.to)
        self.head[u].append(i)
        self.to.append(v)
        self.cap.append(cap)
        self.head[v].append(i + 1)
        self.to.append(u)
        self.cap.append(rcap)
        return i

    def max_flow(self, s: int, t: int) -> int:
        INF = 1 << 60
        flow = 0
        while True:
            level = [-1] * self.n
            level[s] = 0
            q = [s]
            for u in q:
                for ei in self.head[u]:
                    v = self.to[ei]
                    if self.cap[ei] > 0 and level[v] < 0:
                        level[v] = level[u] + 1
                        q.append(v)
            if level[t] < 0:
                return flow
            it = [0] * self.n
            # iterative blocking-flow DFS
            while True:
                path = []
                u = s
                pushed = 0
                while True:
                    if u == t:
                        aug = min(self.cap[ei] for ei in path) if path else 0
                        for ei in path:
                            self.cap[ei] -= aug
                            self.cap[ei ^ 1] += aug
                        pushed = aug
                        break
                    advanced = False
                    while it[u] < len(self.head[u]):
                        ei = self.head[u][it[u]]
                        v = self.to[ei]
                        if self.cap[ei] > 0 and level[v] == level[u] + 1:
                            path.append(ei)
                            u = v
                            advanced = True
                            break
                        it[u] += 1
                    if advanced:
                        continue
                    if u == s:
                        break
                    level[u] = -1
                    ei = path.pop()
                    u = self.to[ei ^ 1]
                    it[u] += 1
                if pushed == 0 and u == s:
                    break
                flow += pushed


def _feasible_flow(cells: list[tuple[int, ...]], adj_pairs: list[tuple[int, int]],
                   chi: list[int], cap: int) -> dict[int, int] | None:
    """Integer chi-flow on the cell graph with |value| <= cap per edge, via
    max-flow; returns values per adj_pair index (oriented pair i -> j)."""
    need = sum(c for c in chi if c > 0)
    if need != -sum(c for c in chi if c < 0):
        return None
    n = len(cells)
    din = Dinic(n + 2)
    s, t = n, n + 1
    eidx = []
    for (i, j) in adj_pairs:
        eidx.append(din.add(i, j, cap, cap))
    for i, c in enumerate(chi):
        if c > 0:
            din.add(s, i, c)
        elif c < 0:
            din.add(i, t, -c)
    got = din.max_flow(s, t)
    if got != need:
        return None
    vals = {}
    for k, ei in enumerate(eidx):
        # value = cap - residual forward cap  (negative if reverse used)
        vals[k] = cap - din.cap[ei]
    return vals


def complete_within(cells: list[tuple[int, ...]], demands: dict[tuple[int, ...], Fraction],
                    d: int, lex_budget: int = 140,
                    cap_limit: int = 10 ** 6
                    ) -> tuple[dict[Edge, int], int]:
    """Integer interior flow meeting the demand system exactly with minimal
    sup-norm; among minimal-cap solutions a deterministic one (true greedy
    lexicographic minimization when the component is small).

    demands map each cell to an integer (as Fraction or int): the required
    flow-out using interior edges only, boundary contributions already
    subtracted by the caller.  Raises CompletionError when infeasible.
    """
    cset = sorted(cells)
    index = {c: i for i, c in enumerate(cset)}
    chi = []
    for c in cset:
        val = demands.get(c, 0)
        fval = Fraction(val)
        if fval.denominator != 1:
            raise CompletionError(f"non-integral demand {val} at {c}")
        chi.append(int(fval))
    if sum(chi) != 0:
        raise CompletionError(
            f"demands do not balance (sum {sum(chi)}): rounding bug upstream")
    adj_pairs = []
    pair_keys = []
    for i, c in enumerate(cset):
        for g in canonical_directions(d):
            nb = tuple(a + b for a, b in zip(c, g))
            j = index.get(nb)
            if j is not None:
                adj_pairs.append((i, j))
                pair_keys.append((c, nb))
    if not adj_pairs:
        if any(chi):
            raise CompletionError("isolated cells with nonzero demand")
        return {}, 0
    # minimal cap by doubling + binary search
    lo, hi = 0, 1
    if all(c == 0 for c in chi):
        hi = 0
    else:
        while _feasible_flow(cset, adj_pairs, chi, hi) is None:
            hi *= 2
            if hi > cap_limit:
                raise CompletionError("no feasible completion within cap limit")
        lo = hi // 2 + 1 if hi > 1 else 1
        lo = 0
        # binary search smallest feasible cap in [0, hi]
        lo_b, hi_b = 0, hi
        while lo_b < hi_b:
            mid = (lo_b + hi_b) // 2
            if _feasible_flow(cset, adj_pairs, chi, mid) is not None:
                hi_b = mid
            else:
                lo_b = mid + 1
        hi = hi_b
    cap = hi
    if cap == 0:
        return {}, 0
    if len(adj_pairs) <= lex_budget:
        values = _lex_minimal(cset, adj_pairs, chi, cap)
    else:
        flow = _feasible_flow(cset, adj_pairs, chi, cap)
        values = [flow[k] for k in range(len(adj_pairs))]
    out = {}
    for (key, val) in zip(pair_keys, values):
        if val != 0:
            out[key] = val
    return out, cap


def _lex_minimal(cells, adj_pairs, chi, cap) -> list[int]:
    """Fix edge values one by one in lex order of their ordered pairs,
    greedily taking the smallest value keeping the rest feasible."""
    order = sorted(range(len(adj_pairs)),
                   key=lambda k: (cells[adj_pairs[k][0]], cells[adj_pairs[k][1]]))
    fixed: dict[int, int] = {}
    chi_cur = list(chi)
    remaining = set(range(len(adj_pairs)))

    def rest_feasible() -> bool:
        rem_pairs = [adj_pairs[k] for k in sorted(remaining)]
        return _feasible_flow(cells, rem_pairs, chi_cur, cap) is not None

    for k in order:
        i, j = adj_pairs[k]
        remaining.discard(k)
        chosen = None
        for val in range(-cap, cap + 1):
            chi_cur[i] -= val
            chi_cur[j] += val
            if rest_feasible():
                chosen = val
                break
            chi_cur[i] += val
            chi_cur[j] -= val
        if chosen is None:
            raise CompletionError("lex minimization lost feasibility")
        fixed[k] = chosen
    return [fixed[k] for k in range(len(adj_pairs))]


def gale_hoffman_min_cap(cells, adj_pairs, chi) -> int | None:
    """Independent oracle: the minimal cap equals the maximum over vertex
    subsets U of ceil(|chi(U)| / e(U, complement)); None when some subset has
    demand but no crossing edges (infeasible at any cap)."""
    n = len(cells)
    if sum(chi) != 0:
        return None
    best = 0
    for mask in range(1, 1 << n):
        tot = sum(chi[i] for i in range(n) if mask >> i & 1)
        cross = sum(1 for (i, j) in adj_pairs
                    if (mask >> i & 1) != (mask >> j & 1))
        if tot == 0:
            continue
        if cross == 0:
            return None
        need = -(-abs(tot) // cross)
        best = max(best, need)
    return best

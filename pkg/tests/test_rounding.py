"""Triangle parity, Eulerian circuits, boundary rounding, completion."""
import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from equidecomp import Window, sample_generators
from equidecomp.errors import CompletionError, EquidecompError
from equidecomp.gridsets import boundary_edges, components
from equidecomp.rounding import (Dinic, EdgeFlow, TriangleGraph,
                                 complete_within, equalise_boundary,
                                 euler_circuit, gale_hoffman_min_cap,
                                 nearest_integer, round_boundary,
                                 triangle_count, triangle_count_bruteforce)
from equidecomp.window import directions


def surface_from_cells(cells, d, pad=3):
    """Boundary edges + inside set for a hand-given cell collection."""
    cells = [tuple(c) for c in cells]
    lo = [min(c[i] for c in cells) - pad for i in range(d)]
    hi = [max(c[i] for c in cells) + pad + 1 for i in range(d)]
    shape = tuple(b - a for a, b in zip(lo, hi))
    mask = np.zeros(shape, bool)
    for c in cells:
        mask[tuple(x - o for x, o in zip(c, lo))] = True
    comp = components(mask)[0]
    edges = boundary_edges(comp.fill_local(), comp.bbox, shape, directions(d))
    inside = {tuple(int(x) for x in p) for p in comp.cells_global()}
    return edges, inside


def random_component(rng, d, max_cells):
    cells = {(0,) * d}
    target = rng.randrange(1, max_cells + 1)
    frontier = [(0,) * d]
    while len(cells) < target and frontier:
        base = rng.choice(frontier)
        g = rng.choice(directions(d))
        nxt = tuple(a + b for a, b in zip(base, g))
        cells.add(nxt)
        frontier.append(nxt)
    return sorted(cells)


class TestNearestInteger:
    def test_definition_cases(self):
        assert nearest_integer(Fraction(3, 2)) == 2
        assert nearest_integer(Fraction(49, 100)) == 0
        assert nearest_integer(Fraction(-1, 2)) == 0
        assert nearest_integer(Fraction(7, 2)) == 4
        assert nearest_integer(Fraction(-3, 4)) == -1


class TestTriangleCount:
    def test_examples(self):
        assert triangle_count((1, 0), 2) == 4
        assert triangle_count((1, 1), 2) == 2
        assert triangle_count((1,), 1) == 0

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_formula_equals_bruteforce_and_even(self, d):
        for g in directions(d):
            got = triangle_count(g, d)
            assert got == triangle_count_bruteforce(g, d)
            assert got % 2 == 0


class TestEuler:
    def test_singleton_component_d2(self):
        edges, inside = surface_from_cells([(0, 0)], 2)
        assert len(edges) == 8
        tg = TriangleGraph.build(edges, inside, 2)
        assert tg.degrees_even()
        circ = euler_circuit(tg)
        assert len(circ) == tg.edge_count() + 1
        assert circ[0] == circ[-1]
        # every node appears with its full degree
        from collections import Counter
        cnt = Counter(circ[:-1])
        for i in range(len(tg.nodes)):
            assert cnt[i] == len(tg.adjacency[i]) // 2

    def test_domino_component_d2(self):
        edges, inside = surface_from_cells([(0, 0), (1, 0)], 2)
        tg = TriangleGraph.build(edges, inside, 2)
        assert tg.degrees_even()
        circ = euler_circuit(tg)
        assert len(circ) == tg.edge_count() + 1

    def test_d1_rejected(self):
        phi = EdgeFlow()
        with pytest.raises(EquidecompError):
            round_boundary(phi, [((0,), (1,))], {(0,)}, 1)


class TestRoundBoundary:
    def fouts(self, phi, pts):
        out = {}
        for u in pts:
            tot = Fraction(0)
            for g in directions(len(u)):
                v = tuple(a + b for a, b in zip(u, g))
                tot += phi.get(u, v)
            out[u] = tot
        return out

    def test_zero_flow_unchanged(self):
        edges, inside = surface_from_cells([(0, 0)], 2)
        phi = EdgeFlow()
        for e in edges:
            phi.set(*e, Fraction(0))
        trace = round_boundary(phi, edges, inside, 2)
        assert trace.adjustment == 0
        assert all(phi.get(*e) == 0 for e in edges)
        assert trace.max_displacement() == 0

    def test_singleton_point_three_tenths(self):
        edges, inside = surface_from_cells([(5, 5)], 2)
        phi = EdgeFlow()
        for e in edges:
            phi.set(*e, Fraction(0))
        phi.set(*edges[0], Fraction(3, 10))
        trace = round_boundary(phi, edges, inside, 2)
        # fout(S) = 0.3 -> adjusted to 0; all values integral; displacement
        # bounded by (3^d - 2)/2 = 3.5 per edge
        vals = [phi.get(*e) for e in edges]
        assert all(v.denominator == 1 for v in vals)
        assert sum(vals, Fraction(0)) == 0
        assert trace.adjustment == Fraction(-3, 10)
        assert trace.max_displacement() <= Fraction(7, 2)

    def test_fout_preserved_off_adjustment_edge(self):
        rng = random.Random(0)
        edges, inside = surface_from_cells([(0, 0), (0, 1), (1, 1)], 2)
        phi = EdgeFlow()
        for e in edges:
            phi.set(*e, Fraction(rng.randrange(-8, 9), 8))
        # collect vertex fouts over a neighborhood before rounding
        pts = set()
        for u, v in edges:
            pts.add(u)
            pts.add(v)
            for g in directions(2):
                pts.add(tuple(a + b for a, b in zip(u, g)))
                pts.add(tuple(a + b for a, b in zip(v, g)))
        before = self.fouts(phi, pts)
        trace = round_boundary(phi, edges, inside, 2)
        after = self.fouts(phi, pts)
        ua, va = trace.adjustment_edge
        for p in pts:
            if p in (ua, va):
                delta = after[p] - before[p]
                want = trace.adjustment if p == ua else -trace.adjustment
                assert delta == want
            else:
                assert after[p] == before[p], p

    def test_target_overrides_nearest(self):
        edges, inside = surface_from_cells([(2, 2)], 2)
        phi = EdgeFlow()
        for e in edges:
            phi.set(*e, Fraction(0))
        phi.set(*edges[0], Fraction(2, 5))
        round_boundary(phi, edges, inside, 2, target=1)
        assert sum((phi.get(*e) for e in edges), Fraction(0)) == 1


class TestEqualise:
    def test_identical_no_change(self):
        edges, inside = surface_from_cells([(0, 0), (1, 0)], 2)
        phi = EdgeFlow()
        psi = EdgeFlow()
        rng = random.Random(1)
        for e in edges:
            v = Fraction(rng.randrange(-4, 5), 4)
            phi.set(*e, v)
            psi.set(*e, v)
        before = {e: phi.get(*e) for e in edges}
        equalise_boundary(phi, psi, edges, inside, 2)
        assert all(phi.get(*e) == before[e] for e in edges)

    def test_matches_psi_except_one(self):
        rng = random.Random(2)
        edges, inside = surface_from_cells([(0, 0)], 2)
        phi = EdgeFlow()
        psi = EdgeFlow()
        for e in edges:
            phi.set(*e, Fraction(rng.randrange(-4, 5), 4))
            psi.set(*e, Fraction(rng.randrange(-4, 5), 4))
        fouts_before = {}
        pts = {p for e in edges for p in e}
        helper = TestRoundBoundary()
        fouts_before = helper.fouts(phi, pts)
        equalise_boundary(phi, psi, edges, inside, 2)
        mism = [e for e in edges if phi.get(*e) != psi.get(*e)]
        assert len(mism) <= 1
        assert helper.fouts(phi, pts) == fouts_before

    def test_displacement_bound_random(self):
        rng = random.Random(3)
        for d in (2, 3):
            for _ in range(10):
                cells = random_component(rng, d, 6)
                edges, inside = surface_from_cells(cells, d)
                phi = EdgeFlow()
                psi = EdgeFlow()
                for e in edges:
                    phi.set(*e, Fraction(rng.randrange(-8, 9), 8))
                    psi.set(*e, Fraction(rng.randrange(-8, 9), 8))
                before = {e: phi.get(*e) for e in edges}
                diff = max(abs(before[e] - psi.get(*e)) for e in edges)
                equalise_boundary(phi, psi, edges, inside, d)
                worst = max(abs(phi.get(*e) - before[e]) for e in edges)
                assert worst <= len(edges) * diff


class TestCompleteWithin:
    def test_singleton_satisfied(self):
        out, cap = complete_within([(0, 0)], {(0, 0): Fraction(0)}, 2)
        assert out == {} and cap == 0

    def test_two_path_forced(self):
        cells = [(0, 0), (1, 0)]
        out, cap = complete_within(cells, {(0, 0): 1, (1, 0): -1}, 2)
        assert cap == 1
        assert out == {((0, 0), (1, 0)): 1}

    def test_unbalanced_raises(self):
        with pytest.raises(CompletionError):
            complete_within([(0, 0), (1, 0)], {(0, 0): 1, (1, 0): 0}, 2)

    def test_min_cap_matches_gale_hoffman(self):
        rng = random.Random(4)
        from equidecomp.window import canonical_directions
        for d in (2, 3):
            for _ in range(40):
                cells = random_component(rng, d, 8)
                if len(cells) < 2:
                    continue
                chi = [0] * len(cells)
                for _ in range(len(cells) // 2):
                    i, j = rng.randrange(len(cells)), rng.randrange(len(cells))
                    chi[i] += 1
                    chi[j] -= 1
                index = {c: i for i, c in enumerate(cells)}
                adj = []
                for i, c in enumerate(cells):
                    for g in canonical_directions(d):
                        nb = tuple(a + b for a, b in zip(c, g))
                        if nb in index:
                            adj.append((i, index[nb]))
                oracle = gale_hoffman_min_cap(cells, adj, chi)
                demands = {c: chi[i] for i, c in enumerate(cells)}
                if oracle is None:
                    with pytest.raises(CompletionError):
                        complete_within(cells, demands, d)
                    continue
                out, cap = complete_within(cells, demands, d)
                assert cap == oracle
                # verify the flow meets demands exactly
                fout = {c: Fraction(0) for c in cells}
                for (u, v), val in out.items():
                    fout[u] += val
                    fout[v] -= val
                for c, want in demands.items():
                    assert fout[c] == want

    def test_lex_minimal_matches_bruteforce(self):
        rng = random.Random(5)
        from equidecomp.window import canonical_directions

        def brute_lex_min(cells, adj_keys, demands, cap):
            # enumerate all assignments within cap, keep feasible, min by the
            # value sequence in lex order of ordered pairs
            order = sorted(range(len(adj_keys)), key=lambda k: adj_keys[k])
            best = None
            for assign in itertools.product(range(-cap, cap + 1),
                                            repeat=len(adj_keys)):
                fout = {c: 0 for c in cells}
                for k, val in enumerate(assign):
                    u, v = adj_keys[k]
                    fout[u] += val
                    fout[v] -= val
                if any(fout[c] != demands.get(c, 0) for c in cells):
                    continue
                key = tuple(assign[k] for k in order)
                if best is None or key < best[0]:
                    best = (key, assign)
            return best

        for trial in range(12):
            d = 2
            cells = random_component(rng, d, 4)
            index = {c: i for i, c in enumerate(cells)}
            adj_keys = []
            for c in cells:
                for g in canonical_directions(d):
                    nb = tuple(a + b for a, b in zip(c, g))
                    if nb in index:
                        adj_keys.append((c, nb))
            if not (1 <= len(adj_keys) <= 6):
                continue
            chi = [0] * len(cells)
            for _ in range(2):
                i, j = rng.randrange(len(cells)), rng.randrange(len(cells))
                chi[i] += 1
                chi[j] -= 1
            demands = {c: chi[i] for i, c in enumerate(cells)}
            adj_idx = [(index[u], index[v]) for u, v in adj_keys]
            cap = gale_hoffman_min_cap(cells, adj_idx, chi)
            if cap is None:
                continue
            out, got_cap = complete_within(cells, demands, d)
            assert got_cap == cap
            best = brute_lex_min(cells, adj_keys, demands, cap)
            assert best is not None
            got = tuple(out.get(k, 0) for k in sorted(adj_keys))
            assert got == best[0], (cells, demands, got, best[0])

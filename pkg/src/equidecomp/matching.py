"""Equidecomposition from a bounded integer flow: Voronoi cells around a
maximally r-discrete center set, aggregated inter-cell flows, lex-ordered
point assignment, non-null pre-selection, and verification.

Each lattice point joins the cell of its nearest center (graph metric, lex
tie-break).  For adjacent cells the aggregate flow F(u, u') fixes how many
points cross: the lex-least unassigned A-points of the source cell are sent,
in lex order of target cells, and leftovers pair up within their own cell.
The piece of a point is the lattice offset to its partner, so the whole
assignment is a local function of the flow's level sets, the masks and the
center strips, with radius 6r + 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .discrete import DiscreteSet, build_discrete_set, min_strip_gap
from .errors import EquidecompError, WindowTooSmallError
from .flows import shifted
from .gridsets import dilate
from .sequence import IntegerFlow
from .window import Window, canonical_directions, directions


@dataclass
class VoronoiDecomposition:
    centers: DiscreteSet
    r: int
    cell_of: np.ndarray            # int32 center id per point, -1 off-support
    center_points: list[tuple[int, ...]]   # grid indices, lex order of offsets
    dist: np.ndarray               # distance to the owning center

    def cells(self) -> dict[int, np.ndarray]:
        out = {}
        for cid in range(len(self.center_points)):
            out[cid] = self.cell_of == cid
        return out


def build_voronoi(w: Window, centers: DiscreteSet) -> VoronoiDecomposition:
    """Nearest-center cells with lex tie-break (earlier center wins)."""
    r = centers.r
    pts = sorted(tuple(int(x) for x in p) for p in np.argwhere(centers.member))
    if not pts:
        raise EquidecompError("no Voronoi centers on the window")
    INF = np.int32(10 ** 9)
    best = np.full(w.shape, INF, np.int32)
    owner = np.full(w.shape, -1, np.int32)
    shape = w.shape
    for cid, p in enumerate(pts):
        sl = tuple(slice(max(0, c - r), min(n, c + r + 1))
                   for c, n in zip(p, shape))
        local = np.zeros([s.stop - s.start for s in sl], np.int32)
        for ax in range(w.d):
            idx = np.arange(sl[ax].start, sl[ax].stop, dtype=np.int32)
            dd = np.abs(idx - np.int32(p[ax]))
            shp = [1] * w.d
            shp[ax] = len(idx)
            local = np.maximum(local, dd.reshape(shp))
        cur = best[sl]
        win = local < cur          # strict: lex-earlier center keeps ties
        best[sl] = np.where(win, local, cur)
        ow = owner[sl]
        ow[win] = cid
        owner[sl] = ow
    return VoronoiDecomposition(centers=centers, r=r, cell_of=owner,
                                center_points=pts, dist=best)


def voronoi_invariants(vor: VoronoiDecomposition, within: np.ndarray) -> dict:
    """Exhaustive cell facts on the given region: distance <= r, diameter
    <= 2r, and the half-ball around each center stays in its own cell."""
    r = vor.r
    ok_dist = bool((vor.dist[within] <= r).all())
    diam_ok = True
    halfball_ok = True
    half = r // 2
    shape = vor.cell_of.shape
    for cid, p in enumerate(vor.center_points):
        cell = vor.cell_of == cid
        if not (cell & within).any():
            continue
        pts = np.argwhere(cell & within)
        if pts.size:
            ext = int((pts.max(axis=0) - pts.min(axis=0)).max())
            diam_ok &= ext <= 2 * r
        sl = tuple(slice(max(0, c - half), min(n, c + half + 1))
                   for c, n in zip(p, shape))
        if within[p]:
            halfball_ok &= bool((vor.cell_of[sl] == cid).all())
    return {"dist_le_r": ok_dist, "diam_le_2r": diam_ok,
            "halfball_own_cell": halfball_ok}


def cell_support(w: Window, vor: VoronoiDecomposition, resolved: np.ndarray
                 ) -> np.ndarray:
    """Cell ids fully contained in the resolved region (bool per center)."""
    n = len(vor.center_points)
    ok = np.ones(n, bool)
    bad = ~resolved
    ids = vor.cell_of[bad]
    ids = ids[ids >= 0]
    if ids.size:
        ok[np.unique(ids)] = False
    return ok


def choose_voronoi_r(w: Window, flow: IntegerFlow, resolved: np.ndarray,
                     r_start: int = 2, r_max: int = 64,
                     preselect_margin: bool = False
                     ) -> tuple[int, VoronoiDecomposition, dict[str, Any]]:
    """Smallest r (doubling then binary refinement) such that every fully
    resolved cell satisfies min(|V cap A|, |V cap B|) >= sum over boundary
    edges of |f| (+1 per edge with the preselect margin)."""

    def attempt(r):
        centers = build_discrete_set(w, r)
        vor = build_voronoi(w, centers)
        ok_cells = cell_support(w, vor, resolved)
        if not ok_cells.any():
            return None, None
        cert = _cell_certificate(w, flow, vor, ok_cells, preselect_margin)
        return vor, cert

    def usable(cert):
        return cert is not None and cert["cells_passing"] > 0

    r = r_start
    found = None
    best = None
    while r <= r_max:
        vor, cert = attempt(r)
        if usable(cert):
            if best is None or cert["cells_passing"] > best[2]["cells_passing"]:
                best = (r, vor, cert)
        if cert is not None and cert["all_pass"] and cert["cells_checked"] > 0:
            found = (r, vor, cert)
            break
        r *= 2
    if found is None:
        # no radius satisfies the inequality on every fully-resolved cell;
        # fall back to the radius with the most passing cells (failing cells
        # are excluded from the matching and reported)
        if best is None:
            raise WindowTooSmallError(
                f"no feasible Voronoi radius up to {r_max}: A/B too sparse")
        return best
    lo = max(r_start, found[0] // 2 + 1)
    for cand in range(lo, found[0]):
        vor, cert = attempt(cand)
        if cert is not None and cert["all_pass"] and cert["cells_checked"] > 0:
            found = (cand, vor, cert)
            break
    return found


def _cell_certificate(w: Window, flow: IntegerFlow, vor: VoronoiDecomposition,
                      ok_cells: np.ndarray, preselect_margin: bool
                      ) -> dict[str, Any]:
    maskA, maskB = w.maskA, w.maskB
    n = len(vor.center_points)
    countA = np.zeros(n, np.int64)
    countB = np.zeros(n, np.int64)
    ids = vor.cell_of
    valid = ids >= 0
    np.add.at(countA, ids[valid & maskA], 1)
    np.add.at(countB, ids[valid & maskB], 1)
    flow_sum = np.zeros(n, np.int64)
    edge_cnt = np.zeros(n, np.int64)
    for g in canonical_directions(w.d):
        nb = shifted(ids, g)
        nb_valid = shifted((ids >= 0).astype(np.uint8), g).astype(bool)
        crossing = valid & nb_valid & (ids != nb)
        vals = np.abs(np.where(flow.defined[g], flow.values[g], 0)).astype(np.int64)
        np.add.at(flow_sum, ids[crossing], vals[crossing])
        np.add.at(flow_sum, nb[crossing], vals[crossing])
        one = np.ones_like(vals)
        np.add.at(edge_cnt, ids[crossing], one[crossing])
        np.add.at(edge_cnt, nb[crossing], one[crossing])
    need = flow_sum + (edge_cnt if preselect_margin else 0)
    checked = int(ok_cells.sum())
    pass_mask = (np.minimum(countA, countB) >= need) & ok_cells
    return {
        "all_pass": bool((pass_mask | ~ok_cells).all()),
        "cells_checked": checked,
        "cells_passing": int(pass_mask.sum()),
        "worst_margin": int((np.minimum(countA, countB) - need)[ok_cells].min())
        if checked else None,
        "preselect_margin": preselect_margin,
        "pass_mask": pass_mask,
    }


def aggregate_cell_flow(w: Window, flow: IntegerFlow, vor: VoronoiDecomposition
                        ) -> dict[tuple[int, int], int]:
    """F(u, u') = total flow from cell u to cell u' (antisymmetric)."""
    agg: dict[tuple[int, int], int] = {}
    ids = vor.cell_of
    for g in canonical_directions(w.d):
        vals = np.where(flow.defined[g], flow.values[g], 0)
        nb = shifted(ids, g)
        nb_valid = shifted((ids >= 0).astype(np.uint8), g).astype(bool)
        crossing = (ids >= 0) & nb_valid & (ids != nb) & (vals != 0)
        for ix in np.argwhere(crossing):
            t = tuple(ix)
            a, b = int(ids[t]), int(nb[t])
            v = int(vals[t])
            agg[(a, b)] = agg.get((a, b), 0) + v
            agg[(b, a)] = agg.get((b, a), 0) - v
    return {k: v for k, v in agg.items() if v != 0}


@dataclass
class PieceAssignment:
    window: Window
    r: int
    assignment: dict[tuple[int, ...], tuple[int, ...]]  # A-offset -> lattice offset
    pieces: dict[tuple[int, ...], list[tuple[int, ...]]]
    unresolved: list[tuple[int, ...]]
    preselected: dict[tuple[int, ...], list[tuple[int, ...]]] = field(
        default_factory=dict)

    def used_offsets(self) -> list[tuple[int, ...]]:
        return sorted(self.pieces.keys())

    def to_json(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "piece_count": len(self.pieces),
            "assigned": len(self.assignment),
            "unresolved": len(self.unresolved),
            "pieces": {",".join(map(str, k)): len(v)
                       for k, v in sorted(self.pieces.items())},
            "preselected": {",".join(map(str, k)): len(v)
                            for k, v in sorted(self.preselected.items())},
        }


def assign_pieces(w: Window, flow: IntegerFlow, vor: VoronoiDecomposition,
                  resolved: np.ndarray,
                  extra_flow: dict | None = None,
                  maskA: np.ndarray | None = None,
                  maskB: np.ndarray | None = None,
                  cell_filter: np.ndarray | None = None) -> PieceAssignment:
    """The lex-ordered cell assignment of the matching lemma.

    Only cells fully inside the resolved region whose aggregate-flow
    neighbors are also fully resolved take part; A-points elsewhere are
    reported unresolved.  extra_flow (cell-pair -> value) is subtracted from
    the aggregated flow (the pre-selection path flows); the mask overrides
    support matching A minus the pre-selected points."""
    maskA = w.maskA if maskA is None else maskA
    maskB = w.maskB if maskB is None else maskB
    ids = vor.cell_of
    ok_cells = cell_support(w, vor, resolved)
    if cell_filter is not None:
        ok_cells &= cell_filter
    agg = aggregate_cell_flow(w, flow, vor)
    if extra_flow:
        for (a, b), v in extra_flow.items():
            if v:
                agg[(a, b)] = agg.get((a, b), 0) - v
                agg[(b, a)] = agg.get((b, a), 0) + v
        agg = {k: v for k, v in agg.items() if v != 0}
    n = len(vor.center_points)
    neighbors: dict[int, list[int]] = {i: [] for i in range(n)}
    for (a, b) in agg:
        neighbors[a].append(b)
    # cell point lists in lex order of offsets
    cellA: dict[int, list[tuple[int, ...]]] = {i: [] for i in range(n)}
    cellB: dict[int, list[tuple[int, ...]]] = {i: [] for i in range(n)}
    order = np.argwhere(maskA | maskB)
    for p in sorted(map(tuple, order)):
        cid = int(ids[p])
        if cid < 0:
            continue
        if maskA[p]:
            cellA[cid].append(p)
        if maskB[p]:
            cellB[cid].append(p)
    center_key = {i: w.offset_of(vor.center_points[i]) for i in range(n)}
    assignment: dict[tuple[int, ...], tuple[int, ...]] = {}
    unresolved: list[tuple[int, ...]] = []
    outA: dict[int, dict[int, list]] = {}
    outB: dict[int, dict[int, list]] = {}
    for i in range(n):
        if not ok_cells[i]:
            unresolved.extend(w.offset_of(p) for p in cellA[i])
            continue
        targets = sorted((j for j in neighbors[i]), key=lambda j: center_key[j])
        availA = list(cellA[i])
        availB = list(cellB[i])
        outgoing: dict[int, list] = {}
        incoming: dict[int, list] = {}
        for j in targets:
            Fij = agg.get((i, j), 0)
            if Fij > 0:
                take, availA = availA[:Fij], availA[Fij:]
                if len(take) != Fij:
                    raise EquidecompError(
                        "cell certificate violated: not enough A points")
                outgoing[j] = take
            elif Fij < 0:
                take, availB = availB[:-Fij], availB[-Fij:]
                if len(take) != -Fij:
                    raise EquidecompError(
                        "cell certificate violated: not enough B points")
                incoming[j] = take
        outA[i] = outgoing
        outB[i] = incoming
        # within-cell leftovers pair up in lex order
        if len(availA) != len(availB):
            raise EquidecompError(
                f"within-cell count mismatch {len(availA)} vs {len(availB)}: "
                "flow does not meet the demand")
        for pa, pb in zip(availA, availB):
            assignment[w.offset_of(pa)] = w.offset_of(pb)
    # cross-cell pairs: A(u, u') joins B(u', u) in lex order; crossings into
    # cells outside the resolved support strand their points (the partners
    # live beyond the resolved region)
    for i in range(n):
        if not ok_cells[i]:
            continue
        for j, apts in outA[i].items():
            bpts = outB.get(j, {}).get(i) if ok_cells[j] else None
            if bpts is None:
                unresolved.extend(w.offset_of(p) for p in apts)
                continue
            if len(bpts) != len(apts):
                raise EquidecompError(
                    f"|A({i},{j})| != |B({j},{i})|: aggregate flow bug")
            for pa, pb in zip(apts, bpts):
                assignment[w.offset_of(pa)] = w.offset_of(pb)
    pieces: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for src, dst in assignment.items():
        off = tuple(b - a for a, b in zip(src, dst))
        pieces.setdefault(off, []).append(src)
    for v in pieces.values():
        v.sort()
    return PieceAssignment(window=w, r=vor.r, assignment=assignment,
                           pieces=pieces, unresolved=sorted(unresolved))


def verify_equidecomposition(pa: PieceAssignment, w: Window,
                             trust: np.ndarray | None = None) -> dict[str, Any]:
    """Injectivity, image in B, offset bound, piece counts, B-coverage."""
    maskA, maskB = w.maskA, w.maskB
    report: dict[str, Any] = {"violations": []}
    targets = list(pa.assignment.values())
    if len(set(targets)) != len(targets):
        report["violations"].append("assignment is not injective")
    bound = 4 * pa.r + 1
    for src, dst in pa.assignment.items():
        off = tuple(b - a for a, b in zip(src, dst))
        if max(abs(x) for x in off) > bound:
            report["violations"].append(
                f"offset {off} exceeds 4r+1 = {bound}")
            break
    bad_img = 0
    for dst in targets:
        try:
            if not maskB[w.index_of(dst)]:
                bad_img += 1
        except IndexError:
            bad_img += 1
    if bad_img:
        report["violations"].append(f"{bad_img} images outside B")
    bad_src = 0
    for src in pa.assignment:
        if not maskA[w.index_of(src)]:
            bad_src += 1
    if bad_src:
        report["violations"].append(f"{bad_src} sources outside A")
    hit = np.zeros(w.shape, bool)
    for dst in targets:
        try:
            hit[w.index_of(dst)] = True
        except IndexError:
            pass
    region = trust if trust is not None else np.ones(w.shape, bool)
    validB = maskB & region
    covered = int((hit & validB).sum())
    totalB = int(validB.sum())
    report.update({
        "passed": not report["violations"],
        "assigned": len(pa.assignment),
        "unresolved": len(pa.unresolved),
        "piece_count": len(pa.pieces),
        "piece_sizes": {",".join(map(str, k)): len(v)
                        for k, v in sorted(pa.pieces.items())},
        "b_points_in_region": totalB,
        "b_points_hit": covered,
        "b_coverage": covered / totalB if totalB else None,
        "max_offset": max((max(abs(x) for x in
                               tuple(b - a for a, b in zip(s, t))))
                          for s, t in pa.assignment.items()) if pa.assignment
        else 0,
    })
    return report


def extract_z_sets(w: Window, flow: IntegerFlow
                   ) -> dict[tuple[tuple[int, ...], int], np.ndarray]:
    """Level sets Z_{gamma, l} = {v : f(v, gamma v) = l} over defined edges,
    for every direction gamma (both orientations)."""
    out = {}
    for g in canonical_directions(w.d):
        vals = flow.values[g]
        dfn = flow.defined[g]
        levels = np.unique(vals[dfn]) if dfn.any() else np.array([], np.int8)
        for l in levels:
            out[(g, int(l))] = dfn & (vals == l)
        ng = tuple(-x for x in g)
        # f(v, -g . v) = -f(v - g, g (v - g)) = -vals[g][v - g]
        back_vals = shifted(vals, ng)
        back_dfn = shifted(dfn.astype(np.uint8), ng).astype(bool)
        for l in levels:
            out[(ng, -int(l))] = back_dfn & (back_vals == l)
    return out


def z_sets_partition_ok(w: Window, flow: IntegerFlow) -> bool:
    zs = extract_z_sets(w, flow)
    for g in canonical_directions(w.d):
        union = np.zeros(w.shape, np.int64)
        for (gg, l), mask in zs.items():
            if gg == g:
                union += mask
        if (union[flow.defined[g]] != 1).any():
            return False
    return True


def flow_from_z_sets(w: Window, zs: dict) -> IntegerFlow:
    """Rebuild an IntegerFlow from level sets (canonical directions only)."""
    out = IntegerFlow(w)
    for (g, l), mask in zs.items():
        if g > (0,) * w.d:
            out.defined[g] |= mask
            if l:
                out.values[g][mask] = l
    return out


# -- pre-selection ------------------------------------------------------------


def lex_min_shortest_path(src: tuple[int, ...], t: tuple[int, ...]
                          ) -> list[tuple[int, ...]]:
    """Lex-minimal shortest path from src to src + t in the orbit graph:
    greedily take the lex-least step that keeps the remaining distance
    shrinking."""
    cur = tuple(src)
    goal = tuple(a + b for a, b in zip(src, t))
    path = [cur]
    d = len(src)
    while cur != goal:
        rem = tuple(g - c for c, g in zip(cur, goal))
        dist = max(abs(x) for x in rem)
        best = None
        for g in directions(d):
            nrem = tuple(r - s for r, s in zip(rem, g))
            if max((abs(x) for x in nrem), default=0) == dist - 1:
                cand = tuple(c + s for c, s in zip(cur, g))
                if best is None or cand < best:
                    best = cand
        cur = best
        path.append(cur)
    return path


def preselect_nonnull(w: Window, offsets: Sequence[tuple[int, ...]], r: int,
                      resolved: np.ndarray,
                      spacing: int | None = None
                      ) -> tuple[dict, dict, dict]:
    """Pick one A-point per usable offset with A_t + t in B, all selections
    pairwise farther than the spacing apart, and return the unit path flows
    to subtract before matching.

    Returns (selected: offset -> A-offset-point, path_flows: cell-pair aggregate
    deltas are not computed here; instead edge deltas, empty_offsets)."""
    maskA, maskB = w.maskA, w.maskB
    if spacing is None:
        spacing = 8 * r + 4   # keeps lex-min shortest paths edge-disjoint
    selected: dict[tuple[int, ...], tuple[int, ...]] = {}
    edge_deltas: dict[tuple[tuple[int, ...], tuple[int, ...]], int] = {}
    empty: list[tuple[int, ...]] = []
    chosen_pts: list[tuple[int, ...]] = []
    for t in sorted(offsets, key=lambda x: tuple(x)):
        delta = tuple(t)
        shiftB = shifted(maskB.astype(np.uint8), delta).astype(bool)
        cand = maskA & shiftB & resolved
        # the image point must be resolved too
        img_ok = shifted(resolved.astype(np.uint8), delta).astype(bool)
        cand &= img_ok
        pick = None
        for p in sorted(map(tuple, np.argwhere(cand))):
            if all(max(abs(a - b) for a, b in zip(p, q)) > spacing
                   for q in chosen_pts):
                pick = p
                break
        if pick is None:
            empty.append(t)
            continue
        chosen_pts.append(pick)
        src_off = w.offset_of(pick)
        selected[t] = src_off
        path = lex_min_shortest_path(src_off, t)
        for a, b in zip(path[:-1], path[1:]):
            key = (a, b)
            edge_deltas[key] = edge_deltas.get(key, 0) + 1
    return selected, edge_deltas, {"empty_offsets": empty, "spacing": spacing}


def path_flow_cell_aggregate(w: Window, vor: VoronoiDecomposition,
                             edge_deltas: dict) -> dict[tuple[int, int], int]:
    """Aggregate the pre-selection path flows into cell-pair totals, to be
    subtracted from the matched flow."""
    out: dict[tuple[int, int], int] = {}
    ids = vor.cell_of
    for (a, b), v in edge_deltas.items():
        ia = ids[w.index_of(a)]
        ib = ids[w.index_of(b)]
        if ia < 0 or ib < 0 or ia == ib:
            continue
        ia, ib = int(ia), int(ib)
        out[(ia, ib)] = out.get((ia, ib), 0) + v
        out[(ib, ia)] = out.get((ib, ia), 0) - v
    return {k: v for k, v in out.items() if v != 0}


# -- box dimension ------------------------------------------------------------


def render_piece_grid(pa: PieceAssignment, w: Window, cells: int = 256,
                      trust: np.ndarray | None = None
                      ) -> tuple[np.ndarray, dict[int, tuple[int, ...]]]:
    """Rasterize pieces on a cells x cells torus grid (k = 2 only).

    Each grid cell takes the piece id of the assigned A-samples landing in
    it; conflicting samples mark the cell boundary (-2).  A-cells (by exact
    membership of the cell center) without usable samples are unresolved
    (-3); non-A cells are background (-1)."""
    if w.k != 2:
        raise EquidecompError("rendering requires k = 2")
    bits = w.gen.bits
    shiftb = bits - int(math.log2(cells))
    grid = np.full((cells, cells), -1, np.int32)
    offsets_used = pa.used_offsets()
    piece_id = {off: i for i, off in enumerate(offsets_used)}
    id_piece = {i: off for off, i in piece_id.items()}
    # A-cells by exact center membership
    from .fixedpoint import TorusPoint
    half = 1 << (shiftb - 1)
    if w.shapeA is not None:
        for i in range(cells):
            for j in range(cells):
                x = (i << shiftb) + half
                y = (j << shiftb) + half
                if w.shapeA.contains(TorusPoint((x, y), bits)):
                    grid[i, j] = -3
    def cell_of_point(p):
        return (p.coords[0] >> shiftb, p.coords[1] >> shiftb)
    region = trust if trust is not None else np.ones(w.shape, bool)
    for src, dst in pa.assignment.items():
        idx = w.index_of(src)
        if not region[idx]:
            continue
        pos = w.act(src)
        c = cell_of_point(pos)
        pid = piece_id[tuple(b - a for a, b in zip(src, dst))]
        cur = grid[c]
        if cur == -3 or cur == -1:
            grid[c] = pid
        elif cur >= 0 and cur != pid:
            grid[c] = -2
    for src in pa.unresolved:
        idx = w.index_of(src)
        if not region[idx]:
            continue
        pos = w.act(src)
        c = cell_of_point(pos)
        if grid[c] >= 0 or grid[c] == -3:
            grid[c] = -3 if grid[c] == -3 else -2
    return grid, id_piece


def box_dimension_estimate(pa: PieceAssignment, w: Window,
                           resolutions: Sequence[int] = (64, 128, 256),
                           cells: int = 256,
                           trust: np.ndarray | None = None) -> dict[str, Any]:
    """Count delta-grid boxes meeting rendered piece boundaries or the
    unresolved region, and fit the log-log slope against 1/delta."""
    if len(resolutions) < 3:
        raise EquidecompError("need at least 3 resolutions")
    grid, _ = render_piece_grid(pa, w, cells, trust)
    n = cells
    boundary = np.zeros((n, n), bool)
    for ax, sh in ((0, 1), (0, -1), (1, 1), (1, -1)):
        nb = np.roll(grid, sh, axis=ax)
        boundary |= (grid != nb) & ((grid >= 0) | (nb >= 0))
    boundary |= grid == -2
    unres = grid == -3
    marked = boundary | unres
    counts = []
    for res in resolutions:
        f = n // res
        if f < 1:
            raise EquidecompError("resolution finer than the render grid")
        red = marked.reshape(res, f, res, f).any(axis=(1, 3))
        counts.append(int(red.sum()))
    xs = [math.log(r) for r in resolutions]
    ys = [math.log(max(c, 1)) for c in counts]
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) \
        / sum((x - mx) ** 2 for x in xs)
    return {
        "resolutions": list(resolutions),
        "box_counts": counts,
        "fitted_slope": slope,
        "render_cells": cells,
        "caveat": "the ambient-dimension-minus-zeta regime of the full "
                  "construction is out of reach at window scale; this slope "
                  "is a finite-resolution trend only",
    }

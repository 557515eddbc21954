"""Rounding a sequence of dyadic flows on a toast sequence.

Steps, per arrival order of the layers: copy the stage flow onto the
boundary edges of every certified component, round along each component's
hole and filled-set boundaries (the adjustment pinning each surface's
flow-out to the nearest integer), then complete an exact integer flow inside
every region enclosed by rounded boundaries: component interiors, hole
residuals, and window residual pieces all of whose outward edges carry
defined values.  The gate audits, per surface, that the stage flow's
out-flow lies within 1/2 of the true count |A cap S'| - |B cap S'|, so each
adjustment recovers the exact demand and every completion is feasible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .errors import CompletionError, GateViolationError
from .flows import shifted, tail_bound
from .gridsets import GridComponent, boundary_edges, label_components
from .rounding import (Edge, EdgeFlow, RoundingTrace, complete_within,
                       round_boundary)
from .toast import ToastSequence
from .window import Window, canonical_directions, directions

MAX_FLOW_VALUE = 120  # int8 guard for the dense integer flow store


class IntegerFlow:
    """Dense integer flow on a window with per-edge defined flags."""

    def __init__(self, w: Window):
        self.window = w
        self.dirs = canonical_directions(w.d)
        self.values = {g: np.zeros(w.shape, np.int8) for g in self.dirs}
        self.defined = {g: np.zeros(w.shape, bool) for g in self.dirs}

    def _locate(self, u: tuple[int, ...], v: tuple[int, ...]):
        g = tuple(b - a for a, b in zip(u, v))
        if g > (0,) * len(g):
            return g, u, 1
        return tuple(-x for x in g), v, -1

    def set_edge(self, u, v, val: int, overwrite: bool = False) -> None:
        g, base, sign = self._locate(u, v)
        if abs(val) > MAX_FLOW_VALUE:
            raise CompletionError(f"flow value {val} exceeds the int8 guard")
        if not overwrite and self.defined[g][base]:
            raise CompletionError(f"edge {u}->{v} already fixed (stage overlap)")
        self.values[g][base] = sign * val
        self.defined[g][base] = True

    def get_edge(self, u, v) -> tuple[int, bool]:
        g, base, sign = self._locate(u, v)
        return sign * int(self.values[g][base]), bool(self.defined[g][base])

    def mark_interior(self, region: np.ndarray) -> None:
        """Mark all pairs inside the region as defined (zero unless set)."""
        for g in self.dirs:
            both = region & shifted(region.astype(np.uint8), g).astype(bool)
            self.defined[g] |= both

    def fout_and_complete(self) -> tuple[np.ndarray, np.ndarray]:
        """(fout grid, all-incident-edges-defined grid), exact int64."""
        w = self.window
        fout = np.zeros(w.shape, np.int64)
        alldef = np.ones(w.shape, bool)
        for g in self.dirs:
            vals = self.values[g].astype(np.int64)
            dfn = self.defined[g]
            fout += np.where(dfn, vals, 0)
            back_v = shifted(vals, tuple(-x for x in g))
            back_d = shifted(dfn.astype(np.uint8), tuple(-x for x in g)).astype(bool)
            fout -= np.where(back_d, back_v, 0)
            alldef &= dfn & back_d
        # rim vertices lack neighbors: never complete
        interior = w.valid_mask(1)
        return fout, alldef & interior

    def max_abs(self) -> int:
        return max(int(np.abs(np.where(self.defined[g], self.values[g], 0)).max())
                   for g in self.dirs)

    def nonzero_edges(self):
        for g in self.dirs:
            for ix in np.argwhere(self.defined[g] & (self.values[g] != 0)):
                u = tuple(int(x) for x in ix)
                v = tuple(int(a + b) for a, b in zip(ix, g))
                yield u, v, int(self.values[g][tuple(ix)])


@dataclass
class Surface:
    """A hole of a component, or the component with its holes filled."""

    kind: str                       # "hole" | "fill"
    inside: set[tuple[int, ...]]
    edges: list[Edge]
    countA: int
    countB: int


@dataclass
class RoundedLayer:
    layer_role: str
    layer_index: int
    stage: int
    comps_rounded: int
    comps_skipped: int
    max_gate_error: Fraction
    traces: list[RoundingTrace] = field(default_factory=list)


@dataclass
class RoundSequenceResult:
    flow: IntegerFlow
    resolved: np.ndarray            # vertices whose region was completed
    unresolved: np.ndarray
    per_layer: list[RoundedLayer]
    gate_report: dict[str, Any]
    completion_stats: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        return {
            "per_layer": [{
                "layer": f"{r.layer_role}{r.layer_index}",
                "stage": r.stage,
                "comps_rounded": r.comps_rounded,
                "comps_skipped": r.comps_skipped,
                "max_gate_error": str(r.max_gate_error),
                "max_displacement": str(max((t.max_displacement()
                                             for t in r.traces),
                                            default=Fraction(0))),
            } for r in self.per_layer],
            "gate": self.gate_report,
            "completion": self.completion_stats,
            "flow_max_abs": self.flow.max_abs(),
            "resolved_fraction": float(self.resolved.mean()),
        }


def comp_surfaces(w: Window, comp: GridComponent, maskA: np.ndarray,
                  maskB: np.ndarray) -> list[Surface]:
    """Hole surfaces (lex order) then the filled set, with exact counts."""
    dirs = directions(w.d)
    out = []
    off = np.array([s.start for s in comp.bbox])
    hole_list = sorted(comp.holes,
                       key=lambda h: tuple(np.argwhere(h)[0] + off) if h.any() else ())
    for h in hole_list:
        cells = {tuple(int(x) for x in (p + off)) for p in np.argwhere(h)}
        edges = boundary_edges(h, comp.bbox, w.shape, dirs)
        a = sum(1 for c in cells if maskA[c])
        b = sum(1 for c in cells if maskB[c])
        out.append(Surface("hole", cells, edges, a, b))
    fl = comp.fill_local()
    cells = {tuple(int(x) for x in (p + off)) for p in np.argwhere(fl)}
    edges = boundary_edges(fl, comp.bbox, w.shape, dirs)
    a = sum(1 for c in cells if maskA[c])
    b = sum(1 for c in cells if maskB[c])
    out.append(Surface("fill", cells, edges, a, b))
    return out


def collect_layer_edges(w: Window, seq: ToastSequence,
                        focus: np.ndarray | None = None) -> list[list[Edge]]:
    """All boundary edges of every certified (and focused) component, per layer."""
    out = []
    dirs = directions(w.d)
    for layer in seq.layers:
        edges: list[Edge] = []
        for comp in layer.comps:
            if comp.clipped or (focus is not None
                                and not focus[comp.bbox].all()):
                continue
            for h in comp.holes:
                edges.extend(boundary_edges(h, comp.bbox, w.shape, dirs))
            edges.extend(boundary_edges(comp.fill_local(), comp.bbox,
                                        w.shape, dirs))
        out.append(edges)
    return out


def stage_values_for_layers(w: Window, seq: ToastSequence,
                            stages: Sequence[int],
                            focus: np.ndarray | None = None
                            ) -> list[dict[Edge, Fraction]]:
    """Exact f_{m_i} values on each layer's boundary edges, computed once per
    distinct stage."""
    from .flows import fm_on_edges
    per_layer_edges = collect_layer_edges(w, seq, focus)
    by_stage: dict[int, set[Edge]] = {}
    for m, edges in zip(stages, per_layer_edges):
        by_stage.setdefault(m, set()).update(edges)
    cache: dict[int, dict[Edge, Fraction]] = {}
    for m, edges in by_stage.items():
        cache[m] = fm_on_edges(w, m, sorted(edges))
    return [{e: cache[m][e] for e in edges}
            for m, edges in zip(stages, per_layer_edges)]


def round_sequence(w: Window, seq: ToastSequence, stages: Sequence[int],
                   flow_values: Sequence[dict[Edge, Fraction]],
                   maskA: np.ndarray | None = None,
                   maskB: np.ndarray | None = None,
                   gate_mode: str = "measured",
                   fitted_c: float | None = None, eps: float | None = None,
                   lex_budget: int = 140,
                   focus: np.ndarray | None = None) -> RoundSequenceResult:
    """Round the stage flows on the toast layers and complete everything the
    rounded boundaries enclose.

    stages[i] is the dyadic stage m used for layer i (arrival order);
    flow_values[i] maps that layer's boundary edges to exact values of
    f_{stages[i]}.  gate_mode "measured" enforces, per surface,
    |fout g(S') - (|A cap S'| - |B cap S'|)| < 1/2 exactly; "fitted" enforces
    the tail-bound inequality (3^d-1)(d_i+1)^d tail(m_i) < 1/2 with the
    supplied constants; "report" records both without refusing.

    focus restricts the rounding to components lying entirely inside that
    mask (their boundary edges reach one step beyond it, so callers leave a
    one-cell margin toward the stage-valid region); default is the whole
    window.
    """
    maskA = w.maskA if maskA is None else maskA
    maskB = w.maskB if maskB is None else maskB
    if len(stages) != len(seq.layers) or len(flow_values) != len(seq.layers):
        raise ValueError("need one stage and one value map per layer")
    flow = IntegerFlow(w)
    per_layer: list[RoundedLayer] = []
    gate: dict[str, Any] = {"mode": gate_mode, "layers": []}
    rounded_comps: list[tuple[int, GridComponent]] = []
    for li, layer in enumerate(seq.layers):
        m = stages[li]
        vals = flow_values[li]
        rl = RoundedLayer(layer_role=layer.role, layer_index=layer.index,
                          stage=m, comps_rounded=0, comps_skipped=0,
                          max_gate_error=Fraction(0))
        d_i = layer.max_diameter()
        if gate_mode == "fitted":
            if fitted_c is None or eps is None:
                raise GateViolationError("fitted gate needs c and eps")
            bound = (3 ** w.d - 1) * (d_i + 1) ** w.d \
                * tail_bound(m, fitted_c, w.d, eps)
            gate["layers"].append({"layer": f"{layer.role}{layer.index}",
                                   "formula_value": bound})
            if bound >= 0.5:
                raise GateViolationError(
                    f"layer {layer.role}{layer.index}: fitted gate "
                    f"{bound:.3g} >= 1/2 (diameter {d_i}, stage {m})")
        for comp in layer.comps:
            if comp.clipped or (focus is not None
                                and not focus[comp.bbox].all()):
                rl.comps_skipped += 1
                continue
            surfaces = comp_surfaces(w, comp, maskA, maskB)
            # gate audit per surface, exact
            worst = Fraction(0)
            for s in surfaces:
                fout_g = sum((vals[e] for e in s.edges), Fraction(0))
                err = abs(fout_g - (s.countA - s.countB))
                worst = max(worst, err)
            rl.max_gate_error = max(rl.max_gate_error, worst)
            if gate_mode == "measured" and worst >= Fraction(1, 2):
                raise GateViolationError(
                    f"layer {layer.role}{layer.index}: measured gate error "
                    f"{worst} >= 1/2 on a component of diameter {comp.diameter}")
            phi = EdgeFlow()
            seen: set[Edge] = set()
            for s in surfaces:
                for e in s.edges:
                    if e not in seen:
                        phi.set(*e, vals[e])
                        seen.add(e)
            for s in surfaces:
                target = s.countA - s.countB if gate_mode != "off" else None
                trace = round_boundary(phi, s.edges, s.inside, w.d,
                                       target=target)
                rl.traces.append(trace)
            for e in seen:
                val = phi.get(*e)
                if val.denominator != 1:
                    raise CompletionError("non-integral boundary value")
                flow.set_edge(*e, int(val))
            rl.comps_rounded += 1
            rounded_comps.append((li, comp))
        per_layer.append(rl)
        gate["layers"].append({
            "layer": f"{layer.role}{layer.index}", "stage": m,
            "max_measured_error": str(rl.max_gate_error),
            "max_diameter": d_i,
        })
    resolved, stats = _complete_all(w, flow, rounded_comps, maskA, maskB,
                                    lex_budget)
    unresolved = ~resolved
    return RoundSequenceResult(flow=flow, resolved=resolved,
                               unresolved=unresolved, per_layer=per_layer,
                               gate_report=gate, completion_stats=stats)


def _complete_all(w: Window, flow: IntegerFlow,
                  rounded_comps: list[tuple[int, GridComponent]],
                  maskA: np.ndarray, maskB: np.ndarray, lex_budget: int
                  ) -> tuple[np.ndarray, dict[str, Any]]:
    """Complete every region enclosed by rounded boundaries.

    The filled sets of the rounded components form a laminar family (later
    layers swallow earlier components or keep distance 3), so the complement
    graph's components are: per component, its body minus directly nested
    filled sets; per hole, the hole minus nested filled sets; and the window
    residual.  Each connected piece whose outward edges are all defined gets
    an exact integer completion; everything else stays unresolved."""
    shape = w.shape
    resolved = np.zeros(shape, bool)
    stats = {"regions": 0, "cells": 0, "max_cap": 0, "infeasible": 0,
             "unresolved_pieces": 0}

    # paint the laminar structure: big fills first, bodies on top, nested
    # fills overwrite -- leaving per-cell the innermost region id
    order = sorted(range(len(rounded_comps)),
                   key=lambda k: -int(rounded_comps[k][1].fill_local().sum()))
    paint = np.zeros(shape, np.int32)
    for rank, k in enumerate(order):
        comp = rounded_comps[k][1]
        fl = comp.fill_local()
        paint[comp.bbox][fl] = 2 * (k + 1)
        paint[comp.bbox][comp.local] = 2 * (k + 1) + 1

    def complete_piece(local_mask: np.ndarray, bbox: tuple[slice, ...]) -> bool:
        pts = np.argwhere(local_mask)
        off = np.array([s.start for s in bbox])
        # pieces touching the window rim are never completed
        for ax in range(w.d):
            if (pts[:, ax] + off[ax] == 0).any() \
                    or (pts[:, ax] + off[ax] == shape[ax] - 1).any():
                return False
        # gather outward-edge definedness and demands, vectorized per direction
        pad = tuple(slice(max(0, s.start - 1), min(n, s.stop + 1))
                    for s, n in zip(bbox, shape))
        big = np.zeros(tuple(s.stop - s.start for s in pad), bool)
        inner = tuple(slice(bbox[i].start - pad[i].start,
                            bbox[i].stop - pad[i].start) for i in range(w.d))
        big[inner] = local_mask
        chi = np.where(big, maskA[pad].astype(np.int64)
                       - maskB[pad].astype(np.int64), 0)
        for g in canonical_directions(w.d):
            vals = np.where(flow.defined[g][pad], flow.values[g][pad], 0) \
                .astype(np.int64)
            dfn = flow.defined[g][pad]
            nb_fwd = shifted(big.astype(np.uint8), g).astype(bool)
            out_fwd = big & ~nb_fwd          # edge (u, u+g) leaves the piece
            if (out_fwd & ~dfn).any():
                return False
            chi -= np.where(out_fwd, vals, 0)
            ng = tuple(-x for x in g)
            nb_back = shifted(big.astype(np.uint8), ng).astype(bool)
            out_back = big & ~nb_back        # edge (u, u-g) leaves the piece
            back_def = shifted(dfn.astype(np.uint8), ng).astype(bool)
            if (out_back & ~back_def).any():
                return False
            back_vals = shifted(vals, ng)
            chi += np.where(out_back, back_vals, 0)
        cells = [tuple(int(x + o) for x, o in zip(p, off)) for p in pts]
        demands = {}
        for p, c in zip(pts, cells):
            local = tuple(int(x) for x in p)
            padded = tuple(local[i] + inner[i].start for i in range(w.d))
            demands[c] = int(chi[padded])
        values, cap = complete_within(cells, demands, w.d, lex_budget)
        for g in canonical_directions(w.d):
            both = big & shifted(big.astype(np.uint8), g).astype(bool)
            flow.defined[g][pad] |= both
        for (u, v), val in values.items():
            flow.set_edge(u, v, val, overwrite=True)
        for c in cells:
            resolved[c] = True
        stats["regions"] += 1
        stats["cells"] += len(cells)
        stats["max_cap"] = max(stats["max_cap"], cap)
        return True

    # bodies and holes of every rounded component (pieces of their paint ids)
    for k, (li, comp) in enumerate(rounded_comps):
        body_id = 2 * (k + 1) + 1
        hole_id = 2 * (k + 1)
        sub = paint[comp.bbox]
        for pid, required in ((body_id, True), (hole_id, bool(comp.holes))):
            if not required:
                continue
            region = sub == pid
            if not region.any():
                continue
            lab, n = label_components(region)
            for ci in range(1, n + 1):
                piece = lab == ci
                try:
                    ok = complete_piece(piece, comp.bbox)
                except CompletionError:
                    stats["infeasible"] += 1
                    ok = False
                if not ok:
                    stats["unresolved_pieces"] += 1

    # the window residual (paint 0)
    residual = paint == 0
    lab, n = label_components(residual)
    if n:
        from scipy import ndimage as _ndi
        objs = _ndi.find_objects(lab)
        for ci, sl in enumerate(objs, start=1):
            if any(s.start == 0 or s.stop == dim
                   for s, dim in zip(sl, shape)):
                stats["unresolved_pieces"] += 1
                continue
            piece = lab[sl] == ci
            try:
                ok = complete_piece(piece, sl)
            except CompletionError:
                stats["infeasible"] += 1
                ok = False
            if not ok:
                stats["unresolved_pieces"] += 1
    return resolved, stats


def verify_rounding(w: Window, res: RoundSequenceResult,
                    maskA: np.ndarray | None = None,
                    maskB: np.ndarray | None = None) -> dict[str, Any]:
    """Exact post-check: at every resolved vertex, flow-out equals
    1_A - 1_B; all defined values integral by construction."""
    maskA = w.maskA if maskA is None else maskA
    maskB = w.maskB if maskB is None else maskB
    fout, alldef = res.flow.fout_and_complete()
    demand = maskA.astype(np.int64) - maskB.astype(np.int64)
    check_zone = res.resolved
    ok_zone = (fout == demand) | ~check_zone
    bad = int((~ok_zone).sum())
    covered = check_zone & ~alldef
    return {
        "resolved_vertices": int(res.resolved.sum()),
        "demand_violations": bad,
        "resolved_without_full_edges": int(covered.sum()),
        "max_abs_flow": res.flow.max_abs(),
        "passed": bad == 0 and int(covered.sum()) == 0,
    }

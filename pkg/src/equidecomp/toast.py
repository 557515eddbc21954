"""Toast layer construction on windows: partial Voronoi cores, closure
absorption, J/K/L layers, shifted variants, tilde removal and validation.

The closure operator C_b repeatedly absorbs the b-padded neighborhood of any
earlier-layer component that the current set cuts (intersects without
containing); the result is independent of processing order.  Certification
is tracked per component: a component is trusted exactly when its shape is
provably identical to the infinite-lattice construction, which requires its
3-neighborhood to lie in trusted input data and every nearby prior component
to be trusted itself.  Validation and rounding consume only trusted
components; clipped ones are counted and excluded.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .discrete import DiscreteSet, build_discrete_set
from .errors import ScheduleError, WindowTooSmallError
from .flows import shifted
from .gridsets import GridComponent, components, dilate, label_components, rle_hex
from .schedule import Schedule
from .window import Window


@dataclass
class ToastLayer:
    index: int                      # 1-based schedule level
    role: str                       # "I" | "J" | "K" | "L"
    mask: np.ndarray
    trust: np.ndarray               # pointwise trust of the mask values
    comps: list[GridComponent]
    shift: tuple[int, ...] | None = None
    facts: dict[str, Any] = field(default_factory=dict)

    def certified_comps(self) -> list[GridComponent]:
        return [c for c in self.comps if not c.clipped]

    def max_diameter(self, certified_only: bool = True) -> int:
        cs = self.certified_comps() if certified_only else self.comps
        return max((c.diameter for c in cs), default=0)

    def to_json(self, include_mask: bool = False) -> dict[str, Any]:
        out = {
            "index": self.index, "role": self.role,
            "shift": list(self.shift) if self.shift else None,
            "components": len(self.comps),
            "certified": len(self.certified_comps()),
            "max_size": max((c.size for c in self.comps), default=0),
            "max_diameter": self.max_diameter(certified_only=False),
            "holes": sum(len(c.holes) for c in self.comps),
            "facts": {k: (v if isinstance(v, (int, float, bool, str, list))
                          else str(v)) for k, v in self.facts.items()},
        }
        if include_mask:
            out["mask_rle"] = rle_hex(self.mask)
        return out


@dataclass
class ToastSequence:
    window: Window
    schedule: Schedule | None
    layers: list[ToastLayer]        # in arrival order
    validation: dict[str, Any] | None = None

    def roles(self) -> str:
        return "".join(l.role for l in self.layers)


def _comp_certificates(w: Window, comps: list[GridComponent],
                       input_trust: np.ndarray,
                       prior_layers: Sequence[ToastLayer]) -> None:
    """Set comp.clipped = False only for components whose construction is
    provably window-independent: the filled 3-neighborhood sits in trusted
    input data and every prior component within distance 2 is itself trusted."""
    shape = w.shape
    for c in comps:
        ok = not c.ambiguous_holes
        if ok and any(s.start - 3 < 0 or s.stop + 3 > n
                      for s, n in zip(c.bbox, shape)):
            ok = False
        if ok:
            lo = [s.start - 3 for s in c.bbox]
            hi = [s.stop + 3 for s in c.bbox]
            pad_sl = tuple(slice(a, b) for a, b in zip(lo, hi))
            big = np.zeros(tuple(b - a for a, b in zip(lo, hi)), bool)
            inner = tuple(slice(c.bbox[i].start - lo[i], c.bbox[i].stop - lo[i])
                          for i in range(w.d))
            big[inner] = c.fill_local()
            near = dilate(big, 3)
            if not input_trust[pad_sl][near].all():
                ok = False
            if ok:
                near2 = dilate(big, 2)
                for pl in prior_layers:
                    for pc in pl.comps:
                        if pc.clipped and _bbox_overlap(pc.bbox, pad_sl):
                            sub = np.zeros_like(big)
                            if _intersect_into(pc, pad_sl, sub) \
                                    and (sub & near2).any():
                                ok = False
                                break
                    if not ok:
                        break
        c.clipped = not ok


def _bbox_overlap(a: tuple[slice, ...], b: tuple[slice, ...]) -> bool:
    return all(sa.start < sb.stop and sb.start < sa.stop
               for sa, sb in zip(a, b))


def _intersect_into(comp: GridComponent, target: tuple[slice, ...],
                    out: np.ndarray) -> bool:
    """Paint comp.local restricted to target into out (target-local coords)."""
    painted = False
    lo = [max(comp.bbox[i].start, target[i].start) for i in range(out.ndim)]
    hi = [min(comp.bbox[i].stop, target[i].stop) for i in range(out.ndim)]
    if any(a >= b for a, b in zip(lo, hi)):
        return False
    src = tuple(slice(a - comp.bbox[i].start, b - comp.bbox[i].start)
                for i, (a, b) in enumerate(zip(lo, hi)))
    dst = tuple(slice(a - target[i].start, b - target[i].start)
                for i, (a, b) in enumerate(zip(lo, hi)))
    piece = comp.local[src]
    if piece.any():
        out[dst] |= piece
        painted = True
    return painted


def closure(w: Window, prior_masks: Sequence[np.ndarray], seed: np.ndarray,
            b: int, max_rounds: int = 10000) -> np.ndarray:
    """The closure operator: starting from the seed, while some component S of
    a prior mask has its N_b[S] cut by the current set, absorb N_b[S]."""
    cur = seed.copy()
    shape = w.shape
    prior_comps: list[list[GridComponent]] = [
        components(pm, with_holes=False) for pm in prior_masks]
    done: list[list[bool]] = [[False] * len(cs) for cs in prior_comps]
    rounds = 0
    changed = True
    while changed:
        changed = False
        rounds += 1
        if rounds > max_rounds:
            raise WindowTooSmallError("closure absorption did not reach a fixpoint")
        for li, cs in enumerate(prior_comps):
            for ci, comp in enumerate(cs):
                if done[li][ci]:
                    continue
                lo = [max(0, s.start - b) for s in comp.bbox]
                hi = [min(n, s.stop + b) for s, n in zip(comp.bbox, shape)]
                pad_sl = tuple(slice(a, c) for a, c in zip(lo, hi))
                big = np.zeros(tuple(c - a for a, c in zip(lo, hi)), bool)
                inner = tuple(slice(comp.bbox[i].start - lo[i],
                                    comp.bbox[i].stop - lo[i])
                              for i in range(w.d))
                big[inner] = comp.local
                padded = dilate(big, b)
                local_cur = cur[pad_sl]
                inter = padded & local_cur
                if inter.any():
                    if (padded & ~local_cur).any():
                        cur[pad_sl] |= padded
                        changed = True
                    done[li][ci] = True
    return cur


def build_core_I(w: Window, X: DiscreteSet, sep: int) -> ToastLayer:
    """Partial Voronoi cells: v belongs iff its nearest center beats every
    other center by at least sep in graph distance."""
    if not X.member.any():
        raise WindowTooSmallError("no discrete-set centers on the window")
    r = X.r
    patch = r + sep + 1
    INF = np.int32(10 ** 9)
    d1 = np.full(w.shape, INF, np.int32)
    d2 = np.full(w.shape, INF, np.int32)
    shape = w.shape
    for p in np.argwhere(X.member):
        sl = tuple(slice(max(0, c - patch), min(n, c + patch + 1))
                   for c, n in zip(p, shape))
        local = np.zeros([s.stop - s.start for s in sl], np.int32)
        for ax in range(w.d):
            idx = np.arange(sl[ax].start, sl[ax].stop, dtype=np.int32)
            dd = np.abs(idx - np.int32(p[ax]))
            shp = [1] * w.d
            shp[ax] = len(idx)
            local = np.maximum(local, dd.reshape(shp))
        cur1 = d1[sl]
        cur2 = d2[sl]
        new1 = np.minimum(cur1, local)
        new2 = np.minimum(cur2, np.maximum(cur1, local))
        d1[sl] = new1
        d2[sl] = new2
    mask = (d2.astype(np.int64) - d1.astype(np.int64)) >= sep
    # v's membership depends on X within distance d1(v) + sep only, so trust
    # reaches wherever the nearest uncertified X-value is farther than that
    # and the nearest center is real (d1 <= r by maximality on trusted data)
    from scipy import ndimage as _ndi
    dt_uncert = _ndi.distance_transform_cdt(X.cert, metric="chessboard")
    trust = (dt_uncert > np.minimum(d1, r + 1) + sep) & (d1 <= r)
    comps = components(mask)
    layer = ToastLayer(index=0, role="I", mask=mask, trust=trust, comps=comps)
    _comp_certificates(w, comps, trust, [])
    certified = layer.certified_comps()
    layer.facts["separation"] = sep
    layer.facts["degenerate_sep0"] = (sep == 0)
    layer.facts["diameter_bound_2r"] = all(c.diameter <= 2 * r for c in certified)
    layer.facts["pairwise_separation_ok"] = _pairwise_separation_ok(
        w, mask, comps, sep)
    layer.facts["coverage_fraction"] = float(mask.mean())
    return layer


def _pairwise_separation_ok(w: Window, mask: np.ndarray,
                            comps: list[GridComponent], sep: int) -> bool:
    """Certified components pairwise at distance >= sep (checked via
    per-component dilation by sep-1 not meeting other components)."""
    if sep <= 1:
        return True
    shape = w.shape
    for c in comps:
        if c.clipped:
            continue
        lo = [max(0, s.start - (sep - 1)) for s in c.bbox]
        hi = [min(n, s.stop + (sep - 1)) for s, n in zip(c.bbox, shape)]
        pad_sl = tuple(slice(a, b) for a, b in zip(lo, hi))
        big = np.zeros(tuple(b - a for a, b in zip(lo, hi)), bool)
        inner = tuple(slice(c.bbox[i].start - lo[i], c.bbox[i].stop - lo[i])
                      for i in range(w.d))
        big[inner] = c.local
        near = dilate(big, sep - 1)
        if (near & mask[pad_sl] & ~big).any():
            return False
    return True


def layer_point_trust(w: Window, input_trust: np.ndarray,
                      comps: list[GridComponent]) -> np.ndarray:
    """Pointwise trust of a built layer: trusted input shrunk by the closure
    step, minus the influence zone of uncertified components."""
    trust = w.erode(input_trust, 3)
    bad = np.zeros(w.shape, bool)
    for c in comps:
        if c.clipped:
            bad[c.bbox] |= c.local
    if bad.any():
        trust &= ~dilate(bad, 1)
    return trust


def build_layers(w: Window, schedule: Schedule, depth: int,
                 roles: str = "JKL", shift: tuple[int, ...] | None = None,
                 discrete_sets: dict[tuple[str, int], DiscreteSet] | None = None,
                 strict_guard: bool = True) -> ToastSequence:
    """Build the toast layers level by level.

    roles: "J" builds only the J-layers; "JKL" interleaves K and L.  shift
    applies the lattice translation floor(r'_i / 3) * (p - 3) to the Y_i
    pattern (p in {0..5}^d; p = (3,...,3) is the identity).
    discrete_sets may inject prebuilt X/Y sets keyed by ("X", i) / ("Y", i).
    """
    if schedule.preset == "strict" and strict_guard:
        raise ScheduleError(
            "the strict preset is schedule arithmetic only and is never "
            "executed at window scale")
    if depth > schedule.depth:
        raise ScheduleError("schedule shallower than requested depth")
    margin_needed = schedule.levels[depth - 1].r + schedule.separation(depth) + 6
    if w.W < margin_needed:
        raise WindowTooSmallError(
            f"window W={w.W} below margin {margin_needed} for depth {depth}")
    discrete_sets = discrete_sets or {}
    layers: list[ToastLayer] = []
    j_layers: list[ToastLayer] = []
    kl_layers: list[ToastLayer] = []
    for i in range(1, depth + 1):
        lv = schedule.levels[i - 1]
        X = discrete_sets.get(("X", i)) or build_discrete_set(w, lv.r)
        sep = schedule.separation(i)
        core = build_core_I(w, X, sep)
        core.index = i
        # J_i = C_2(N_{q'_0+2}[J_1], ..., N_{q'_{i-2}+2}[J_{i-1}], I_i)
        prior_masks = [dilate(jl.mask, schedule.q_prime_before(jl.index) + 2)
                       for jl in j_layers]
        jmask = closure(w, prior_masks, core.mask, b=2)
        j_trust_in = core.trust.copy()
        for jl in j_layers:
            j_trust_in &= jl.trust
        jcomps = components(jmask)
        _comp_certificates(w, jcomps, j_trust_in, j_layers)
        jl_new = ToastLayer(index=i, role="J", mask=jmask,
                            trust=layer_point_trust(w, j_trust_in, jcomps),
                            comps=jcomps)
        jl_new.facts["core_coverage"] = core.facts["coverage_fraction"]
        jl_new.facts["core_diam_bound_2r"] = core.facts["diameter_bound_2r"]
        jl_new.facts["containment_J_in_Nq'[I]"] = _containment_ok(
            w, jmask, core.mask, schedule.q_prime_before(i), jl_new.trust)
        jl_new.facts["I_layer"] = core.to_json()
        layers.append(jl_new)
        j_layers.append(jl_new)
        if "K" in roles:
            prior_kl = [l.mask for l in kl_layers]
            kseed = dilate(jmask, 2)
            kmask = closure(w, prior_kl, kseed, b=2)
            k_trust_in = jl_new.trust.copy()
            for l in kl_layers:
                k_trust_in &= l.trust
            kcomps = components(kmask)
            _comp_certificates(w, kcomps, k_trust_in, kl_layers + [jl_new])
            kl = ToastLayer(index=i, role="K", mask=kmask,
                            trust=layer_point_trust(w, k_trust_in, kcomps),
                            comps=kcomps)
            kl.facts["contains_N2[J]"] = bool((kmask | ~kseed).all())
            kl.facts["containment_K_in_Nq'+2[J]"] = _containment_ok(
                w, kmask, jmask, schedule.q_prime_before(i) + 2, kl.trust)
            layers.append(kl)
            kl_layers.append(kl)
        if "L" in roles:
            Y = discrete_sets.get(("Y", i)) or build_discrete_set(w, lv.r_prime)
            ymember, ycert = Y.member, Y.cert
            if shift is not None and tuple(shift) != (3,) * w.d:
                delta = tuple((lv.r_prime // 3) * (p - 3) for p in shift)
                ymember = shifted(ymember.astype(np.uint8), delta).astype(bool)
                ycert = shifted(ycert.astype(np.uint8), delta).astype(bool)
            ball = lv.r_prime * 2 // 5
            lseed = dilate(ymember, ball)
            prior_kl = [l.mask for l in kl_layers]  # includes K_i
            lmask = closure(w, prior_kl, lseed, b=2)
            l_trust_in = w.erode(ycert, ball + 1)
            for l in kl_layers:
                l_trust_in &= l.trust
            lcomps = components(lmask)
            _comp_certificates(w, lcomps, l_trust_in, kl_layers)
            ll = ToastLayer(index=i, role="L", mask=lmask,
                            trust=layer_point_trust(w, l_trust_in, lcomps),
                            comps=lcomps, shift=shift)
            ll.facts["contains_ball[Y]"] = bool((lmask | ~lseed).all())
            layers.append(ll)
            kl_layers.append(ll)
    return ToastSequence(window=w, schedule=schedule, layers=layers)


def _containment_ok(w: Window, inner: np.ndarray, around: np.ndarray,
                    radius: int, trust: np.ndarray) -> bool:
    """inner subseteq N_radius[around], checked on the trusted region."""
    if radius >= max(w.shape):
        return True
    hull = dilate(around, radius)
    return not bool((inner & ~hull & trust).any())


def validate_toast(seq: ToastSequence) -> dict[str, Any]:
    """Exhaustive check of the toast properties on certified components:

    (1) finite components of uniformly bounded (recorded) cardinality,
    (2) pairwise distance >= 3 within a layer,
    (3) for j < i: every earlier component S has N_2[S] contained in D_i or
        at distance >= 3 from it.

    Returns pass/fail with witnesses; clipped components are excluded and
    counted."""
    layers = seq.layers
    record: dict[str, Any] = {
        "passed": True, "witnesses": [],
        "clipped_excluded": sum(1 for l in layers for c in l.comps if c.clipped),
        "max_cardinality": max((c.size for l in layers for c in l.comps
                                if not c.clipped), default=0),
        "layers": [l.to_json() for l in layers],
    }

    def fail(msg):
        record["passed"] = False
        record["witnesses"].append(msg)

    shape = seq.window.shape
    for li, layer in enumerate(layers):
        # property (2): distance >= 3 within the layer
        for c in layer.certified_comps():
            near = _dilated_global(c, 2, shape)
            other = layer.mask[near[0]] & ~_paint(c, near[0])
            if (other & near[1]).any():
                fail(f"layer {li} ({layer.role}{layer.index}): components "
                     f"within distance 2 near bbox {c.bbox}")
        # property (3) against all later layers
        for lj in range(li + 1, len(layers)):
            later = layers[lj]
            for c in layer.certified_comps():
                near = _dilated_global(c, 2, shape)
                hit = later.mask[near[0]] & near[1]
                if hit.any() and (near[1] & ~later.mask[near[0]]).any():
                    fail(f"{layer.role}{layer.index} comp at {c.bbox} is "
                         f"neither swallowed by nor 3-separated from "
                         f"{later.role}{later.index}")
    return record


def _dilated_global(c: GridComponent, r: int, shape: tuple[int, ...]
                    ) -> tuple[tuple[slice, ...], np.ndarray]:
    lo = [max(0, s.start - r) for s in c.bbox]
    hi = [min(n, s.stop + r) for s, n in zip(c.bbox, shape)]
    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
    big = np.zeros(tuple(b - a for a, b in zip(lo, hi)), bool)
    inner = tuple(slice(c.bbox[i].start - lo[i], c.bbox[i].stop - lo[i])
                  for i in range(len(shape)))
    big[inner] = c.local
    return sl, dilate(big, r)


def _paint(c: GridComponent, sl: tuple[slice, ...]) -> np.ndarray:
    out = np.zeros(tuple(s.stop - s.start for s in sl), bool)
    inner = tuple(slice(c.bbox[i].start - sl[i].start,
                        c.bbox[i].stop - sl[i].start) for i in range(len(sl)))
    out[inner] = c.local
    return out


def tilde_remove(seq: ToastSequence) -> ToastSequence:
    """Remove every K_i component within distance 2 of a later J_j and every
    L_i component within distance 2 of a later K_j (j > i, window depth)."""
    w = seq.window
    shape = w.shape
    later_J = {}
    later_K = {}
    max_idx = max((l.index for l in seq.layers), default=0)
    acc = np.zeros(shape, bool)
    for i in range(max_idx, 0, -1):
        for l in seq.layers:
            if l.index == i and l.role == "J":
                later_J[i] = acc.copy()
        for l in seq.layers:
            if l.index == i and l.role == "J":
                acc = acc | l.mask
    acc = np.zeros(shape, bool)
    for i in range(max_idx, 0, -1):
        for l in seq.layers:
            if l.index == i and l.role == "K":
                later_K[i] = acc.copy()
        for l in seq.layers:
            if l.index == i and l.role == "K":
                acc = acc | l.mask
    new_layers = []
    for l in seq.layers:
        if l.role == "K":
            blocker = later_J.get(l.index)
        elif l.role == "L":
            blocker = later_K.get(l.index)
        else:
            blocker = None
        if blocker is None or not blocker.any():
            new_layers.append(l)
            continue
        keep = np.zeros(shape, bool)
        kept_comps = []
        removed = 0
        for c in l.comps:
            sl, near = _dilated_global(c, 2, shape)
            if (near & blocker[sl]).any():
                removed += 1
                continue
            keep[c.bbox] |= c.local
            kept_comps.append(c)
        nl = ToastLayer(index=l.index, role=l.role, mask=keep, trust=l.trust,
                        comps=kept_comps, shift=l.shift,
                        facts=dict(l.facts))
        nl.facts["tilde_removed_components"] = removed
        nl.facts["comp_subset_of_original"] = True
        new_layers.append(nl)
    return ToastSequence(window=w, schedule=seq.schedule, layers=new_layers,
                         validation=None)

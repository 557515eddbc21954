"""Component/hole bookkeeping for subsets of a window grid.

Components are taken in the l-inf adjacency (the orbit graph restricted to
the window), via labeled flood fill.  A hole of a component S is a finite
component of the complement of S alone; on a window, complement components
confined to the padded bounding box of S and not touching its frame are
exactly the holes, and everything else is treated as the (possibly infinite)
outside.  Components whose 1-neighborhood leaves the window, or whose hole
status is ambiguous at the rim, are flagged clipped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import ndimage


def structure(d: int) -> np.ndarray:
    return np.ones((3,) * d, bool)


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    lab, n = ndimage.label(mask, structure=structure(mask.ndim))
    return lab, n


def dilate(mask: np.ndarray, r: int) -> np.ndarray:
    """N_r[mask] within the window (l-inf ball dilation)."""
    if r == 0:
        return mask.copy()
    out = ndimage.maximum_filter(mask.astype(np.uint8), size=2 * r + 1,
                                 mode="constant", cval=0)
    return out.astype(bool)


@dataclass
class GridComponent:
    """One connected component of a grid mask, with hole decomposition."""

    comp_id: int
    bbox: tuple[slice, ...]          # bounding box in grid indices
    local: np.ndarray                # bool mask inside bbox
    size: int
    diameter: int                    # l-inf diameter = max axis extent
    clipped: bool
    holes: list[np.ndarray] = field(default_factory=list)   # local masks
    ambiguous_holes: bool = False

    def cells_global(self) -> np.ndarray:
        pts = np.argwhere(self.local)
        off = np.array([s.start for s in self.bbox])
        return pts + off

    def fill_local(self) -> np.ndarray:
        out = self.local.copy()
        for h in self.holes:
            out |= h
        return out

    def contains_index(self, idx: tuple[int, ...]) -> bool:
        for s, i in zip(self.bbox, idx):
            if not (s.start <= i < s.stop):
                return False
        return bool(self.local[tuple(i - s.start for s, i in zip(self.bbox, idx))])


def _bbox_pad(sl: tuple[slice, ...], pad: int, shape: tuple[int, ...]
              ) -> tuple[slice, ...]:
    return tuple(slice(max(0, s.start - pad), min(n, s.stop + pad))
                 for s, n in zip(sl, shape))


def components(mask: np.ndarray, rim_margin: int = 1,
               with_holes: bool = True) -> list[GridComponent]:
    """Component census of the mask; clipped = the component's 1-neighborhood
    leaves the window or it intersects the outer rim band of given width."""
    lab, n = label_components(mask)
    if n == 0:
        return []
    objs = ndimage.find_objects(lab)
    shape = mask.shape
    out = []
    for ci, sl in enumerate(objs, start=1):
        local = lab[sl] == ci
        size = int(local.sum())
        diam = max(s.stop - s.start - 1 for s in sl)
        clipped = any(s.start < rim_margin or s.stop > dim - rim_margin
                      for s, dim in zip(sl, shape))
        comp = GridComponent(comp_id=ci, bbox=sl, local=local, size=size,
                             diameter=diam, clipped=clipped)
        if with_holes:
            _attach_holes(comp, shape)
        out.append(comp)
    return out


def _attach_holes(comp: GridComponent, shape: tuple[int, ...]) -> None:
    """Holes of S: complement components enclosed by S.  Computed in the
    1-padded bbox; complement components not reaching the pad frame are
    holes.  If the bbox itself hugs the window rim the classification is
    ambiguous and flagged."""
    pad_sl = _bbox_pad(comp.bbox, 1, shape)
    d = len(shape)
    big = np.zeros(tuple(s.stop - s.start for s in pad_sl), bool)
    inner = tuple(slice(comp.bbox[i].start - pad_sl[i].start,
                        comp.bbox[i].stop - pad_sl[i].start) for i in range(d))
    big[inner] = comp.local
    csl, nn = label_components(~big)
    frame_labels = set()
    for ax in range(d):
        slc = [slice(None)] * d
        slc[ax] = 0
        frame_labels.update(np.unique(csl[tuple(slc)]))
        slc[ax] = -1
        frame_labels.update(np.unique(csl[tuple(slc)]))
    frame_labels.discard(0)
    holes = []
    for li in range(1, nn + 1):
        if li in frame_labels:
            continue
        hole_big = csl == li
        holes.append(hole_big[inner])
    comp.holes = holes
    comp.ambiguous_holes = any(
        ps.start == 0 or ps.stop == dim
        for ps, dim in zip(pad_sl, shape)) and bool(holes)
    # a bbox flush against the window rim makes even the outside ambiguous
    if any(b.start == 0 or b.stop == dim for b, dim in zip(comp.bbox, shape)):
        comp.ambiguous_holes = True


def boundary_edges(comp_fill: np.ndarray, bbox: tuple[slice, ...],
                   shape: tuple[int, ...], dirs: list[tuple[int, ...]]
                   ) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Ordered pairs (u in S', v not in S') over all 3^d - 1 directions, in
    global grid indices.  S' must not touch the window rim (callers enforce
    via clipped flags)."""
    pad_sl = _bbox_pad(bbox, 1, shape)
    d = len(shape)
    big = np.zeros(tuple(s.stop - s.start for s in pad_sl), bool)
    inner = tuple(slice(bbox[i].start - pad_sl[i].start,
                        bbox[i].stop - pad_sl[i].start) for i in range(d))
    big[inner] = comp_fill
    off = np.array([s.start for s in pad_sl])
    edges = []
    pts = np.argwhere(big)
    big_shape = big.shape
    for p in pts:
        for g in dirs:
            q = tuple(int(a + b) for a, b in zip(p, g))
            if any(not (0 <= qi < n) for qi, n in zip(q, big_shape)):
                raise ValueError("component touches the padded frame")
            if not big[q]:
                u = tuple(int(x) for x in (p + off))
                v = tuple(int(x + o) for x, o in zip(q, off))
                edges.append((u, v))
    return edges


def mask_from_components(shape: tuple[int, ...],
                         comps: Iterator[GridComponent]) -> np.ndarray:
    out = np.zeros(shape, bool)
    for c in comps:
        out[c.bbox] |= c.local
    return out


def rle_hex(mask: np.ndarray) -> dict:
    """Run-length encoding of the flattened bitset, for JSON payloads."""
    flat = np.asarray(mask, bool).reshape(-1)
    runs = []
    if flat.size:
        changes = np.flatnonzero(np.diff(flat.view(np.int8))) + 1
        bounds = np.concatenate(([0], changes, [flat.size]))
        first = bool(flat[0])
        runs = [int(b - a) for a, b in zip(bounds[:-1], bounds[1:])]
    else:
        first = False
    return {"shape": list(mask.shape), "first": first,
            "runs": [format(r, "x") for r in runs]}


def rle_unhex(obj: dict) -> np.ndarray:
    runs = [int(r, 16) for r in obj["runs"]]
    total = int(np.prod(obj["shape"])) if obj["shape"] else 0
    flat = np.zeros(total, bool)
    val = obj["first"]
    pos = 0
    for r in runs:
        if val:
            flat[pos:pos + r] = True
        val = not val
        pos += r
    return flat.reshape(obj["shape"])

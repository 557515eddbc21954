"""Exact dyadic flow sequence on windows.

The stage-m flow is built incrementally, f_m = f_{m-1} + theta_m, where the
increment spreads each discrete 2^(m-1)-cube's demand error uniformly over
the 2^m-cubes containing it.  Values are stored as integer numerators over
the common denominator 2^(2dm), so integrality of 2^(2dm) f_m holds by
construction and every downstream comparison is exact.

theta_m is evaluated through its straight-line-path form: with s = 2^(m-1),
z(g) the number of zero entries of the step direction g, and

    S(u)   = sum over the s^d cubes C of side s containing u of
             (|C cap A| - |C cap B|),

the numerator of theta_m on the edge (v, v + g) at exponent 2dm is

    2^z(g) * ( sum_{j=0}^{s-1} S(v - j g)  -  sum_{j=1}^{s} S(v + j g) ).

The per-cube averaging form is kept in tests as an independent oracle.
All values within l-inf distance 2^m - 1 of the window rim are untrusted;
the flow records that validity radius.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import WindowTooSmallError
from .window import Window, canonical_directions


def box_filter_fwd(arr: np.ndarray, s: int) -> np.ndarray:
    """out[u] = sum_{t in {0..s-1}^d} arr[u + t]; zero within s-1 of the high rim."""
    out = arr.astype(np.int64, copy=True)
    d = arr.ndim
    for ax in range(d):
        n = arr.shape[ax]
        c = np.cumsum(out, axis=ax)
        res = np.zeros_like(c)
        if n >= s:
            dst = [slice(None)] * d
            dst[ax] = slice(0, n - s + 1)
            hi = [slice(None)] * d
            hi[ax] = slice(s - 1, n)
            res[tuple(dst)] = c[tuple(hi)]
            dst2 = [slice(None)] * d
            dst2[ax] = slice(1, n - s + 1)
            lo = [slice(None)] * d
            lo[ax] = slice(0, n - s)
            res[tuple(dst2)] -= c[tuple(lo)]
        out = res
    return out


def box_filter_back(arr: np.ndarray, s: int) -> np.ndarray:
    """out[u] = sum_{t in {0..s-1}^d} arr[u - t]."""
    rev = tuple(slice(None, None, -1) for _ in range(arr.ndim))
    return box_filter_fwd(arr[rev], s)[rev]


def shifted(arr: np.ndarray, delta: Sequence[int]) -> np.ndarray:
    """out[v] = arr[v + delta], zero-filled outside the window."""
    out = np.zeros_like(arr)
    src = []
    dst = []
    for n, dv in zip(arr.shape, delta):
        if dv >= 0:
            src.append(slice(dv, n))
            dst.append(slice(0, n - dv))
        else:
            src.append(slice(0, n + dv))
            dst.append(slice(-dv, n))
    out[tuple(dst)] = arr[tuple(src)]
    return out


def directional_sum(arr: np.ndarray, step: Sequence[int], count: int) -> np.ndarray:
    """out[v] = sum_{j=0}^{count-1} arr[v + j * step], count a power of two."""
    out = arr.copy()
    done = 1
    while done < count:
        out = out + shifted(out, tuple(done * s for s in step))
        done *= 2
    if done != count:
        raise ValueError("count must be a power of two")
    return out


@dataclass
class DyadicFlow:
    """Antisymmetric flow with exact dyadic values on a window grid.

    numerators[g][idx] is 2^exponent * f(v, v + g) for the canonical
    directions g (first nonzero entry positive); other directions follow by
    antisymmetry.  Only edges with both endpoints within `valid_radius` of
    the window center are meaningful.
    """

    window: Window
    m: int
    exponent: int
    numerators: dict[tuple[int, ...], np.ndarray]
    valid_radius: int

    @property
    def denominator(self) -> int:
        return 1 << self.exponent

    def value(self, v: Sequence[int], u: Sequence[int]) -> Fraction:
        """f(v, u) for neighboring lattice offsets, exact."""
        g = tuple(b - a for a, b in zip(v, u))
        if all(x == 0 for x in g) or any(abs(x) > 1 for x in g):
            return Fraction(0)
        if g > tuple([0] * len(g)):
            return Fraction(int(self.numerators[g][self.window.index_of(v)]),
                            self.denominator)
        ng = tuple(-x for x in g)
        return -Fraction(int(self.numerators[ng][self.window.index_of(u)]),
                         self.denominator)

    def fout_numerators(self) -> np.ndarray:
        """Grid of 2^exponent * fout(u); trust radius is valid_radius + 1."""
        out = np.zeros(self.window.shape, np.int64)
        for g, arr in self.numerators.items():
            out += arr
            out -= shifted(arr, tuple(-x for x in g))
        return out

    def edge_values(self, edges: Iterable[tuple[tuple[int, ...], tuple[int, ...]]]
                    ) -> dict[tuple[tuple[int, ...], tuple[int, ...]], Fraction]:
        return {(v, u): self.value(v, u) for v, u in edges}

    def max_abs_numerator(self) -> int:
        return max((int(np.abs(arr).max()) for arr in self.numerators.values()),
                   default=0)

    def to_json_entries(self, limit: int = 100000) -> dict[str, Any]:
        """Header plus sparse nonzero entries as decimal strings."""
        entries = []
        for g, arr in self.numerators.items():
            nz = np.argwhere(arr != 0)
            for ix in nz[:limit]:
                entries.append({
                    "n": list(self.window.offset_of(tuple(ix))),
                    "dir": list(g),
                    "num": str(int(arr[tuple(ix)])),
                })
        return {"d": self.window.d, "m": self.m, "exponent": self.exponent,
                "valid_radius": self.valid_radius, "entries": entries}


def xi(w: Window, base: Sequence[int], m: int) -> Fraction:
    """(|Q cap A| - |Q cap B|) / 2^(dm) for the discrete 2^m-cube at base."""
    side = 1 << m
    idx = w.index_of(base)
    if any(i + side > w.side for i in idx):
        raise WindowTooSmallError("cube exits the window")
    sl = tuple(slice(i, i + side) for i in idx)
    a = int(w.maskA[sl].sum())
    b = int(w.maskB[sl].sum())
    return Fraction(a - b, side ** w.d)


def path_flow(u: Sequence[int], gamma: Sequence[int], n: int
              ) -> dict[tuple[tuple[int, ...], tuple[int, ...]], int]:
    """The unit flow from u to u + n*gamma along the straight-line path.

    Returns the +1 values on the path pairs oriented along gamma; the flow is
    identically zero when n = 0.  Antisymmetric values are implied.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    out: dict[tuple[tuple[int, ...], tuple[int, ...]], int] = {}
    cur = tuple(u)
    for _ in range(n):
        nxt = tuple(a + b for a, b in zip(cur, gamma))
        out[(cur, nxt)] = 1
        cur = nxt
    return out


def _diff_grid(w: Window) -> np.ndarray:
    return w.maskA.astype(np.int64) - w.maskB.astype(np.int64)


def theta_numerators(w: Window, m: int, diff: np.ndarray | None = None
                     ) -> dict[tuple[int, ...], np.ndarray]:
    """Numerators of theta_m at exponent 2dm on canonical directions."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if diff is None:
        diff = _diff_grid(w)
    s = 1 << (m - 1)
    if 2 * w.W + 1 < 2 * s:
        raise WindowTooSmallError(f"window too small for stage {m}")
    cnt = box_filter_fwd(diff, s)
    S = box_filter_back(cnt, s)
    del cnt
    out = {}
    for g in canonical_directions(w.d):
        zg = sum(1 for x in g if x == 0)
        neg = tuple(-x for x in g)
        term1 = directional_sum(S, neg, s)
        term2 = shifted(directional_sum(S, g, s), g)
        out[g] = (term1 - term2) << zg if zg else (term1 - term2)
    return out


def theta_direction(w: Window, m: int, gamma: tuple[int, ...],
                    S: np.ndarray) -> np.ndarray:
    """Numerator grid of theta_m on one canonical direction, given the
    precomputed S field for stage m."""
    s = 1 << (m - 1)
    zg = sum(1 for x in gamma if x == 0)
    neg = tuple(-x for x in gamma)
    term1 = directional_sum(S, neg, s)
    term2 = shifted(directional_sum(S, gamma, s), gamma)
    out = term1 - term2
    return out << zg if zg else out


def stage_S_field(w: Window, m: int, diff: np.ndarray) -> np.ndarray:
    s = 1 << (m - 1)
    if 2 * w.W + 1 < 2 * s:
        raise WindowTooSmallError(f"window too small for stage {m}")
    cnt = box_filter_fwd(diff, s)
    return box_filter_back(cnt, s)


def fm_on_edges(w: Window, m: int,
                edges: Iterable[tuple[tuple[int, ...], tuple[int, ...]]]
                ) -> dict[tuple[tuple[int, ...], tuple[int, ...]], Fraction]:
    """Exact f_m values on the given edges (grid-index pairs), computed with
    one transient stage field per direction; memory stays O(window)."""
    d = w.d
    exponent = 2 * d * m
    valid = w.W - ((1 << m) - 1)
    if valid < 0:
        raise WindowTooSmallError(f"stage {m} exceeds the window")
    lo, hi = w.W - valid, w.W + valid
    by_dir: dict[tuple[int, ...], list[tuple[int, tuple, int]]] = {}
    edge_list = list(edges)
    nums = [0] * len(edge_list)
    for ei, (u, v) in enumerate(edge_list):
        g = tuple(b - a for a, b in zip(u, v))
        if max(abs(x) for x in g) != 1:
            raise ValueError(f"not an orbit edge: {u}->{v}")
        if g > (0,) * d:
            base, sign = u, 1
        else:
            g = tuple(-x for x in g)
            base, sign = v, -1
        if any(not (lo <= x <= hi) for x in base):
            raise WindowTooSmallError(
                f"edge at {base} outside the stage-{m} valid region")
        by_dir.setdefault(g, []).append((ei, base, sign))
    diff = _diff_grid(w)
    for stage in range(1, m + 1):
        S = stage_S_field(w, stage, diff)
        shift_bits = 2 * d * (m - stage)
        for g, wants in by_dir.items():
            arr = theta_direction(w, stage, g, S)
            for ei, base, sign in wants:
                nums[ei] += sign * int(arr[base]) << shift_bits
        del S
    denom = 1 << exponent
    return {edge_list[ei]: Fraction(nums[ei], denom)
            for ei in range(len(edge_list))}


def build_fm(w: Window, m: int) -> DyadicFlow:
    """f_m = f_{m-1} + theta_m with f_0 = 0, at exponent exactly 2dm."""
    if m < 0:
        raise ValueError("m must be >= 0")
    d = w.d
    valid = w.W - ((1 << m) - 1)
    if valid < 1:
        raise WindowTooSmallError(
            f"stage {m} needs half-width > {(1 << m) - 1}, have {w.W}")
    nums = {g: np.zeros(w.shape, np.int64) for g in canonical_directions(d)}
    if m == 0:
        return DyadicFlow(window=w, m=0, exponent=0, numerators=nums,
                          valid_radius=0)
    diff = _diff_grid(w)
    shift_bits = 2 * d
    for stage in range(1, m + 1):
        th = theta_numerators(w, stage, diff)
        for g in nums:
            nums[g] <<= shift_bits
            nums[g] += th[g]
        del th
    return DyadicFlow(window=w, m=m, exponent=2 * d * m, numerators=nums,
                      valid_radius=valid)


def demand_error_numerators(w: Window, m: int) -> tuple[np.ndarray, int]:
    """Grid of 2^(2dm) * (1_A - 1_B - fout f_m)(u), with its trust radius.

    By the averaging identity this equals the sum of (|Q cap A| - |Q cap B|)
    over all 2^(dm) discrete 2^m-cubes Q containing u, computed here directly
    by box filters (an independent route from the flow construction).
    """
    side = 1 << m
    diff = _diff_grid(w)
    cnt = box_filter_fwd(diff, side)
    S2 = box_filter_back(cnt, side)
    return S2, w.W - (side - 1)


def verify_fout_identity(w: Window, flow: DyadicFlow, m: int
                         ) -> tuple[bool, tuple[int, ...] | None]:
    """Exact check of 1_A - 1_B - fout f_m = 2^(-dm) sum_{Q ni u} xi(Q) at
    every vertex valid at radius 2^m; returns the first offender if any."""
    if flow.m != m:
        raise ValueError("flow stage mismatch")
    rhs, _ = demand_error_numerators(w, m)
    fout = flow.fout_numerators()
    diff = _diff_grid(w)
    lhs = (diff << flow.exponent) - fout
    half = w.W - (1 << m)
    if half < 0:
        raise WindowTooSmallError("no valid vertex at this stage")
    sl = tuple(slice(w.W - half, w.W + half + 1) for _ in range(w.d))
    ok = np.array_equal(lhs[sl], rhs[sl])
    if ok:
        return True, None
    bad = np.argwhere(lhs[sl] != rhs[sl])[0]
    off = tuple(int(b) - half for b in bad)
    return False, off


def tail_bound(m: int, c: float, d: int, eps: float) -> float:
    """Upper bound on |f_inf - f_m|_inf: c 2^(1+eps) / (2^(d+eps m) (2^eps - 1))."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return c * 2.0 ** (1 + eps) / (2.0 ** (d + eps * m) * (2.0 ** eps - 1.0))


def stage_difference_max(w: Window, lo: DyadicFlow, hi: DyadicFlow) -> Fraction:
    """Measured |f_hi - f_lo|_inf over edges valid for the finer stage."""
    if hi.exponent < lo.exponent:
        lo, hi = hi, lo
    shift = hi.exponent - lo.exponent
    half = min(lo.valid_radius, hi.valid_radius) - 1
    if half < 0:
        raise WindowTooSmallError("no shared valid region")
    w0 = w.W
    sl = tuple(slice(w0 - half, w0 + half + 1) for _ in range(w.d))
    best = 0
    for g in hi.numerators:
        dv = np.abs((lo.numerators[g] << shift)[sl] - hi.numerators[g][sl]).max()
        best = max(best, int(dv))
    return Fraction(best, hi.denominator)

"""Finite lattice windows over one orbit of the torus action.

A Window is the cube of lattice offsets |n|_inf <= W around an anchor torus
point.  Grid arrays are indexed by i = n + W per axis.  Torus positions of
all window points are computed exactly (fixed point, mod 1) with vectorized
uint64 arithmetic that reduces mod 2^B at every accumulation step.

Every local operation on a window declares a locality radius and is only
trusted on the shrunken region where its full neighborhood is available;
`valid_mask` and `erode` implement that bookkeeping.  Positions of lattice
points outside the window remain exactly computable through `act`, which is
what makes cross-window agreement checks meaningful.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import BudgetExceededError, WindowTooSmallError
from .fixedpoint import TorusPoint
from .generators import GeneratorSet, act_point
from .regions import Region

DEFAULT_POINT_BUDGET = 80_000_000


def lex_compare(m: Sequence[int], n: Sequence[int]) -> int:
    """-1 if m precedes n, 0 if equal, 1 if n precedes m.

    m precedes n exactly when the first nonzero entry of n - m is positive,
    which coincides with tuple comparison on the raw coordinates.
    """
    tm, tn = tuple(m), tuple(n)
    if tm == tn:
        return 0
    return -1 if tm < tn else 1


def lex_key(n: Sequence[int]) -> tuple[int, ...]:
    """Sort key realizing the lex order on lattice offsets."""
    return tuple(n)


def neighborhood(n: Sequence[int], r: int, plus: bool = False) -> list[tuple[int, ...]]:
    """N_r[n] (l-inf ball, (2r+1)^d points) or N_r^+[n] ((r+1)^d points)."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    rng = range(0, r + 1) if plus else range(-r, r + 1)
    return [tuple(ni + vi for ni, vi in zip(n, v))
            for v in itertools.product(rng, repeat=len(n))]


def directions(d: int) -> list[tuple[int, ...]]:
    """All 3^d - 1 nonzero gamma in {-1,0,1}^d, lex-sorted."""
    out = [g for g in itertools.product((-1, 0, 1), repeat=d) if any(g)]
    out.sort()
    return out


def canonical_directions(d: int) -> list[tuple[int, ...]]:
    """The (3^d - 1)/2 directions whose first nonzero entry is positive."""
    return [g for g in directions(d) if g > tuple([0] * d)]


class Window:
    """Lattice cube |n|_inf <= W with cached torus positions and region masks."""

    def __init__(self, gen: GeneratorSet, anchor: tuple[int, ...], W: int,
                 shapeA: Region | None = None, shapeB: Region | None = None,
                 point_budget: int = DEFAULT_POINT_BUDGET):
        if W < 1:
            raise WindowTooSmallError("window half-width must be >= 1")
        side = 2 * W + 1
        if side ** gen.d > point_budget:
            raise BudgetExceededError(
                f"window has {side ** gen.d} points > budget {point_budget}")
        self.gen = gen
        self.anchor = tuple(a & ((1 << gen.bits) - 1) for a in anchor)
        self.W = W
        self.side = side
        self.shape = (side,) * gen.d
        self.shapeA = shapeA
        self.shapeB = shapeB
        self._pos: dict[int, np.ndarray] = {}
        self._maskA: np.ndarray | None = None
        self._maskB: np.ndarray | None = None

    # -- geometry ---------------------------------------------------------

    @property
    def d(self) -> int:
        return self.gen.d

    @property
    def k(self) -> int:
        return self.gen.k

    def index_of(self, n: Sequence[int]) -> tuple[int, ...]:
        idx = tuple(int(ni) + self.W for ni in n)
        if any(not (0 <= i < self.side) for i in idx):
            raise IndexError(f"offset {tuple(n)} outside window W={self.W}")
        return idx

    def offset_of(self, idx: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(i) - self.W for i in idx)

    def act(self, n: Sequence[int]) -> TorusPoint:
        """Torus position of lattice offset n (n may exceed the window)."""
        return TorusPoint(act_point(self.gen, self.anchor, tuple(n)), self.gen.bits)

    def position_grid(self, coord: int) -> np.ndarray:
        """Exact positions of all window points in one torus coordinate."""
        if coord not in self._pos:
            bits = self.gen.bits
            m = 1 << bits
            mask = np.uint64(m - 1)
            acc: np.ndarray | None = None
            for j in range(self.d):
                xjc = self.gen.x[j][coord]
                a = np.array([((i - self.W) * xjc) % m for i in range(self.side)],
                             dtype=np.uint64)
                sh = [1] * self.d
                sh[j] = self.side
                a = a.reshape(sh)
                if acc is None:
                    acc = np.broadcast_to(a, self.shape).copy()
                else:
                    acc = (acc + a) & mask
            acc = (acc + np.uint64(self.anchor[coord])) & mask
            self._pos[coord] = acc
        return self._pos[coord]

    def positions(self) -> list[np.ndarray]:
        return [self.position_grid(c) for c in range(self.k)]

    def drop_position_cache(self, keep_first: bool = False) -> None:
        if keep_first:
            self._pos = {c: v for c, v in self._pos.items() if c == 0}
        else:
            self._pos = {}

    # -- masks --------------------------------------------------------------

    def mask(self, region: Region) -> np.ndarray:
        return region.contains_grid(self.positions(), self.gen.bits)

    @property
    def maskA(self) -> np.ndarray:
        if self._maskA is None:
            if self.shapeA is None:
                raise ValueError("window has no region A")
            self._maskA = self.mask(self.shapeA)
        return self._maskA

    @property
    def maskB(self) -> np.ndarray:
        if self._maskB is None:
            if self.shapeB is None:
                raise ValueError("window has no region B")
            self._maskB = self.mask(self.shapeB)
        return self._maskB

    def in_region_at(self, region: Region, n: Sequence[int]) -> bool:
        """Scalar exact membership at any lattice offset (even outside W)."""
        return region.contains(self.act(n))

    def set_masks(self, maskA: np.ndarray, maskB: np.ndarray) -> None:
        """Install synthetic A/B masks (experiments and tests on hand-built
        configurations; region-backed windows compute masks from shapes)."""
        if maskA.shape != self.shape or maskB.shape != self.shape:
            raise ValueError("mask shape mismatch")
        self._maskA = maskA.astype(bool)
        self._maskB = maskB.astype(bool)

    # -- validity bookkeeping ------------------------------------------------

    def valid_mask(self, radius: int) -> np.ndarray:
        """Boolean grid of offsets with |n|_inf <= W - radius."""
        if radius < 0:
            raise ValueError("radius must be >= 0")
        half = self.W - radius
        out = np.zeros(self.shape, bool)
        if half < 0:
            return out
        sl = tuple(slice(self.W - half, self.W + half + 1) for _ in range(self.d))
        out[sl] = True
        return out

    def valid_slice(self, radius: int) -> tuple[slice, ...]:
        half = self.W - radius
        if half < 0:
            raise WindowTooSmallError(
                f"window W={self.W} too small for locality radius {radius}")
        return tuple(slice(self.W - half, self.W + half + 1) for _ in range(self.d))

    def erode(self, mask: np.ndarray, radius: int) -> np.ndarray:
        """Points of the mask whose full l-inf r-ball lies inside the mask."""
        if radius == 0:
            return mask.copy()
        dt = ndimage.distance_transform_cdt(mask, metric="chessboard")
        return dt > radius

    # -- iteration helpers ----------------------------------------------------

    def offsets(self, mask: np.ndarray) -> list[tuple[int, ...]]:
        return [self.offset_of(tuple(ix)) for ix in np.argwhere(mask)]

    def central_index(self) -> tuple[int, ...]:
        return (self.W,) * self.d


def shared_core_slices(w_small: Window, w_big: Window, radius: int
                       ) -> tuple[tuple[slice, ...], tuple[slice, ...]]:
    """Index slices of the radius-valid core of the smaller window inside both
    windows (same anchor/generators assumed)."""
    if w_small.gen != w_big.gen or w_small.anchor != w_big.anchor:
        raise ValueError("windows must share generators and anchor")
    half = w_small.W - radius
    if half < 0:
        raise WindowTooSmallError("no shared core at this radius")
    s_small = tuple(slice(w_small.W - half, w_small.W + half + 1)
                    for _ in range(w_small.d))
    s_big = tuple(slice(w_big.W - half, w_big.W + half + 1)
                  for _ in range(w_big.d))
    return s_small, s_big

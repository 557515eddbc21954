"""Region descriptors on the torus with exact fixed-point membership.

Supported kinds: disk(center, radius), box(corner, sides), strip(a, b) and
union / difference of two regions.  Membership is decided by integer
comparisons on fixed-point coordinates, so it is bit-deterministic.  Disks
and boxes are closed sets; strips are the half-open [a, b) x [0,1)^(k-1) of
the construction.  Disks and boxes must have l-inf diameter below 1/2 so a
torus equidecomposition transfers to the plane unchanged.

Measures are exact Fractions for boxes and strips (and unions/differences of
them); a disk measure is an mpmath value pi*rho^2 carried at >= 128 bits of
precision together with a 2^-100 uncertainty band, which is far below every
tolerance used downstream.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Any

import mpmath
import numpy as np

from .errors import ConfigError
from .fixedpoint import DEFAULT_BITS, TorusPoint, centered

MEASURE_PREC = 128
MEASURE_BAND = Fraction(1, 1 << 100)


class Region:
    """Base class; subclasses implement contains/contains_grid/measure."""

    kind = "abstract"

    def contains(self, p: TorusPoint) -> bool:
        raise NotImplementedError

    def contains_grid(self, pos: list[np.ndarray], bits: int) -> np.ndarray:
        """Vectorized membership for fixed-point coordinate arrays (uint64)."""
        raise NotImplementedError

    def measure(self):
        """Lebesgue measure: Fraction if exactly representable, else mpf."""
        raise NotImplementedError

    def measure_is_exact(self) -> bool:
        return isinstance(self.measure(), Fraction)

    def to_json(self) -> dict[str, Any]:
        raise NotImplementedError

    @staticmethod
    def from_json(obj: dict[str, Any], bits: int = DEFAULT_BITS) -> "Region":
        kind = obj["kind"]
        if kind == "disk":
            return Disk(tuple(int(c, 16) for c in obj["center"]),
                        int(obj["radius"], 16), bits)
        if kind == "box":
            return Box(tuple(int(c, 16) for c in obj["corner"]),
                       tuple(int(s, 16) for s in obj["sides"]), bits)
        if kind == "strip":
            return Strip(int(obj["a"], 16), int(obj["b"], 16), obj["k"], bits)
        if kind == "union":
            return Union(Region.from_json(obj["left"], bits),
                         Region.from_json(obj["right"], bits))
        if kind == "difference":
            return Difference(Region.from_json(obj["outer"], bits),
                              Region.from_json(obj["inner"], bits))
        if kind == "all":
            return _Everything(obj["k"], bits)
        raise ConfigError(f"unknown region kind {kind!r}")


class Disk(Region):
    kind = "disk"

    def __init__(self, center: tuple[int, ...], radius: int, bits: int = DEFAULT_BITS):
        if len(center) != 2:
            raise ConfigError("disk regions require k = 2")
        m = 1 << bits
        if not (0 < radius < m // 4):
            raise ConfigError("disk diameter must stay below 1/2 in l-inf")
        self.center = tuple(c & (m - 1) for c in center)
        self.radius = radius
        self.bits = bits

    def contains(self, p: TorusPoint) -> bool:
        dx = centered(p.coords[0] - self.center[0], self.bits)
        dy = centered(p.coords[1] - self.center[1], self.bits)
        return dx * dx + dy * dy <= self.radius * self.radius

    def contains_grid(self, pos, bits):
        m = 1 << bits
        mask = np.uint64(m - 1)
        half = 0.5
        scale = 1.0 / m
        rho = self.radius * scale
        rho2 = rho * rho
        d2 = None
        diffs = []
        for c in range(2):
            diff = (pos[c] - np.uint64(self.center[c])) & mask
            diffs.append(diff)
            f = diff.astype(np.float64) * scale
            f = np.where(f > half, f - 1.0, f)
            d2 = f * f if d2 is None else d2 + f * f
        out = d2 <= rho2
        # points within the float error band of the circle get the exact test
        band = np.abs(d2 - rho2) <= 1e-12
        if band.any():
            r2 = self.radius * self.radius
            idx = np.argwhere(band)
            flat = [d.reshape(-1) for d in diffs]
            shape = band.shape
            for ix in idx:
                off = int(np.ravel_multi_index(tuple(ix), shape))
                dx = centered(int(flat[0][off]), bits)
                dy = centered(int(flat[1][off]), bits)
                out[tuple(ix)] = dx * dx + dy * dy <= r2
        return out

    def measure(self):
        with mpmath.workprec(MEASURE_PREC):
            rho = mpmath.mpf(self.radius) / mpmath.mpf(1 << self.bits)
            return +(mpmath.pi * rho * rho)

    def to_json(self):
        return {"kind": "disk", "center": [format(c, "x") for c in self.center],
                "radius": format(self.radius, "x")}


class Box(Region):
    kind = "box"

    def __init__(self, corner: tuple[int, ...], sides: tuple[int, ...],
                 bits: int = DEFAULT_BITS):
        m = 1 << bits
        if any(not (0 < s < m // 2) for s in sides):
            raise ConfigError("box diameter must stay below 1/2 in l-inf")
        self.corner = tuple(c & (m - 1) for c in corner)
        self.sides = tuple(sides)
        self.bits = bits

    def contains(self, p: TorusPoint) -> bool:
        m = (1 << self.bits) - 1
        return all(((x - c) & m) <= s
                   for x, c, s in zip(p.coords, self.corner, self.sides))

    def contains_grid(self, pos, bits):
        mask = np.uint64((1 << bits) - 1)
        out = None
        for c, (corner, side) in enumerate(zip(self.corner, self.sides)):
            diff = (pos[c] - np.uint64(corner)) & mask
            mc = diff <= np.uint64(side)
            out = mc if out is None else (out & mc)
        return out

    def measure(self):
        m = 1 << self.bits
        out = Fraction(1)
        for s in self.sides:
            out *= Fraction(s, m)
        return out

    def to_json(self):
        return {"kind": "box", "corner": [format(c, "x") for c in self.corner],
                "sides": [format(s, "x") for s in self.sides]}


class Strip(Region):
    """[a, b) x [0,1)^(k-1): the half-open slab in the first coordinate."""

    kind = "strip"

    def __init__(self, a: int, b: int, k: int, bits: int = DEFAULT_BITS):
        m = (1 << bits) - 1
        self.a = a & m
        self.width = (b - a) & m
        if self.width == 0:
            raise ConfigError("strip must have positive width")
        self.k = k
        self.bits = bits

    @property
    def b(self) -> int:
        return (self.a + self.width) & ((1 << self.bits) - 1)

    def contains(self, p: TorusPoint) -> bool:
        m = (1 << self.bits) - 1
        return ((p.coords[0] - self.a) & m) < self.width

    def contains_grid(self, pos, bits):
        mask = np.uint64((1 << bits) - 1)
        diff = (pos[0] - np.uint64(self.a)) & mask
        return diff < np.uint64(self.width)

    def measure(self):
        return Fraction(self.width, 1 << self.bits)

    def to_json(self):
        return {"kind": "strip", "a": format(self.a, "x"),
                "b": format(self.b, "x"), "k": self.k}


class Union(Region):
    """Union of two disjoint regions (disjointness is the caller's contract)."""

    kind = "union"

    def __init__(self, left: Region, right: Region):
        self.left = left
        self.right = right

    def contains(self, p):
        return self.left.contains(p) or self.right.contains(p)

    def contains_grid(self, pos, bits):
        return self.left.contains_grid(pos, bits) | self.right.contains_grid(pos, bits)

    def measure(self):
        a, b = self.left.measure(), self.right.measure()
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            return a + b
        with mpmath.workprec(MEASURE_PREC):
            return +(mpmath.mpf(a.numerator) / a.denominator if isinstance(a, Fraction) else a) \
                + (mpmath.mpf(b.numerator) / b.denominator if isinstance(b, Fraction) else b)

    def to_json(self):
        return {"kind": "union", "left": self.left.to_json(),
                "right": self.right.to_json()}


class Difference(Region):
    """outer minus inner, for inner contained in outer (caller's contract)."""

    kind = "difference"

    def __init__(self, outer: Region, inner: Region):
        self.outer = outer
        self.inner = inner

    def contains(self, p):
        return self.outer.contains(p) and not self.inner.contains(p)

    def contains_grid(self, pos, bits):
        return self.outer.contains_grid(pos, bits) & ~self.inner.contains_grid(pos, bits)

    def measure(self):
        a, b = self.outer.measure(), self.inner.measure()
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            return a - b
        with mpmath.workprec(MEASURE_PREC):
            av = mpmath.mpf(a.numerator) / a.denominator if isinstance(a, Fraction) else a
            bv = mpmath.mpf(b.numerator) / b.denominator if isinstance(b, Fraction) else b
            return +(av - bv)

    def to_json(self):
        return {"kind": "difference", "outer": self.outer.to_json(),
                "inner": self.inner.to_json()}


def whole_torus(k: int, bits: int = DEFAULT_BITS) -> Region:
    """The full torus as a box-complement trick is not needed: use a strip of
    width 1 - eps? The full torus is realized as Strip(0, 0) being invalid, so
    provide an explicit region."""
    return _Everything(k, bits)


class _Everything(Region):
    kind = "all"

    def __init__(self, k: int, bits: int):
        self.k = k
        self.bits = bits

    def contains(self, p):
        return True

    def contains_grid(self, pos, bits):
        return np.ones(pos[0].shape, bool)

    def measure(self):
        return Fraction(1)

    def to_json(self):
        return {"kind": "all", "k": self.k}

"""Exact fixed-point arithmetic on the torus.

A torus coordinate is an integer in [0, 2^B) standing for the real number
coord / 2^B in [0, 1).  All arithmetic is mod 2^B, so torus translation and
scalar multiples are exact and equality is bitwise.  B is carried explicitly
so that serialized values are unambiguous.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

DEFAULT_BITS = 62


def reduce_mod(value: int, bits: int) -> int:
    return value & ((1 << bits) - 1)


def centered(value: int, bits: int) -> int:
    """Signed representative of value mod 2^B in (-2^(B-1), 2^(B-1)]."""
    m = 1 << bits
    v = value & (m - 1)
    return v - m if v > m // 2 else v


def circ_dist(value: int, bits: int) -> int:
    """Distance of value mod 2^B to 0 on the circle, in fixed-point units."""
    m = 1 << bits
    v = value & (m - 1)
    return min(v, m - v)


def to_fraction(value: int, bits: int) -> Fraction:
    return Fraction(value, 1 << bits)


def from_float(x: float, bits: int = DEFAULT_BITS) -> int:
    return int(round((x % 1.0) * (1 << bits))) & ((1 << bits) - 1)


def from_fraction(x: Fraction, bits: int = DEFAULT_BITS) -> int:
    num = x.numerator * (1 << bits)
    return (num // x.denominator) & ((1 << bits) - 1)


@dataclass(frozen=True)
class TorusPoint:
    """A point of T^k with exact fixed-point coordinates."""

    coords: tuple[int, ...]
    bits: int = DEFAULT_BITS

    def __post_init__(self):
        m = 1 << self.bits
        if any(not (0 <= c < m) for c in self.coords):
            raise ValueError("coordinates must lie in [0, 2^bits)")

    @property
    def k(self) -> int:
        return len(self.coords)

    def add(self, other: Sequence[int]) -> "TorusPoint":
        m = (1 << self.bits) - 1
        return TorusPoint(tuple((a + b) & m for a, b in zip(self.coords, other)),
                          self.bits)

    def sub(self, other: Sequence[int]) -> "TorusPoint":
        m = (1 << self.bits) - 1
        return TorusPoint(tuple((a - b) & m for a, b in zip(self.coords, other)),
                          self.bits)

    def scale_add(self, n: int, vec: Sequence[int]) -> "TorusPoint":
        m = (1 << self.bits) - 1
        return TorusPoint(tuple((a + n * b) & m for a, b in zip(self.coords, vec)),
                          self.bits)

    def fractions(self) -> tuple[Fraction, ...]:
        return tuple(to_fraction(c, self.bits) for c in self.coords)

    def floats(self) -> tuple[float, ...]:
        return tuple(c / (1 << self.bits) for c in self.coords)

    def hex(self) -> list[str]:
        return [format(c, "x") for c in self.coords]

    @staticmethod
    def from_hex(parts: Iterable[str], bits: int = DEFAULT_BITS) -> "TorusPoint":
        return TorusPoint(tuple(int(p, 16) for p in parts), bits)


def combination(vectors: Sequence[Sequence[int]], n: Sequence[int], bits: int) -> tuple[int, ...]:
    """Sum n_j * x_j mod 2^B, exactly (arbitrary-precision integers; numpy
    scalars are coerced so fixed-width overflow cannot occur)."""
    k = len(vectors[0])
    mask = (1 << bits) - 1
    out = [0] * k
    for nj, xj in zip(n, vectors):
        nj = int(nj)
        if nj == 0:
            continue
        for c in range(k):
            out[c] = (out[c] + nj * int(xj[c])) & mask
    return tuple(out)

"""Generator vectors for the lattice action on the torus.

A GeneratorSet holds d vectors x_1..x_d in T^k with fixed-point coordinates.
The action n . u = u + sum n_j x_j (mod 1) turns each orbit into a copy of
Z^d; the orbit graph connects u to gamma . u for the 3^d - 1 nonzero gamma in
{-1,0,1}^d.  Almost-sure rational independence is replaced by an explicit,
exhaustively checked window-freeness audit: no nonzero |n|_inf <= radius may
satisfy sum n_j x_j = 0 exactly.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import BudgetExceededError, FreenessError
from .fixedpoint import DEFAULT_BITS, combination

DEFAULT_ENUM_BUDGET = 200_000_000
MAX_REDRAWS = 1000


@dataclass(frozen=True)
class GeneratorSet:
    k: int
    d: int
    bits: int
    x: tuple[tuple[int, ...], ...]   # d vectors, each k fixed-point coords
    seed: int
    freeness_radius: int
    redraws: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "seed": self.seed, "k": self.k, "d": self.d, "B": self.bits,
            "freeness_radius": self.freeness_radius, "redraws": self.redraws,
            "x": [[format(c, "x") for c in vec] for vec in self.x],
        }

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "GeneratorSet":
        return GeneratorSet(
            k=obj["k"], d=obj["d"], bits=obj["B"],
            x=tuple(tuple(int(c, 16) for c in vec) for vec in obj["x"]),
            seed=obj["seed"], freeness_radius=obj["freeness_radius"],
            redraws=obj.get("redraws", 0),
        )


def _axis_values(coord: int, radius: int, bits: int) -> np.ndarray:
    """(n * coord) mod 2^B for n in -radius..radius, as uint64."""
    m = 1 << bits
    return np.array([((n - radius) * coord) % m for n in range(2 * radius + 1)],
                    dtype=np.uint64)


def count_zero_combinations(x: tuple[tuple[int, ...], ...], radius: int,
                            bits: int, budget: int = DEFAULT_ENUM_BUDGET) -> int:
    """Exhaustively count nonzero |n|_inf <= radius with sum n_j x_j = 0 mod 1.

    The enumeration reduces mod 2^B after every accumulation step so partial
    sums stay below 2^63 and uint64 arithmetic is exact.  Requires bits <= 62.
    """
    d = len(x)
    k = len(x[0])
    total = (2 * radius + 1) ** d
    if total > budget:
        raise BudgetExceededError(
            f"freeness enumeration needs {total} combinations > budget {budget}")
    if bits > 62:
        raise BudgetExceededError("vectorized freeness audit requires bits <= 62")
    mask = np.uint64((1 << bits) - 1)
    # partial sums over the first d-1 axes, one array per coordinate
    partial: list[np.ndarray] = []
    for c in range(k):
        acc = _axis_values(x[0][c], radius, bits)
        for j in range(1, d - 1):
            a = _axis_values(x[j][c], radius, bits)
            acc = (acc[:, None] + a[None, :]).reshape(-1) & mask
        partial.append(acc)
    zero_count = 0
    last = [_axis_values(x[d - 1][c], radius, bits) for c in range(k)] if d > 1 else None
    if d == 1:
        allzero = np.ones(partial[0].shape, bool)
        for c in range(k):
            allzero &= partial[c] == 0
        zero_count = int(allzero.sum()) - 1  # minus the n = 0 combination
        return zero_count
    n_last = 2 * radius + 1
    for t in range(n_last):
        allzero = None
        for c in range(k):
            s = (partial[c] + last[c][t]) & mask
            z = s == 0
            allzero = z if allzero is None else (allzero & z)
            if not allzero.any():
                break
        else:
            zero_count += int(allzero.sum())
    return zero_count - 1  # the all-zero n always hits 0


def is_window_free(gen: GeneratorSet, radius: int | None = None,
                   budget: int = DEFAULT_ENUM_BUDGET) -> bool:
    r = gen.freeness_radius if radius is None else radius
    return count_zero_combinations(gen.x, r, gen.bits, budget) == 0


def sample_generators(seed: int, k: int, d: int, bits: int = DEFAULT_BITS,
                      freeness_radius: int = 256,
                      budget: int = DEFAULT_ENUM_BUDGET) -> GeneratorSet:
    """Draw generator vectors deterministically from the seed and audit them.

    On audit failure the seed is incremented and the draw repeated; the number
    of re-draws is recorded on the returned GeneratorSet.
    """
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    if bits < 32:
        raise ValueError("need at least 32 fraction bits")
    for redraws in range(MAX_REDRAWS):
        rng = random.Random(seed + redraws)
        x = tuple(tuple(rng.getrandbits(bits) for _ in range(k)) for _ in range(d))
        gen = GeneratorSet(k=k, d=d, bits=bits, x=x, seed=seed,
                           freeness_radius=freeness_radius, redraws=redraws)
        if count_zero_combinations(x, freeness_radius, bits, budget) == 0:
            return gen
    raise FreenessError(
        f"no window-free generator set after {MAX_REDRAWS} re-draws "
        f"(radius {freeness_radius} too large for {bits} bits?)")


def act_point(gen: GeneratorSet, anchor: tuple[int, ...], n: tuple[int, ...]) -> tuple[int, ...]:
    """anchor + sum n_j x_j mod 1, exactly."""
    comb = combination(gen.x, n, gen.bits)
    mask = (1 << gen.bits) - 1
    return tuple((a + c) & mask for a, c in zip(anchor, comb))

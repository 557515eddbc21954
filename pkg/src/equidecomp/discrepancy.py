"""Discrepancy measurements on lattice windows and the classical bounds.

D(F, X) = | |F ∩ X| - |F| λ(X) | is computed with exact counts; the measure
enters as an exact Fraction (boxes, strips) or a high-precision value (disk),
in which case the result carries the same tiny uncertainty band.  The
Erdos-Turan-Koksma bound and the polylog strip bound are evaluated directly
from their defining formulas so they can be compared against measured
discrepancies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import mpmath
import numpy as np

from .errors import BudgetExceededError, WindowTooSmallError
from .regions import Region, Strip
from .window import Window

DEFAULT_HARMONIC_BUDGET = 4_000_000
ETK_PREC = 120  # bits; > 2x the 53-bit double default


def _as_mpf(measure):
    if isinstance(measure, Fraction):
        return mpmath.mpf(measure.numerator) / measure.denominator
    return measure


def prefix_table(mask: np.ndarray) -> np.ndarray:
    """Inclusive d-dimensional prefix sums with a zero border, int64."""
    d = mask.ndim
    p = np.zeros(tuple(s + 1 for s in mask.shape), np.int64)
    p[(slice(1, None),) * d] = mask
    for ax in range(d):
        np.cumsum(p, axis=ax, out=p)
    return p


def box_count(prefix: np.ndarray, lo: Sequence[int], hi: Sequence[int]) -> int:
    """Sum of the mask over the index box prod [lo_i, hi_i), via the table."""
    d = prefix.ndim
    total = 0
    for corner in range(1 << d):
        idx = tuple(hi[i] if (corner >> i) & 1 == 0 else lo[i] for i in range(d))
        sign = (-1) ** bin(corner).count("1")
        total += sign * int(prefix[idx])
    return total


def discrepancy(count_in: int, size: int, measure):
    """|count_in - size * measure| as Fraction (exact) or mpf (disk)."""
    if isinstance(measure, Fraction):
        return abs(Fraction(count_in) - size * measure)
    with mpmath.workprec(ETK_PREC):
        return abs(mpmath.mpf(count_in) - size * _as_mpf(measure))


def region_discrepancy(w: Window, offsets: Sequence[Sequence[int]],
                       region: Region, measure=None):
    """D(F, X) for F given by lattice offsets (positions computed exactly)."""
    if measure is None:
        measure = region.measure()
    inside = sum(1 for n in offsets if region.contains(w.act(n)))
    return discrepancy(inside, len(offsets), measure)


@dataclass
class DiscrepancyReport:
    radii: list[int]
    values: list[Any]               # Fractions or mpfs, max over anchors
    anchors_used: int
    fitted_exponent: float | None
    fitted_constant: float | None
    flagged: str | None = None
    per_radius_counts: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "radii": self.radii,
            "values": [str(v) if isinstance(v, Fraction) else mpmath.nstr(v, 25)
                       for v in self.values],
            "anchors_used": self.anchors_used,
            "fitted_exponent": self.fitted_exponent,
            "fitted_constant": self.fitted_constant,
            "flagged": self.flagged,
        }


def fit_loglog(radii: Sequence[int], values: Sequence[float],
               min_radius: int = 4) -> tuple[float | None, float | None, str | None]:
    """OLS fit of log(value) against log(n) for radii >= min_radius.

    Small radii are dominated by additive constants, so they are excluded;
    needs at least 3 usable points, else the fit refuses (flagged)."""
    xs, ys = [], []
    for r, v in zip(radii, values):
        fv = float(v)
        if r >= min_radius and fv > 0:
            xs.append(math.log(r))
            ys.append(math.log(fv))
    if len(xs) < 3:
        return None, None, "fit refused: fewer than 3 usable radii"
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    const = math.exp(my - slope * mx)
    return slope, const, None


def cube_discrepancy_sweep(w: Window, region: Region, radii: Sequence[int],
                           anchors: Sequence[Sequence[int]],
                           measure=None) -> DiscrepancyReport:
    """Max-over-anchors discrepancy of discrete (n+1)-cubes N_n^+ per radius.

    Every cube must fit inside the window; the side of N_n^+ is n + 1."""
    if measure is None:
        measure = region.measure()
    mask = w.mask(region)
    pre = prefix_table(mask)
    d = w.d
    anchor_idx = [w.index_of(a) for a in anchors]
    values = []
    for n in radii:
        side = n + 1
        best = None
        for idx in anchor_idx:
            if any(i + side > w.side for i in idx):
                raise WindowTooSmallError(
                    f"cube N_{n}^+ at anchor {w.offset_of(idx)} exits the window")
            cnt = box_count(pre, idx, tuple(i + side for i in idx))
            dval = discrepancy(cnt, side ** d, measure)
            if best is None or dval > best:
                best = dval
        values.append(best)
    expo, const, flag = fit_loglog(radii, values)
    if all(float(v) == 0 for v in values):
        flag = "all discrepancies zero: exponent undefined"
        expo, const = None, None
    return DiscrepancyReport(radii=list(radii), values=values,
                             anchors_used=len(anchor_idx),
                             fitted_exponent=expo, fitted_constant=const,
                             flagged=flag)


def r_weight(h: Sequence[int]) -> int:
    """r(h) = prod max(1, |h_i|)."""
    out = 1
    for v in h:
        out *= max(1, abs(v))
    return out


def etk_bound(w: Window, offsets: Sequence[Sequence[int]], n0: int,
              prec: int = ETK_PREC,
              budget: int = DEFAULT_HARMONIC_BUDGET):
    """The Erdos-Turan-Koksma majorant of box discrepancy:

    (3/2)^k ( 2|F|/(n0+1) + sum_{0<|h|_inf<=n0} |sum_x e(2 pi i <h,x>)| / r(h) )

    The inner products <h, x> are reduced mod 1 in exact integer arithmetic
    before any rounding, and the exponential sums are evaluated at `prec`
    bits with full-precision accumulation.
    """
    if n0 < 1 or not offsets:
        raise ValueError("need n0 >= 1 and nonempty F")
    k = w.k
    total = (2 * n0 + 1) ** k
    if total > budget:
        raise BudgetExceededError(
            f"ETK needs {total} harmonics > budget {budget}")
    bits = w.gen.bits
    m = 1 << bits
    pts = [w.act(n).coords for n in offsets]
    with mpmath.workprec(prec):
        two_pi = 2 * mpmath.pi
        acc = mpmath.mpf(0)
        import itertools as it
        for h in it.product(range(-n0, n0 + 1), repeat=k):
            if all(v == 0 for v in h):
                continue
            res = mpmath.mpf(0)
            ims = mpmath.mpf(0)
            for c in pts:
                phase = 0
                for hv, cv in zip(h, c):
                    phase = (phase + hv * cv) % m
                ang = two_pi * mpmath.mpf(phase) / m
                res += mpmath.cos(ang)
                ims += mpmath.sin(ang)
            acc += mpmath.sqrt(res * res + ims * ims) / r_weight(h)
        bound = mpmath.mpf("1.5") ** k * (mpmath.mpf(2 * len(pts)) / (n0 + 1) + acc)
        return +bound


@dataclass
class StripBoundReport:
    radii: list[int]
    max_discrepancy: list[Fraction]
    log_power: int
    fitted_C: float

    def to_json(self):
        return {"radii": self.radii,
                "max_discrepancy": [str(v) for v in self.max_discrepancy],
                "log_power": self.log_power, "fitted_C": self.fitted_C}


def strip_orbit_log_bound(w: Window, radii: Sequence[int],
                          strips: Sequence[Strip],
                          anchors: Sequence[Sequence[int]]) -> StripBoundReport:
    """Measured max strip-discrepancy of N_r^+ cubes and the smallest C with
    maxD(r) <= C (log 2r)^(k+d+1) across the sweep (the t = 1 instance)."""
    power = w.k + w.d + 1
    masks = [w.mask(s) for s in strips]
    pres = [prefix_table(mk) for mk in masks]
    measures = [s.measure() for s in strips]
    out = []
    for r in radii:
        side = r + 1
        best = Fraction(0)
        for a in anchors:
            idx = w.index_of(a)
            if any(i + side > w.side for i in idx):
                raise WindowTooSmallError("cube exits window in strip sweep")
            for pre, mu in zip(pres, measures):
                cnt = box_count(pre, idx, tuple(i + side for i in idx))
                dv = abs(Fraction(cnt) - side ** w.d * mu)
                if dv > best:
                    best = dv
        out.append(best)
    C = 0.0
    for r, v in zip(radii, out):
        denom = math.log(2 * r) ** power
        C = max(C, float(v) / denom)
    return StripBoundReport(radii=list(radii), max_discrepancy=out,
                            log_power=power, fitted_C=C)

"""Maximally r-discrete sets built greedily from strip covers.

A strip of width below the minimal first-coordinate gap of all nonzero
lattice combinations |n|_inf <= r is r-discrete; a partition of the circle
into such strips covers the torus, and the greedy rule

    C'_1 = C_1,   C'_i = C_i minus N_r[C'_1 | ... | C'_{i-1}]

yields a maximally r-discrete set that is an r(m-1)-local function of the m
cover strips.  On a window the greedy is evaluated by frontier iteration
(accept every candidate that is strip-minimal within its r-ball, remove its
ball, repeat), which reproduces the strip-ordered greedy exactly.  Every
point also receives a certificate flag telling whether its computed value
provably equals the infinite-lattice rule, so that agreement between windows
of different sizes can be asserted bit-exactly on certified cores.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BudgetExceededError, CoverageAuditError
from .generators import GeneratorSet, _axis_values
from .regions import Strip
from .window import Window

DEFAULT_GAP_BUDGET = 200_000_000
FRONTIER_MAX_R = 32
INF64 = np.int64(2 ** 62)


def min_strip_gap(gen: GeneratorSet, r: int,
                  budget: int = DEFAULT_GAP_BUDGET) -> int:
    """Smallest circular distance to 0 of the first coordinate of sum n_j x_j
    over nonzero |n|_inf <= r, in fixed-point units.  Exhaustive and exact."""
    if r < 1:
        raise ValueError("r must be >= 1")
    total = (2 * r + 1) ** gen.d
    if total > budget:
        raise BudgetExceededError(
            f"strip-gap enumeration needs {total} combinations > budget {budget}")
    bits = gen.bits
    m = 1 << bits
    mask = np.uint64(m - 1)
    acc = _axis_values(gen.x[0][0], r, bits)
    for j in range(1, gen.d):
        a = _axis_values(gen.x[j][0], r, bits)
        acc = (acc[:, None] + a[None, :]).reshape(-1) & mask
    center = total // 2
    dist = np.minimum(acc, (np.uint64(m) - acc) & mask)
    dist = np.delete(dist, center)
    return int(dist.min())


def strip_is_discrete(gen: GeneratorSet, width: int, r: int,
                      budget: int = DEFAULT_GAP_BUDGET) -> bool:
    """True iff every nonzero |n|_inf <= r moves the strip's first coordinate
    outside the open interval (-width, width) mod 1."""
    if not (0 < width <= (1 << gen.bits)):
        raise ValueError("width must be in (0, 1]")
    return min_strip_gap(gen, r, budget) >= width


def partition_cover(gen: GeneratorSet, r: int, width: int | None = None,
                    budget: int = DEFAULT_GAP_BUDGET) -> tuple[int, int]:
    """(width, count) of the canonical strip partition used for r-discrete
    greedy builds: equal strips of the widest discrete width."""
    if width is None:
        width = min_strip_gap(gen, r, budget)
    if width < 1:
        raise CoverageAuditError(
            f"no positive strip width is {r}-discrete for these generators")
    m = 1 << gen.bits
    count = -(-m // width)
    return width, count


@dataclass
class DiscreteSet:
    """A maximally r-discrete set restricted to a window."""

    member: np.ndarray          # bool grid
    cert: np.ndarray            # bool grid: value equals the infinite rule
    r: int
    n_strips: int
    locality_radius: int        # r * (n_strips - 1), the lemma's bound
    rounds: int = 0

    def count(self) -> int:
        return int(self.member.sum())


def _priority_grid(w: Window, cover: list[Strip] | None, width: int | None,
                   audit: bool = True) -> tuple[np.ndarray, int]:
    """Strip index of every window point (lowest index wins for overlap)."""
    if cover is None:
        pos0 = w.position_grid(0)
        pr = (pos0 // np.uint64(width)).astype(np.int64)
        n_strips = -(-(1 << w.gen.bits) // width)
        return pr, n_strips
    pr = np.full(w.shape, INF64, np.int64)
    for i in reversed(range(len(cover))):
        m = cover[i].contains_grid(w.positions(), w.gen.bits)
        pr[m] = i
    if audit and (pr == INF64).any():
        raise CoverageAuditError("cover strips do not cover the window")
    return pr, len(cover)


def _frontier_greedy(w: Window, pr: np.ndarray, r: int, max_rounds: int = 400
                     ) -> tuple[np.ndarray, np.ndarray, int]:
    size = 2 * r + 1
    alive = pr < INF64
    member = np.zeros(w.shape, bool)
    ball_inside = w.valid_mask(r)
    rounds = 0
    while alive.any():
        rounds += 1
        if rounds > max_rounds:
            raise BudgetExceededError(
                f"discrete-set greedy did not settle in {max_rounds} rounds")
        pm = np.where(alive, pr, INF64)
        mn = ndimage.minimum_filter(pm, size=size, mode="constant", cval=INF64)
        frontier = alive & (pm == mn)
        if not frontier.any():
            break
        member |= frontier
        near_member = ndimage.maximum_filter(frontier.astype(np.uint8),
                                             size=size, mode="constant",
                                             cval=0).astype(bool)
        alive &= ~near_member
    cert = certify_members(w, pr, member, r, ball_inside)
    return member, cert, rounds


def certify_members(w: Window, pr: np.ndarray, member: np.ndarray, r: int,
                    ball_inside: np.ndarray, max_iter: int = 200
                    ) -> np.ndarray:
    """Monotone fixpoint of the exactness certificates.

    A certified member makes its whole r-ball certainly non-member in the
    infinite rule (members are pairwise more than r apart); a member is
    certified once its ball is fully visible and every strictly
    lower-priority point in it is certainly a non-member.  Uncovered points
    (priority infinity) are non-members by definition."""
    size = 2 * r + 1
    cert_nm = pr == INF64            # definitional non-members
    cert_m = np.zeros(w.shape, bool)
    prev = -1
    for _ in range(max_iter):
        unknown = ~cert_nm & ~member
        bad_pr = np.where(unknown, pr, INF64)
        bad_min = ndimage.minimum_filter(bad_pr, size=size, mode="constant",
                                         cval=INF64)
        cert_m = member & ball_inside & (bad_min > pr)
        count = int(cert_m.sum())
        if count == prev:
            break
        prev = count
        cert_nm |= ndimage.maximum_filter(cert_m.astype(np.uint8), size=size,
                                          mode="constant", cval=0).astype(bool)
    return cert_nm | cert_m


def _sorted_greedy(w: Window, pr: np.ndarray, r: int
                   ) -> tuple[np.ndarray, np.ndarray, int]:
    """Point-driven greedy for large r: few accepted points, processed in
    priority order with brute-force distance checks against accepts."""
    flat_pr = pr.reshape(-1)
    order = np.argsort(flat_pr, kind="stable")
    shape = w.shape
    accepted: list[np.ndarray] = []
    acc_pr: list[int] = []
    member = np.zeros(shape, bool)
    batch = 262_144
    coords_cache = np.array(np.unravel_index(order, shape)).T  # sorted coords
    pr_sorted = flat_pr[order]
    i = 0
    npts = order.size
    while i < npts:
        j = min(i + batch, npts)
        pts = coords_cache[i:j]
        prs = pr_sorted[i:j]
        if accepted:
            acc = np.array(accepted)
            dmin = np.full(j - i, np.iinfo(np.int64).max, np.int64)
            for a in acc:
                dmin = np.minimum(dmin, np.abs(pts - a[None, :]).max(axis=1))
            free = dmin > r
        else:
            free = np.ones(j - i, bool)
        idx = np.flatnonzero(free)
        for t in idx:
            p = pts[t]
            ok = True
            for a in accepted:
                if int(np.abs(p - a).max()) <= r:
                    ok = False
                    break
            if ok:
                accepted.append(p.copy())
                acc_pr.append(int(prs[t]))
                member[tuple(p)] = True
        i = j
    # conservative certificates: an accepted point that is strip-minimal in
    # its fully-visible ball is certainly a member of the infinite rule, and
    # everything else in that ball is certainly a non-member (members are
    # pairwise more than r apart, so no other member can sit in the ball).
    cert = np.zeros(shape, bool)
    ball_inside = w.valid_mask(r)
    for p, ppr in zip(accepted, acc_pr):
        tp = tuple(p)
        if not ball_inside[tp]:
            continue
        sl = tuple(slice(c - r, c + r + 1) for c in p)
        if int(pr[sl].min()) == ppr:
            cert[sl] = True
    return member, cert, 1


def build_discrete_set(w: Window, r: int, cover: list[Strip] | None = None,
                       width: int | None = None, audit: bool = True,
                       budget: int = DEFAULT_GAP_BUDGET) -> DiscreteSet:
    """Greedy maximal r-discrete set on the window.

    cover=None uses the canonical equal-width strip partition; an explicit
    cover must consist of r-discrete strips (checked) that jointly cover the
    window (audited; audit=False restricts maximality to the covered part).
    """
    if cover is not None:
        gap = min_strip_gap(w.gen, r, budget)
        for s in cover:
            if s.width > gap:
                raise CoverageAuditError(
                    f"cover strip of width {s.width} is not {r}-discrete "
                    f"(gap {gap})")
        n_strips = len(cover)
        pr, _ = _priority_grid(w, cover, None, audit)
    else:
        width, n_strips = partition_cover(w.gen, r, width, budget)
        pr, n_strips = _priority_grid(w, None, width)
    if r <= FRONTIER_MAX_R:
        member, cert, rounds = _frontier_greedy(w, pr, r)
    else:
        member, cert, rounds = _sorted_greedy(w, pr, r)
    return DiscreteSet(member=member, cert=cert, r=r, n_strips=n_strips,
                       locality_radius=r * (n_strips - 1), rounds=rounds)


def check_discrete(member: np.ndarray, r: int) -> bool:
    """No two members within l-inf distance r (exhaustive)."""
    pts = np.argwhere(member)
    shape = member.shape
    for p in pts:
        sl = tuple(slice(max(0, c - r), min(s, c + r + 1))
                   for c, s in zip(p, shape))
        if int(member[sl].sum()) > 1:
            return False
    return True


def check_maximal(member: np.ndarray, r: int, within: np.ndarray) -> bool:
    """Every point of `within` lies at distance <= r from a member."""
    near = ndimage.maximum_filter(member.astype(np.uint8), size=2 * r + 1,
                                  mode="constant", cval=0).astype(bool)
    return bool((near | ~within).all())

"""Toast parameter schedules.

Each level carries (r_i, r'_i) and the derived chain constants, with q'_0 = 0:

    t_i  = 2 r_i + 4 q'_{i-1} + 4
    q_i  = t_i + 2 q'_{i-1} + 4
    t'_i = floor(4 r'_i / 5) + 2 q_i
    q'_i = t'_i + 2 q_i + 4

The strict preset uses r_i = 100^(2^(i+1) - 2), r'_i = 100^(2^(i+1) - 1)
(exact big integers) and provably satisfies the three chain inequalities; it
exists for schedule arithmetic only and is never executed by layer builders.
A relaxed preset takes explicit small radii and records which inequalities
fail instead of asserting them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import ScheduleError


@dataclass(frozen=True)
class ScheduleLevel:
    i: int
    r: int
    r_prime: int
    t: int
    q: int
    t_prime: int
    q_prime: int


@dataclass
class Schedule:
    preset: str                      # "strict" | "relaxed"
    r0_prime: int
    levels: list[ScheduleLevel]
    inequality_failures: list[str] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def q_prime_before(self, i: int) -> int:
        """q'_{i-1} with q'_0 = 0 (i is 1-based)."""
        return 0 if i <= 1 else self.levels[i - 2].q_prime

    def r_prime_before(self, i: int) -> int:
        """r'_{i-1} with the configured r'_0 (i is 1-based)."""
        return self.r0_prime if i <= 1 else self.levels[i - 2].r_prime

    def separation(self, i: int) -> int:
        """The core retraction 5 r'_{i-1} used by the partial Voronoi cells."""
        return 5 * self.r_prime_before(i)

    def to_json(self) -> dict[str, Any]:
        return {
            "preset": self.preset,
            "r0_prime": str(self.r0_prime),
            "levels": [{k: str(getattr(l, k))
                        for k in ("i", "r", "r_prime", "t", "q", "t_prime", "q_prime")}
                       for l in self.levels],
            "inequality_failures": self.inequality_failures,
        }


def _derive_levels(rs: Sequence[int], rps: Sequence[int]) -> list[ScheduleLevel]:
    levels = []
    qp_prev = 0
    for i, (r, rp) in enumerate(zip(rs, rps), start=1):
        if r < 1 or rp < 1:
            raise ScheduleError("all radii must be positive")
        t = 2 * r + 4 * qp_prev + 4
        q = t + 2 * qp_prev + 4
        tp = (4 * rp) // 5 + 2 * q
        qp = tp + 2 * q + 4
        levels.append(ScheduleLevel(i=i, r=r, r_prime=rp, t=t, q=q,
                                    t_prime=tp, q_prime=qp))
        qp_prev = qp
    return levels


def _inequality_report(r0_prime: int, levels: list[ScheduleLevel]) -> list[str]:
    fails = []
    if 5 * r0_prime < 5 * 0 + 9:
        fails.append("5 r'_0 >= 5 q'_0 + 9 fails")
    prev_rp = r0_prime
    for lv in levels:
        if lv.r < 5 * prev_rp - 1:
            fails.append(f"r_{lv.i} >= 5 r'_{lv.i - 1} - 1 fails "
                         f"({lv.r} < {5 * prev_rp - 1})")
        if 5 * lv.r_prime < 5 * lv.q_prime + 9:
            fails.append(f"5 r'_{lv.i} >= 5 q'_{lv.i} + 9 fails "
                         f"({5 * lv.r_prime} < {5 * lv.q_prime + 9})")
        if lv.r_prime < 15 * lv.q + 25:
            fails.append(f"r'_{lv.i} >= 15 q_{lv.i} + 25 fails "
                         f"({lv.r_prime} < {15 * lv.q + 25})")
        prev_rp = lv.r_prime
    return fails


def make_schedule(preset: str, depth: int,
                  r: Sequence[int] | None = None,
                  r_prime: Sequence[int] | None = None,
                  r0_prime: int | None = None) -> Schedule:
    """Build a schedule.

    strict: the paper constants, exact big integers; inequalities must hold.
    relaxed: explicit r/r' overrides; inequality failures are recorded.
    """
    if depth < 1:
        raise ScheduleError("depth must be >= 1")
    if preset == "strict":
        rs = [100 ** (2 ** (i + 1) - 2) for i in range(1, depth + 1)]
        rps = [100 ** (2 ** (i + 1) - 1) for i in range(1, depth + 1)]
        r0p = 100  # 100^(2^1 - 1)
        levels = _derive_levels(rs, rps)
        fails = _inequality_report(r0p, levels)
        if fails:
            raise ScheduleError(f"strict preset violates its own inequalities: {fails}")
        return Schedule(preset="strict", r0_prime=r0p, levels=levels)
    if preset == "relaxed":
        if r is None or r_prime is None or r0_prime is None:
            raise ScheduleError("relaxed preset needs r, r_prime, r0_prime")
        if len(r) < depth or len(r_prime) < depth:
            raise ScheduleError("need one (r, r') pair per level")
        if r0_prime < 1:
            raise ScheduleError("r'_0 must be positive")
        levels = _derive_levels(list(r)[:depth], list(r_prime)[:depth])
        fails = _inequality_report(r0_prime, levels)
        return Schedule(preset="relaxed", r0_prime=r0_prime, levels=levels,
                        inequality_failures=fails)
    raise ScheduleError(f"unknown preset {preset!r}")


def minimal_r1_prime(r1: int) -> int:
    """Smallest r'_1 making 5 r'_1 >= 5 q'_1 + 9 hold at depth 1 (direct
    search over the floor-recurrence)."""
    for rp in range(1, 100000):
        lv = _derive_levels([r1], [rp])[0]
        if 5 * rp >= 5 * lv.q_prime + 9:
            return rp
    raise ScheduleError("no r'_1 below 100000 satisfies the inequality")

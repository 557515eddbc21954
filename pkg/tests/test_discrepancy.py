"""Discrepancy measurements, ETK bound, strip bound, exponent fits."""
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from equidecomp import Box, Strip, Union, Window, sample_generators
from equidecomp.discrepancy import (cube_discrepancy_sweep, discrepancy,
                                    etk_bound, fit_loglog, prefix_table,
                                    box_count, r_weight, region_discrepancy,
                                    strip_orbit_log_bound)
from equidecomp.regions import _Everything

B = 62
M = 1 << B


@pytest.fixture(scope="module")
def gen2():
    return sample_generators(seed=1, k=2, d=2, freeness_radius=16)


class TestDiscrepancyBasics:
    def test_ten_points_quarter_measure(self):
        assert discrepancy(4, 10, Fraction(1, 4)) == Fraction(3, 2)

    def test_whole_torus_zero(self, gen2):
        w = Window(gen2, (0, 0), W=5)
        offs = [(0, 0), (1, 2), (-3, 4), (5, -5)]
        assert region_discrepancy(w, offs, _Everything(2, B)) == 0

    def test_empty_set_zero(self, gen2):
        w = Window(gen2, (0, 0), W=5)
        assert region_discrepancy(w, [], Box((0, 0), (M // 8, M // 8))) == 0

    def test_upper_bound_and_disjoint_value(self, gen2):
        # D(F, X) <= |F| always; equals |F| * measure when F does not meet X
        w = Window(gen2, (0, 0), W=6)
        rng = random.Random(0)
        box = Box((0, 0), (M // 16, M // 16))
        mu = box.measure()
        for _ in range(30):
            offs = [tuple(rng.randrange(-6, 7) for _ in range(2))
                    for _ in range(rng.randrange(1, 9))]
            dval = region_discrepancy(w, offs, box)
            assert dval <= len(offs)
            inside = sum(1 for n in offs if box.contains(w.act(n)))
            if inside == 0:
                assert dval == len(offs) * mu

    def test_prefix_table_counts(self):
        rng = np.random.default_rng(2)
        mask = rng.random((6, 7)) < 0.4
        pre = prefix_table(mask)
        assert box_count(pre, (1, 2), (5, 6)) == int(mask[1:5, 2:6].sum())


class TestCubeSweep:
    def test_whole_torus_flagged(self, gen2):
        w = Window(gen2, (0, 0), W=10)
        rep = cube_discrepancy_sweep(w, _Everything(2, B), [1, 2, 4],
                                     [(-5, -5), (0, 0)])
        assert all(v == 0 for v in rep.values)
        assert rep.fitted_exponent is None
        assert rep.flagged is not None

    def test_single_radius_fit_refuses(self, gen2):
        w = Window(gen2, (0, 0), W=10)
        box = Box((M // 3, M // 5), (M // 4, M // 4))
        rep = cube_discrepancy_sweep(w, box, [1], [(0, 0)])
        assert rep.fitted_exponent is None
        assert "refused" in rep.flagged
        assert len(rep.values) == 1

    def test_translation_covariance(self, gen2):
        # shifting the anchor by a lattice vector while translating the region
        # by the same torus vector leaves every count unchanged
        from equidecomp.fixedpoint import combination
        w = Window(gen2, (123, 456), W=12)
        box = Box((M // 3, M // 5), (M // 4, M // 4))
        delta = (2, -3)
        t = combination(gen2.x, delta, B)
        box_shift = Box(tuple((c + tv) & (M - 1) for c, tv in zip(box.corner, t)),
                        box.sides)
        r1 = cube_discrepancy_sweep(w, box, [2, 3, 4, 5, 6],
                                    [(0, 0), (1, 1), (-2, 3)])
        r2 = cube_discrepancy_sweep(
            w, box_shift, [2, 3, 4, 5, 6],
            [tuple(a + dlt for a, dlt in zip(anch, delta))
             for anch in [(0, 0), (1, 1), (-2, 3)]])
        assert r1.values == r2.values


class TestFit:
    def test_fit_recovers_power_law(self):
        radii = [4, 8, 16, 32, 64]
        vals = [2.5 * n ** 1.7 for n in radii]
        expo, const, flag = fit_loglog(radii, vals)
        assert flag is None
        assert expo == pytest.approx(1.7, abs=1e-9)
        assert const == pytest.approx(2.5, rel=1e-9)


class TestETK:
    def test_r_weight_example(self):
        assert r_weight((2, -3)) == 6
        assert r_weight((0, 5)) == 5
        assert r_weight((0, 0)) == 1

    def test_singleton_dominates_box_discrepancy(self, gen2):
        w = Window(gen2, (987, 654), W=4)
        bound = etk_bound(w, [(1, -1)], n0=2)
        assert bound >= 1
        rng = random.Random(1)
        for _ in range(20):
            a = rng.randrange(M)
            b = rng.randrange(M)
            box = Box((a, b), (rng.randrange(1, M // 2), rng.randrange(1, M // 2)))
            d = region_discrepancy(w, [(1, -1)], box)
            assert bound >= float(d)

    def test_dominates_measured_cube_discrepancy(self, gen2):
        w = Window(gen2, (0, 0), W=10)
        offs = [(i, j) for i in range(0, 5) for j in range(0, 5)]
        bound = etk_bound(w, offs, n0=6)
        rng = random.Random(7)
        for _ in range(40):
            a, b = rng.randrange(M), rng.randrange(M)
            box = Box((a, b), (rng.randrange(1, M // 2), rng.randrange(1, M // 2)))
            d = region_discrepancy(w, offs, box)
            assert bound >= float(d), (float(bound), float(d))


class TestTriangleSplit:
    def test_union_of_two_boxes_split(self, gen2):
        # D(F, X) <= sum of D(F, I) over a box partition of X
        w = Window(gen2, (0, 0), W=8)
        b1 = Box((0, 0), (M // 8, M // 8))
        b2 = Box((M // 2, M // 2), (M // 8, M // 16))
        X = Union(b1, b2)
        rng = random.Random(5)
        for _ in range(25):
            offs = [tuple(rng.randrange(-8, 9) for _ in range(2))
                    for _ in range(rng.randrange(1, 12))]
            dx = region_discrepancy(w, offs, X)
            d1 = region_discrepancy(w, offs, b1)
            d2 = region_discrepancy(w, offs, b2)
            assert dx <= d1 + d2


class TestStripBound:
    def test_r1_single_strip_finite(self, gen2):
        w = Window(gen2, (0, 0), W=6)
        s = Strip(0, M // 3, k=2, bits=B)
        rep = strip_orbit_log_bound(w, [1], [s], [(0, 0), (-1, 2)])
        assert len(rep.max_discrepancy) == 1
        assert rep.max_discrepancy[0] >= 0

    def test_full_width_strip_zero(self, gen2):
        w = Window(gen2, (0, 0), W=6)
        s = Strip(0, M - 1, k=2, bits=B)  # width 1 - ulp
        rep = strip_orbit_log_bound(w, [1, 2], [s], [(0, 0)])
        # discrepancy of an almost-full strip is at most cube size * ulp
        assert all(float(v) < 1e-9 for v in rep.max_discrepancy)

    def test_polylog_regime_growth(self):
        gen = sample_generators(seed=1, k=2, d=3, freeness_radius=8)
        w = Window(gen, (0, 0), W=36)
        s = Strip(0, M // 16, k=2, bits=B)
        rng = random.Random(0)
        anchors = [tuple(rng.randrange(-36, 3) for _ in range(3))
                   for _ in range(24)]
        rep = strip_orbit_log_bound(w, [8, 16, 32], [s], anchors)
        # measured max grows slower than r itself (poly-log regime)
        v8, v32 = float(rep.max_discrepancy[0]), float(rep.max_discrepancy[2])
        assert v32 < v8 * (32 / 8)
        assert rep.fitted_C > 0
        # and the fitted C indeed dominates the whole sweep
        for r, v in zip(rep.radii, rep.max_discrepancy):
            import math
            assert float(v) <= rep.fitted_C * math.log(2 * r) ** rep.log_power + 1e-12

"""Schedules, closure operator, Voronoi cores, layer builds, validation."""
import numpy as np
import pytest

from equidecomp import GeneratorSet, Window, sample_generators
from equidecomp.discrete import DiscreteSet, build_discrete_set
from equidecomp.errors import ScheduleError
from equidecomp.gridsets import components, dilate, rle_hex, rle_unhex
from equidecomp.schedule import make_schedule, minimal_r1_prime
from equidecomp.toast import (ToastLayer, ToastSequence, build_core_I,
                              build_layers, closure, tilde_remove,
                              validate_toast)

B = 62


@pytest.fixture(scope="module")
def gen2():
    return sample_generators(seed=1, k=2, d=2, freeness_radius=16)


def synthetic_discrete(w, offs, r):
    member = np.zeros(w.shape, bool)
    for n in offs:
        member[w.index_of(n)] = True
    cert = np.ones(w.shape, bool)
    return DiscreteSet(member=member, cert=cert, r=r, n_strips=1,
                       locality_radius=0)


def layer_from_offsets(w, offs, index=1, role="J"):
    mask = np.zeros(w.shape, bool)
    for n in offs:
        mask[w.index_of(n)] = True
    comps = components(mask)
    for c in comps:
        c.clipped = False
    return ToastLayer(index=index, role=role, mask=mask,
                      trust=np.ones(w.shape, bool), comps=comps)


class TestSchedule:
    def test_strict_level1_constants(self):
        s = make_schedule("strict", 2)
        assert s.levels[0].r == 100 ** 2 == 10000
        assert s.levels[0].r_prime == 100 ** 3
        assert s.levels[1].r == 100 ** 6
        assert s.levels[1].r_prime == 100 ** 7
        assert s.r0_prime == 100
        assert s.inequality_failures == []

    def test_relaxed_recurrence_plug_in(self):
        s = make_schedule("relaxed", 1, r=[4], r_prime=[349], r0_prime=1)
        lv = s.levels[0]
        assert lv.t == 12 and lv.q == 16
        assert lv.t_prime == (4 * 349) // 5 + 32
        assert lv.q_prime == lv.t_prime + 2 * lv.q + 4

    def test_minimal_r1_prime_direct_search(self):
        # with the floor in t'_i the direct search gives 346; the looser
        # floor-free bound (4 r'/5 + 68 <= r') gives 349, which also passes
        assert minimal_r1_prime(4) == 346
        s349 = make_schedule("relaxed", 1, r=[4], r_prime=[349], r0_prime=1)
        assert not any("5 r'_1" in f for f in s349.inequality_failures)
        s345 = make_schedule("relaxed", 1, r=[4], r_prime=[345], r0_prime=1)
        assert any("5 r'_1" in f for f in s345.inequality_failures)

    def test_relaxed_records_failures(self):
        s = make_schedule("relaxed", 2, r=[4, 8], r_prime=[2, 2], r0_prime=1)
        assert s.inequality_failures  # tiny radii violate the growth demands

    def test_nonpositive_overrides_error(self):
        with pytest.raises(ScheduleError):
            make_schedule("relaxed", 1, r=[0], r_prime=[5], r0_prime=1)

    def test_strict_never_executes(self, gen2):
        w = Window(gen2, (0, 0), W=8)
        s = make_schedule("strict", 1)
        with pytest.raises(ScheduleError):
            build_layers(w, s, 1)


class TestClosure:
    def setup_method(self):
        self.gen = sample_generators(seed=2, k=2, d=2, freeness_radius=8)
        self.w = Window(self.gen, (0, 0), W=8)

    def mask_of(self, offs):
        m = np.zeros(self.w.shape, bool)
        for n in offs:
            m[self.w.index_of(n)] = True
        return m

    def test_no_priors_returns_seed(self):
        seed = self.mask_of([(3, 0), (0, 3)])
        out = closure(self.w, [], seed, b=2)
        assert (out == seed).all()

    def test_uncut_neighborhood_not_absorbed(self):
        prior = self.mask_of([(0, 0)])
        seed = self.mask_of([(3, 0)])
        out = closure(self.w, [prior], seed, b=2)
        assert (out == seed).all()

    def test_cut_neighborhood_absorbed_to_ball(self):
        prior = self.mask_of([(0, 0)])
        seed = self.mask_of([(2, 0)])
        out = closure(self.w, [prior], seed, b=2)
        want = seed | dilate(prior, 2)
        assert (out == want).all()
        assert out.sum() == 25  # the seed point lies inside the 5x5 ball

    def test_order_independence(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            priors = [rng.random(self.w.shape) < 0.04 for _ in range(3)]
            seed = rng.random(self.w.shape) < 0.05
            ref = closure(self.w, priors, seed, b=1)
            perm = [priors[i] for i in rng.permutation(3)]
            assert (closure(self.w, perm, seed, b=1) == ref).all()

    def test_monotone_in_seed(self):
        rng = np.random.default_rng(1)
        priors = [rng.random(self.w.shape) < 0.05]
        seed1 = rng.random(self.w.shape) < 0.04
        seed2 = seed1 | (rng.random(self.w.shape) < 0.04)
        out1 = closure(self.w, priors, seed1, b=2)
        out2 = closure(self.w, priors, seed2, b=2)
        assert (out1 <= out2).all()


class TestCoreI:
    def setup_method(self):
        self.gen = sample_generators(seed=3, k=2, d=2, freeness_radius=8)
        self.w = Window(self.gen, (0, 0), W=10)

    def test_single_center_contains_ball(self):
        X = synthetic_discrete(self.w, [(0, 0)], r=3)
        layer = build_core_I(self.w, X, sep=5)
        ball = dilate(self.mask_point((0, 0)), 3)
        assert (layer.mask | ~ball).all()
        assert len(components(layer.mask)) == 1

    def mask_point(self, n):
        m = np.zeros(self.w.shape, bool)
        m[self.w.index_of(n)] = True
        return m

    def test_two_centers_tie_region_removed(self):
        r = 2
        centers = [(-3, 0), (2, 0)]
        X = synthetic_discrete(self.w, centers, r=r)  # distance 5
        layer = build_core_I(self.w, X, sep=6)
        # exhaustive membership check of the defining condition on the
        # 2-point configuration: midpoints (and here, by |d1 - d2| <= 5,
        # every point) fall outside the sep-6 core
        mid = self.w.index_of((0, 0))
        assert not layer.mask[mid]
        for ix in np.ndindex(*self.w.shape):
            off = self.w.offset_of(ix)
            dists = sorted(max(abs(a - b) for a, b in zip(off, c))
                           for c in centers)
            if dists[0] > r + 1:
                continue  # outside the maximality premise of the builder
            want = dists[1] - dists[0] >= 6
            assert bool(layer.mask[ix]) == want, (off, dists)

    def test_two_far_centers_keep_their_cells(self):
        r = 2
        X = synthetic_discrete(self.w, [(-6, -6), (6, 6)], r=r)  # distance 12
        layer = build_core_I(self.w, X, sep=5)
        assert layer.mask[self.w.index_of((-6, -6))]
        assert layer.mask[self.w.index_of((6, 6))]
        assert not layer.mask[self.w.index_of((0, 0))]

    def test_sep0_degenerate(self):
        X = synthetic_discrete(self.w, [(0, 0), (5, 5)], r=2)
        layer = build_core_I(self.w, X, sep=0)
        assert layer.facts["degenerate_sep0"]
        assert layer.mask.all()


class TestBuildLayers:
    def setup_method(self):
        self.gen = sample_generators(seed=4, k=2, d=2, freeness_radius=16)
        self.w = Window(self.gen, (0, 0), W=36)
        self.sched = make_schedule("relaxed", 2, r=[6, 14],
                                   r_prime=[2, 3], r0_prime=1)

    def test_depth1_J_equals_I(self):
        seq = build_layers(self.w, self.sched, 1, roles="J")
        jl = seq.layers[0]
        X = build_discrete_set(self.w, self.sched.levels[0].r)
        core = build_core_I(self.w, X, self.sched.separation(1))
        assert (jl.mask == core.mask).all()

    def test_K_contains_N2_of_J(self):
        seq = build_layers(self.w, self.sched, 1, roles="JK")
        jl, kl = seq.layers
        assert kl.facts["contains_N2[J]"]
        assert (kl.mask | ~dilate(jl.mask, 2)).all()

    def test_L_contains_ball_of_Y(self):
        seq = build_layers(self.w, self.sched, 1, roles="JKL")
        ll = seq.layers[2]
        assert ll.facts["contains_ball[Y]"]

    def test_depth2_containments_and_validation(self):
        seq = build_layers(self.w, self.sched, 2, roles="J")
        for l in seq.layers:
            assert l.facts["containment_J_in_Nq'[I]"]
        rec = validate_toast(seq)
        assert rec["passed"], rec["witnesses"]

    def test_identity_shift_reproduces_unshifted(self):
        a = build_layers(self.w, self.sched, 1, roles="JKL")
        b = build_layers(self.w, self.sched, 1, roles="JKL",
                         shift=(3,) * self.w.d)
        for la, lb in zip(a.layers, b.layers):
            assert (la.mask == lb.mask).all()


class TestValidateToast:
    def test_empty_layers_valid(self, gen2):
        w = Window(gen2, (0, 0), W=6)
        seq = ToastSequence(window=w, schedule=None, layers=[
            layer_from_offsets(w, [], 1), layer_from_offsets(w, [], 2)])
        assert validate_toast(seq)["passed"]

    def test_two_singletons_at_distance_2_fail(self, gen2):
        w = Window(gen2, (0, 0), W=6)
        seq = ToastSequence(window=w, schedule=None, layers=[
            layer_from_offsets(w, [(0, 0), (2, 0)], 1)])
        rec = validate_toast(seq)
        assert not rec["passed"]
        assert rec["witnesses"]

    def test_property3_violation_detected(self, gen2):
        w = Window(gen2, (0, 0), W=6)
        early = layer_from_offsets(w, [(0, 0)], 1)
        # later layer intersects N_2[S] without containing it
        later = layer_from_offsets(w, [(2, 0), (5, 5)], 2)
        seq = ToastSequence(window=w, schedule=None, layers=[early, later])
        rec = validate_toast(seq)
        assert not rec["passed"]


class TestTilde:
    def test_depth1_removes_nothing(self, gen2):
        w = Window(gen2, (0, 0), W=8)
        j1 = layer_from_offsets(w, [(0, 0)], 1, "J")
        k1 = layer_from_offsets(w, [(4, 4)], 1, "K")
        seq = ToastSequence(window=w, schedule=None, layers=[j1, k1])
        out = tilde_remove(seq)
        assert (out.layers[1].mask == k1.mask).all()

    def test_conflicting_K_component_removed(self, gen2):
        w = Window(gen2, (0, 0), W=8)
        j1 = layer_from_offsets(w, [(-5, -5)], 1, "J")
        k1 = layer_from_offsets(w, [(0, 0), (5, 5)], 1, "K")
        j2 = layer_from_offsets(w, [(2, 0)], 2, "J")  # distance 2 from (0,0)
        seq = ToastSequence(window=w, schedule=None, layers=[j1, k1, j2])
        out = tilde_remove(seq)
        k_new = [l for l in out.layers if l.role == "K"][0]
        assert not k_new.mask[w.index_of((0, 0))]
        assert k_new.mask[w.index_of((5, 5))]
        assert k_new.facts["tilde_removed_components"] == 1

    def test_tilde_equals_setminus_later_J(self, gen2):
        # eq analog: K-tilde = K minus the union of later J (on this window)
        gen = gen2
        w = Window(gen, (0, 0), W=36)
        sched = make_schedule("relaxed", 2, r=[6, 14], r_prime=[2, 3],
                              r0_prime=1)
        seq = build_layers(w, sched, 2, roles="JK")
        out = tilde_remove(seq)
        later_j = np.zeros(w.shape, bool)
        for l in seq.layers:
            if l.role == "J" and l.index == 2:
                later_j |= l.mask
        k1 = [l for l in seq.layers if l.role == "K" and l.index == 1][0]
        k1_t = [l for l in out.layers if l.role == "K" and l.index == 1][0]
        # removing whole near components never keeps a vertex of a later J
        assert not (k1_t.mask & later_j).any()
        # and components were removed wholesale, never split
        assert all(any((c.local == k.local).all() and c.bbox == k.bbox
                       for c in k1.comps) for k in k1_t.comps)

    def test_coverage_of_L_preserved(self, gen2):
        w = Window(gen2, (0, 0), W=36)
        sched = make_schedule("relaxed", 1, r=[6], r_prime=[5], r0_prime=1)
        seq = build_layers(w, sched, 1, roles="JKL")
        out = tilde_remove(seq)
        union_new = np.zeros(w.shape, bool)
        for l in out.layers:
            union_new |= l.mask
        union_L = np.zeros(w.shape, bool)
        for l in seq.layers:
            if l.role == "L":
                union_L |= l.mask
        assert (union_new | ~union_L).all()


class TestRLE:
    def test_roundtrip(self):
        rng = np.random.default_rng(3)
        m = rng.random((17, 9)) < 0.3
        assert (rle_unhex(rle_hex(m)) == m).all()

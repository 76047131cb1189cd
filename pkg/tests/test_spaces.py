import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cayleylab import (
    BudgetExceededError,
    FreeAbelianL1,
    FreeGroup,
    FreeProductQuotient,
    Homomorphism,
    OutOfRangeError,
    QuotientSpace,
    all_geodesics,
    enumerate_ball,
    geodesic,
    growth_exponent,
    kernel_counts_dp,
    kernel_counts_filtered,
    poincare_partial,
    sphere,
    sphere_counts,
)
from cayleylab.spaces import CONVERGENT, DIVERGENT, load_ball, save_ball

from .oracles import (
    enumerate_reduced_words,
    free_ball_closed,
    free_sphere_closed,
    lattice_path_count,
    lattice_sphere_closed,
)


class TestBalls:
    def test_identity_only(self, F2):
        assert len(enumerate_ball(F2, 0)) == 1

    def test_f2_radius2(self, F2):
        ball = enumerate_ball(F2, 2)
        assert len(ball) == 17  # 2*3^2 - 1
        # cross-check against brute-force reduced-word enumeration
        assert sorted(ball.elements) == sorted(enumerate_reduced_words(2, 2))

    def test_z2_radius1(self, Z2):
        assert len(enumerate_ball(Z2, 1)) == 5

    def test_bfs_deterministic_order(self, F2):
        b1 = enumerate_ball(F2, 3)
        b2 = enumerate_ball(F2, 3)
        assert b1.elements == b2.elements
        # breadth-first: distances nondecreasing, alphabet order inside radius 1
        assert b1.dist == sorted(b1.dist)
        assert b1.elements[1:5] == [(1,), (-1,), (2,), (-2,)]

    def test_budget(self, F2):
        with pytest.raises(BudgetExceededError):
            enumerate_ball(F2, 6, budget=100)

    def test_ball_cache_roundtrip(self, F2, tmp_path):
        ball = enumerate_ball(F2, 3)
        save_ball(ball, tmp_path)
        loaded = load_ball(F2, 3, tmp_path)
        assert loaded is not None
        assert loaded.elements == ball.elements
        assert loaded.dist == ball.dist
        assert load_ball(FreeGroup(3), 3, tmp_path) is None

    def test_predecessor_paths_are_geodesics(self, f2_ball4, F2):
        for g in f2_ball4.elements[::7]:
            path = f2_ball4.path_to_o(g)
            assert len(path) == F2.length(g) + 1
            assert path[-1] == F2.identity


class TestDistanceGeodesics:
    def test_spec_distance_example(self, F2):
        assert F2.distance(F2.word("abA"), F2.word("b")) == 4

    def test_distance_self(self, F2, Z2):
        assert F2.distance(F2.word("ab"), F2.word("ab")) == 0
        assert Z2.distance((2, 2), (2, 2)) == 0

    def test_triangle_inequality_exhaustive_radius2(self, F2):
        ball = enumerate_ball(F2, 2)
        els = ball.elements
        for x in els:
            for y in els:
                dxy = F2.distance(x, y)
                assert dxy == F2.distance(y, x)
                for z in els[::3]:
                    assert dxy <= F2.distance(x, z) + F2.distance(z, y)

    @given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=8),
           st.lists(st.sampled_from([1, -1, 2, -2]), max_size=8),
           st.lists(st.sampled_from([1, -1, 2, -2]), max_size=8))
    @settings(max_examples=50)
    def test_triangle_inequality_random(self, r1, r2, r3):
        F2 = FreeGroup(2)
        x, y, z = (F2.from_letters(tuple(r)) for r in (r1, r2, r3))
        assert F2.distance(x, y) <= F2.distance(x, z) + F2.distance(z, y)

    def test_tree_geodesic_unique(self, F2):
        path = geodesic(F2, F2.identity, F2.word("a^2"))
        assert path == [(), (1,), (1, 1)]
        assert all_geodesics(F2, F2.identity, F2.word("a^2")) == [path]

    def test_lattice_geodesic_count(self, Z2):
        assert len(all_geodesics(Z2, (0, 0), (1, 1))) == 2
        assert len(all_geodesics(Z2, (0, 0), (2, 1))) == lattice_path_count((2, 1))
        assert len(all_geodesics(Z2, (1, 1), (3, -2))) == lattice_path_count((2, 3))

    def test_geodesic_trivial(self, F2):
        assert geodesic(F2, F2.word("b"), F2.word("b")) == [F2.word("b")]

    def test_geodesic_steps(self, F2):
        g, h = F2.word("ba"), F2.word("a^2b")
        path = geodesic(F2, g, h)
        assert path[0] == g and path[-1] == h
        assert len(path) == F2.distance(g, h) + 1
        for u, v in zip(path, path[1:]):
            assert F2.distance(u, v) == 1

    def test_all_geodesics_budget(self, Z2):
        with pytest.raises(BudgetExceededError):
            all_geodesics(Z2, (0, 0), (5, 5), budget=10)


class TestSphere:
    def test_f2_spheres(self, f2_ball4):
        assert len(sphere(f2_ball4, 3, 0.5)) == 36
        assert len(sphere(f2_ball4, 0, 0.5)) == 1
        # half-open window 2 <= d < 3 selects the d=2 sphere (12 = 4*3)
        assert len(sphere(f2_ball4, 2.5, 0.5)) == 12

    def test_out_of_range(self, f2_ball4):
        with pytest.raises(OutOfRangeError):
            sphere(f2_ball4, 4.6, 0.5)


class TestSphereCounts:
    def test_free_closed_vs_enumerate(self, F2):
        closed = sphere_counts(F2, 9, method="closed")
        enumerated = sphere_counts(F2, 9, method="enumerate")
        assert closed == enumerated
        assert closed == [free_sphere_closed(2, l) for l in range(10)]

    def test_rank3(self):
        F3 = FreeGroup(3)
        counts = sphere_counts(F3, 6, method="enumerate")
        assert counts == [free_sphere_closed(3, l) for l in range(7)]

    def test_lattice(self, Z2):
        assert sphere_counts(Z2, 8) == [lattice_sphere_closed(l) for l in range(9)]
        assert sphere_counts(Z2, 5, method="enumerate") == sphere_counts(Z2, 5)

    def test_fpq_vs_bfs(self):
        Q3 = FreeProductQuotient(2, {0: 3})
        assert sphere_counts(Q3, 5) == enumerate_ball(Q3, 5).sphere_counts()


class TestGrowthExponent:
    def test_free_ratio_exact(self, F2):
        est = growth_exponent(sphere_counts(F2, 8))
        for ell in range(2, 9):
            assert est.ratio[ell] == pytest.approx(math.log(3), abs=1e-12)

    def test_lattice_ratio_decays(self, Z2):
        est = growth_exponent(sphere_counts(Z2, 60))
        assert est.ratio[60] < 0.1
        assert est.final_ratio == pytest.approx(math.log(60 / 59))

    def test_constant_counts(self):
        est = growth_exponent([1, 1, 1])
        assert est.ratio[1] == 0 and est.ratio[2] == 0

    def test_zero_sphere_flagged(self):
        est = growth_exponent([1, 0, 4])
        assert 1 in est.undefined_ratios and 2 in est.undefined_ratios
        assert math.isnan(est.ratio[1])


class TestPoincare:
    def test_divergent_at_log3(self, F2):
        rec = poincare_partial(F2, math.log(3), 20)
        assert rec.classification == DIVERGENT
        assert rec.total == pytest.approx(1 + 4 * 20 / 3, rel=1e-12)

    def test_convergent_above(self, F2):
        rec = poincare_partial(F2, 1.2, 20)
        assert rec.classification == CONVERGENT
        # geometric tail: increments shrink by 3e^{-1.2} < 1
        incs = rec.log_increments
        for ell in range(2, 21):
            assert incs[ell] - incs[ell - 1] == pytest.approx(math.log(3) - 1.2, abs=1e-9)

    def test_zero_twist_matches_untwisted(self, F2):
        plain = poincare_partial(F2, 1.2, 8)
        twisted = poincare_partial(F2, 1.2, 8, twist=lambda g: 0.0)
        for a, b in zip(plain.partial_sums, twisted.partial_sums):
            assert a == pytest.approx(b, rel=1e-12)

    def test_geometric_decay_above_exponent(self, Z2):
        # ratio-estimator exponent of Z^2 is ~0; any s > 0 decays eventually
        rec = poincare_partial(Z2, 0.5, 30)
        assert rec.classification == CONVERGENT

    def test_twisted_symmetry_bound(self, F2):
        # e^{-2C} P_chi <= P_{-chi} <= e^{2C} P_chi for all partial sums
        from cayleylab import QuasiMorphism

        chi = QuasiMorphism.brooks_counting(F2, F2.word("ab"))
        ball = enumerate_ball(F2, 4)
        defect = chi.measured_defect(F2, ball.elements[:40])
        rec_p = poincare_partial(F2, 1.2, 6, twist=chi.fn)
        rec_m = poincare_partial(F2, 1.2, 6, twist=lambda g: -chi.fn(g))
        lo, hi = math.exp(-2 * defect), math.exp(2 * defect)
        for a, b in zip(rec_p.partial_sums, rec_m.partial_sums):
            assert lo * a - 1e-9 <= b <= hi * a + 1e-9


class TestQuotient:
    def test_abelianization_distance(self, F2, Z2):
        hom = Homomorphism(F2, Z2, [(1, 0), (0, 1)])
        qs = QuotientSpace(hom)
        assert qs.distance(F2.identity, F2.word("a^3B")) == 4

    def test_trivial_quotient(self, F2):
        from cayleylab import FiniteQuotient

        T = FiniteQuotient([[0]], [0])
        hom = Homomorphism(F2, T, [0, 0])
        qs = QuotientSpace(hom)
        assert qs.distance(F2.word("ab"), F2.word("B")) == 0

    def test_kernel_collapses(self, F2):
        Q2 = FreeProductQuotient(2, {0: 2})
        hom = Homomorphism(F2, Q2, [Q2.word("a"), Q2.word("b")])
        qs = QuotientSpace(hom)
        assert qs.distance(F2.identity, F2.word("a^2")) == 0

    def test_one_lipschitz(self, F2, Z2, f2_ball3):
        hom = Homomorphism(F2, Z2, [(1, 0), (0, 1)])
        qs = QuotientSpace(hom)
        rng = random.Random(7)
        els = f2_ball3.elements
        for _ in range(200):
            g, h = rng.choice(els), rng.choice(els)
            assert qs.distance(g, h) <= F2.distance(g, h)

    def test_quotient_sphere_counts(self, F2, Z2):
        hom = Homomorphism(F2, Z2, [(1, 0), (0, 1)])
        qs = QuotientSpace(hom)
        assert qs.sphere_counts(10) == [lattice_sphere_closed(l) for l in range(11)]


class TestKernelCounts:
    def test_dp_matches_filtered_abelianization(self, F2, Z2):
        hom = Homomorphism(F2, Z2, [(1, 0), (0, 1)])
        assert kernel_counts_dp(hom, 8) == kernel_counts_filtered(hom, 8)

    def test_dp_matches_filtered_fpq(self, F2):
        for k in (2, 3):
            Qk = FreeProductQuotient(2, {0: k})
            hom = Homomorphism(F2, Qk, [Qk.word("a"), Qk.word("b")])
            assert kernel_counts_dp(hom, 8) == kernel_counts_filtered(hom, 8)

    def test_smallest_commutator_shell(self, F2, Z2):
        # the 8 cyclic/inverse variants of [a,b] are the shortest kernel words
        hom = Homomorphism(F2, Z2, [(1, 0), (0, 1)])
        counts = kernel_counts_dp(hom, 4)
        assert counts == [1, 0, 0, 0, 8]

    def test_index_two_kernel(self, F2):
        from cayleylab import FiniteQuotient

        Q = FiniteQuotient([[0, 1], [1, 0]], [1])
        hom = Homomorphism(F2, Q, [1, 0])  # a -> 1, b -> 0
        counts = kernel_counts_dp(hom, 10)
        assert counts == kernel_counts_filtered(hom, 10)
        ball_counts = sphere_counts(F2, 10)
        # index-2 subgroup: kernel holds roughly half of each sphere
        for ell in range(2, 11):
            assert 0 < counts[ell] < ball_counts[ell]
        total_kernel = sum(counts)
        assert total_kernel == pytest.approx(sum(ball_counts) / 2, rel=0.1)

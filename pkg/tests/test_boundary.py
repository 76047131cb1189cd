import math

import pytest

from cayleylab import (
    HorizonExhaustedError,
    InteriorCocycle,
    L1Horofunction,
    Shadow,
    TreeEnd,
    WindowCocycle,
    WindowError,
    boundary_limit,
    gradient_ray,
    gromov_product,
    limit_set_membership,
    orbit_window,
    project_cocycle,
    reduced_equiv,
    shadow_contains,
    transverse_pair_check,
)
from cayleylab.boundary import DISTINCT, EQUIVALENT, UNDECIDED, ends_equal


@pytest.fixture(scope="module")
def end_a(F2):
    return TreeEnd.from_power(F2, F2.word("a"))


@pytest.fixture(scope="module")
def end_b(F2):
    return TreeEnd.from_power(F2, F2.word("b"))


class TestEvaluate:
    def test_interior_values(self, F2):
        c = InteriorCocycle(F2, F2.word("a^3"))
        assert c.evaluate(F2.word("a"), F2.word("b")) == -2
        assert c.evaluate(F2.word("b"), F2.word("b")) == 0

    def test_tree_end_busemann(self, F2, end_a):
        # along the axis: c(a^s, a^t) = t - s (paper convention)
        assert end_a.evaluate(F2.identity, F2.word("a^3")) == 3
        assert end_a.evaluate(F2.word("a"), F2.word("a^4")) == 3
        assert end_a.evaluate(F2.word("b"), F2.identity) == 1

    def test_limit_agrees_with_interior_cocycles(self, F2, end_a, f2_ball3):
        # b_{a^n} converges to the end cocycle on the radius-3 ball
        z = F2.word("a^9")
        interior = InteriorCocycle(F2, z)
        for x in f2_ball3.elements:
            for y in f2_ball3.elements[::5]:
                assert interior.evaluate(x, y) == end_a.evaluate(x, y)

    def test_window_out_of_range(self, F2, f2_ball3):
        pots = {g: float(F2.length(g)) for g in f2_ball3.elements}
        c = WindowCocycle(F2, pots, 3)
        with pytest.raises(WindowError):
            c.evaluate(F2.word("a^4"), F2.identity)


class TestCocycleIdentityAndLipschitz:
    def test_exhaustive_radius3(self, F2, Z2, f2_ball3, z2_ball3, end_a):
        cocycles = [
            InteriorCocycle(F2, F2.word("a^3")),
            end_a,
            TreeEnd.from_power(F2, F2.word("ab")),
        ]
        els = f2_ball3.elements
        for c in cocycles:
            pot = {x: c.potential(x) for x in els}
            for x in els[::4]:
                for y in els[::4]:
                    assert abs(pot[x] - pot[y]) <= F2.distance(x, y)
                    for z in els[::8]:
                        assert (c.evaluate(x, z)
                                == c.evaluate(x, y) + c.evaluate(y, z))
        zc = [
            L1Horofunction(Z2, [("inf+",), ("inf+",)]),
            L1Horofunction(Z2, [("inf-",), ("tent", 2)]),
            InteriorCocycle(Z2, (2, -1)),
        ]
        zels = z2_ball3.elements
        for c in zc:
            pot = {x: c.potential(x) for x in zels}
            for x in zels[::3]:
                for y in zels[::3]:
                    assert abs(pot[x] - pot[y]) <= Z2.distance(x, y)


class TestBoundaryLimit:
    def test_tree_prefix_stabilization(self, F2):
        lim = boundary_limit(F2, lambda n: F2.multiply(F2.power(F2.word("a"), n), F2.word("b")))
        assert lim.variant == "TREE_END"
        assert lim.prefix(5) == (1, 1, 1, 1, 1)

    def test_constant_sequence_interior(self, F2):
        lim = boundary_limit(F2, lambda n: F2.word("b"))
        assert lim.variant == "INTERIOR"
        assert lim.point == F2.word("b")

    def test_lattice_diagonal(self, Z2):
        lim = boundary_limit(Z2, lambda n: (n, n))
        assert lim.variant == "L1_HORO"
        assert lim.modes == (("inf+",), ("inf+",))
        assert lim.evaluate((1, 2), (4, 4)) == (4 + 4) - (1 + 2)

    def test_lattice_mixed_mode(self, Z2):
        lim = boundary_limit(Z2, lambda n: (-n, 3))
        assert lim.modes == (("inf-",), ("tent", 3))

    def test_bounded_nonconstant_exhausts(self, F2):
        with pytest.raises(HorizonExhaustedError):
            boundary_limit(F2, lambda n: F2.word("a") if n % 2 else F2.word("b"),
                           horizon=24)

    def test_uncertified_window_fallback(self, Z2):
        # escapes to infinity but with no per-coordinate pattern
        def seq(n):
            return (n, [0, n, -n][n % 3])

        lim = boundary_limit(Z2, seq, horizon=30)
        assert lim.variant == "WINDOW"
        assert "no_limit_certified" in lim.flags


class TestGradientRays:
    def test_axis_ray(self, F2, end_a):
        ray = gradient_ray(end_a, F2.identity, 4)
        assert ray.vertices == [F2.identity, F2.word("a"), F2.word("a^2"),
                                F2.word("a^3"), F2.word("a^4")]
        assert ray.eps == 0.0

    def test_off_branch_ray(self, F2, end_a):
        ray = gradient_ray(end_a, F2.word("b"), 4)
        assert ray.vertices[:3] == [F2.word("b"), F2.identity, F2.word("a")]
        assert ray.eps == 0.0

    def test_interior_target(self, F2):
        c = InteriorCocycle(F2, F2.word("a^5"))
        ray = gradient_ray(c, F2.identity, 4)
        assert ray.vertices[-1] == F2.word("a^4")
        with pytest.raises(ValueError):
            gradient_ray(c, F2.identity, 7)

    def test_window_rim(self, F2, f2_ball3):
        from cayleylab import WindowRimError

        pots = {g: -float(F2.length(g)) for g in f2_ball3.elements}
        c = WindowCocycle(F2, pots, 3)
        with pytest.raises(WindowRimError):
            gradient_ray(c, F2.identity, 5)

    def test_l1_ray(self, Z2):
        c = L1Horofunction(Z2, [("inf+",), ("tent", 0)])
        ray = gradient_ray(c, (0, 0), 3)
        assert ray.vertices == [(0, 0), (1, 0), (2, 0), (3, 0)]
        assert ray.eps == 0.0


class TestShadows:
    def test_axis_end_in_shadow(self, F2, end_a, end_b):
        sh = Shadow(F2.identity, F2.word("a^2"), 0)
        inside, prod = shadow_contains(F2, sh, end_a)
        assert inside and prod == 0
        inside_b, prod_b = shadow_contains(F2, sh, end_b)
        assert not inside_b and prod_b == 2

    def test_interior_point_own_shadow(self, F2):
        y = F2.word("a^2")
        inside, prod = shadow_contains(F2, Shadow(F2.identity, y, 0),
                                       InteriorCocycle(F2, y))
        assert inside and prod == 0

    def test_gromov_product_bounds(self, F2, f2_ball3, end_a, end_b):
        for c in (end_a, end_b, InteriorCocycle(F2, F2.word("ba"))):
            for x in f2_ball3.elements[::3]:
                for y in f2_ball3.elements[::3]:
                    p = gromov_product(F2, x, c, y)
                    assert -1e-12 <= p <= F2.distance(x, y) + 1e-12

    def test_basepoint_stability(self, F2, f2_ball3, end_a, end_b):
        # O_x(y, r) subset O_x'(y', r + d(x,x') + d(y,y'))
        cs = [end_a, end_b, InteriorCocycle(F2, F2.word("aB"))]
        pts = f2_ball3.elements[::6]
        r = 1
        for x in pts:
            for y in pts:
                for x2 in pts[:3]:
                    for y2 in pts[:3]:
                        r2 = r + F2.distance(x, x2) + F2.distance(y, y2)
                        for c in cs:
                            if gromov_product(F2, x, c, y) <= r:
                                assert gromov_product(F2, x2, c, y2) <= r2 + 1e-12


class TestProjectCocycle:
    def test_transverse_end_projects_to_branch(self, F2, end_b):
        Y = orbit_window(F2, F2.word("a"), 6)
        res = project_cocycle(end_b, Y)
        assert res.status == "points"
        assert res.points == (F2.identity,)

    def test_parallel_end_at_infinity(self, F2, end_a):
        Y = orbit_window(F2, F2.word("a"), 6)
        res = project_cocycle(end_a, Y)
        assert res.at_infinity and res.side == "positive"
        neg = project_cocycle(TreeEnd.from_power(F2, F2.word("A")), Y)
        assert neg.at_infinity and neg.side == "negative"

    def test_interior_point_of_window(self, F2):
        Y = orbit_window(F2, F2.word("a"), 6)
        res = project_cocycle(InteriorCocycle(F2, F2.word("a^2")), Y)
        assert res.status == "points"
        assert res.points == (F2.word("a^2"),)

    def test_gradient_ray_keeps_projection(self, F2, end_b):
        # from a projection point, every ray vertex still projects there
        Y = orbit_window(F2, F2.word("a"), 6)
        q = project_cocycle(end_b, Y).points[0]
        ray = gradient_ray(end_b, q, 4)
        from cayleylab import project

        for v in ray.vertices:
            assert q in project(F2, v, Y)

    def test_two_projections_within_alpha(self, F2):
        # accumulation projections vs cocycle projections stay alpha-close
        Y = orbit_window(F2, F2.word("a"), 6)
        seq = lambda n: F2.multiply(F2.word("b"), F2.power(F2.word("a"), -n))
        c = boundary_limit(F2, seq, horizon=40)
        res = project_cocycle(c, Y)
        from cayleylab import project

        q_star = project(F2, seq(30), Y)
        assert res.status == "points"
        for q in res.points:
            assert min(F2.distance(q, p) for p in q_star) <= 1


class TestReducedEquiv:
    def test_distinct_ends_with_witness(self, F2, end_a, end_b):
        res = reduced_equiv(end_a, end_b)
        assert res.status == DISTINCT
        o, w = res.witness
        assert abs(end_a.evaluate(o, w) - end_b.evaluate(o, w)) >= 2

    def test_same_end_twice(self, F2, end_a):
        res = reduced_equiv(end_a, TreeEnd.from_power(F2, F2.word("a")))
        assert res.status == EQUIVALENT and res.sup_bound == 0 and res.exact

    def test_periodic_vs_conjugate_axis(self, F2):
        # b a b^-1 powers limit to the end b a^inf, distinct from a^inf
        e1 = TreeEnd.from_power(F2, F2.word("a"))
        e2 = TreeEnd.from_power(F2, F2.word("baB"))
        res = reduced_equiv(e1, e2)
        assert res.status == DISTINCT

    def test_l1_classes(self, Z2):
        lim1 = boundary_limit(Z2, lambda n: (n, n))
        lim2 = boundary_limit(Z2, lambda n: (2 * n, n))
        res = reduced_equiv(lim1, lim2)
        assert res.status == EQUIVALENT and res.sup_bound == 0
        lim3 = boundary_limit(Z2, lambda n: (n, 0))
        res2 = reduced_equiv(lim1, lim3)
        assert res2.status == DISTINCT

    def test_tent_anchors_bounded_difference(self, Z2):
        c1 = L1Horofunction(Z2, [("inf+",), ("tent", 0)])
        c2 = L1Horofunction(Z2, [("inf+",), ("tent", 5)])
        res = reduced_equiv(c1, c2)
        assert res.status == EQUIVALENT
        assert res.sup_bound == 5

    def test_window_undecided(self, F2, f2_ball3):
        pots = {g: float(F2.length(g)) for g in f2_ball3.elements}
        c1 = WindowCocycle(F2, pots, 3)
        c2 = InteriorCocycle(F2, F2.word("a^2"))
        res = reduced_equiv(c1, c2)
        assert res.status == UNDECIDED
        assert not res.exact

    def test_ends_equal_periodic_bound(self, F2):
        # same end described with different periodic data
        e1 = TreeEnd.from_power(F2, F2.word("a"))
        e2 = TreeEnd.from_power(F2, F2.word("a^2"))
        eq, exact = ends_equal(e1, e2)
        assert eq and exact


class TestLimitSetMembership:
    def test_radial_prefix_witnesses(self, F2, end_a):
        rep = limit_set_membership(end_a, "radial", 0, 6)
        assert rep.certified
        for row in rep.rows:
            assert row.distance >= row.threshold
            assert row.product <= 1e-9

    def test_contracting_membership(self, F2):
        xi = TreeEnd.from_power(F2, F2.word("ab"))
        rep = limit_set_membership(xi, "contracting", 0, 5, alpha=1, L=2)
        assert rep.certified
        for row in rep.rows:
            if row.threshold >= 1:
                assert row.tail_ok

    def test_interior_fails_beyond_distance(self, F2):
        c = InteriorCocycle(F2, F2.word("a^2"))
        rep = limit_set_membership(c, "radial", 0, 6)
        assert rep.failures() == [3, 4, 5, 6]

    def test_l1_radial(self, Z2):
        c = L1Horofunction(Z2, [("inf+",), ("inf+",)])
        rep = limit_set_membership(c, "radial", 0, 6)
        assert rep.certified


class TestTransverse:
    def test_independent_generators(self, F2):
        assert transverse_pair_check(F2, F2.word("a"), F2.word("b"))

    def test_identity_translate(self, F2):
        assert not transverse_pair_check(F2, F2.word("a"), F2.identity)

    def test_axis_power_translate(self, F2):
        assert not transverse_pair_check(F2, F2.word("a"), F2.word("a^3"))

    def test_lattice_never_transverse(self, Z2):
        assert not transverse_pair_check(Z2, (1, 0), (0, 5))


class TestDeepShadowLocalDetermination:
    def test_twenty_alpha_bound(self, F2, f2_ball3):
        # ends in a deep shadow agree within 20*alpha on the small ball
        alpha, r, R = 1, 1, 3
        g = F2.word("a^4 b a^4 b a^4 b a^4")  # length 19 > R + r + 13
        assert F2.length(g) > R + r + 13
        ends = [
            TreeEnd.from_power(F2, F2.multiply(g, F2.word("b"))),
            TreeEnd.from_power(F2, F2.multiply(g, F2.word("a"))),
        ]
        sh = Shadow(F2.identity, g, r)
        for c in ends:
            inside, _ = shadow_contains(F2, sh, c)
            assert inside
        c1, c2 = ends
        for x in f2_ball3.elements:
            for y in f2_ball3.elements[::5]:
                diff = abs(c1.evaluate(x, y) - c2.evaluate(x, y))
                assert diff <= 20 * alpha

    def test_wysiwyg_projection_distance(self, F2):
        # for a tail member, the cocycle projection q onto the tail has
        # d(y, q) <= r + 7 alpha
        from cayleylab import SubsetWindow, find_contracting_tail, project_cocycle

        alpha, r = 1, 0
        L = r + 14 * alpha
        g = F2.word("a^3 b a^3 b a^3 b a^3")  # length 15 >= L
        wit = find_contracting_tail(F2, g, alpha, L, check_window=2)
        assert wit is not None
        xi = TreeEnd.from_power(F2, F2.multiply(g, F2.word("a")))
        inside, _ = shadow_contains(F2, Shadow(F2.identity, g, r), xi)
        assert inside
        res = project_cocycle(xi, SubsetWindow(tuple(wit.tail)))
        assert res.status in ("points", "at-infinity")
        if res.status == "points":
            assert min(F2.distance(g, q) for q in res.points) <= r + 7 * alpha

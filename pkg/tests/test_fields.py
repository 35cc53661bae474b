import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractional_korn.fields import (FieldError, PartitionOfUnity, SupportError, affine_field, bump_cutoff,
                                    bump_field, bump_skew_field, constant_cutoff, constant_field, cosine_cutoff,
                                    localize, multiply_cutoff, partition_of_unity, pull_back, rotate_field,
                                    skew_field, sum_fields, support_margin, zero_extend, zero_field)
from fractional_korn.geometry import (Ball, Epigraph, HalfSpace, RigidMotion, WholeSpace, cone_graph,
                                      flatten, linear_graph, make_ball_atlas, sample_ball, zero_graph)

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def _pairs(n=2000, seed=0, lo=-2, hi=2):
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, (n, 2)), rng.uniform(lo, hi, (n, 2))


def _lipschitz_ok(u, x, y):
    lhs = np.linalg.norm(u(x) - u(y), axis=1)
    return np.all(lhs <= u.lipschitz_bound * np.linalg.norm(x - y, axis=1) + 1e-12)


class TestSkew:
    def test_generator(self):
        np.testing.assert_allclose(skew_field(ROT)([1.0, 0.0]), [0.0, 1.0])

    def test_projected_increment_vanishes(self):
        u = skew_field(ROT)
        x, y = _pairs()
        dots = np.einsum("ij,ij->i", u(x) - u(y), x - y)
        assert np.max(np.abs(dots)) < 1e-14

    def test_zero_matrix(self):
        np.testing.assert_array_equal(skew_field(np.zeros((2, 2)))([[1.0, 2.0]]), [[0.0, 0.0]])

    def test_rejects_symmetric(self):
        with pytest.raises(FieldError):
            skew_field(np.eye(2))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
    def test_three_dimensional(self, a):
        A = np.array([[0, -a[0], -a[1]], [a[0], 0, -a[2]], [a[1], a[2], 0]])
        u = skew_field(A)
        rng = np.random.default_rng(1)
        x, y = rng.normal(size=(2, 50, 3))
        dots = np.einsum("ij,ij->i", u(x) - u(y), x - y)
        assert np.max(np.abs(dots)) < 1e-10 * (1 + np.abs(a).max())


class TestBump:
    def test_peak_and_edge(self):
        u = bump_field([0.5, -0.5], 0.8, [0.0, 1.0])
        np.testing.assert_allclose(u([0.5, -0.5]), [0.0, 1.0])
        edge = np.array([0.5 + 0.8, -0.5])
        np.testing.assert_allclose(u(edge), [0.0, 0.0], atol=1e-15)
        # zero gradient at the edge: a small inward step changes u quadratically
        step = 1e-4
        assert np.linalg.norm(u(edge - [step, 0.0])) < 10 * step ** 2 / 0.8 ** 2

    def test_l2_norm_power_one(self):
        # int_disc (1 - |x|^2)^2 = 2 pi int_0^1 (1 - r^2)^2 r dr = pi / 3
        u = bump_field([0, 0], 1.0, [1, 0], power=1)
        rng = np.random.default_rng(0)
        x = sample_ball(np.zeros(2), 1.0, 400_000, rng)
        vals = math.pi * np.sum(u(x) ** 2, axis=1)
        assert abs(vals.mean() - math.pi / 3) < 4 * vals.std() / math.sqrt(vals.size)

    @pytest.mark.parametrize("power", [1, 2, 3, 4.5])
    def test_lipschitz_bound(self, power):
        u = bump_field([0.1, 0.2], 0.7, [0.6, 0.8], power)
        x, y = _pairs(20_000, 1, -1, 1)
        assert _lipschitz_ok(u, x, y)
        # the bound is attained up to sampling
        near = x + 1e-6 * np.array([1.0, 0.0])
        ratio = np.linalg.norm(u(near) - u(x), axis=1) / 1e-6
        assert ratio.max() > 0.9 * u.lipschitz_bound

    def test_compact_support(self):
        u = bump_field([0, 0], 0.5, [1, 0])
        pts = np.random.default_rng(2).uniform(-2, 2, (5000, 2))
        outside = np.linalg.norm(pts, axis=1) >= 0.5
        assert np.all(u(pts[outside]) == 0)

    def test_errors(self):
        with pytest.raises(FieldError):
            bump_field([0, 0], 0.0, [1, 0])
        with pytest.raises(FieldError):
            bump_field([0, 0], 1.0, [1, 0], power=0.5)


class TestCutoffs:
    def test_constant_one_is_identity(self):
        u = bump_field([0, 0], 0.75, [1, 0])
        v = multiply_cutoff(u, constant_cutoff(2, 1.0))
        pts = np.random.default_rng(3).uniform(-1, 1, (1000, 2))
        np.testing.assert_array_equal(v(pts), u(pts))

    def test_constant_zero(self):
        v = multiply_cutoff(bump_field([0, 0], 0.75, [1, 0]), constant_cutoff(2, 0.0))
        assert np.all(v(np.random.default_rng(4).uniform(-1, 1, (100, 2))) == 0)
        assert v.lipschitz_bound == 0

    @pytest.mark.parametrize("psi", [cosine_cutoff([0.2, 0], 0.6), bump_cutoff([0, 0.3], 0.5, 2)])
    def test_product_lipschitz(self, psi):
        x, y = _pairs(20_000, 5, -1.2, 1.2)
        assert np.all(np.abs(psi(x) - psi(y)) <= psi.lipschitz_bound * np.linalg.norm(x - y, axis=1) + 1e-12)
        v = multiply_cutoff(bump_field([0, 0], 0.75, [1, 0]), psi)
        assert _lipschitz_ok(v, x, y)

    def test_bump_skew_is_lipschitz(self):
        u = bump_skew_field([0, 0], 0.75, ROT)
        x, y = _pairs(20_000, 6, -1, 1)
        assert _lipschitz_ok(u, x, y)

    def test_sum_fields(self):
        a, b = bump_field([0, 0], 0.5, [1, 0]), bump_field([1, 0], 0.5, [0, 1])
        u = sum_fields(a, b)
        pts = np.random.default_rng(7).uniform(-1, 2, (500, 2))
        np.testing.assert_allclose(u(pts), a(pts) + b(pts))
        assert u.support.radius >= 1.0


class TestZeroExtension:
    def test_values(self):
        D = Ball([0, 0], 1.0)
        u = bump_field([0, 0], 0.75, [1, 0])
        ut = zero_extend(u, D, WholeSpace(2))
        pts = np.random.default_rng(8).uniform(-2, 2, (2000, 2))
        inside = D.contains(pts)
        np.testing.assert_array_equal(ut(pts[inside]), u(pts[inside]))
        assert np.all(ut(pts[~inside]) == 0)
        assert ut.margin == pytest.approx(0.25)

    def test_zero_field(self):
        ut = zero_extend(bump_field([0, 0], 0.5, [0, 0]), Ball([0, 0], 1), WholeSpace(2))
        assert np.all(ut(np.ones((3, 2))) == 0)

    def test_margin_not_certified(self):
        with pytest.raises(SupportError):
            zero_extend(bump_field([0, 0], 0.9, [1, 0]), Ball([0, 0], 1), WholeSpace(2), delta=0.25)
        with pytest.raises(SupportError):
            zero_extend(bump_field([0.5, 0], 0.75, [1, 0]), Ball([0, 0], 1), WholeSpace(2))

    def test_support_margin(self):
        assert support_margin(bump_field([0, 1], 0.75, [1, 0]), HalfSpace(2)) == pytest.approx(0.25)
        assert support_margin(constant_field([1, 0]), HalfSpace(2)) == -math.inf


class TestRotate:
    def test_identity(self):
        u = bump_field([0.2, 0], 0.5, [1, 0])
        v = rotate_field(u, RigidMotion.identity(2))
        pts = np.random.default_rng(9).uniform(-1, 1, (200, 2))
        np.testing.assert_allclose(v(pts), u(pts))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-4, 4), st.floats(-3, 3))
    def test_skew_conjugation(self, angle, a):
        A = a * ROT
        R = RigidMotion.planar(angle)
        Q = R.rotation
        pts = np.random.default_rng(10).normal(size=(50, 2))
        lhs = rotate_field(skew_field(A), R)(pts)
        rhs = skew_field(Q @ A @ Q.T)(pts)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a)))


class TestPullBack:
    def test_flat(self):
        u = bump_field([0, 1], 0.5, [1, 0])
        v = pull_back(u, zero_graph(2))
        pts = np.random.default_rng(11).uniform(0, 2, (100, 2))
        np.testing.assert_array_equal(v(pts), u(pts))

    @pytest.mark.parametrize("graph", [linear_graph([0.2]), cone_graph(0.5)])
    def test_composition(self, graph):
        u = bump_field([0.1, 1.2], 0.6, [0.6, 0.8])
        rng = np.random.default_rng(12)
        xp = rng.uniform(-1, 1, (500, 1))
        x = np.column_stack([xp, graph(xp) + rng.uniform(0.01, 2, 500)])
        np.testing.assert_allclose(pull_back(u, graph)(flatten(graph, x)), u(x), atol=1e-14)

    def test_support_maps_to_support(self):
        graph = cone_graph(0.5)
        u = bump_field([0.3, 1.5], 0.6, [1, 0])
        v = pull_back(u, graph)
        rng = np.random.default_rng(13)
        w = rng.uniform([-3, 0.01], [3, 4], (20_000, 2))
        nz = np.linalg.norm(v(w), axis=1) > 0
        assert np.all(np.linalg.norm(w[nz] - v.support.center, axis=1) <= v.support.radius)
        x, y = rng.uniform([-1, 0.01], [1, 3], (2, 5000, 2))
        assert _lipschitz_ok(v, x, y)


@pytest.fixture(scope="module")
def pou():
    return partition_of_unity(make_ball_atlas(2, 8))


class TestPartition:
    def test_sums_to_one(self, pou):
        pts = sample_ball(np.zeros(2), 1.0, 10_000, np.random.default_rng(14))
        np.testing.assert_allclose(pou.total(pts), 1.0, atol=1e-12)

    def test_supports(self, pou):
        atlas = make_ball_atlas(2, 8)
        pts = np.random.default_rng(15).uniform(-1.5, 1.5, (10_000, 2))
        for psi, ball in zip(pou.members, atlas.balls):
            outside = ~ball.contains(pts)
            assert np.all(psi(pts[outside]) == 0)
            vals = psi(pts)
            assert np.all((vals >= 0) & (vals <= 1))

    def test_member_lipschitz(self, pou):
        x, y = _pairs(20_000, 16, -1, 1)
        keep = (np.linalg.norm(x, axis=1) < 1) & (np.linalg.norm(y, axis=1) < 1)
        x, y = x[keep], y[keep]
        for psi in pou.members:
            assert np.all(np.abs(psi(x) - psi(y)) <= psi.lipschitz_bound * np.linalg.norm(x - y, axis=1) + 1e-12)

    def test_localize_sums_back(self, pou):
        u = bump_field([0, 0], 0.9, [1, 0])
        pieces = localize(u, pou)
        pts = sample_ball(np.zeros(2), 1.0, 5000, np.random.default_rng(17))
        np.testing.assert_allclose(sum(p(pts) for p in pieces), u(pts), atol=1e-12)

    def test_trivial_partition(self):
        u = bump_field([0, 0], 0.9, [1, 0])
        pou = PartitionOfUnity((constant_cutoff(2, 1.0),))
        (piece,) = localize(u, pou)
        pts = np.random.default_rng(18).uniform(-1, 1, (100, 2))
        np.testing.assert_array_equal(piece(pts), u(pts))


def test_affine_and_zero():
    u = affine_field([[1.0, 2.0], [0.0, 1.0]], [1.0, -1.0])
    np.testing.assert_allclose(u([1.0, 1.0]), [4.0, 0.0])
    assert np.all(zero_field(2)(np.ones((4, 2))) == 0)

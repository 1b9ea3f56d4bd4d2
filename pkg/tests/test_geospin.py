import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geodyn.connection import make_vector_field, reference_field
from geodyn.errors import DimensionMismatch
from geodyn.geospin import (covariant_rewrite_residual, diagonal_elements, geometric_acceleration, geospin,
                            identity_contraction_residual, metric_rate_split_residual, lowered_symmetry_residual,
                            star_consistency_residual)
from geodyn.metric import builtin, catalog, metric_at, sample_points, sample_vectors
from geodyn.rng import XorShift64Star

from oracles import christoffel_loops, fd_metric_derivative, null_vector


class TestHandValues:
    def test_polar_radial(self, polar):
        gm = geospin(polar, [2.0, 0.0], [1.0, 0.0])
        np.testing.assert_array_equal(gm.w_mixed, [[0.0, 0.0], [0.0, 0.5]])
        d = diagonal_elements(gm)
        assert d.direct[1] == d.via_star[1] == 0.5
        assert d.trace_metric == pytest.approx(0.5)
        assert metric_rate_split_residual(gm) == 0.0
        # d_r g_thth v^r = 2r = 4 = 2 W*_thth
        assert gm.w_star[1, 1] == 2.0

    def test_sphere_azimuthal(self, sphere):
        gm = geospin(sphere, [math.pi / 4, 0.0], [0.0, 1.0])
        assert gm.w_mixed[1, 0] == pytest.approx(-0.5)
        assert gm.w_mixed[0, 1] == pytest.approx(1.0)
        np.testing.assert_allclose(np.diagonal(gm.w_mixed), 0.0, atol=1e-16)
        acc = geometric_acceleration(gm)
        np.testing.assert_allclose(acc.q, [-0.5, 0.0], atol=1e-15)
        assert acc.Q == pytest.approx(0.0, abs=1e-15)

    def test_sphere_polar_diagonal(self, sphere):
        d = diagonal_elements(geospin(sphere, [math.pi / 4, 0.0], [1.0, 0.0]))
        assert d.direct[1] == pytest.approx(1.0)
        assert d.via_star[1] == pytest.approx(1.0)

    def test_polar_angular_acceleration(self, polar):
        acc = geometric_acceleration(geospin(polar, [2.0, 0.0], [0.0, 1.0]))
        np.testing.assert_allclose(acc.q, [-2.0, 0.0])
        assert acc.Q == 0.0 and acc.Q_oracle == 0.0

    def test_euclidean_is_zero(self):
        gm = geospin(builtin("euclidean", {"n": 3}), [0.1, 0.2, 0.3], [1.0, -2.0, 0.5])
        assert not gm.w_mixed.any() and not gm.w_lower.any()
        assert not geometric_acceleration(gm).q.any()

    def test_matrix_acts_on_columns(self, sphere):
        gm = geospin(sphere, [1.0, 0.3], [0.4, -0.7])
        np.testing.assert_allclose(gm.matrix @ gm.v, np.einsum("kij,i,j->k", gm.gamma, gm.v, gm.v), atol=1e-15)

    def test_velocity_shape_checked(self, sphere):
        with pytest.raises(DimensionMismatch):
            geospin(sphere, [1.0, 0.3], [1.0, 0.0, 0.0])


class TestAgainstOracle:
    @pytest.mark.parametrize("name", ["sphere", "torus", "schwarzschild", "poincare"])
    def test_w_mixed_from_fd_christoffel(self, name):
        spec = builtin(name)
        rng = XorShift64Star(13)
        for x, v in zip(sample_points(spec, 5, rng), sample_vectors(spec.dim, 5, rng)):
            gam = christoffel_loops(metric_at(spec, x), fd_metric_derivative(spec, x))
            expected = np.array([[sum(gam[j, i, k] * v[k] for k in range(spec.dim))
                                  for j in range(spec.dim)] for i in range(spec.dim)])
            np.testing.assert_allclose(geospin(spec, x, v).w_mixed, expected, atol=1e-7)


class TestIdentities:
    def test_all_catalog_samples(self):
        for spec in catalog():
            rng = XorShift64Star(0)
            for x, v in zip(sample_points(spec, 100, rng), sample_vectors(spec.dim, 100, rng)):
                gm = geospin(spec, x, v)
                assert lowered_symmetry_residual(gm) <= 1e-12, spec.name
                assert star_consistency_residual(gm) <= 1e-12, spec.name
                assert metric_rate_split_residual(gm) <= 1e-11, spec.name
                assert identity_contraction_residual(gm) <= 1e-11, spec.name
                assert diagonal_elements(gm).residual() <= 1e-11, spec.name
                assert geometric_acceleration(gm).residual() <= 1e-11, spec.name

    @given(st.integers(0, 2 ** 32))
    @settings(max_examples=60, deadline=None)
    def test_minkowski_null_vectors(self, seed):
        spec = builtin("minkowski", {"n": 4})
        rng = np.random.default_rng(seed)
        x = rng.uniform(-2, 2, 4)
        v = null_vector(metric_at(spec, x), rng)
        assert abs(v @ metric_at(spec, x) @ v) <= 1e-12
        gm = geospin(spec, x, v)
        assert identity_contraction_residual(gm) <= 1e-11
        assert metric_rate_split_residual(gm) <= 1e-11

    @given(st.floats(0.3, math.pi - 0.3), st.floats(-3, 3), st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=80, deadline=None)
    def test_sphere_identities_property(self, th, ph, a, b):
        gm = geospin(builtin("sphere"), [th, ph], [a, b])
        scale = 1.0 + a * a + b * b
        assert metric_rate_split_residual(gm) <= 1e-11 * scale
        assert identity_contraction_residual(gm) <= 1e-11 * scale
        assert geometric_acceleration(gm).residual() <= 1e-11 * scale * (1 + abs(a) + abs(b))

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3))
    @settings(max_examples=40, deadline=None)
    def test_linear_in_velocity(self, a, b, c):
        spec = builtin("torus")
        x = [0.4, 1.0]
        w1 = geospin(spec, x, [a, b]).w_mixed
        w2 = geospin(spec, x, [c * a, c * b]).w_mixed
        np.testing.assert_allclose(w2, c * w1, atol=1e-12 * (1 + abs(c)) * (1 + abs(a) + abs(b)))

    def test_detects_corrupted_derivative(self, sphere):
        gm = geospin(sphere, [1.0, 0.2], [0.3, 0.4])
        bad = gm.dg.copy()
        bad[1, 1, 0] += 1e-3
        assert metric_rate_split_residual(gm, bad) > 1e-4
        assert identity_contraction_residual(gm, bad) > 1e-5


class TestRewrite:
    def test_sphere_hand_point(self, sphere):
        f = make_vector_field(["sin(phi)", "cos(theta)"], 2, ["theta", "phi"])
        x = [math.pi / 3, math.pi / 5]
        assert covariant_rewrite_residual(f, sphere, x, "vector") <= 1e-12
        assert covariant_rewrite_residual(f, sphere, x, "oneform") <= 1e-12

    def test_all_catalog(self):
        for spec in catalog():
            f = reference_field(spec)
            for x in sample_points(spec, 10, XorShift64Star(6)):
                assert covariant_rewrite_residual(f, spec, x, "vector") <= 1e-12, spec.name
                assert covariant_rewrite_residual(f, spec, x, "oneform") <= 1e-12, spec.name

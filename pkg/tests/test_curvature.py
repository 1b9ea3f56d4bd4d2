import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geodyn.connection import make_vector_field, reference_field
from geodyn.curvature import (commutator_curvature_residual, curvature_pack, first_bianchi_residual,
                              riemann_from_connection, riemann_mixed, riemann_symmetry_residuals,
                              second_bianchi_residual)
from geodyn.errors import StencilOutOfDomain
from geodyn.metric import builtin, catalog, sample_points
from geodyn.rng import XorShift64Star

from oracles import fd_riemann


def _points(spec, count, seed=0):
    return sample_points(spec, count, XorShift64Star(seed))


class TestValues:
    def test_sphere_at_quarter_turn(self, sphere):
        pack = curvature_pack(sphere, [math.pi / 4, 0.0])
        assert pack.scalar == pytest.approx(2.0, abs=1e-12)
        np.testing.assert_allclose(pack.ricci_mixed, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(pack.ricci, pack.g, atol=1e-12)
        assert pack.det_ricci_mixed == pytest.approx(1.0)
        assert pack.trace_ricci_mixed == pytest.approx(2.0)
        # R(d_theta, d_phi) d_phi = sin^2 theta d_theta
        assert pack.riemann_mixed[0, 0, 1, 1] == pytest.approx(0.5, abs=1e-14)
        assert pack.riemann_mixed[0, 1, 0, 1] == pytest.approx(-0.5, abs=1e-14)
        assert pack.riemann_low[0, 1, 0, 1] == pytest.approx(0.5, abs=1e-14)

    def test_trace_of_mixed_ricci_is_scalar(self):
        for spec in catalog():
            for x in _points(spec, 10, seed=2):
                pack = curvature_pack(spec, x)
                assert abs(pack.trace_ricci_mixed - pack.scalar) <= 1e-10

    @pytest.mark.parametrize("name", ["sphere", "stereographic"])
    def test_unit_sphere_scalar_in_both_charts(self, name):
        spec = builtin(name)
        for x in _points(spec, 30):
            assert curvature_pack(spec, x).scalar == pytest.approx(2.0, abs=1e-8)

    @pytest.mark.parametrize("r", [0.5, 2.0, 3.0])
    def test_sphere_radius_scaling(self, r):
        spec = builtin("sphere", {"r": r})
        assert curvature_pack(spec, [1.0, 0.2]).scalar == pytest.approx(2.0 / r ** 2, rel=1e-12)

    def test_poincare_is_hyperbolic(self, poincare):
        for x in _points(poincare, 30):
            assert curvature_pack(poincare, x).scalar == pytest.approx(-2.0, abs=1e-8)

    def test_torus_gaussian_curvature(self):
        big, small = 2.0, 1.0
        spec = builtin("torus", {"R": big, "a": small})
        for th in np.linspace(-3.0, 3.0, 13):
            expected = 2 * math.cos(th) / (small * (big + small * math.cos(th)))
            assert curvature_pack(spec, [th, 0.4]).scalar == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("name,params", [("euclidean", {"n": 3}), ("polar2", {}), ("minkowski", {"n": 4})])
    def test_flat_metrics(self, name, params):
        spec = builtin(name, params)
        for x in _points(spec, 20):
            pack = curvature_pack(spec, x)
            assert np.abs(pack.riemann_mixed).max() <= 1e-10
            assert abs(pack.scalar) <= 1e-10

    def test_schwarzschild_is_ricci_flat(self):
        spec = builtin("schwarzschild")
        for x in _points(spec, 20):
            pack = curvature_pack(spec, x)
            assert np.abs(pack.ricci).max() <= 1e-12
            assert np.abs(pack.riemann_mixed).max() > 1e-3

    def test_sphere_cross_line(self):
        spec = builtin("sphere-cross-line")
        pack = curvature_pack(spec, [1.1, 0.0, 0.5])
        assert pack.scalar == pytest.approx(2.0, abs=1e-12)
        assert np.abs(pack.riemann_mixed[2]).max() == 0.0

    @pytest.mark.parametrize("name", ["sphere", "poincare", "torus", "schwarzschild", "stereographic"])
    def test_matches_finite_difference_oracle(self, name):
        spec = builtin(name)
        for x in _points(spec, 4, seed=3):
            np.testing.assert_allclose(riemann_mixed(spec, x), fd_riemann(spec, x), atol=2e-5)


class TestSymmetries:
    def test_symmetries_and_first_bianchi_all_catalog(self):
        for spec in catalog():
            for x in _points(spec, 25, seed=7):
                pack = curvature_pack(spec, x)
                assert max(riemann_symmetry_residuals(pack.riemann_low).values()) <= 1e-10, spec.name
                assert first_bianchi_residual(pack.riemann_mixed) <= 1e-10, spec.name

    def test_second_bianchi_all_catalog(self):
        for spec in catalog():
            for x in _points(spec, 10, seed=8):
                assert second_bianchi_residual(spec, x) <= 1e-6, spec.name

    def test_second_bianchi_stencil_leaving_chart(self, polar):
        # the guard r != 0 is violated by the stencil around a point very close to the origin
        with pytest.raises(StencilOutOfDomain):
            second_bianchi_residual(polar, [1e-7, 0.0])

    @given(st.lists(st.floats(-1, 1), min_size=8, max_size=8), st.lists(st.floats(-1, 1), min_size=16, max_size=16))
    @settings(max_examples=50, deadline=None)
    def test_riemann_antisymmetric_in_derivative_pair_for_any_connection(self, g_flat, dg_flat):
        gam = np.resize(np.array(g_flat), (2, 2, 2))
        dgam = np.array(dg_flat).reshape(2, 2, 2, 2)
        r = riemann_from_connection(gam, dgam)
        np.testing.assert_allclose(r, -r.transpose(0, 2, 1, 3), atol=1e-15)


class TestCommutator:
    def test_sphere_reference_field(self, sphere):
        field = reference_field(sphere)
        for x in _points(sphere, 20):
            assert commutator_curvature_residual(field, sphere, x) <= 1e-8

    def test_all_catalog(self):
        for spec in catalog():
            field = reference_field(spec)
            for x in _points(spec, 5, seed=4):
                assert commutator_curvature_residual(field, spec, x) <= 1e-8, spec.name

    def test_detects_wrong_curvature_sign(self, sphere, monkeypatch):
        import geodyn.curvature as cv
        field = make_vector_field(["sin(phi)", "cos(theta)"], 2, ["theta", "phi"])
        orig = cv.riemann_mixed
        monkeypatch.setattr(cv, "riemann_mixed", lambda s, p: -orig(s, p))
        assert commutator_curvature_residual(field, sphere, [1.0, 0.5]) > 0.1

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geodyn.cartan import (CURVATURE_FORM_SIGN, TORSION_FORM_SIGN, VACUOUS_NOTE, ReportEntry, StructuralReport,
                           alpha_fd_residual, bianchi_form_check, curvature_form_check, dyn_state, form_frame,
                           geometrodynamics_residuals, max_over_pairs, torsion_form_check)
from geodyn.connection import make_connection
from geodyn.flow import GeodesicState, IntegratorConfig, integrate
from geodyn.metric import builtin, catalog, sample_points
from geodyn.rng import XorShift64Star

from oracles import fd_christoffel


def fd_curvature_two_form(spec, x, h=1e-4):
    """Omega_i^j(e_a, e_b) from finite differences of the FD connection forms, written with loops."""
    x = np.asarray(x, float)
    n = spec.dim
    gam = fd_christoffel(spec, x)
    dgam = np.zeros((n, n, n, n))
    for m in range(n):
        e = np.zeros(n)
        e[m] = h
        dgam[..., m] = (fd_christoffel(spec, x + e) - fd_christoffel(spec, x - e)) / (2 * h)
    out = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for a in range(n):
                for b in range(n):
                    s = dgam[j, i, b, a] - dgam[j, i, a, b]
                    for k in range(n):
                        s -= gam[k, i, a] * gam[j, k, b] - gam[k, i, b] * gam[j, k, a]
                    out[i, j, a, b] = s
    return out


class TestTorsionForm:
    def test_levi_civita_is_zero(self):
        for spec in catalog():
            frame = form_frame(spec, sample_points(spec, 1, XorShift64Star(1))[0])
            assert np.abs(frame.torsion_two_form()).max() <= 1e-15
            assert max_over_pairs(torsion_form_check, frame) == 0.0

    def test_synthetic_torsion(self):
        conn = make_connection("t", ["x", "y"], {(0, 0, 1): "1"})
        check = torsion_form_check(form_frame(conn, [0.0, 0.0]), (0, 1))
        assert abs(check.lhs[0]) == 1.0 and abs(check.rhs[0]) == 1.0
        assert check.residual <= 1e-14
        assert check.sign == TORSION_FORM_SIGN

    @given(st.floats(-100, 100))
    @settings(max_examples=30, deadline=None)
    def test_scaled_torsion(self, c):
        conn = make_connection("t", ["x", "y"], {(0, 0, 1): repr(c), (1, 1, 0): "x*y"})
        frame = form_frame(conn, [0.3, -0.2])
        assert max_over_pairs(torsion_form_check, frame) <= 1e-14 * max(1.0, abs(c))

    def test_wrong_sign_fails(self):
        conn = make_connection("t", ["x", "y"], {(0, 0, 1): "1"})
        assert torsion_form_check(form_frame(conn, [0.0, 0.0]), (0, 1), sign=1.0).residual == 2.0

    def test_pair_validation(self, sphere):
        with pytest.raises(ValueError):
            torsion_form_check(form_frame(sphere, [1.0, 0.0]), (1, 1))


class TestCurvatureForm:
    def test_sphere_hand_value(self, sphere):
        frame = form_frame(sphere, [math.pi / 4, 0.0])
        omega = frame.curvature_two_form()
        # Omega_phi^theta(e_theta, e_phi) = sin^2 theta
        assert omega[1, 0, 0, 1] == pytest.approx(0.5, abs=1e-14)
        assert omega[0, 1, 0, 1] == pytest.approx(-1.0, abs=1e-14)
        check = curvature_form_check(frame, (0, 1))
        assert check.sign == CURVATURE_FORM_SIGN
        assert check.residual <= 1e-9
        assert curvature_form_check(frame, (0, 1), sign=-1.0).residual > 0.5

    @pytest.mark.parametrize("name", ["sphere", "poincare", "torus", "schwarzschild"])
    def test_two_form_matches_fd_oracle(self, name):
        spec = builtin(name)
        for x in sample_points(spec, 3, XorShift64Star(12)):
            np.testing.assert_allclose(form_frame(spec, x).curvature_two_form(), fd_curvature_two_form(spec, x),
                                       atol=1e-5)

    def test_poincare_twenty_points(self, poincare):
        for x in sample_points(poincare, 20, XorShift64Star(3)):
            assert max_over_pairs(curvature_form_check, form_frame(poincare, x)) <= 1e-9

    def test_all_catalog(self):
        for spec in catalog():
            for x in sample_points(spec, 50, XorShift64Star(0)):
                assert max_over_pairs(curvature_form_check, form_frame(spec, x)) <= 1e-9, spec.name

    def test_torsionful_connection(self):
        conn = make_connection("c", ["x", "y", "z"],
                               {(0, 0, 1): "x*z", (1, 2, 0): "sin(y)", (2, 1, 1): "x^2 - z", (0, 2, 2): "y"})
        for x in ([0.1, 0.2, 0.3], [-1.0, 0.5, 2.0]):
            assert max_over_pairs(curvature_form_check, form_frame(conn, x)) <= 1e-12

    def test_flat_is_zero(self):
        frame = form_frame(builtin("polar2"), [1.5, 0.2])
        assert np.abs(frame.curvature_two_form()).max() <= 1e-14


class TestBianchiForms:
    def test_sphere_cross_line(self):
        spec = builtin("sphere-cross-line")
        for x in sample_points(spec, 20, XorShift64Star(5)):
            res = bianchi_form_check(spec, x)
            assert res.status == "ok"
            assert res.torsion_residual <= 1e-5 and res.curvature_residual <= 1e-5
        single = bianchi_form_check(spec, [1.0, 0.0, 0.0], (0, 1, 2))
        assert single.curvature_residual <= 1e-5

    def test_schwarzschild(self):
        spec = builtin("schwarzschild")
        for x in sample_points(spec, 5, XorShift64Star(2)):
            res = bianchi_form_check(spec, x)
            assert res.curvature_residual <= 1e-5
        # a non-trivial check: the individual terms are far from zero
        frame = form_frame(spec, x)
        assert np.abs(frame.curvature_two_form()).max() > 1e-2

    def test_detects_broken_curvature(self, monkeypatch):
        import geodyn.cartan as ct
        spec = builtin("schwarzschild")
        orig = ct._two_forms

        def skewed(source, x):
            frame, theta, omega = orig(source, x)
            return frame, theta, omega * (1.0 + 0.01 * x[1])
        monkeypatch.setattr(ct, "_two_forms", skewed)
        assert bianchi_form_check(spec, [0.0, 4.0, 1.2, 0.3]).curvature_residual > 1e-4

    def test_euclidean(self):
        res = bianchi_form_check(builtin("euclidean", {"n": 3}), [0.1, 0.2, 0.3])
        assert res.torsion_residual == 0.0 and res.curvature_residual == 0.0

    def test_two_dimensions_vacuous(self, sphere):
        res = bianchi_form_check(sphere, [1.0, 0.0])
        assert res.status == "vacuous" and res.note == VACUOUS_NOTE
        assert res.torsion_residual is None

    def test_torsionful_connection(self):
        conn = make_connection("c", ["x", "y", "z"],
                               {(0, 0, 1): "x*z", (1, 2, 0): "sin(y)", (2, 1, 1): "x^2 - z"})
        res = bianchi_form_check(conn, [0.4, 0.2, -0.3])
        assert res.torsion_residual <= 1e-5 and res.curvature_residual <= 1e-5

    def test_bad_triple(self):
        with pytest.raises(ValueError):
            bianchi_form_check(builtin("sphere-cross-line"), [1.0, 0.0, 0.0], (0, 0, 2))


def _traj(spec, x0, v0, t_end, dt=1e-2):
    return integrate(spec, GeodesicState(0.0, np.array(x0, float), np.array(v0, float)),
                     IntegratorConfig(t_end=t_end, dt=dt))


class TestDynamics:
    def test_polar_radial_alpha(self, polar):
        ds = dyn_state(polar, GeodesicState(0.0, np.array([2.0, 0.0]), np.array([1.0, 0.0])))
        np.testing.assert_allclose(ds.a, 0.0, atol=1e-16)
        assert ds.w[1, 1] == 0.5
        assert ds.alpha[1, 1] == pytest.approx(-0.25, abs=1e-15)
        assert (ds.alpha - ds.w @ ds.w)[1, 1] == pytest.approx(-0.5, abs=1e-15)

    def test_euclidean_zero(self):
        ds = dyn_state(builtin("euclidean"), GeodesicState(0.0, np.zeros(2), np.array([1.0, 2.0])))
        assert not ds.a.any() and not ds.alpha.any()

    def test_alpha_matches_flow_differences(self, sphere):
        for x0, v0 in (([math.pi / 2, 0.0], [0.0, 1.0]), ([1.0, 0.3], [0.4, -0.6])):
            ds = dyn_state(sphere, GeodesicState(0.0, np.array(x0), np.array(v0)))
            assert alpha_fd_residual(sphere, ds) <= 1e-8

    def test_polar_radial_report(self, polar):
        traj = _traj(polar, [2.0, 0.0], [1.0, 0.0], 1.0)
        report = geometrodynamics_residuals(polar, traj)
        assert report.entry("R_geo").max_residual <= 1e-10
        curv = report.entry("R_curv")
        assert not curv.asserted and curv.status == "reported"
        for sample, r in zip(curv.series, traj.x[:, 0]):
            assert sample["matrix"][1, 1] == pytest.approx(-2.0 / r ** 2, abs=1e-8)
        assert report.passed

    def test_equator_report(self, sphere):
        traj = _traj(sphere, [math.pi / 2, 0.0], [0.0, 1.0], 2.0)
        report = geometrodynamics_residuals(sphere, traj)
        assert report.entry("R_geo").max_residual <= 1e-10
        assert len(report.entry("R_b2").series) == len(traj)
        assert report.passed

    def test_euclidean_all_zero(self):
        spec = builtin("euclidean")
        report = geometrodynamics_residuals(spec, _traj(spec, [0.0, 0.0], [1.0, 2.0], 1.0))
        for e in report.entries:
            assert e.max_residual == 0.0, e.identity

    def test_tilted_orbit(self, sphere):
        report = geometrodynamics_residuals(sphere, _traj(sphere, [1.2, 0.0], [0.5, 0.7], 3.0), stride=10)
        assert report.entry("R_geo").max_residual <= 1e-9
        assert report.entry("curvature term").max_residual <= 1e-13
        assert report.entry("alpha").passed
        assert "W_i^k v^i" in report.entry("acceleration contraction").notes
        assert report.entry("R_curv").max_residual > 0.1


class TestReport:
    def test_entry_status(self):
        assert ReportEntry("x", "tensor", 1e-3, True, 1, 1e-6).status == "failed"
        assert ReportEntry("x", "tensor", 1e-9, True, 1, 1e-6).status == "ok"
        assert ReportEntry("x", "tensor", 5.0, False, 1).status == "reported"

    def test_failures_and_json(self):
        rep = StructuralReport("m", [ReportEntry("a", "tensor", np.float64(2.0), True, 3, 1.0),
                                     ReportEntry("b", "tensor", np.inf, False, 3)])
        assert not rep.passed and [e.identity for e in rep.failures()] == ["a"]
        d = __import__("json").loads(rep.to_json())
        assert d["entries"][1]["max_residual"] is None
        assert d["entries"][0]["passed"] is False

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from geodyn.errors import ExpmOverflow, SeriesNotConverged
from geodyn.matfun import constant_w_position, constant_w_velocity, expm, position_correction

from oracles import rk4_linear

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])
DIAG = np.diag([0.3, -0.7])

matrices = st.integers(1, 5).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-4, 4, allow_nan=False)))


class TestExpm:
    def test_rotation(self):
        np.testing.assert_allclose(expm(-ROT * math.pi / 2) @ [1.0, 0.0], [0.0, -1.0], atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(expm(np.diag([1.5, -2.0])), np.diag([math.exp(1.5), math.exp(-2.0)]),
                                   rtol=1e-14)

    def test_zero_and_empty(self):
        np.testing.assert_array_equal(expm(np.zeros((3, 3))), np.eye(3))
        assert expm(np.zeros((0, 0))).shape == (0, 0)

    def test_nilpotent(self):
        np.testing.assert_allclose(expm([[0.0, 5.0], [0.0, 0.0]]), [[1.0, 5.0], [0.0, 1.0]], atol=1e-14)

    @given(matrices)
    @settings(max_examples=80, deadline=None)
    def test_against_scipy(self, m):
        ref = scipy.linalg.expm(m)
        np.testing.assert_allclose(expm(m), ref, rtol=1e-10, atol=1e-12 * np.abs(ref).max())

    @given(matrices)
    @settings(max_examples=60, deadline=None)
    def test_skew_part_exponentiates_to_orthogonal(self, m):
        q = expm(m - m.T)
        np.testing.assert_allclose(q.T @ q, np.eye(len(m)), atol=1e-12)

    @given(matrices)
    @settings(max_examples=40, deadline=None)
    def test_inverse_is_negated_exponent(self, m):
        # exp(M) exp(-M) = I; bound the check by the conditioning of the pair
        prod = expm(m) @ expm(-m)
        cond = np.abs(expm(m)).max() * np.abs(expm(-m)).max() * len(m)
        np.testing.assert_allclose(prod, np.eye(len(m)), atol=1e-13 * cond)

    def test_overflow(self):
        with pytest.raises(ExpmOverflow):
            expm(np.diag([800.0, 0.0]))

    @pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[np.nan]])])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(ValueError):
            expm(bad)


class TestConstantW:
    def test_zero_w(self):
        v0 = np.array([0.3, -1.2])
        for t in (0.0, 1.0, 7.5):
            np.testing.assert_array_equal(constant_w_velocity(np.zeros((2, 2)), v0, t), v0)
            np.testing.assert_array_equal(position_correction(np.zeros((2, 2)), v0, t), 0.0)

    def test_identity_w(self):
        v0, u0 = np.array([1.0, 2.0, -0.5]), np.array([0.1, 0.0, 3.0])
        for t in (0.5, 2.0, 5.0):
            np.testing.assert_allclose(constant_w_velocity(np.eye(3), v0, t), math.exp(-t) * v0, rtol=1e-14)
            np.testing.assert_allclose(constant_w_position(np.eye(3), v0, u0, t), u0 + v0 * (1 - math.exp(-t)),
                                       rtol=1e-13, atol=1e-15)

    @pytest.mark.parametrize("w0", [ROT, DIAG], ids=["rotation", "diagonal"])
    def test_velocity_matches_rk4(self, w0):
        v0 = np.array([0.8, -0.4])
        steps = 5000
        ref = rk4_linear(w0, v0, 5.0, steps)
        for i in range(0, steps + 1, 250):
            t = 5.0 * i / steps
            assert np.abs(constant_w_velocity(w0, v0, t) - ref[i]).max() <= 1e-8

    @pytest.mark.parametrize("w0", [ROT, DIAG, np.array([[0.2, 1.1], [-0.4, 0.5]])])
    def test_position_derivative_is_velocity(self, w0):
        v0, u0 = np.array([0.8, -0.4]), np.array([1.0, 2.0])
        h = 1e-3
        for t in np.linspace(0.1, 5.0, 12):
            fd = (-constant_w_position(w0, v0, u0, t + 2 * h) + 8 * constant_w_position(w0, v0, u0, t + h)
                  - 8 * constant_w_position(w0, v0, u0, t - h) + constant_w_position(w0, v0, u0, t - 2 * h)) / (12 * h)
            assert np.abs(fd - constant_w_velocity(w0, v0, t)).max() <= 1e-9

    def test_position_vs_quadrature(self):
        # integral of expm(-W s) v0 via composite Simpson on a fine grid
        w0, v0 = np.array([[0.2, 1.1], [-0.4, 0.5]]), np.array([0.8, -0.4])
        s = np.linspace(0.0, 3.0, 2001)
        vals = np.array([constant_w_velocity(w0, v0, si) for si in s])
        hs = s[1] - s[0]
        simpson = hs / 3 * (vals[0] + vals[-1] + 4 * vals[1:-1:2].sum(0) + 2 * vals[2:-1:2].sum(0))
        np.testing.assert_allclose(constant_w_position(w0, v0, np.zeros(2), 3.0), simpson, atol=1e-11)

    def test_singular_w_needs_no_inverse(self):
        w0 = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert np.all(np.isfinite(constant_w_position(w0, np.ones(2), np.zeros(2), 2.0)))

    def test_series_gives_up(self):
        with pytest.raises(SeriesNotConverged):
            position_correction(np.eye(2) * 400.0, np.ones(2), 2.0)

from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from cpflow import tensor3 as t3
from cpflow.errors import NonSpdError, SingularError
from conftest import mp_matfn


def random_spd(rng, spread=2.0):
    q = t3.random_rotation(rng)
    return q @ np.diag(np.exp(rng.uniform(-spread, spread, 3))) @ q.T


class TestSpectral:
    def test_diagonal_input(self):
        lam, q = t3.spectral(np.diag([4.0, 1.0, 0.25]))
        assert np.allclose(lam, [4.0, 1.0, 0.25], atol=0, rtol=1e-15)
        assert np.allclose(np.abs(q), np.eye(3), atol=1e-15)

    def test_identity(self):
        lam, q = t3.spectral(np.eye(3))
        assert np.allclose(lam, 1.0)
        assert np.allclose(q.T @ q, np.eye(3), atol=1e-14)

    def test_descending_and_reconstruction(self, rng):
        for _ in range(200):
            s = t3.sym(rng.normal(size=(3, 3)))
            lam, q = t3.spectral(s)
            assert lam[0] >= lam[1] >= lam[2]
            assert t3.norm(q @ np.diag(lam) @ q.T - s) <= 1e-12 * t3.norm(s)
            assert np.max(np.abs(q.T @ q - np.eye(3))) <= 1e-12

    def test_eigenvalues_against_high_precision(self, rng):
        for _ in range(20):
            s = random_spd(rng)
            with mpmath.workdps(40):
                ev = sorted((float(x) for x in mpmath.eigsy(mpmath.matrix(s.tolist()))[0]),
                            reverse=True)
            assert np.allclose(t3.spectral(s)[0], ev, rtol=1e-13, atol=0)


class TestMatrixFunctions:
    def test_log_diagonal(self):
        out = t3.log_spd(np.diag([4.0, 1.0, 0.25]))
        assert np.allclose(out, np.diag([math.log(4), 0.0, -math.log(4)]), atol=1e-15)

    def test_exp_log_inverse_pair(self):
        c = np.diag([2.0, 0.5, 1.0])
        assert t3.norm(t3.exp_sym(t3.log_spd(c)) - c) <= 1e-12

    def test_sqrt_diagonal(self):
        assert np.allclose(t3.sqrt_spd(np.diag([4.0, 1.0, 0.25])), np.diag([2.0, 1.0, 0.5]), atol=1e-15)

    @pytest.mark.parametrize("name,fun", [
        ("log", mpmath.log), ("exp", mpmath.exp), ("sqrt", mpmath.sqrt),
    ])
    def test_against_high_precision(self, rng, name, fun):
        for _ in range(10):
            s = random_spd(rng, 1.5)
            ref = mp_matfn(s, fun)
            got = t3.mat_fn(s, name)
            assert t3.norm(got - ref) <= 1e-13 * max(1.0, t3.norm(ref))

    @pytest.mark.parametrize("alpha", [-1.0, -0.5, 0.5, 1.7])
    def test_power_against_high_precision(self, rng, alpha):
        s = random_spd(rng, 1.5)
        ref = mp_matfn(s, lambda x: x ** mpmath.mpf(alpha))
        got = t3.mat_fn(s, "pow", alpha)
        assert t3.norm(got - ref) <= 1e-13 * max(1.0, t3.norm(ref))

    def test_power_minus_one_is_inverse(self, rng):
        s = random_spd(rng)
        assert np.allclose(t3.mat_fn(s, "pow", -1.0) @ s, np.eye(3), atol=1e-12)

    def test_log_of_unit_det_is_traceless(self, rng):
        for _ in range(100):
            c = t3.random_unit_det_spd(rng, 4.0)
            assert abs(t3.trace(t3.log_spd(c))) <= 1e-12

    def test_exp_accepts_indefinite(self):
        s = np.diag([-3.0, 0.0, 2.0])
        assert np.allclose(t3.exp_sym(s), np.diag(np.exp([-3.0, 0.0, 2.0])), rtol=1e-15)

    @pytest.mark.parametrize("name", ["log", "sqrt", "pow"])
    def test_nonspd_rejected(self, name):
        with pytest.raises(NonSpdError):
            t3.mat_fn(np.diag([1.0, 0.0, 2.0]), name, 0.5)

    def test_dev_coordinates_round_trip(self, rng):
        v = rng.normal(size=5)
        a = t3.dev_to_mat(v)
        assert abs(t3.trace(a)) <= 1e-15
        assert np.allclose(a, a.T)
        assert np.allclose(t3.mat_to_dev(a), v, atol=1e-15)
        # orthonormal basis: coordinates are isometric
        assert math.isclose(t3.norm(a), float(np.linalg.norm(v)), rel_tol=1e-14)

    def test_mandel_isometry(self, rng):
        a = t3.sym(rng.normal(size=(3, 3)))
        b = t3.sym(rng.normal(size=(3, 3)))
        assert math.isclose(float(t3.to_mandel(a) @ t3.to_mandel(b)), t3.contract(a, b), rel_tol=1e-13)
        assert np.allclose(t3.from_mandel(t3.to_mandel(a)), a, atol=1e-15)


class TestAlgebra:
    def test_dev_identity(self):
        assert t3.norm(t3.dev(np.eye(3))) == 0.0

    def test_norm(self):
        assert math.isclose(t3.norm(np.diag([1.0, -1.0, 0.0])), math.sqrt(2.0), rel_tol=1e-16)

    def test_cofactor_diagonal(self):
        assert np.allclose(t3.cofactor(np.diag([2.0, 3.0, 4.0])), np.diag([12.0, 8.0, 6.0]), atol=0)

    def test_cofactor_identity(self, rng):
        for _ in range(100):
            a = rng.normal(size=(3, 3))
            ref = np.linalg.det(a) * np.linalg.inv(a).T
            assert np.allclose(t3.cofactor(a), ref, rtol=1e-10, atol=1e-12)

    def test_det_and_inverse(self, rng):
        a = rng.normal(size=(3, 3))
        assert math.isclose(t3.det(a), float(np.linalg.det(a)), rel_tol=1e-12)
        assert np.allclose(t3.inverse(a) @ a, np.eye(3), atol=1e-12)

    def test_singular_inverse(self):
        with pytest.raises(SingularError):
            t3.inverse(np.diag([1.0, 0.0, 1.0]))

    def test_minor_symmetry_of_action(self, rng):
        t66 = rng.normal(size=(6, 6))
        t66 = t66 + t66.T
        a = rng.normal(size=(3, 3))
        assert np.array_equal(t3.apply4(t66, a), t3.apply4(t66, t3.sym(a)))
        assert math.isclose(t3.quad4(t66, a), t3.contract(t3.apply4(t66, a), t3.sym(a)), rel_tol=1e-12)


class TestUnitDet:
    def test_exact_input_untouched(self):
        c = np.diag([2.0, 0.5, 1.0])
        assert np.array_equal(t3.unit_det_spd(c), c)

    def test_small_drift_renormalized(self):
        c = np.diag([2.0, 0.5, 1.0]) * (1.0 + 1e-8)
        out = t3.unit_det_spd(c)
        assert abs(t3.det(out) - 1.0) <= 1e-14

    def test_large_drift_rejected(self):
        with pytest.raises(NonSpdError):
            t3.unit_det_spd(np.diag([2.0, 0.5, 1.001]))

    def test_indefinite_rejected(self):
        with pytest.raises(NonSpdError):
            t3.unit_det_spd(np.diag([-1.0, -1.0, 1.0]))

    def test_det_of_exp_of_deviator(self, rng):
        for _ in range(1000):
            c = t3.exp_dev(t3.random_dev(rng) * rng.uniform(0, 5))
            assert abs(t3.det(c) - 1.0) <= 1e-10


class TestLipschitzProbes:
    def test_identical_pair(self):
        lhs, rhs, ratio = t3.lipschitz_log_check(np.eye(3), np.eye(3))
        assert lhs == 0.0 and ratio == 0.0

    def test_diagonal_pair(self):
        lhs, rhs, ratio = t3.lipschitz_log_check(np.diag([2.0, 1.0, 0.5]), np.eye(3))
        assert math.isclose(lhs, math.sqrt(2.0) * math.log(2.0), rel_tol=1e-14)
        big = math.sqrt(4.0 + 1.0 + 0.25)
        assert math.isclose(rhs, (1.0 + big * big) * math.sqrt(1.25), rel_tol=1e-14)
        assert math.isclose(ratio, lhs / rhs, rel_tol=1e-15)

    def test_power_ratio_for_identity_exponent(self, rng):
        c1, c2 = random_spd(rng), random_spd(rng)
        assert math.isclose(t3.lipschitz_power_check(c1, c2, 1.0), 1.0, rel_tol=1e-12)
        assert t3.lipschitz_power_check(c1, c1, 0.5) == 0.0

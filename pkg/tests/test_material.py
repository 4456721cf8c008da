from __future__ import annotations

import math

import numpy as np
import pytest

from cpflow import material as mat
from cpflow import tensor3 as t3
from cpflow.errors import NonSpdError

DEFAULT = mat.MaterialModel()
OGDEN = mat.ElasticParams(1.0, 1.0, "ogden", ogden_a=(0.4, 0.2), ogden_gamma=(2.0, 3.0),
                          ogden_b=(0.3,), ogden_delta=(2.0,), ogden_k=1.5)


def scalar_density(ce, a, b):
    """Independent evaluation from the principal stretches."""
    l1, l2, l3 = np.linalg.eigvalsh(ce)
    jac = math.sqrt(l1 * l2 * l3)
    return a / 2 * (l1 + l2 + l3 - 3) - a * math.log(jac) + b / 2 * (jac - 1) ** 2


def fd_sym(fun, c, h=1e-6):
    """Central differences wrt each independent entry, symmetrized as d/dC."""
    g = np.zeros((3, 3))
    for i in range(3):
        for j in range(i, 3):
            e = np.zeros((3, 3))
            e[i, j] = e[j, i] = h
            d = (fun(c + e) - fun(c - e)) / (2 * h)
            g[i, j] = g[j, i] = d if i == j else d / 2
    return g


def random_state(rng, size=0.6):
    c = t3.exp_sym(t3.sym(rng.normal(size=(3, 3))) * size)
    cp = t3.random_unit_det_spd(rng, size)
    return c, cp


class TestElasticEnergy:
    def test_reference_value(self):
        assert mat.elastic_energy(np.eye(3), DEFAULT.elastic) == 0.0

    def test_against_scalar_evaluation(self):
        ce = np.diag([4.0, 1.0, 0.25])
        expected = 0.5 * (5.25 - 3.0)   # det = 1: log and volumetric terms vanish
        assert math.isclose(mat.elastic_energy(ce, DEFAULT.elastic), expected, rel_tol=1e-14)
        assert math.isclose(scalar_density(ce, 1.0, 1.0), expected, rel_tol=1e-14)

    def test_random_against_scalar(self, rng):
        for _ in range(50):
            ce = t3.exp_sym(t3.sym(rng.normal(size=(3, 3))))
            p = mat.ElasticParams(rng.uniform(0.5, 2), rng.uniform(0.5, 2))
            assert math.isclose(mat.elastic_energy(ce, p), scalar_density(ce, p.a, p.b),
                                rel_tol=1e-11, abs_tol=1e-13)

    def test_F_form_matches_Ce_form(self, rng):
        f = t3.random_rotation(rng) @ t3.exp_sym(0.3 * t3.sym(rng.normal(size=(3, 3))))
        assert math.isclose(mat.elastic_energy_F(f, DEFAULT.elastic),
                            mat.elastic_energy(f.T @ f, DEFAULT.elastic), rel_tol=1e-12)
        assert mat.elastic_energy_F(-np.eye(3), DEFAULT.elastic) == math.inf

    def test_nonspd_rejected(self):
        with pytest.raises(NonSpdError):
            mat.elastic_energy(np.diag([1.0, -1.0, 1.0]), DEFAULT.elastic)

    def test_quadratic_behaviour_uniaxial(self):
        s = 1e-4
        ce = np.diag([1 + 2 * s, 1.0, 1.0])
        cc, _ = mat.linearization_tensors(DEFAULT)
        quad = 0.5 * t3.quad4(cc, np.diag([s, 0.0, 0.0]))
        assert abs(mat.elastic_energy(ce, DEFAULT.elastic) - quad) <= 1e-3 * quad

    def test_quadratic_behaviour_sampled(self, rng):
        for _ in range(20):
            a = t3.sym(rng.normal(size=(3, 3)))
            a *= 1e-2 * rng.uniform(0.1, 1.0) / t3.norm(a)
            el, pl = mat.quad_behavior_ratio(DEFAULT, a)
            assert el <= 0.1 and pl <= 0.1

    def test_polyconvex_midpoint(self, rng):
        p = DEFAULT.elastic
        for _ in range(100):
            f1, f2 = (t3.exp_sym(0.5 * t3.sym(rng.normal(size=(3, 3)))) for _ in range(2))
            g1, g2 = t3.cofactor(f1), t3.cofactor(f2)
            d1, d2 = t3.det(f1), t3.det(f2)
            mid = mat.polyconvex_density(0.5 * (f1 + f2), 0.5 * (g1 + g2), 0.5 * (d1 + d2), p)
            ends = 0.5 * (mat.polyconvex_density(f1, g1, d1, p) + mat.polyconvex_density(f2, g2, d2, p))
            assert mid <= ends + 1e-12
        f = t3.exp_sym(0.3 * t3.sym(rng.normal(size=(3, 3))))
        assert math.isclose(mat.polyconvex_density(f, t3.cofactor(f), t3.det(f), p),
                            mat.elastic_energy_F(f, p), rel_tol=1e-12)

    def test_kirchhoff_ratio_bounded(self, rng):
        worst = 0.0
        for _ in range(500):
            ln = t3.sym(rng.normal(size=(3, 3)))
            ce = t3.exp_sym(ln * rng.uniform(0.0, 3.0) / t3.norm(ln))
            worst = max(worst, mat.kirchhoff_ratio(ce, DEFAULT.elastic))
        assert math.isfinite(worst) and worst < 10.0


class TestOgden:
    def test_stress_free_reference(self):
        assert abs(mat.elastic_energy(np.eye(3), OGDEN)) <= 1e-14
        assert t3.norm(mat.elastic_stress(np.eye(3), OGDEN)) <= 1e-8

    def test_rejects_small_exponent(self):
        with pytest.raises(ValueError):
            mat.ElasticParams(1.0, 1.0, "ogden", ogden_a=(1.0,), ogden_gamma=(0.5,))

    def test_positive_away_from_reference(self, rng):
        for _ in range(20):
            ce = t3.exp_sym(0.5 * t3.sym(rng.normal(size=(3, 3))))
            assert mat.elastic_energy(ce, OGDEN) > 0.0


class TestDensity:
    def test_reference(self):
        assert mat.total_density(np.eye(3), np.eye(3), DEFAULT) == 0.0

    def test_plastic_accommodation(self, rng):
        cp = t3.random_unit_det_spd(rng, 1.0)
        w = mat.total_density(cp, cp, DEFAULT)
        assert math.isclose(w, mat.plastic_energy(cp, DEFAULT.plastic), rel_tol=1e-9)

    def test_identity_plastic_gives_elastic(self, rng):
        c, _ = random_state(rng)
        assert math.isclose(mat.total_density(c, np.eye(3), DEFAULT),
                            mat.elastic_energy(c, DEFAULT.elastic), rel_tol=1e-12)

    def test_plastic_rotation_invariance(self, rng):
        c, cp = random_state(rng)
        f = t3.sqrt_spd(c)
        ref = mat.total_density(c, cp, DEFAULT)
        for _ in range(100):
            q = t3.random_rotation(rng)
            r = t3.random_rotation(rng)
            p = q @ t3.sqrt_spd(cp)
            assert abs(mat.density_from_FP(r @ f, p, DEFAULT) - ref) <= 1e-12 * max(1.0, ref)

    def test_constrained_hardening(self):
        m = DEFAULT.with_(plastic=mat.PlasticParams(0.5, 3.0))
        inside = np.diag([1.5, 1.0, 1 / 1.5])
        outside = np.diag([4.0, 0.5, 0.5])
        assert math.isfinite(mat.total_density(np.eye(3), inside, m))
        assert mat.total_density(np.eye(3), outside, m) == math.inf
        assert not mat.in_k_set(outside, 3.0)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            mat.PlasticParams(0.5, 1.5)
        with pytest.raises(ValueError):
            mat.MaterialModel(r=0.0)
        with pytest.raises(ValueError):
            mat.ElasticParams(a=-1.0)

    def test_serialization_round_trip(self):
        m = mat.MaterialModel(elastic=OGDEN, plastic=mat.PlasticParams(0.3, 2.5), r=0.4, mu=0.1)
        assert mat.MaterialModel.from_dict(m.to_dict()) == m


class TestStresses:
    def test_reference_stress_free(self):
        assert t3.norm(mat.pk2_stress(np.eye(3), np.eye(3), DEFAULT)) == 0.0
        assert t3.norm(mat.driving_force(np.eye(3), np.eye(3), DEFAULT)) <= 1e-15

    def test_pk2_against_fd(self, rng):
        for _ in range(20):
            c, cp = random_state(rng)
            s = mat.pk2_stress(c, cp, DEFAULT)
            ref = 2.0 * fd_sym(lambda x: mat.total_density(x, cp, DEFAULT), c)
            assert t3.norm(s - ref) <= 1e-6 * max(1.0, t3.norm(ref))

    def test_ogden_pk2_against_fd(self, rng):
        m = DEFAULT.with_(elastic=OGDEN)
        c, cp = random_state(rng)
        ref = 2.0 * fd_sym(lambda x: mat.total_density(x, cp, m), c)
        assert t3.norm(mat.pk2_stress(c, cp, m) - ref) <= 1e-5 * max(1.0, t3.norm(ref))

    def test_mandel_force_against_fd(self, rng):
        for _ in range(10):
            c, cp = random_state(rng)
            p = t3.random_rotation(rng) @ t3.sqrt_spd(cp)
            ref = np.zeros((3, 3))
            h = 1e-6
            for i in range(3):
                for j in range(3):
                    e = np.zeros((3, 3))
                    e[i, j] = h
                    ref[i, j] = -(mat.density_from_FP(t3.sqrt_spd(c), p + e, DEFAULT)
                                  - mat.density_from_FP(t3.sqrt_spd(c), p - e, DEFAULT)) / (2 * h)
            assert t3.norm(mat.mandel_force(c, p, DEFAULT) - ref) <= 1e-6 * max(1.0, t3.norm(ref))

    def test_mandel_relation(self, rng):
        c, cp = random_state(rng)
        p = t3.sqrt_spd(cp)
        tt = mat.driving_force(c, cp, DEFAULT)
        assert np.allclose(tt, tt.T)
        assert t3.norm(mat.mandel_force(c, p, DEFAULT) - p @ tt) <= 1e-12 * max(1.0, t3.norm(tt))

    def test_hardening_only(self, rng):
        cp = t3.random_unit_det_spd(rng, 1.0)
        tt = mat.driving_force(cp, cp, DEFAULT)
        closed = -DEFAULT.plastic.h * t3.inverse(cp) @ t3.log_spd(cp)
        assert t3.norm(tt - closed) <= 1e-12

    def test_plastic_stress_against_fd(self, rng):
        cp = t3.random_unit_det_spd(rng, 1.0)
        ref = fd_sym(lambda x: 0.25 * DEFAULT.plastic.h * t3.norm(t3.log_spd(x)) ** 2, cp)
        assert t3.norm(mat.plastic_stress(cp, DEFAULT.plastic) - ref) <= 1e-7


class TestYield:
    def test_zero_force(self, rng):
        assert mat.yield_value(t3.random_unit_det_spd(rng, 1.0), np.zeros((3, 3)), 1.0) == -1.0

    def test_identity_state(self):
        v = mat.yield_value(np.eye(3), np.diag([1.0, -1.0, 0.0]), 1.0)
        assert math.isclose(v, math.sqrt(2.0) - 1.0, rel_tol=1e-15)

    def test_diagonal_state(self, rng):
        tt = t3.sym(rng.normal(size=(3, 3)))
        p = np.diag([2.0, 1.0, 0.5])
        expected = t3.norm(t3.dev(p @ tt @ p)) - 0.3
        assert math.isclose(mat.yield_value(np.diag([4.0, 1.0, 0.25]), tt, 0.3), expected, rel_tol=1e-12)


class TestLinearization:
    def test_default_elasticity(self):
        cc, hh = mat.linearization_tensors(DEFAULT)
        assert np.allclose(cc, mat.isotropic_elasticity(1.0, 1.0), atol=1e-6)
        assert np.allclose(cc, cc.T, atol=1e-8)

    def test_hardening_on_deviators(self, rng):
        _, hh = mat.linearization_tensors(DEFAULT)
        z = t3.dev_to_mat(rng.normal(size=5))
        # h = 0.5 gives Hz = z
        assert t3.norm(t3.apply4(hh, z) - z) <= 1e-6 * t3.norm(z)

    def test_general_moduli(self):
        m = mat.MaterialModel(mat.ElasticParams(0.7, 2.3), mat.PlasticParams(1.1))
        cc, hh = mat.linearization_tensors(m)
        assert np.allclose(cc, mat.isotropic_elasticity(0.7, 2.3), atol=1e-6)
        z = t3.dev_to_mat(np.array([0.3, -0.2, 0.1, 0.5, -0.4]))
        assert t3.norm(t3.apply4(hh, z) - 2.2 * z) <= 1e-6

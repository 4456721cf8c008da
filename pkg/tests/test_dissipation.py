from __future__ import annotations

import math

import numpy as np
import pytest

from cpflow import dissipation as dis
from cpflow import tensor3 as t3

SPEC = dis.DissipationSpec(1.0)


def commuting_pair(rng, size=1.5):
    q = t3.random_rotation(rng)
    out = []
    for _ in range(2):
        d = rng.normal(size=3)
        d -= d.mean()
        out.append(q @ np.diag(np.exp(size * d / np.linalg.norm(d))) @ q.T)
    return out


class TestPotentials:
    def test_r_tilde_values(self):
        assert math.isclose(dis.r_tilde(np.diag([1.0, -1.0, 0.0]), 1.0), math.sqrt(2) / 2, rel_tol=1e-15)
        assert dis.r_tilde(np.eye(3), 1.0) == math.inf
        assert dis.r_tilde(np.zeros((3, 3)), 1.0) == 0.0

    def test_r_tilde_trace_tolerance(self):
        a = np.diag([1.0, -1.0, 1e-10])
        assert math.isfinite(dis.r_tilde(a, 1.0))
        assert dis.r_tilde(np.diag([1.0, -1.0, 1e-8]), 1.0) == math.inf

    def test_r_hat_at_identity(self):
        assert math.isclose(dis.r_hat(np.eye(3), np.diag([1.0, -1.0, 0.0]), 1.0), math.sqrt(2) / 2,
                            rel_tol=1e-15)

    def test_r_hat_volumetric_rate(self, rng):
        cp = t3.random_unit_det_spd(rng, 1.0)
        assert dis.r_hat(cp, 0.3 * cp, 1.0) == math.inf

    def test_left_and_right_forms_agree(self, rng):
        for _ in range(50):
            cp = t3.random_unit_det_spd(rng, 1.5)
            rate = cp @ t3.dev_to_mat(rng.normal(size=5))
            rate = t3.sym(rate)
            # tangent to the unit-determinant manifold: tr(Cp^-1 rate) = 0
            rate -= t3.trace(t3.inverse(cp) @ rate) / t3.trace(t3.inverse(cp) @ cp) * cp
            left = dis.r_hat(cp, rate, 1.0, "left")
            assert math.isclose(left, dis.r_hat(cp, rate, 1.0, "right"), rel_tol=1e-10)

    def test_all_forms_agree_for_commuting_pair(self, rng):
        q = t3.random_rotation(rng)
        cp = q @ np.diag(np.exp([0.4, -0.1, -0.3])) @ q.T
        rate = q @ np.diag([0.2 * math.exp(0.4), -0.5 * math.exp(-0.1), 0.3 * math.exp(-0.3)]) @ q.T
        vals = [dis.r_hat(cp, rate, 1.0, f) for f in ("left", "right", "symmetric")]
        assert max(vals) - min(vals) <= 1e-10

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            dis.r_hat(np.eye(3), np.zeros((3, 3)), 1.0, "middle")


class TestDistance:
    def test_identity(self):
        assert dis.distance(np.eye(3), np.eye(3), SPEC) == 0.0

    def test_diagonal(self):
        d = dis.distance(np.eye(3), np.diag([4.0, 1.0, 0.25]), SPEC)
        assert math.isclose(d, 0.5 * math.sqrt(2) * math.log(4), rel_tol=1e-14)

    def test_metric_axioms_sampled(self, rng):
        for _ in range(500):
            a, b, c = (t3.random_unit_det_spd(rng, 3.0) for _ in range(3))
            dab = dis.distance(a, b, SPEC)
            assert dab == dis.distance(b, a, SPEC)
            assert dis.distance(a, c, SPEC) <= dab + dis.distance(b, c, SPEC) + 1e-10
            assert dab <= dis.point_bound(a, b, SPEC.r)
            assert dab > 0.0

    def test_scale_multiplies(self, rng):
        a, b = t3.random_unit_det_spd(rng, 1.0), t3.random_unit_det_spd(rng, 1.0)
        spec2 = dis.DissipationSpec(1.0, scale=2.0)
        assert math.isclose(dis.distance(a, b, spec2), 2 * dis.distance(a, b, SPEC), rel_tol=1e-15)
        assert spec2.rho == 1.0 and SPEC.rho == 0.5

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            dis.DissipationSpec(0.0)
        with pytest.raises(ValueError):
            dis.DissipationSpec(1.0, knots=0)
        with pytest.raises(ValueError):
            dis.DissipationSpec(1.0, mode="geodesic")


class TestRescaled:
    @pytest.mark.parametrize("eps", [0.0, 1e-3, 0.1, 0.7])
    def test_scaling_identity(self, eps):
        z1 = np.zeros(5)
        z2 = t3.mat_to_dev(np.diag([1.0, -1.0, 0.0]))
        assert math.isclose(dis.distance_rescaled(z1, z2, eps, SPEC), math.sqrt(2) / 2, rel_tol=1e-12)

    def test_equal_states(self, rng):
        z = rng.normal(size=5)
        assert dis.distance_rescaled(z, z, 0.1, SPEC) == 0.0

    def test_negative_eps(self):
        with pytest.raises(ValueError):
            dis.distance_rescaled(np.zeros(5), np.zeros(5), -0.1, SPEC)


class TestPathOracle:
    def test_straight_path_cost_commuting(self, rng):
        a, b = commuting_pair(rng)
        l1, l2 = t3.log_dev(a), t3.log_dev(b)
        nodes = np.linspace(0, 1, 5)[:, None] * (l2 - l1) + l1
        assert math.isclose(dis.path_cost(nodes, 1.0), dis.distance(a, b, SPEC), rel_tol=1e-12)

    def test_commuting_pairs_equal_log_bound(self, rng):
        for _ in range(3):
            a, b = commuting_pair(rng)
            cost, nodes = dis.path_oracle(a, b, 1.0)
            assert abs(cost - dis.distance(a, b, SPEC)) <= 1e-4
            assert nodes.shape == (10, 5)

    def test_oracle_never_worse_than_start(self, rng):
        a, b = t3.random_unit_det_spd(rng, 1.5), t3.random_unit_det_spd(rng, 1.5)
        l1, l2 = t3.log_dev(a), t3.log_dev(b)
        start = dis.path_cost(np.linspace(0, 1, 6)[:, None] * (l2 - l1) + l1, 1.0)
        cost, _ = dis.path_oracle(a, b, 1.0, knots=4, iterations=30)
        assert cost <= start

    def test_mode_dispatch(self, rng):
        a, b = commuting_pair(rng)
        spec = dis.DissipationSpec(1.0, "path-oracle", knots=2, iterations=5)
        assert math.isclose(dis.distance(a, b, spec), dis.distance(a, b, SPEC), rel_tol=1e-6)

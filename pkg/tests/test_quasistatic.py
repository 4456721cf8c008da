from __future__ import annotations

import math

import numpy as np
import pytest

from cpflow import material as mat
from cpflow import quasistatic as qs
from cpflow.errors import ConfigError
from cpflow.linearized import LinearModel

GRID_MATERIAL = mat.MaterialModel(plastic=mat.PlasticParams(0.5, 3.0), r=0.1, mu=0.01)
OGDEN = mat.ElasticParams(1.0, 1.0, "ogden", ogden_a=(0.4,), ogden_gamma=(2.0,),
                          ogden_b=(0.3,), ogden_delta=(2.0,))


@pytest.fixture(scope="module")
def mesh():
    return qs.Mesh(2, 2, 2)


@pytest.fixture(scope="module")
def yielding_run(mesh):
    return qs.quasistatic_solve(mesh, GRID_MATERIAL, qs.LoadSpec(traction=(0.2, 0.0, 0.0)), 8)


class TestMesh:
    def test_counts(self, mesh):
        assert mesh.n_nodes == 27 and mesh.n_elements == 8 and mesh.n_dofs == 81
        assert len(mesh.faces) == 12
        assert int(mesh.dirichlet.sum()) == 9
        assert len(mesh.free_dofs) == 54

    def test_weights(self):
        m = qs.Mesh(3, 2, 1, lengths=(2.0, 1.0, 0.5))
        assert math.isclose(m.body_weights.sum(), 1.0)
        assert math.isclose(m.traction_weights.sum(), 0.5)
        assert math.isclose(m.weights.sum() * m.n_elements, 1.0)

    def test_checkerboard_coloring(self, mesh):
        for e, nb, _ in mesh.faces:
            assert mesh.color[e] != mesh.color[nb]

    def test_l2_norms(self, mesh):
        u = np.zeros((mesh.n_nodes, 3))
        u[:, 0] = mesh.nodes[:, 0]
        assert math.isclose(mesh.l2_norm(u), math.sqrt(1.0 / 3.0), rel_tol=1e-12)
        assert math.isclose(mesh.element_l2(np.ones((8, 5))), math.sqrt(5.0), rel_tol=1e-12)

    def test_affine_gradient(self, mesh):
        a = np.array([[0.1, 0.2, 0.0], [0.0, -0.1, 0.3], [0.05, 0.0, 0.2]])
        grads = mesh.displacement_gradients(mesh.nodes @ a.T)
        assert np.allclose(grads, a, atol=1e-14)

    def test_invalid(self):
        with pytest.raises(ValueError):
            qs.Mesh(0, 1, 1)


class TestLoad:
    def test_ramp(self, mesh):
        load = qs.LoadSpec(horizon=2.0, traction=(1.0, 0.0, 0.0), body=(0.0, 0.0, -1.0))
        assert load.beta(1.0) == 0.5 and load.beta_rate(0.3) == 0.5
        f = load.nodal(mesh, 2.0)
        assert math.isclose(f[:, 0].sum(), 1.0) and math.isclose(f[:, 2].sum(), -1.0)

    def test_scaled(self):
        load = qs.LoadSpec(traction=(1.0, 2.0, 0.0)).scaled(0.5)
        assert load.traction == (0.5, 1.0, 0.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            qs.LoadSpec(horizon=0.0)
        with pytest.raises(ValueError):
            qs.LoadSpec(traction=(1.0, 0.0))

    def test_epsilon_scaling(self):
        s = qs.Scaling.epsilon(0.1)
        assert (s.disp, s.plastic, s.energy, s.dissipation) == pytest.approx((0.1, 0.2, 100.0, 5.0))
        with pytest.raises(ValueError):
            qs.Scaling.epsilon(0.0)


class TestSolver:
    def test_ogden_rejected(self, mesh):
        with pytest.raises(ConfigError):
            qs.GridModel(mesh, GRID_MATERIAL.with_(elastic=OGDEN), qs.LoadSpec())

    def test_elastic_oracle_below_yield(self, mesh):
        load = qs.LoadSpec(traction=(0.05, 0.0, 0.0))
        full = qs.quasistatic_solve(mesh, GRID_MATERIAL, load, 4)
        frozen = qs.elastic_solve(mesh, GRID_MATERIAL, load, 4)
        assert full.dissipation == 0.0
        assert np.max(np.abs(full.disp - frozen.disp)) <= 1e-8

    def test_yielding_run(self, yielding_run):
        tr = yielding_run
        assert tr.dissipation > 0.0
        assert not tr.stalled
        assert np.all(tr.diss >= 0.0)

    def test_per_step_monotonicity(self, yielding_run):
        tr = yielding_run
        assert np.all(tr.step_inequality_defects() <= 0.0)
        assert np.all(tr.increases[1:] <= 1e-10 * (1.0 + np.abs(tr.energy[1:])))

    def test_balance_halves(self, mesh, yielding_run):
        finer = qs.quasistatic_solve(mesh, GRID_MATERIAL, qs.LoadSpec(traction=(0.2, 0.0, 0.0)), 16)
        assert abs(finer.balance_residual) <= 0.6 * abs(yielding_run.balance_residual)

    def test_stays_inside_ball(self, mesh, yielding_run):
        gm = qs.GridModel(mesh, GRID_MATERIAL, qs.LoadSpec())
        cps = gm.plastic_tensors(yielding_run.plastic[-1])
        assert np.all(np.linalg.norm(cps, axis=(1, 2)) <= 3.0)
        assert math.isfinite(gm.plastic_density(yielding_run.plastic[-1]))

    def test_csv(self, tmp_path, mesh, yielding_run):
        gm = qs.GridModel(mesh, GRID_MATERIAL, qs.LoadSpec(traction=(0.2, 0.0, 0.0)))
        yielding_run.to_csv(tmp_path / "f.csv", mesh, gm)
        yielding_run.summary_csv(tmp_path / "s.csv")
        rows = (tmp_path / "f.csv").read_text().splitlines()
        assert len(rows) == 1 + 9 * 8 and "nan" not in "".join(rows)
        assert (tmp_path / "s.csv").read_text().startswith("t,energy,dissipation,work_power,sweeps")

    def test_bad_steps(self, mesh):
        with pytest.raises(ValueError):
            qs.quasistatic_solve(mesh, GRID_MATERIAL, qs.LoadSpec(), 0)


class TestLinearGrid:
    def test_inclusion_residual(self, mesh):
        lm = LinearModel.from_material(GRID_MATERIAL)
        tr = qs.linearized_quasistatic_solve(mesh, lm, GRID_MATERIAL.mu, qs.LoadSpec(traction=(2.0, 0.0, 0.0)), 8)
        assert tr.dissipation > 0.0
        assert np.max(tr.residuals) <= 1e-6

    def test_uniform_field_has_no_gradient_force(self, mesh):
        z = np.tile(np.arange(5.0), (mesh.n_elements, 1))
        assert qs.uniform_field_gradient_force(mesh, z) == 0.0
        z[0, 0] += 1.0
        assert qs.uniform_field_gradient_force(mesh, z) > 0.0


class TestDiagnostics:
    def test_minors_converge(self):
        errs = qs.minors_errors((2, 4))
        assert errs[1] < 0.5 * errs[0]

    def test_coercivity(self, mesh):
        norms, energies = qs.coercivity_family(mesh, GRID_MATERIAL, [0.5, 1.0, 2.0, 4.0])
        assert np.all(np.diff(norms) > 0) and np.all(np.diff(energies) > 0)
        assert energies[-1] >= 0.1 * norms[-1] ** 2

    def test_small_epsilon_sweep(self, mesh):
        rep = qs.quasistatic_epsilon_sweep(mesh, GRID_MATERIAL, qs.LoadSpec(traction=(0.12, 0.0, 0.0)),
                                           [0.1, 0.03], 4)
        assert rep.err_u[1] < rep.err_u[0] and rep.err_z[1] < rep.err_z[0]
        assert set(rep.summary()) >= {"err_u", "gap_d", "passed"}

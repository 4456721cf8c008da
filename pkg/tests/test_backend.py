from __future__ import annotations

import os

import numpy as np
import pytest

from cpflow import _backend
from cpflow import _kernels_py as pure
from cpflow import tensor3 as t3

compiled = pytest.importorskip("cpflow._kernels")
GX, GW = (np.ascontiguousarray(a) for a in np.polynomial.legendre.leggauss(4))


def spd(rng, spread=1.5):
    return np.ascontiguousarray(t3.random_unit_det_spd(rng, spread) * rng.uniform(0.5, 2.0))


class TestSelection:
    @pytest.mark.skipif(os.environ.get("CPFLOW_PURE_PYTHON", "") not in ("", "0"),
                        reason="pure-Python backend forced")
    def test_compiled_preferred(self):
        assert _backend.COMPILED and _backend.BACKEND_NAME == "cython"

    def test_status_codes_agree(self):
        for name in ("STATUS_OK", "STATUS_NONSPD", "STATUS_INTEGRATION", "STATUS_MAXTIME"):
            assert getattr(compiled, name) == getattr(pure, name)


class TestKernelAgreement:
    def test_eigh(self, rng):
        for _ in range(50):
            a = np.ascontiguousarray(t3.sym(rng.normal(size=(3, 3))))
            wc, qc = compiled.eigh3(a)
            wp, qp = pure.eigh3(a)
            assert np.allclose(np.sort(wc), np.sort(wp), atol=1e-13)
            assert np.allclose(qc @ np.diag(wc) @ qc.T, a, atol=1e-13)

    @pytest.mark.parametrize("kind,alpha", [(0, 0.0), (1, 0.0), (2, 0.37)])
    def test_sym_apply(self, rng, kind, alpha):
        for _ in range(30):
            a = spd(rng)
            sc, oc = compiled.sym_apply(a, kind, alpha)
            sp, op = pure.sym_apply(a, kind, alpha)
            assert sc == sp == 0
            assert np.allclose(oc, op, rtol=1e-13, atol=1e-13)

    def test_sym_apply_rejects_indefinite(self):
        a = np.ascontiguousarray(np.diag([1.0, -1.0, 2.0]))
        assert compiled.sym_apply(a, 1, 0.0)[0] == pure.sym_apply(a, 1, 0.0)[0] == pure.STATUS_NONSPD

    @pytest.mark.parametrize("r_k", [0.0, 3.0])
    def test_point_value_grad(self, rng, r_k):
        for _ in range(30):
            l5 = np.ascontiguousarray(0.3 * rng.normal(size=5))
            c = spd(rng, 0.8)
            vc, gc = compiled.point_value_grad(l5, c, 1.0, 2.0, 0.5, r_k)
            vp, gp = pure.point_value_grad(l5, c, 1.0, 2.0, 0.5, r_k)
            assert vc == pytest.approx(vp, rel=1e-13) and np.allclose(gc, gp, atol=1e-12)

    def test_exp_pairing_grad(self, rng):
        for _ in range(30):
            l5 = np.ascontiguousarray(rng.normal(size=5))
            m = np.ascontiguousarray(t3.sym(rng.normal(size=(3, 3))))
            vc, gc = compiled.exp_pairing_grad(l5, m)
            vp, gp = pure.exp_pairing_grad(l5, m)
            assert vc == pytest.approx(vp, rel=1e-12, abs=1e-12) and np.allclose(gc, gp, atol=1e-11)

    def test_path_cost(self, rng):
        for _ in range(20):
            nodes = np.ascontiguousarray(rng.normal(size=(4, 5)))
            assert compiled.path_cost(nodes, 0.2, GX, GW) == pytest.approx(
                pure.path_cost(nodes, 0.2, GX, GW), rel=1e-12)

    def test_flow_and_project(self, rng):
        for _ in range(10):
            c = np.ascontiguousarray(t3.random_unit_det_spd(rng, 2.5))
            sc, fc = compiled.flow(c, 0.37, 1e-2)
            sp, fp = pure.flow(c, 0.37, 1e-2)
            assert sc == sp == 0 and np.allclose(fc, fp, atol=1e-12)
            sc, pc, tc = compiled.project(c, 3.0, 1e-2, 1e-10, 1e3)
            sp, pp, tp = pure.project(c, 3.0, 1e-2, 1e-10, 1e3)
            assert sc == sp == 0 and np.allclose(pc, pp, atol=1e-10) and abs(tc - tp) <= 1e-9

    def test_project_max_time(self):
        c = np.ascontiguousarray(np.diag([9.0, 1.0, 1.0 / 9.0]))
        assert compiled.project(c, 3.0, 1e-2, 1e-10, 0.1)[0] == pure.project(c, 3.0, 1e-2, 1e-10, 0.1)[0] \
            == pure.STATUS_MAXTIME

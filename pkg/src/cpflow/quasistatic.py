"""Quasistatic finite-strain plasticity with plastic-gradient energy on a box.

Discretization: trilinear hexahedra on ``[0, Lx] x [0, Ly] x [0, Lz]``,
clamped on ``x = 0``, dead traction on ``x = Lx``, optional uniform body
force.  The plastic state is constant per element, ``Cp_e = exp(L_e)``;
the gradient energy ``(mu/2) int |grad Cp|^2`` becomes
``(mu/2) sum_faces k_f |Cp_e - Cp_n|^2`` with ``k_f = area / spacing``.

Each time step minimizes ``E(y, Cp, t) + D(Cp_prev, Cp)`` by alternating a
Newton solve in the nodal displacements with a Gauss-Seidel sweep of
5-dimensional element problems.

Solver variables may be rescaled (``Scaling``): displacement
``u = disp * v``, plastic log ``L = plastic * x``, and the objective is
``energy * E_int - <load, v> + dissipation * D``.  The physical problem has
all factors 1; the small-strain problem at ``eps`` uses
``(eps, 2 eps, 1/eps^2, 1/(2 eps))``.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import cg

from . import material as mat
from . import tensor3 as t3
from ._backend import kernels
from .errors import ConfigError, ElementInversion, SolverDivergence
from .linearized import DEV_TO_MANDEL, LinearModel, prox_step
from .point_solver import StepOptions, minimize_with_kink
from .projection import FlowConfig, project

GAUSS_1D = (-1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0))
_CORNERS = np.array([[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
                     [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float)


# --------------------------------------------------------------------- mesh

class Mesh:
    """Structured hexahedral mesh of a box with precomputed quadrature data."""

    def __init__(self, nx: int = 2, ny: int = 2, nz: int = 2, lengths=(1.0, 1.0, 1.0)):
        if min(nx, ny, nz) < 1:
            raise ValueError("need at least one element per direction")
        self.shape = (nx, ny, nz)
        self.lengths = tuple(float(x) for x in lengths)
        hx, hy, hz = (self.lengths[0] / nx, self.lengths[1] / ny, self.lengths[2] / nz)
        self.h = np.array([hx, hy, hz])
        gx = np.linspace(0.0, self.lengths[0], nx + 1)
        gy = np.linspace(0.0, self.lengths[1], ny + 1)
        gz = np.linspace(0.0, self.lengths[2], nz + 1)

        def nid(i, j, k):
            return i + (nx + 1) * (j + (ny + 1) * k)

        self.nodes = np.array([[gx[i], gy[j], gz[k]] for k in range(nz + 1)
                               for j in range(ny + 1) for i in range(nx + 1)])
        conn, index = [], {}
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    index[(i, j, k)] = len(conn)
                    conn.append([nid(i + (c[0] > 0), j + (c[1] > 0), k + (c[2] > 0)) for c in _CORNERS])
        self.conn = np.array(conn)
        self.element_index = index
        self.n_nodes = len(self.nodes)
        self.n_elements = len(self.conn)
        self.volume = hx * hy * hz
        self.centers = self.nodes[self.conn].mean(axis=1)
        self.color = np.array([(i + j + k) % 2 for (i, j, k) in sorted(index, key=index.get)])

        # quadrature: shape values, physical gradients, weights
        pts = np.array([[a, b, c] for c in GAUSS_1D for b in GAUSS_1D for a in GAUSS_1D])
        self.gauss_ref = pts
        n = np.prod(1.0 + pts[:, None, :] * _CORNERS[None, :, :], axis=2) / 8.0
        dn = np.empty((len(pts), 8, 3))
        for d in range(3):
            others = [o for o in range(3) if o != d]
            dn[:, :, d] = (_CORNERS[None, :, d] / 8.0
                           * np.prod(1.0 + pts[:, None, others] * _CORNERS[None, :, others], axis=2)
                           * (2.0 / self.h[d]))
        self.shape_values = n
        self.shape_grads = dn
        self.weights = np.full(len(pts), self.volume / 8.0)

        # boundary data
        tol = 1e-12 * max(self.lengths)
        self.dirichlet = self.nodes[:, 0] <= tol
        free = np.repeat(~self.dirichlet, 3)
        self.free_dofs = np.flatnonzero(free)
        tr = np.abs(self.nodes[:, 0] - self.lengths[0]) <= tol
        self.traction_nodes = tr
        self.traction_weights = np.zeros(self.n_nodes)
        self.body_weights = np.zeros(self.n_nodes)
        for e in range(self.n_elements):
            self.body_weights[self.conn[e]] += self.volume / 8.0
        for k in range(nz):
            for j in range(ny):
                for nd in (nid(nx, j, k), nid(nx, j + 1, k), nid(nx, j, k + 1), nid(nx, j + 1, k + 1)):
                    self.traction_weights[nd] += hy * hz / 4.0

        # interior faces: (element, neighbor, area / spacing)
        faces = []
        for (i, j, k), e in index.items():
            for d, (di, dj, dk) in enumerate(((1, 0, 0), (0, 1, 0), (0, 0, 1))):
                nb = index.get((i + di, j + dj, k + dk))
                if nb is not None:
                    area = float(np.prod(np.delete(self.h, d)))
                    faces.append((e, nb, area / self.h[d]))
        self.faces = faces
        self.neighbors = [[] for _ in range(self.n_elements)]
        for e, nb, kf in faces:
            self.neighbors[e].append((nb, kf))
            self.neighbors[nb].append((e, kf))

        # Mandel strain-displacement matrices, shape (ng, 6, 24)
        b = np.zeros((len(pts), 6, 24))
        s = 1.0 / math.sqrt(2.0)
        for a in range(8):
            g = dn[:, a, :]
            c = 3 * a
            b[:, 0, c] = g[:, 0]
            b[:, 1, c + 1] = g[:, 1]
            b[:, 2, c + 2] = g[:, 2]
            b[:, 3, c + 1] = s * g[:, 2]
            b[:, 3, c + 2] = s * g[:, 1]
            b[:, 4, c] = s * g[:, 2]
            b[:, 4, c + 2] = s * g[:, 0]
            b[:, 5, c] = s * g[:, 1]
            b[:, 5, c + 1] = s * g[:, 0]
        self.strain_matrices = b
        self.element_dofs = (3 * self.conn[:, :, None] + np.arange(3)[None, None, :]).reshape(self.n_elements, 24)

    @property
    def n_dofs(self) -> int:
        return 3 * self.n_nodes

    def displacement_gradients(self, u) -> np.ndarray:
        """``grad u`` at every Gauss point, shape (ne, ng, 3, 3)."""
        return np.einsum("eai,gaj->egij", np.asarray(u)[self.conn], self.shape_grads)

    def gauss_values(self, u) -> np.ndarray:
        """Nodal field interpolated to Gauss points, shape (ne, ng, 3)."""
        return np.einsum("ga,eai->egi", self.shape_values, np.asarray(u)[self.conn])

    def l2_norm(self, u) -> float:
        """Exact L2 norm of the trilinear interpolant (2-point Gauss is exact)."""
        vals = self.gauss_values(u)
        return float(math.sqrt(np.einsum("g,egi,egi->", self.weights, vals, vals)))

    def element_l2(self, x) -> float:
        """L2 norm of an element-constant field."""
        return float(math.sqrt(self.volume * np.sum(np.asarray(x) ** 2)))


# --------------------------------------------------------------------- load

@dataclass(frozen=True)
class LoadSpec:
    """Dead traction on ``x = Lx`` and uniform body force, ramped by beta(t).

    ``beta`` is piecewise linear through ``(times, values)``; by default
    ``beta(t) = t / horizon``.
    """

    horizon: float = 1.0
    traction: tuple = (0.0, 0.0, 0.0)
    body: tuple = (0.0, 0.0, 0.0)
    times: tuple | None = None
    values: tuple | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if len(self.traction) != 3 or len(self.body) != 3:
            raise ValueError("traction and body force need 3 components")

    def _knots(self):
        if self.times is None:
            return np.array([0.0, self.horizon]), np.array([0.0, 1.0])
        return np.asarray(self.times, dtype=float), np.asarray(self.values, dtype=float)

    def beta(self, t: float) -> float:
        bt, bv = self._knots()
        return float(np.interp(t, bt, bv))

    def beta_rate(self, t: float) -> float:
        bt, bv = self._knots()
        k = int(np.clip(np.searchsorted(bt, t, side="right") - 1, 0, len(bt) - 2))
        return float((bv[k + 1] - bv[k]) / (bt[k + 1] - bt[k]))

    def nodal(self, mesh: Mesh, t: float) -> np.ndarray:
        """Consistent nodal load vector, shape (nn, 3)."""
        b = self.beta(t)
        return b * (np.outer(mesh.traction_weights, self.traction) + np.outer(mesh.body_weights, self.body))

    def scaled(self, factor: float) -> "LoadSpec":
        return LoadSpec(self.horizon, tuple(factor * x for x in self.traction),
                        tuple(factor * x for x in self.body), self.times, self.values)


@dataclass(frozen=True)
class Scaling:
    """Variable and objective scaling, see module docstring."""

    disp: float = 1.0
    plastic: float = 1.0
    energy: float = 1.0
    dissipation: float = 1.0

    @classmethod
    def epsilon(cls, eps: float) -> "Scaling":
        if not eps > 0:
            raise ValueError("eps must be positive")
        return cls(eps, 2.0 * eps, 1.0 / (eps * eps), 1.0 / (2.0 * eps))


@dataclass(frozen=True)
class SolverConfig:
    """Alternating-minimization settings."""

    alt_tol: float = 1e-10
    max_sweeps: int = 50
    newton_tol: float = 1e-12
    newton_iters: int = 50
    plastic: bool = True
    seed: int = 0
    step: StepOptions = field(default_factory=StepOptions)


# ------------------------------------------------------------------ energies

class GridModel:
    """Discrete energy functional of one scenario."""

    def __init__(self, mesh: Mesh, m: mat.MaterialModel, load: LoadSpec,
                 scaling: Scaling = Scaling(), dissipation_scale: float = 1.0):
        if not m.closed_form:
            raise ConfigError("material.elastic.family: the grid solver needs the neo-Hookean family")
        self.mesh = mesh
        self.m = m
        self.load = load
        self.s = scaling
        self.rho = scaling.dissipation * scaling.plastic * dissipation_scale * 0.5 * m.r
        self.r_k = m.plastic.r_k or 0.0

    # plastic fields -----------------------------------------------------
    def plastic_tensors(self, x) -> np.ndarray:
        return np.array([t3.exp_dev(self.s.plastic * xe) for xe in x])

    def plastic_density(self, x) -> float:
        """``sum_e vol W_p`` (+inf outside K)."""
        total = 0.0
        for xe in x:
            l5 = self.s.plastic * xe
            if self.r_k:
                cp = t3.exp_dev(l5)
                if not mat.in_k_set(cp, self.r_k):
                    return math.inf
            total += 0.25 * self.m.plastic.h * float(l5 @ l5)
        return self.mesh.volume * total

    def gradient_energy(self, cps) -> float:
        if self.m.mu == 0.0:
            return 0.0
        return 0.5 * self.m.mu * sum(kf * float(np.sum((cps[e] - cps[n]) ** 2)) for e, n, kf in self.mesh.faces)

    # elastic part -------------------------------------------------------
    def _kinematics(self, v):
        f = t3.IDENTITY + self.s.disp * self.mesh.displacement_gradients(v)
        j = np.linalg.det(f)
        return f, j

    def elastic(self, v, cp_inv) -> float:
        f, j = self._kinematics(v)
        if not np.all(j > 0):
            return math.inf
        a, b = self.m.elastic.a, self.m.elastic.b
        tr = np.einsum("egij,ejk,egik->eg", f, cp_inv, f)
        w = 0.5 * a * (tr - 3.0) - a * np.log(j) + 0.5 * b * (j - 1.0) ** 2
        return float(np.einsum("g,eg->", self.mesh.weights, w))

    def elastic_force(self, v, cp_inv) -> np.ndarray:
        """Gradient of ``elastic`` with respect to v, shape (nn, 3)."""
        f, j = self._kinematics(v)
        a, b = self.m.elastic.a, self.m.elastic.b
        finv_t = np.swapaxes(np.linalg.inv(f), -1, -2)
        beta = -a + b * j * (j - 1.0)
        p = a * np.einsum("egij,ejk->egik", f, cp_inv) + beta[..., None, None] * finv_t
        fe = np.einsum("g,egij,gaj->eai", self.mesh.weights, p, self.mesh.shape_grads)
        out = np.zeros((self.mesh.n_nodes, 3))
        np.add.at(out, self.mesh.conn, fe)
        return self.s.disp * out

    def elastic_stiffness(self, v, cp_inv) -> np.ndarray:
        """Hessian of ``elastic`` with respect to v, dense (3nn, 3nn)."""
        f, j = self._kinematics(v)
        a, b = self.m.elastic.a, self.m.elastic.b
        fit = np.swapaxes(np.linalg.inv(f), -1, -2)
        beta = -a + b * j * (j - 1.0)
        eye = np.eye(3)
        tang = (a * np.einsum("ik,elj->eijkl", eye, cp_inv)[:, None, ...]
                - beta[..., None, None, None, None] * np.einsum("egil,egkj->egijkl", fit, fit)
                + (b * (2.0 * j - 1.0) * j)[..., None, None, None, None]
                * np.einsum("egij,egkl->egijkl", fit, fit))
        ke = np.einsum("g,gaj,egijkl,gbl->eaibk", self.mesh.weights, self.mesh.shape_grads, tang,
                       self.mesh.shape_grads).reshape(self.mesh.n_elements, 24, 24)
        n = self.mesh.n_dofs
        out = np.zeros((n, n))
        dofs = self.mesh.element_dofs
        np.add.at(out, (dofs[:, :, None], dofs[:, None, :]), ke)
        return self.s.disp ** 2 * out

    # totals -------------------------------------------------------------
    def energy(self, v, x, t: float) -> float:
        """``energy * E_int - <load(t), v>``."""
        cps = self.plastic_tensors(x)
        cp_inv = np.array([t3.exp_dev(-self.s.plastic * xe) for xe in x])
        wp = self.plastic_density(x)
        we = self.elastic(v, cp_inv)
        if math.isinf(wp) or math.isinf(we):
            return math.inf
        internal = we + wp + self.gradient_energy(cps)
        return self.s.energy * internal - float(np.sum(self.load.nodal(self.mesh, t) * v))

    def dissipation(self, x_prev, x) -> float:
        return self.rho * self.mesh.volume * float(np.sum(np.linalg.norm(np.asarray(x) - np.asarray(x_prev), axis=1)))

    def element_energies(self, v, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-element elastic and plastic energies (scaled)."""
        cp_inv = np.array([t3.exp_dev(-self.s.plastic * xe) for xe in x])
        f, j = self._kinematics(v)
        a, b = self.m.elastic.a, self.m.elastic.b
        tr = np.einsum("egij,ejk,egik->eg", f, cp_inv, f)
        w = 0.5 * a * (tr - 3.0) - a * np.log(j) + 0.5 * b * (j - 1.0) ** 2
        we = self.s.energy * np.einsum("g,eg->e", self.mesh.weights, w)
        wp = self.s.energy * self.mesh.volume * 0.25 * self.m.plastic.h * np.sum((self.s.plastic * np.asarray(x)) ** 2, axis=1)
        return we, wp


class _ElementEnergy:
    """Smooth part of one element subproblem in the variable ``x_e``."""

    def __init__(self, gm: GridModel, cbar, nbr_sum, k_sum: float):
        self.gm = gm
        self.cbar = np.ascontiguousarray(cbar)
        self.nbr_sum = np.ascontiguousarray(nbr_sum)
        self.k_sum = k_sum

    def value_grad(self, x):
        gm = self.gm
        s = gm.s.plastic
        el = gm.m.elastic
        l5 = np.ascontiguousarray(s * np.asarray(x, dtype=float))
        val, grad = kernels.point_value_grad(l5, self.cbar, el.a, el.b, gm.m.plastic.h, gm.r_k)
        if math.isinf(val):
            return math.inf, grad
        vol = gm.mesh.volume
        val *= vol
        grad = grad * vol
        if gm.m.mu > 0 and self.k_sum > 0:
            v1, g1 = kernels.exp_pairing_grad(np.ascontiguousarray(2.0 * l5), np.eye(3))
            v2, g2 = kernels.exp_pairing_grad(l5, self.nbr_sum)
            val += 0.5 * gm.m.mu * (self.k_sum * v1 - 2.0 * v2)
            grad = grad + 0.5 * gm.m.mu * (2.0 * self.k_sum * g1 - 2.0 * g2)
        return gm.s.energy * val, (gm.s.energy * s) * grad

    def value(self, x) -> float:
        return self.value_grad(x)[0]


# --------------------------------------------------------------- trajectory

@dataclass
class GridTrajectory:
    """Time-discrete solution on the grid (solver variables).

    ``energy_prev[i]`` is the energy of the step-(i-1) state at ``t_i``;
    ``increases[i]`` the largest rise of ``E + D``-increment across the
    alternating sub-steps of step i (non-positive up to rounding).
    """

    times: np.ndarray
    disp: np.ndarray        # (N+1, nn, 3)
    plastic: np.ndarray     # (N+1, ne, 5)
    energy: np.ndarray
    energy_prev: np.ndarray
    diss: np.ndarray
    power: np.ndarray
    sweeps: np.ndarray
    increases: np.ndarray
    stalled: list = field(default_factory=list)
    reverted: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def dissipation(self) -> float:
        return float(np.sum(self.diss))

    @property
    def balance_residual(self) -> float:
        return float(self.energy[-1] + self.dissipation - self.energy[0] - self.power[-1])

    def step_inequality_defects(self) -> np.ndarray:
        return self.energy[1:] + self.diss[1:] - self.energy_prev[1:]

    def summary_csv(self, path) -> None:
        """Per-step scalars: t, energy, cumulative dissipation, power integral, sweeps."""
        cum = np.cumsum(self.diss)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "energy", "dissipation", "work_power", "sweeps"])
            for i, t in enumerate(self.times):
                w.writerow([repr(float(t)), repr(float(self.energy[i])), repr(float(cum[i])),
                            repr(float(self.power[i])), str(int(self.sweeps[i]))])

    def to_csv(self, path, mesh: Mesh, gm: GridModel | None = None) -> None:
        """Per-step element snapshots: step, t, element, L components, energies."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "t", "element", "l1", "l2", "l3", "l4", "l5", "elastic_energy",
                        "plastic_energy", "ux_mean", "uy_mean", "uz_mean"])
            for i, t in enumerate(self.times):
                if gm is not None:
                    we, wp = gm.element_energies(self.disp[i], self.plastic[i])
                else:
                    we = wp = np.full(mesh.n_elements, np.nan)
                umean = self.disp[i][mesh.conn].mean(axis=1)
                scale = gm.s.plastic if gm is not None else 1.0
                for e in range(mesh.n_elements):
                    row = [i, t, e, *(scale * self.plastic[i, e]), we[e], wp[e], *umean[e]]
                    w.writerow([str(v) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row])


# ------------------------------------------------------------------- solver

def _newton_displacement(gm: GridModel, v, x, t, cfg: SolverConfig):
    """Damped Newton for the displacement problem at fixed plastic state."""
    mesh = gm.mesh
    cp_inv = np.array([t3.exp_dev(-gm.s.plastic * xe) for xe in x])
    load = gm.load.nodal(mesh, t)
    free = mesh.free_dofs

    def phi(vv):
        we = gm.elastic(vv, cp_inv)
        if math.isinf(we):
            return math.inf
        return gm.s.energy * we - float(np.sum(load * vv))

    v = np.array(v, dtype=float)
    f0 = phi(v)
    if math.isinf(f0):
        raise ElementInversion("inverted element in the starting configuration")
    scale = 1.0 + float(np.linalg.norm(load))
    for _ in range(cfg.newton_iters):
        g = (gm.s.energy * gm.elastic_force(v, cp_inv) - load).ravel()[free]
        if float(np.linalg.norm(g)) <= cfg.newton_tol * scale:
            break
        k = gm.s.energy * gm.elastic_stiffness(v, cp_inv)[np.ix_(free, free)]
        try:
            chol = np.linalg.cholesky(k)
            step = -np.linalg.solve(chol.T, np.linalg.solve(chol, g))
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(k + 1e-8 * np.eye(len(free)) * np.abs(k).max(), g, rcond=None)[0]
        slope = float(g @ step)
        if slope >= 0:
            step, slope = -g, -float(g @ g)
        alpha = 1.0
        done = False
        while alpha > 1e-12:
            vt = v.copy().ravel()
            vt[free] += alpha * step
            vt = vt.reshape(v.shape)
            ft = phi(vt)
            if ft <= f0 + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        else:
            done = True
        if done:
            break
        small = float(np.linalg.norm(alpha * step)) <= 1e-15 * (1.0 + float(np.linalg.norm(v)))
        v, f0 = vt, ft
        if small:
            break
    return v, f0


def _plastic_sweep(gm: GridModel, v, x, x_prev, cfg: SolverConfig, rng):
    """One red-black Gauss-Seidel sweep of element subproblems."""
    mesh = gm.mesh
    f, _ = gm._kinematics(v)
    cg_ = np.einsum("g,egki,egkj->eij", mesh.weights, f, f) / mesh.volume
    x = np.array(x, dtype=float)
    cps = gm.plastic_tensors(x)
    for color in (0, 1):
        for e in np.flatnonzero(mesh.color == color):
            nbr_sum = np.zeros((3, 3))
            k_sum = 0.0
            for nb, kf in mesh.neighbors[e]:
                nbr_sum += kf * cps[nb]
                k_sum += kf
            fun = _ElementEnergy(gm, cg_[e], nbr_sum, k_sum)
            xe, _ = minimize_with_kink(fun, x_prev[e], gm.rho * mesh.volume, cfg.step, rng, incumbent=x[e])
            x[e] = xe
            cps[e] = t3.exp_dev(gm.s.plastic * xe)
    return x


def quasistatic_solve(mesh: Mesh, m: mat.MaterialModel, load: LoadSpec, n_steps: int,
                      x0=None, cfg: SolverConfig = SolverConfig(), scaling: Scaling = Scaling(),
                      dissipation_scale: float = 1.0) -> GridTrajectory:
    """Alternating incremental minimization on a uniform time partition.

    Parameters
    ----------
    x0 : array_like, shape (ne, 5), optional
        Initial plastic logs in solver variables (default 0, i.e. Cp = I).

    Raises
    ------
    ElementInversion
        If a displacement iterate inverts an element.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    gm = GridModel(mesh, m, load, scaling, dissipation_scale)
    rng = np.random.default_rng(cfg.seed)
    times = np.linspace(0.0, load.horizon, n_steps + 1)
    x = np.zeros((mesh.n_elements, 5)) if x0 is None else np.array(x0, dtype=float)
    v = np.zeros((mesh.n_nodes, 3))
    v, _ = _newton_displacement(gm, v, x, 0.0, cfg)
    disp = np.empty((n_steps + 1, mesh.n_nodes, 3))
    plast = np.empty((n_steps + 1, mesh.n_elements, 5))
    energy = np.empty(n_steps + 1)
    energy_prev = np.empty(n_steps + 1)
    diss = np.zeros(n_steps + 1)
    power = np.zeros(n_steps + 1)
    sweeps = np.zeros(n_steps + 1, dtype=int)
    increases = np.full(n_steps + 1, -np.inf)
    disp[0], plast[0] = v, x
    energy[0] = energy_prev[0] = gm.energy(v, x, 0.0)
    stalled, reverted = [], []
    for i in range(1, n_steps + 1):
        t = times[i]
        dl = gm.load.nodal(mesh, t) - gm.load.nodal(mesh, times[i - 1])
        power[i] = power[i - 1] - float(np.sum(dl * v))
        v_prev, x_prev = v.copy(), x.copy()
        e_prev = gm.energy(v_prev, x_prev, t)
        energy_prev[i] = e_prev
        total = e_prev
        worst = -np.inf
        converged = False
        for sweep in range(cfg.max_sweeps):
            start = total
            v, _ = _newton_displacement(gm, v, x, t, cfg)
            after_y = gm.energy(v, x, t) + gm.dissipation(x_prev, x)
            worst = max(worst, after_y - total)
            total = after_y
            if cfg.plastic:
                x = _plastic_sweep(gm, v, x, x_prev, cfg, rng)
                after_p = gm.energy(v, x, t) + gm.dissipation(x_prev, x)
                worst = max(worst, after_p - total)
                total = after_p
            sweeps[i] = sweep + 1
            if start - total < cfg.alt_tol * (1.0 + abs(total)):
                converged = True
                break
            if not cfg.plastic:
                converged = True
                break
        if not converged:
            stalled.append(i)
            warnings.warn(f"alternating minimization stalled at step {i}", RuntimeWarning, stacklevel=2)
        e_new = gm.energy(v, x, t)
        d = gm.dissipation(x_prev, x)
        if not e_new + d <= e_prev:
            # no gain beyond rounding: keep the previous state
            v, x, e_new, d = v_prev, x_prev, e_prev, 0.0
            reverted.append(i)
        disp[i], plast[i] = v, x
        energy[i], diss[i], increases[i] = e_new, d, worst
    return GridTrajectory(times, disp, plast, energy, energy_prev, diss, power, sweeps, increases,
                          stalled, reverted)


def elastic_solve(mesh: Mesh, m: mat.MaterialModel, load: LoadSpec, n_steps: int, x0=None,
                  cfg: SolverConfig = SolverConfig(), scaling: Scaling = Scaling()) -> GridTrajectory:
    """Same time loop with the plastic state frozen."""
    frozen = SolverConfig(cfg.alt_tol, cfg.max_sweeps, cfg.newton_tol, cfg.newton_iters, False, cfg.seed, cfg.step)
    return quasistatic_solve(mesh, m, load, n_steps, x0, frozen, scaling)


# -------------------------------------------------------- linearized model

class LinearGrid:
    """Quadratic limit energy on the grid with gradient coefficient ``mu``."""

    def __init__(self, mesh: Mesh, lm: LinearModel, mu: float, load: LoadSpec):
        self.mesh = mesh
        self.lm = lm
        self.mu = mu
        self.load = load
        b = mesh.strain_matrices
        ke = np.einsum("g,gpi,pq,gqj->ij", mesh.weights, b, lm.elastic, b)
        n = mesh.n_dofs
        k = np.zeros((n, n))
        dofs = mesh.element_dofs
        for e in range(mesh.n_elements):
            k[np.ix_(dofs[e], dofs[e])] += ke
        self.stiffness = k
        # coupling: strain work of z, (24, 5) per element
        self.coupling = np.einsum("g,gpi,pq,qk->ik", mesh.weights, b, lm.elastic, DEV_TO_MANDEL)
        vol = mesh.volume
        self.k_sums = np.array([sum(kf for _, kf in mesh.neighbors[e]) for e in range(mesh.n_elements)])
        self.local_q = vol * lm.reduced

    def mean_strain(self, u) -> np.ndarray:
        """Volume-weighted Mandel strain sums ``sum_g w_g B_g u_e``, shape (ne, 6)."""
        ue = np.asarray(u).reshape(-1)[self.mesh.element_dofs]
        return np.einsum("g,gpi,ei->ep", self.mesh.weights, self.mesh.strain_matrices, ue)

    def energy(self, u, z, t: float) -> float:
        mesh = self.mesh
        b = mesh.strain_matrices
        ue = np.asarray(u).reshape(-1)[mesh.element_dofs]
        eps = np.einsum("gpi,ei->egp", b, ue) - (np.asarray(z) @ DEV_TO_MANDEL.T)[:, None, :]
        el = 0.5 * float(np.einsum("g,egp,pq,egq->", mesh.weights, eps, self.lm.elastic, eps))
        zm = np.asarray(z) @ DEV_TO_MANDEL.T
        hard = 0.5 * mesh.volume * float(np.einsum("ep,pq,eq->", zm, self.lm.hardening, zm))
        grad = 2.0 * self.mu * sum(kf * float(np.sum((z[e] - z[n]) ** 2)) for e, n, kf in mesh.faces)
        return el + hard + grad - float(np.sum(self.load.nodal(mesh, t) * np.asarray(u).reshape(mesh.n_nodes, 3)))

    def dissipation(self, z_prev, z) -> float:
        return self.lm.rho * self.mesh.volume * float(np.sum(np.linalg.norm(np.asarray(z) - np.asarray(z_prev), axis=1)))

    def solve_u(self, z, t: float, u0=None) -> np.ndarray:
        """Conjugate gradients on the free-dof block.

        Raises
        ------
        SolverDivergence
            If CG does not reach its tolerance.
        """
        mesh = self.mesh
        rhs = self.load.nodal(mesh, t).reshape(-1).copy()
        contrib = np.einsum("ik,ek->ei", self.coupling, np.asarray(z))
        np.add.at(rhs, mesh.element_dofs, contrib)
        free = mesh.free_dofs
        kff = self.stiffness[np.ix_(free, free)]
        diag = np.diag(kff)
        x0 = None if u0 is None else np.asarray(u0).reshape(-1)[free]
        sol, info = cg(kff, rhs[free], x0=x0, rtol=1e-15, atol=1e-15 * (1.0 + float(np.linalg.norm(rhs))),
                       maxiter=20 * len(free), M=np.diag(1.0 / diag))
        if info != 0:
            res = float(np.linalg.norm(kff @ sol - rhs[free]))
            if res > 1e-10 * (1.0 + float(np.linalg.norm(rhs))):
                raise SolverDivergence(f"conjugate gradients stopped with residual {res:.3e}")
        u = np.zeros(mesh.n_dofs)
        u[free] = sol
        return u.reshape(mesh.n_nodes, 3)

    def element_problem(self, e: int, u, z) -> tuple[np.ndarray, np.ndarray]:
        """``(Q_e, p_e)`` of the quadratic part in ``z_e`` at fixed u and neighbors."""
        mesh = self.mesh
        ue = np.asarray(u).reshape(-1)[mesh.element_dofs[e]]
        p = ue @ self.coupling
        q = self.local_q.copy()
        if self.mu > 0:
            q += 4.0 * self.mu * self.k_sums[e] * np.eye(5)
            for nb, kf in mesh.neighbors[e]:
                p = p + 4.0 * self.mu * kf * z[nb]
        return q, p

    def sweep_z(self, u, z, z_prev) -> np.ndarray:
        z = np.array(z, dtype=float)
        for color in (0, 1):
            for e in np.flatnonzero(self.mesh.color == color):
                q, p = self.element_problem(e, u, z)
                z[e] = prox_step(q, p, z_prev[e], self.lm.rho * self.mesh.volume)
        return z

    def inclusion_residual(self, u, z, z_prev) -> float:
        """Max over elements of the subgradient-membership defect (per volume)."""
        worst = 0.0
        for e in range(self.mesh.n_elements):
            q, p = self.element_problem(e, u, z)
            xi = p - q @ z[e]
            d = z[e] - z_prev[e]
            dn = float(np.linalg.norm(d))
            r = self.lm.rho * self.mesh.volume
            res = max(float(np.linalg.norm(xi)) - r, 0.0) if dn == 0.0 else float(np.linalg.norm(xi - r * d / dn))
            worst = max(worst, res / self.mesh.volume)
        return worst


@dataclass
class LinearGridTrajectory:
    times: np.ndarray
    disp: np.ndarray
    plastic: np.ndarray
    energy: np.ndarray
    diss: np.ndarray
    residuals: np.ndarray

    @property
    def dissipation(self) -> float:
        return float(np.sum(self.diss))


def linearized_quasistatic_solve(mesh: Mesh, lm: LinearModel, mu: float, load: LoadSpec,
                                 n_steps: int, z0=None, tol: float = 1e-14,
                                 max_sweeps: int = 500) -> LinearGridTrajectory:
    """Alternating CG displacement solves and exact element prox updates."""
    lg = LinearGrid(mesh, lm, mu, load)
    times = np.linspace(0.0, load.horizon, n_steps + 1)
    z = np.zeros((mesh.n_elements, 5)) if z0 is None else np.array(z0, dtype=float)
    u = lg.solve_u(z, 0.0)
    disp = np.empty((n_steps + 1, mesh.n_nodes, 3))
    plast = np.empty((n_steps + 1, mesh.n_elements, 5))
    energy = np.empty(n_steps + 1)
    diss = np.zeros(n_steps + 1)
    res = np.zeros(n_steps + 1)
    disp[0], plast[0], energy[0] = u, z, lg.energy(u, z, 0.0)
    for i in range(1, n_steps + 1):
        t = times[i]
        z_prev = z.copy()
        total = lg.energy(u, z, t)
        for _ in range(max_sweeps):
            u = lg.solve_u(z, t, u)
            z = lg.sweep_z(u, z, z_prev)
            new = lg.energy(u, z, t) + lg.dissipation(z_prev, z)
            if total - new <= tol * (1.0 + abs(new)):
                total = new
                break
            total = new
        u = lg.solve_u(z, t, u)
        disp[i], plast[i] = u, z
        energy[i] = lg.energy(u, z, t)
        diss[i] = lg.dissipation(z_prev, z)
        res[i] = lg.inclusion_residual(u, z, z_prev)
    return LinearGridTrajectory(times, disp, plast, energy, diss, res)


# ------------------------------------------------------------ eps-sweeps

@dataclass
class GridConvergenceReport:
    epsilons: list
    err_u: list
    err_z: list
    err_diss: list
    err_energy: list
    gap_d: list
    gap_e: list

    @staticmethod
    def _decreasing(seq) -> bool:
        return all(b < a for a, b in zip(seq, seq[1:]))

    @staticmethod
    def _non_increasing(seq, slack: float = 1e-12) -> bool:
        return all(b <= a + slack for a, b in zip(seq, seq[1:]))

    @property
    def passed(self) -> bool:
        return (self._decreasing(self.err_u) and self._decreasing(self.err_z)
                and self._non_increasing(self.gap_d) and self._non_increasing(self.gap_e))

    def summary(self) -> dict:
        return {"epsilons": list(map(float, self.epsilons)), "err_u": list(map(float, self.err_u)),
                "err_z": list(map(float, self.err_z)), "err_diss": list(map(float, self.err_diss)),
                "err_energy": list(map(float, self.err_energy)), "gap_d": list(map(float, self.gap_d)),
                "gap_e": list(map(float, self.gap_e)), "passed": bool(self.passed)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "err_u", "err_z", "err_diss", "err_energy", "gap_d", "gap_e"])
            for row in zip(self.epsilons, self.err_u, self.err_z, self.err_diss, self.err_energy,
                           self.gap_d, self.gap_e):
                w.writerow([repr(float(v)) for v in row])


def perturbation_displacement(mesh: Mesh, amplitude: float = 0.05):
    """Smooth perturbation vanishing on the clamped face, as a callable of positions."""
    lx = mesh.lengths[0]

    def fun(p):
        p = np.asarray(p, dtype=float)
        s = p[..., 0] / lx
        return amplitude * np.stack([s * np.sin(math.pi * p[..., 1]), s * np.cos(math.pi * p[..., 2]),
                                     s * s * p[..., 1]], axis=-1)
    return fun


def perturbation_plastic(mesh: Mesh, amplitude: float = 0.02) -> np.ndarray:
    """Smooth deviatoric perturbation sampled at element centres."""
    c = mesh.centers
    return amplitude * np.stack([np.ones(len(c)), c[:, 0], c[:, 1] - c[:, 2], c[:, 0] * c[:, 1],
                                 -np.ones(len(c))], axis=1)


def recovery_gaps(mesh: Mesh, m: mat.MaterialModel, load: LoadSpec, t: float, eps: float,
                  u_eps, z_eps, u_lim, z_lim, lm: LinearModel, mu: float,
                  flow_cfg: FlowConfig | None = None) -> tuple[float, float]:
    """Mutual recovery sequence gaps ``(|D part|, |E part|)`` at one eps.

    ``u_hat = u_eps + u~ o (id + eps u_eps)`` and
    ``z_hat = log Pi(exp(2 eps (z_eps + z~))) / (2 eps)``.
    """
    flow_cfg = flow_cfg or FlowConfig(m.plastic.r_k or 3.0)
    pert_u = perturbation_displacement(mesh)
    pert_z = perturbation_plastic(mesh)
    u_hat = u_eps + pert_u(mesh.nodes + eps * u_eps)
    u_hat[mesh.dirichlet] = 0.0
    z_hat = np.array([t3.log_dev(project(t3.exp_dev(2.0 * eps * (ze + pz)), flow_cfg)) / (2.0 * eps)
                      for ze, pz in zip(z_eps, pert_z)])
    gm = GridModel(mesh, m, load, Scaling.epsilon(eps))
    lg = LinearGrid(mesh, lm, mu, load)
    d_eps = gm.dissipation(z_eps, z_hat)
    d_lim = lg.dissipation(z_lim, z_lim + pert_z)
    e_eps = gm.energy(u_hat, z_hat, t) - gm.energy(u_eps, z_eps, t)
    u_lim_hat = u_lim + pert_u(mesh.nodes)
    u_lim_hat[mesh.dirichlet] = 0.0
    e_lim = lg.energy(u_lim_hat, z_lim + pert_z, t) - lg.energy(u_lim, z_lim, t)
    return abs(d_eps - d_lim), abs(e_eps - e_lim)


def quasistatic_epsilon_sweep(mesh: Mesh, m: mat.MaterialModel, load: LoadSpec, epsilons, n_steps: int,
                              cfg: SolverConfig = SolverConfig(), rho: float | None = None,
                              dissipation_scale: float = 1.0, threads: int = 1) -> GridConvergenceReport:
    """Compare eps-problems (loads given in rescaled form) with the limit model.

    ``threads > 1`` solves the eps legs concurrently; results do not depend
    on it.
    """
    lm = LinearModel.from_material(m, rho)
    lin = linearized_quasistatic_solve(mesh, lm, m.mu, load, n_steps)

    def leg(eps):
        tr = quasistatic_solve(mesh, m, load, n_steps, cfg=cfg, scaling=Scaling.epsilon(eps),
                               dissipation_scale=dissipation_scale)
        gd, ge = recovery_gaps(mesh, m, load, load.horizon, eps, tr.disp[-1], tr.plastic[-1],
                               lin.disp[-1], lin.plastic[-1], lm, m.mu)
        return (max(mesh.l2_norm(tr.disp[i] - lin.disp[i]) for i in range(n_steps + 1)),
                max(mesh.element_l2(tr.plastic[i] - lin.plastic[i]) for i in range(n_steps + 1)),
                abs(tr.dissipation - lin.dissipation),
                float(np.max(np.abs(tr.energy - lin.energy))), gd, ge)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(leg, epsilons))
    else:
        rows = [leg(eps) for eps in epsilons]
    cols = [list(c) for c in zip(*rows)]
    return GridConvergenceReport(list(epsilons), *cols)


# ------------------------------------------------------------ diagnostics

def coercivity_family(mesh: Mesh, m: mat.MaterialModel, scales) -> tuple[np.ndarray, np.ndarray]:
    """``(||y||_L2, E)`` along the stretch family ``u = s (x, 0, 0)`` with Cp = I."""
    gm = GridModel(mesh, m, LoadSpec())
    x = np.zeros((mesh.n_elements, 5))
    norms, energies = [], []
    for s in scales:
        u = np.zeros((mesh.n_nodes, 3))
        u[:, 0] = s * mesh.nodes[:, 0]
        norms.append(mesh.l2_norm(mesh.nodes + u))
        energies.append(gm.energy(u, x, 0.0))
    return np.array(norms), np.array(energies)


def _analytic_deformation(p):
    p = np.asarray(p, dtype=float)
    return p + 0.1 * np.stack([p[..., 0] * np.sin(math.pi * p[..., 1]), p[..., 0] ** 2,
                               np.sin(p[..., 2] + p[..., 0])], axis=-1)


def _analytic_gradient(p, h: float = 1e-6):
    cols = []
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        cols.append((_analytic_deformation(p + e) - _analytic_deformation(p - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def _analytic_plastic(p):
    p = np.asarray(p, dtype=float)
    return t3.exp_dev(0.3 * np.array([p[0], p[1] - p[2], p[0] * p[1], 0.0, p[2]]))


def _minors(f, cp):
    root = t3.sqrt_spd(cp)
    return np.concatenate([(f @ t3.cofactor(root).T).ravel(), (t3.cofactor(f) @ root.T).ravel(), [t3.det(f)]])


def minors_errors(levels=(2, 4, 8)) -> list[float]:
    """Volume-weighted error of element-averaged minors under refinement.

    Discrete fields: nodal interpolant of an analytic deformation and the
    analytic plastic state sampled at element centres.  Reference: element
    averages of the analytic minors by 3-point Gauss quadrature.
    """
    x3, w3 = np.polynomial.legendre.leggauss(3)
    out = []
    for n in levels:
        mesh = Mesh(n, n, n)
        y = _analytic_deformation(mesh.nodes)
        grads = mesh.displacement_gradients(y)  # grad y directly
        err = 0.0
        for e in range(mesh.n_elements):
            cp_e = _analytic_plastic(mesh.centers[e])
            disc = sum(w * _minors(grads[e, g], cp_e) for g, w in enumerate(mesh.weights)) / mesh.volume
            lo = mesh.nodes[mesh.conn[e, 0]]
            ref = np.zeros_like(disc)
            for a, wa in zip(x3, w3):
                for b, wb in zip(x3, w3):
                    for c, wc in zip(x3, w3):
                        p = lo + 0.5 * mesh.h * (np.array([a, b, c]) + 1.0)
                        ref += wa * wb * wc / 8.0 * _minors(_analytic_gradient(p), _analytic_plastic(p))
            err += mesh.volume * float(np.linalg.norm(disc - ref))
        out.append(err)
    return out


def uniform_field_gradient_force(mesh: Mesh, z) -> float:
    """Size of the discrete Laplacian term ``4 mu sum k (z_e - z_n)`` per unit mu."""
    z = np.asarray(z, dtype=float)
    worst = 0.0
    for e in range(mesh.n_elements):
        acc = np.zeros(5)
        for nb, kf in mesh.neighbors[e]:
            acc += 4.0 * kf * (z[e] - z[nb])
        worst = max(worst, float(np.linalg.norm(acc)))
    return worst

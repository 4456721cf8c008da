"""Small-strain limit experiments at a material point.

Rescaled variables ``e = (C - I)/(2 eps)`` and ``z = log Cp / (2 eps)`` turn
the finite-strain energy into ``W_eps(e, z) = W(C, Cp) / eps^2`` and the
dissipation into ``D_eps = D / (2 eps)``.  The eps-problems are solved
directly in ``z`` and compared with the return-map trajectory of the limit
model.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import material as mat
from . import tensor3 as t3
from .dissipation import DissipationSpec
from .errors import NonSpdError
from .linearized import LinearModel, solve_linearized
from .point_solver import (DEFAULT_DIRECTION, PointEnergy, StepOptions, Trajectory,
                           _solve_generic)

DEFAULT_EPSILONS = (1e-1, 3e-2, 1e-2, 3e-3)


# ---------------------------------------------------------------- rescaling

def rescale(e, z, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """``(C, Cp) = (I + 2 eps e, exp(2 eps z))``.

    Raises
    ------
    NonSpdError
        If ``I + 2 eps e`` is not positive definite.
    ValueError
        If ``eps <= 0``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    c = t3.IDENTITY + 2.0 * eps * t3.sym(e)
    if not t3.is_spd(c):
        raise NonSpdError("I + 2 eps e is not positive definite")
    return c, t3.exp_dev(2.0 * eps * np.asarray(z, dtype=float))


def unrescale(c, cp, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of ``rescale``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return (t3.sym(c) - t3.IDENTITY) / (2.0 * eps), t3.log_dev(cp) / (2.0 * eps)


def rescaled_energy(e, z, eps: float, m: mat.MaterialModel) -> float:
    """``W(I + 2 eps e, exp(2 eps z)) / eps^2``."""
    c, cp = rescale(e, z, eps)
    return mat.total_density(c, cp, m) / (eps * eps)


def rescaled_point_energy(e, eps: float, m: mat.MaterialModel) -> PointEnergy:
    """``z -> W_eps(e, z)`` with analytic gradient."""
    return PointEnergy(t3.IDENTITY + 2.0 * eps * t3.sym(e), m, inn=2.0 * eps, out=1.0 / (eps * eps))


def density_check(a, eps_list, m: mat.MaterialModel, b=None) -> list[float]:
    """``|W_e(I + eps A_eps)/eps^2 - 1/2 |A|^2_C|`` with ``A_eps = A + eps B``.

    ``A`` and ``B`` are 3x3 displacement gradients; the limit uses the
    symmetric part of ``A`` only.
    """
    a = np.asarray(a, dtype=float)
    b = np.zeros((3, 3)) if b is None else np.asarray(b, dtype=float)
    lm = LinearModel.from_material(m)
    target = 0.5 * t3.quad4(lm.elastic, a)
    return [abs(mat.elastic_energy_F(t3.IDENTITY + eps * (a + eps * b), m.elastic) / eps ** 2 - target)
            for eps in eps_list]


# ------------------------------------------------------------------- sweeps

@dataclass
class StrainProgram:
    """``t -> e(t)`` on [0, horizon] with derivative and kinks."""

    horizon: float
    e: object
    e_dot: object
    breakpoints: tuple = ()

    @classmethod
    def proportional(cls, direction=DEFAULT_DIRECTION, horizon: float = 0.1,
                     times=None, values=None) -> "StrainProgram":
        """``e(t) = beta(t) E0`` with ``E0`` scaled to ``|dev E0| = 1``."""
        e0 = t3.sym(direction)
        e0 = e0 / t3.norm(t3.dev(e0))
        bt = np.array([0.0, horizon]) if times is None else np.asarray(times, dtype=float)
        bv = bt.copy() if values is None else np.asarray(values, dtype=float)

        def beta_dot(t):
            k = int(np.clip(np.searchsorted(bt, t, side="right") - 1, 0, len(bt) - 2))
            return (bv[k + 1] - bv[k]) / (bt[k + 1] - bt[k])

        return cls(horizon, lambda t: float(np.interp(t, bt, bv)) * e0,
                   lambda t: beta_dot(t) * e0, tuple(bt[1:-1]))


@dataclass
class SweepConfig:
    """Settings of an eps-sweep.

    ``thresholds`` maps ``"z"`` to the allowed final sup-error relative to
    ``max|z|``.  ``dissipation_scale`` multiplies the finite-strain
    dissipation only (negative controls).
    """

    material: mat.MaterialModel = field(default_factory=mat.MaterialModel)
    epsilons: tuple = DEFAULT_EPSILONS
    program: StrainProgram = field(default_factory=StrainProgram.proportional)
    steps: int = 64
    rho: float | None = None
    z0: np.ndarray = field(default_factory=lambda: np.zeros(5))
    thresholds: dict = field(default_factory=lambda: {"z": 0.05})
    dissipation_scale: float = 1.0
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        eps = list(self.epsilons)
        if not eps or any(not x > 0 for x in eps):
            raise ValueError("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps values must be strictly decreasing")
        if self.steps < 16:
            raise ValueError("sweeps need at least 16 steps")


@dataclass
class ConvergenceReport:
    """Error sequences of an eps-sweep against the limit trajectory."""

    epsilons: list
    err_z: list
    err_diss: list
    err_energy: list
    z_max: float
    z_threshold: float
    extra: dict = field(default_factory=dict)

    @staticmethod
    def _decreasing(seq) -> bool:
        return all(b < a for a, b in zip(seq, seq[1:]))

    @property
    def decreasing(self) -> dict:
        return {"z": self._decreasing(self.err_z), "diss": self._decreasing(self.err_diss),
                "energy": self._decreasing(self.err_energy)}

    @property
    def final_ok(self) -> bool:
        return self.err_z[-1] <= self.z_threshold * self.z_max

    @property
    def passed(self) -> bool:
        return all(self.decreasing.values()) and self.final_ok

    def rates(self) -> list[float]:
        """Observed log-log slopes of the z-error between consecutive eps."""
        out = []
        for k in range(1, len(self.epsilons)):
            a, b = self.err_z[k - 1], self.err_z[k]
            if a > 0 and b > 0:
                out.append(math.log(a / b) / math.log(self.epsilons[k - 1] / self.epsilons[k]))
            else:
                out.append(float("nan"))
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "err_z", "err_diss", "err_energy"])
            for row in zip(self.epsilons, self.err_z, self.err_diss, self.err_energy):
                w.writerow([repr(float(v)) for v in row])

    def summary(self) -> dict:
        return {"epsilons": list(map(float, self.epsilons)), "err_z": list(map(float, self.err_z)),
                "err_diss": list(map(float, self.err_diss)),
                "err_energy": list(map(float, self.err_energy)),
                "z_max": float(self.z_max), "z_threshold": float(self.z_threshold),
                "decreasing": self.decreasing, "rates_z": self.rates(),
                "passed": bool(self.passed), **self.extra}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def solve_rescaled(cfg: SweepConfig, eps: float, seed: int | None = None) -> Trajectory:
    """Incremental minimization of ``W_eps + D_eps`` in z-coordinates."""
    m = cfg.material
    prog = cfg.program
    spec = DissipationSpec(m.r, scale=cfg.dissipation_scale)
    rho_z = spec.rho  # D_eps(z1, z2) = rho |z1 - z2| for the log bound

    def power(t0, t1, x):
        cp = t3.exp_dev(2.0 * eps * x)
        gx, gw = np.polynomial.legendre.leggauss(4)
        cuts = [t0] + [b for b in prog.breakpoints if t0 < b < t1] + [t1]
        acc = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            for xg, wg in zip(0.5 * (gx + 1.0), 0.5 * gw):
                t = a + (b - a) * xg
                c = t3.IDENTITY + 2.0 * eps * prog.e(t)
                acc += (b - a) * wg * t3.contract(mat.pk2_stress(c, cp, m), prog.e_dot(t)) / eps
        return acc

    return _solve_generic(
        cfg.steps, prog.horizon, lambda t: rescaled_point_energy(prog.e(t), eps, m),
        np.asarray(cfg.z0, dtype=float), rho_z, StepOptions(),
        0, 0, cfg.seed if seed is None else seed, power, inn=2.0 * eps)


def solve_limit(cfg: SweepConfig) -> Trajectory:
    lm = LinearModel.from_material(cfg.material, cfg.rho)
    prog = cfg.program
    return solve_linearized(prog.e, cfg.z0, cfg.steps, lm, prog.horizon, prog.e_dot, prog.breakpoints)


def compare(traj: Trajectory, limit: Trajectory) -> tuple[float, float, float]:
    """``(sup_t |z_eps - z|, |Diss_eps - Diss_0|, sup_t |E_eps - E_0|)``."""
    return (float(np.max(np.linalg.norm(traj.states - limit.states, axis=1))),
            abs(traj.dissipation - limit.dissipation),
            float(np.max(np.abs(traj.energy - limit.energy))))


def epsilon_sweep(cfg: SweepConfig) -> ConvergenceReport:
    """Run every eps-problem (concurrently if ``cfg.threads > 1``) and the limit."""
    limit = solve_limit(cfg)
    eps_list = list(cfg.epsilons)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            trajs = list(pool.map(lambda e: solve_rescaled(cfg, e), eps_list))
    else:
        trajs = [solve_rescaled(cfg, e) for e in eps_list]
    errs = [compare(tr, limit) for tr in trajs]
    z_max = float(np.max(np.linalg.norm(limit.states, axis=1)))
    return ConvergenceReport(eps_list, [e[0] for e in errs], [e[1] for e in errs],
                             [e[2] for e in errs], z_max, cfg.thresholds.get("z", 0.05),
                             {"diss_limit": limit.dissipation})


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CPFLOW_THREADS", "1")))
    except ValueError:
        return 1


# -------------------------------------------------------- recovery sequence

@dataclass
class RecoveryPoint:
    """Closure-inequality values along an eps list."""

    epsilons: list
    values: list      # E_eps(zh) - E_eps(z) + D_eps(z, zh)
    target: float     # E_0(zh) - E_0(z) + D_0(z, zh)

    @property
    def gaps(self) -> list[float]:
        return [abs(v - self.target) for v in self.values]

    def non_increasing(self, slack: float = 1e-12) -> bool:
        g = self.gaps
        return all(b <= a + slack for a, b in zip(g, g[1:]))


def recovery_sequence_point(z, z_hat, e, eps_list, m: mat.MaterialModel,
                            rho: float | None = None) -> RecoveryPoint:
    """Constant mutual recovery sequence ``z_hat`` tested against ``z``."""
    z = np.asarray(z, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    lm = LinearModel.from_material(m, rho)
    spec = DissipationSpec(m.r)
    vals = []
    for eps in eps_list:
        fun = rescaled_point_energy(e, eps, m)
        vals.append(fun.value(z_hat) - fun.value(z) + spec.rho * float(np.linalg.norm(z_hat - z)))
    target = lm.energy(e, z_hat) - lm.energy(e, z) + lm.rho * float(np.linalg.norm(z_hat - z))
    return RecoveryPoint(list(eps_list), vals, target)


def uniform_energy_gap(eps: float, m: mat.MaterialModel, grid: int = 3, radius: float = 0.5) -> float:
    """Max of ``|W_eps - W_0|`` over a fixed grid of (e, z) pairs."""
    lm = LinearModel.from_material(m)
    vals = np.linspace(-radius, radius, grid)
    worst = 0.0
    for a in vals:
        for b in vals:
            e = np.diag([a, b, -0.5 * a]) + 0.5 * b * (np.eye(3, k=1) + np.eye(3, k=-1))
            for c in vals:
                z = np.array([c, 0.5 * a, b, 0.0, -c])
                worst = max(worst, abs(rescaled_energy(e, z, eps, m) - lm.energy(e, z)))
    return worst

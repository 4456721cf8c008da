"""Small-strain limit model with linear kinematic hardening.

Stored energy ``W0(e, z) = 1/2 |e - z|^2_C + 1/2 |z|^2_H`` and dissipation
``rho |z1 - z2|``.  Strains ``e`` are symmetric 3x3 tensors, plastic strains
``z`` are deviatoric 5-vectors (orthonormal basis of ``tensor3``).  Each time
step is a strictly convex problem in 5 unknowns solved exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import material as mat
from . import tensor3 as t3
from .point_solver import Trajectory

# columns are the Mandel images of the deviatoric basis tensors
DEV_TO_MANDEL = np.stack([t3.to_mandel(b) for b in t3.DEV_BASIS], axis=1)
MANDEL_ONE = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
DEV_PROJECTOR = np.eye(6) - np.outer(MANDEL_ONE, MANDEL_ONE) / 3.0


def hardening_tensor(h: float) -> np.ndarray:
    """``2h`` times the deviatoric projector, Mandel form."""
    return 2.0 * h * DEV_PROJECTOR


@dataclass(frozen=True)
class LinearModel:
    """Elastic tensor, hardening tensor and yield radius of the limit model.

    ``iso`` holds ``(shear modulus, hardening modulus)`` when the tensors are
    ``2 mu I + lam 1(x)1`` and ``2 h P_dev``; the radial return is then used.
    """

    elastic: np.ndarray
    hardening: np.ndarray
    rho: float
    iso: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("linearized yield radius must be positive")
        for name, t in (("elastic", self.elastic), ("hardening", self.hardening)):
            if np.asarray(t).shape != (6, 6):
                raise ValueError(f"{name} tensor must be 6x6 (Mandel)")
        if np.linalg.eigvalsh(self.reduced)[0] <= 0:
            raise ValueError("C + H is not positive definite on deviators")

    @classmethod
    def isotropic(cls, mu: float, lam: float, h: float, rho: float) -> "LinearModel":
        return cls(mat.isotropic_elasticity(mu, lam), hardening_tensor(h), rho, (mu, h))

    @classmethod
    def from_material(cls, m: mat.MaterialModel, rho: float | None = None) -> "LinearModel":
        """Limit model of a finite-strain material.

        Neo-Hookean gives ``mu = a``, ``lam = b`` exactly; other families use
        the finite-difference Hessians of ``linearization_tensors``.
        ``rho`` defaults to ``r/2``.
        """
        rho = 0.5 * m.r if rho is None else rho
        if m.elastic.family == "neo-hookean":
            return cls.isotropic(m.elastic.a, m.elastic.b, m.plastic.h, rho)
        c66, h66 = mat.linearization_tensors(m)
        return cls(c66, h66, rho)

    @property
    def reduced(self) -> np.ndarray:
        """``B^T (C + H) B`` on deviatoric coordinates."""
        return DEV_TO_MANDEL.T @ (self.elastic + self.hardening) @ DEV_TO_MANDEL

    def force(self, e) -> np.ndarray:
        """``B^T C e``: deviatoric part of the elastic stress at z = 0."""
        return DEV_TO_MANDEL.T @ (self.elastic @ t3.to_mandel(e))

    def energy(self, e, z) -> float:
        em = t3.to_mandel(e)
        zm = DEV_TO_MANDEL @ np.asarray(z, dtype=float)
        d = em - zm
        return 0.5 * float(d @ self.elastic @ d) + 0.5 * float(zm @ self.hardening @ zm)

    def driving(self, e, z) -> np.ndarray:
        """``xi = B^T (C(e - z) - H z)``, minus the smooth gradient in z."""
        return self.force(e) - self.reduced @ np.asarray(z, dtype=float)

    def power(self, e, z, e_dot) -> float:
        """Partial time derivative ``C(e - z) : de/dt``."""
        d = t3.to_mandel(e) - DEV_TO_MANDEL @ np.asarray(z, dtype=float)
        return float(t3.to_mandel(e_dot) @ self.elastic @ d)


# ---------------------------------------------------------------- one step

def prox_step(q, p, z_prev, rho: float):
    """Exact minimizer of ``1/2 z.Qz - p.z + rho|z - z_prev|`` for SPD Q.

    Outside the stick case the stationarity condition
    ``(Q + rho/s) d = -g0`` with ``s = |d|`` reduces to the scalar equation
    ``sum_i c_i^2 t^2 / (lam_i + t)^2 = rho^2`` in ``t = rho/s``, monotone in t
    and solved by safeguarded Newton.
    """
    z_prev = np.asarray(z_prev, dtype=float)
    g0 = q @ z_prev - p
    gnorm = float(np.linalg.norm(g0))
    if gnorm <= rho:
        return z_prev.copy()
    lam, vec = np.linalg.eigh(q)
    c = vec.T @ g0
    lo, hi = 0.0, None
    # psi(t) > 0 at t = rho * (lam_max + t) / |g0| bound; bracket by doubling
    t = rho * max(lam[-1], 1e-300) / max(gnorm - rho, 1e-300)
    while _psi(t, lam, c, rho) < 0:
        lo = t
        t *= 2.0
    hi = t
    t = 0.5 * (lo + hi)
    for _ in range(200):
        val = _psi(t, lam, c, rho)
        if val > 0:
            hi = t
        else:
            lo = t
        der = float(np.sum(2.0 * c * c * t * lam / (lam + t) ** 3))
        tn = t - val / der if der > 0 else 0.5 * (lo + hi)
        if not lo < tn < hi:
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= 1e-16 * t or hi - lo <= 1e-16 * hi:
            t = tn
            break
        t = tn
    d = -vec @ (c / (lam + t))
    return z_prev + d


def _psi(t, lam, c, rho):
    return float(np.sum((c * t / (lam + t)) ** 2)) - rho * rho


def return_map(z_prev, e_now, lm: LinearModel, generic: bool = False) -> np.ndarray:
    """Incremental minimizer of ``W0(e_now, .) + rho|. - z_prev|``.

    Radial return for isotropic models (trial force
    ``2mu dev e - (2mu + 2h) z_prev``), exact secular solve otherwise or when
    ``generic`` is set.
    """
    z_prev = np.asarray(z_prev, dtype=float)
    if lm.iso is not None and not generic:
        mu, h = lm.iso
        trial = 2.0 * mu * t3.mat_to_dev(e_now) - (2.0 * mu + 2.0 * h) * z_prev
        tn = float(np.linalg.norm(trial))
        if tn <= lm.rho:
            return z_prev.copy()
        return z_prev + ((tn - lm.rho) / (2.0 * mu + 2.0 * h)) * trial / tn
    return prox_step(lm.reduced, lm.force(e_now), z_prev, lm.rho)


def subgradient_residual(z, z_prev, e_now, lm: LinearModel, stick_tol: float = 0.0) -> float:
    """Distance of ``xi = B^T(C(e - z) - Hz)`` from ``rho d|. - z_prev|(z)``."""
    xi = lm.driving(e_now, z)
    d = np.asarray(z, dtype=float) - np.asarray(z_prev, dtype=float)
    dn = float(np.linalg.norm(d))
    if dn <= stick_tol:
        return max(float(np.linalg.norm(xi)) - lm.rho, 0.0)
    return float(np.linalg.norm(xi - lm.rho * d / dn))


def brute_force_step(z_prev, e_now, lm: LinearModel, rng: np.random.Generator,
                     starts: int = 64, iterations: int = 5000) -> np.ndarray:
    """Independent minimizer: random multistart plus proximal gradient.

    The smooth part is handled by explicit gradient steps and the kink by
    block soft-thresholding around ``z_prev``; no secular equation or radial
    return is involved.
    """
    z_prev = np.asarray(z_prev, dtype=float)
    q = lm.reduced
    p = lm.force(e_now)
    step = 1.0 / float(np.linalg.eigvalsh(q)[-1])

    def obj(z):
        return 0.5 * float(z @ q @ z) - float(p @ z) + lm.rho * float(np.linalg.norm(z - z_prev))

    scale = max(1.0, float(np.linalg.norm(np.linalg.solve(q, p))), float(np.linalg.norm(z_prev)))
    cands = [z_prev.copy(), np.linalg.solve(q, p)]
    cands += [z_prev + scale * rng.uniform(-1.0, 1.0, 5) for _ in range(starts)]
    z = min(cands, key=obj)
    for _ in range(iterations):
        y = z - step * (q @ z - p)
        d = y - z_prev
        dn = float(np.linalg.norm(d))
        shrink = max(0.0, 1.0 - step * lm.rho / dn) if dn > 0 else 0.0
        zn = z_prev + shrink * d
        if float(np.linalg.norm(zn - z)) <= 1e-16 * (1.0 + float(np.linalg.norm(z))):
            z = zn
            break
        z = zn
    return z


# -------------------------------------------------------------- trajectory

def solve_linearized(e_path, z0, n_steps: int, lm: LinearModel, horizon: float = 1.0,
                     e_dot=None, breakpoints=()) -> Trajectory:
    """Return-map trajectory on a uniform partition of [0, horizon].

    Parameters
    ----------
    e_path : callable
        ``t -> e(t)`` (symmetric 3x3).
    e_dot : callable, optional
        Its derivative; a central difference is used when omitted.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    if e_dot is None:
        def e_dot(t, _h=1e-6 * horizon):
            return (np.asarray(e_path(t + _h)) - np.asarray(e_path(t - _h))) / (2 * _h)
    times = np.linspace(0.0, horizon, n_steps + 1)
    z = np.asarray(z0, dtype=float).copy()
    states = np.empty((n_steps + 1, 5))
    energy = np.empty(n_steps + 1)
    energy_prev = np.empty(n_steps + 1)
    diss = np.zeros(n_steps + 1)
    pw = np.zeros(n_steps + 1)
    states[0] = z
    energy[0] = energy_prev[0] = lm.energy(e_path(0.0), z)
    gx, gw = np.polynomial.legendre.leggauss(4)
    gx, gw = 0.5 * (gx + 1.0), 0.5 * gw
    for i in range(1, n_steps + 1):
        t0, t1 = times[i - 1], times[i]
        e_now = e_path(t1)
        cuts = [t0] + [b for b in breakpoints if t0 < b < t1] + [t1]
        acc = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            for x, w in zip(gx, gw):
                t = a + (b - a) * x
                acc += (b - a) * w * lm.power(e_path(t), z, e_dot(t))
        pw[i] = pw[i - 1] + acc
        z_new = return_map(z, e_now, lm)
        energy_prev[i] = lm.energy(e_now, z)
        energy[i] = lm.energy(e_now, z_new)
        diss[i] = lm.rho * float(np.linalg.norm(z_new - z))
        states[i] = z = z_new
    return Trajectory(times, states, energy, energy_prev, diss, pw,
                      np.full(n_steps + 1, np.nan), state_scale=0.0, kind="linear")


def proportional_solution(t, rho: float, mu: float, h: float, direction) -> np.ndarray:
    """Closed-form sweeping-process solution for ``e(t) = t E0``, isotropic model.

    ``z = 0`` until ``t* = rho/(2 mu |dev E0|)``, then grows with slope
    ``2mu/(2mu + 2h)`` along ``dev E0 / |dev E0|``.
    """
    n = t3.mat_to_dev(direction)
    nn = float(np.linalg.norm(n))
    size = max(2.0 * mu * nn * t - rho, 0.0) / (2.0 * mu + 2.0 * h)
    return size * n / nn

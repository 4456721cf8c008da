"""Retraction of unit-determinant SPD tensors onto the ball |C| <= r_K.

The map follows the matrix flow

    dC/dt = -(C - 3 |C^-1|^-2 C^-1),

which keeps symmetry and ``det C`` fixed, has ``I`` as its only
equilibrium, and strictly decreases ``|C|`` outside the ball of radius
``sqrt 3``.  ``project`` stops the flow at the first time the norm reaches
``r_K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor3 as t3
from ._backend import kernels
from .errors import IntegrationFailure, MaxTimeExceeded


@dataclass(frozen=True)
class FlowConfig:
    """Radius of the target ball and integrator settings.

    Parameters
    ----------
    r_k : float
        Ball radius; must be positive with ``r_k^2 > 3``.
    h0 : float
        Fixed RK4 step.
    tol : float
        Bisection tolerance on the hitting time.
    t_max : float
        Give up after this much flow time.
    """

    r_k: float = 3.0
    h0: float = 1e-2
    tol: float = 1e-10
    t_max: float = 1e3

    def __post_init__(self):
        if not (self.r_k > 0 and self.r_k * self.r_k > 3.0):
            raise ValueError("ball radius must be positive with r_k^2 > 3")
        if not (self.h0 > 0 and self.tol > 0 and self.t_max > 0):
            raise ValueError("integrator settings must be positive")


def rhs(c) -> np.ndarray:
    """Right-hand side of the flow."""
    c = np.asarray(c, dtype=float)
    ci = t3.inverse(c)
    return -(c - 3.0 * ci / float(np.sum(ci * ci)))


def invariance_defect(c) -> float:
    """``|tr(C^-1 dC/dt)|``, zero for the exact vector field on symmetric C."""
    return abs(t3.trace(t3.inverse(c) @ rhs(c)))


def flow(c, t: float, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """Flow map at time ``t`` (RK4, determinant renormalized every step).

    Raises
    ------
    ValueError
        If ``t < 0``.
    IntegrationFailure
        If an intermediate state leaves the SPD cone.
    """
    if t < 0:
        raise ValueError("flow time must be non-negative")
    status, out = kernels.flow(np.ascontiguousarray(t3.sym(c)), float(t), cfg.h0)
    if status != kernels.STATUS_OK:
        raise IntegrationFailure("flow left the positive definite cone")
    return out


def project_with_time(c, cfg: FlowConfig = FlowConfig()) -> tuple[np.ndarray, float]:
    """``(Pi(C), t0(C))``; identity with time 0 inside the ball.

    Raises
    ------
    IntegrationFailure
        If an intermediate state leaves the SPD cone.
    MaxTimeExceeded
        If the norm has not reached ``r_k`` by ``cfg.t_max``.
    """
    status, out, t_hit = kernels.project(np.ascontiguousarray(t3.sym(c)), cfg.r_k, cfg.h0,
                                         cfg.tol, cfg.t_max)
    if status == kernels.STATUS_MAXTIME:
        raise MaxTimeExceeded(f"norm still above {cfg.r_k} at t = {t_hit:.3g}")
    if status != kernels.STATUS_OK:
        raise IntegrationFailure("flow left the positive definite cone")
    return out, t_hit


def project(c, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """Retraction ``Pi`` onto the ball of radius ``cfg.r_k``."""
    return project_with_time(c, cfg)[0]


def norm_history(c, times, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """``|Phi_t(C)|`` at increasing ``times`` (integrated incrementally)."""
    out = np.empty(len(times))
    cur = np.asarray(c, dtype=float)
    last = 0.0
    for k, t in enumerate(times):
        cur = flow(cur, t - last, cfg)
        last = t
        out[k] = t3.norm(cur)
    return out


def approach_defects(c, target, t_end: float, samples: int = 50,
                     cfg: FlowConfig = FlowConfig()) -> list[float]:
    """Finite-difference slopes of ``|Phi_t(C) - C0|`` while ``|Phi_t(C)| >= |C0|``.

    Positive entries would contradict monotone approach.
    """
    target = np.asarray(target, dtype=float)
    dt = cfg.h0
    cur = np.asarray(c, dtype=float)
    out = []
    tn = t3.norm(target)
    step = t_end / samples
    for _ in range(samples):
        if t3.norm(cur) < tn:
            break
        nxt = flow(cur, dt, cfg)
        out.append((t3.norm(nxt - target) - t3.norm(cur - target)) / dt)
        cur = flow(cur, step, cfg)
    return out


def contraction_ratio(c1, c2, cfg: FlowConfig = FlowConfig()) -> float:
    """``|Pi(C1) - Pi(C2)| - |C1 - C2|``; non-positive for a contraction."""
    return t3.norm(project(c1, cfg) - project(c2, cfg)) - t3.norm(np.asarray(c1) - np.asarray(c2))


def exterior_sample(rng: np.random.Generator, cfg: FlowConfig, max_log: float = 2.5) -> np.ndarray:
    """Random unit-determinant SPD tensor with norm above ``r_k``."""
    while True:
        c = t3.random_unit_det_spd(rng, max_log)
        if t3.norm(c) > cfg.r_k:
            return c


def log_norm(c) -> float:
    return float(math.sqrt(np.sum(t3.log_dev(c) ** 2)))

"""Dissipation potentials and the dissipation distance between plastic states.

The canonical distance is the log bound

    Dbar(C1, C2) = (r/2) |log C1 - log C2|,

a metric on SL+sym.  ``path_oracle`` computes the travel cost of an
optimized log-piecewise-linear path, for probing how tight that bound is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor3 as t3
from ._backend import kernels

TRACE_TOL = 1e-9
GAUSS_POINTS = 16


@dataclass(frozen=True)
class DissipationSpec:
    """Dissipation distance settings.

    Parameters
    ----------
    r : float
        Yield radius.
    mode : {"log-bound", "path-oracle"}
        Which distance ``distance`` returns.
    knots, iterations : int
        Path-oracle resolution and coordinate-descent sweep budget.
    scale : float
        Multiplier on the log bound.  Always 1 for physical runs; other
        values exist only to build negative controls.
    """

    r: float
    mode: str = "log-bound"
    knots: int = 8
    iterations: int = 200
    scale: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("yield radius r must be positive")
        if self.mode not in ("log-bound", "path-oracle"):
            raise ValueError(f"unknown metric mode {self.mode!r}")
        if self.knots < 1:
            raise ValueError("path oracle needs at least one knot")

    @property
    def rho(self) -> float:
        """Radius of the log-coordinate kink, ``scale * r / 2``."""
        return 0.5 * self.scale * self.r


def r_tilde(a, r: float) -> float:
    """``(r/2)|A|`` for (numerically) traceless A, +inf otherwise."""
    a = np.asarray(a, dtype=float)
    if abs(float(np.trace(a))) > TRACE_TOL:
        return math.inf
    return 0.5 * r * t3.norm(a)


def r_hat(cp, cp_dot, r: float, form: str = "left") -> float:
    """Dissipation rate at the plastic state ``cp`` for the rate ``cp_dot``.

    ``form`` selects ``Cp^-1 dCp`` (left, the defining one), ``dCp Cp^-1``
    (right) or ``Cp^-1/2 dCp Cp^-1/2`` (symmetric).  The three coincide when
    ``cp`` and ``cp_dot`` commute.
    """
    cp_dot = np.asarray(cp_dot, dtype=float)
    if form == "left":
        a = t3.inverse(cp) @ cp_dot
    elif form == "right":
        a = cp_dot @ t3.inverse(cp)
    elif form == "symmetric":
        p_inv = t3.mat_fn(cp, "invsqrt")
        a = p_inv @ cp_dot @ p_inv
    else:
        raise ValueError(f"unknown form {form!r}")
    return r_tilde(a, r)


def log_bound(l1, l2, r: float) -> float:
    """Log bound from deviatoric log coordinates."""
    return 0.5 * r * float(np.linalg.norm(np.asarray(l1, dtype=float) - np.asarray(l2, dtype=float)))


def point_bound(c1, c2, r: float) -> float:
    """Upper bound ``2r(|C1| + |C2| + 6)`` valid for every pair."""
    return 2.0 * r * (t3.norm(c1) + t3.norm(c2) + 6.0)


def distance(c1, c2, spec: DissipationSpec) -> float:
    """Dissipation distance between two plastic states."""
    if spec.mode == "path-oracle":
        return path_oracle(c1, c2, spec.r, knots=spec.knots, iterations=spec.iterations)[0]
    return spec.scale * log_bound(t3.log_dev(c1), t3.log_dev(c2), spec.r)


def distance_rescaled(z1, z2, eps: float, spec: DissipationSpec) -> float:
    """``D(exp(2 eps z1), exp(2 eps z2)) / (2 eps)``; the limit value at eps = 0.

    ``z1``, ``z2`` are deviatoric 5-vectors.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return spec.scale * log_bound(z1, z2, spec.r)
    c1 = t3.exp_dev(2.0 * eps * np.asarray(z1, dtype=float))
    c2 = t3.exp_dev(2.0 * eps * np.asarray(z2, dtype=float))
    return distance(c1, c2, spec) / (2.0 * eps)


# --------------------------------------------------------------- path oracle

def _gauss_unit(n: int = GAUSS_POINTS) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return np.ascontiguousarray(0.5 * (x + 1.0)), np.ascontiguousarray(0.5 * w)


_GX, _GW = _gauss_unit()


def path_cost(nodes, r: float) -> float:
    """Travel cost of the path exp(L(t)), L piecewise linear through ``nodes``.

    ``nodes`` has shape (m, 5): start, interior knots, end.  Each segment is
    integrated with 16-point Gauss quadrature of ``(r/2)|Cp^-1 dCp/dt|``.
    """
    return kernels.path_cost(np.ascontiguousarray(nodes, dtype=float), float(r), _GX, _GW)


def path_oracle(c1, c2, r: float, knots: int = 8, iterations: int = 200,
                min_step: float = 1e-10) -> tuple[float, np.ndarray]:
    """Minimize ``path_cost`` over the interior knots by coordinate descent.

    Starts from the log-linear path (so its cost is the starting value) and
    halves the step whenever a full sweep brings no improvement.

    Returns
    -------
    cost : float
        Best path cost found.
    nodes : ndarray, shape (knots + 2, 5)
        The corresponding path nodes.
    """
    l1 = t3.log_dev(c1)
    l2 = t3.log_dev(c2)
    s = np.linspace(0.0, 1.0, knots + 2)[:, None]
    nodes = (1.0 - s) * l1 + s * l2
    best = path_cost(nodes, r)
    step = 0.5 * max(float(np.linalg.norm(l2 - l1)), 1e-3) / (knots + 1)
    for _ in range(iterations):
        improved = False
        for k in range(1, knots + 1):
            for j in range(5):
                for sign in (1.0, -1.0):
                    trial = nodes.copy()
                    trial[k, j] += sign * step
                    cost = path_cost(trial, r)
                    if cost < best:
                        nodes, best, improved = trial, cost, True
                        break
        if not improved:
            step *= 0.5
            if step < min_step:
                break
    return best, nodes

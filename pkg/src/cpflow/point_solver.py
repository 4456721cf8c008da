"""Incremental energetic solver at a single material point.

Each time step minimizes

    f(L) = W(C(t_i), exp L) + rho |L - L_prev|,   rho = r/2,

over deviatoric L = log Cp (5 unknowns), which keeps Cp symmetric with unit
determinant by construction.  ``f`` is smooth except for the cone-shaped
kink at ``L_prev``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import material as mat
from . import tensor3 as t3
from ._backend import kernels
from .dissipation import DissipationSpec
from .errors import NonFiniteEnergyError, NonSpdError

POWER_GAUSS = 4


# ------------------------------------------------------------------- loading

class LoadProgram:
    """Prescribed history t -> C(t) on [0, horizon] with its time derivative."""

    def __init__(self, horizon: float, c_fun, c_dot_fun, breakpoints=()):
        if not horizon > 0:
            raise ValueError("horizon must be positive")
        self.horizon = float(horizon)
        self._c = c_fun
        self._c_dot = c_dot_fun
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints if 0 < b < horizon))

    def c(self, t: float) -> np.ndarray:
        return self._c(t)

    def c_dot(self, t: float) -> np.ndarray:
        return self._c_dot(t)

    @classmethod
    def proportional(cls, direction, horizon: float, beta_times=None, beta_values=None,
                     scale: float = 1.0) -> "LoadProgram":
        """``C(t) = I + 2 scale beta(t) E0`` with beta piecewise linear.

        Without knots, ``beta(t) = t``.
        """
        e0 = t3.sym(direction)
        if beta_times is None:
            bt = np.array([0.0, horizon])
            bv = np.array([0.0, horizon])
        else:
            bt = np.asarray(beta_times, dtype=float)
            bv = np.asarray(beta_values, dtype=float)

        def beta(t):
            return float(np.interp(t, bt, bv))

        def beta_dot(t):
            k = int(np.clip(np.searchsorted(bt, t, side="right") - 1, 0, len(bt) - 2))
            return float((bv[k + 1] - bv[k]) / (bt[k + 1] - bt[k]))

        return cls(
            horizon,
            lambda t: t3.IDENTITY + 2.0 * scale * beta(t) * e0,
            lambda t: 2.0 * scale * beta_dot(t) * e0,
            breakpoints=bt[1:-1],
        )

    @classmethod
    def from_samples(cls, times, cs) -> "LoadProgram":
        """Cubic-spline interpolation of sampled tensors C(t_k)."""
        times = np.asarray(times, dtype=float)
        spline = CubicSpline(times, t3.to_mandel(np.asarray(cs, dtype=float)), axis=0)
        deriv = spline.derivative()
        return cls(times[-1] - times[0],
                   lambda t: t3.from_mandel(spline(t)),
                   lambda t: t3.from_mandel(deriv(t)))

    @classmethod
    def constant(cls, c, horizon: float = 1.0) -> "LoadProgram":
        c = t3.sym(c)
        return cls(horizon, lambda t: c.copy(), lambda t: np.zeros((3, 3)))


DEFAULT_DIRECTION = (0.8 * np.diag([1.0, -1.0, 0.0]) / math.sqrt(2.0)
                     + 0.6 * (np.outer([1, 0, 0], [0, 1, 0]) + np.outer([0, 1, 0], [1, 0, 0])) / math.sqrt(2.0)
                     + 0.05 * np.eye(3))


def default_plastic_program(m: mat.MaterialModel | None = None, horizon: float = 0.2) -> LoadProgram:
    """Monotone proportional stretching that yields at mid-horizon.

    ``C(t) = I + 2 s t E0`` with ``|dev E0| = 1``; the rate ``s`` is chosen so
    that the neo-Hookean yield condition ``2 a s t |dev E0| = r`` is met at
    ``t = horizon / 2``.
    """
    m = m or mat.MaterialModel()
    s = m.r / (m.elastic.a * horizon)
    return LoadProgram.proportional(DEFAULT_DIRECTION, horizon, scale=s)


# ------------------------------------------------------------ point energies

class PointEnergy:
    """Smooth part ``x -> out * W(C, exp(inn * L(x)))`` at fixed C.

    ``inn`` and ``out`` implement the small-strain rescaling (``inn = 2 eps``,
    ``out = 1/eps^2``); both are 1 for the physical problem.
    """

    def __init__(self, c, m: mat.MaterialModel, inn: float = 1.0, out: float = 1.0):
        self.c = np.ascontiguousarray(t3.sym(c))
        self.m = m
        self.inn = float(inn)
        self.out = float(out)
        self._r_k = m.plastic.r_k or 0.0

    def value_grad(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        if self.m.closed_form:
            el = self.m.elastic
            val, grad = kernels.point_value_grad(self.inn * x, self.c, el.a, el.b, self.m.plastic.h, self._r_k)
            return self.out * val, (self.out * self.inn) * grad
        val = self._generic(x)
        grad = np.empty(5)
        h = 1e-6
        for k in range(5):
            e = np.zeros(5)
            e[k] = h
            grad[k] = (self._generic(x + e) - self._generic(x - e)) / (2 * h)
        return val, grad

    def value(self, x) -> float:
        if self.m.closed_form:
            return self.value_grad(x)[0]
        return self._generic(np.asarray(x, dtype=float))

    def _generic(self, x) -> float:
        try:
            return self.out * mat.total_density(self.c, t3.exp_dev(self.inn * x), self.m)
        except NonSpdError:
            return math.inf


def fd_hessian(fun, x, grad=None, step: float = 1e-5) -> np.ndarray:
    """Symmetric central-difference Hessian from an analytic gradient."""
    n = len(x)
    hess = np.empty((n, n))
    h = step * max(1.0, float(np.linalg.norm(x)))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        hess[:, k] = (fun.value_grad(x + e)[1] - fun.value_grad(x - e)[1]) / (2 * h)
    return 0.5 * (hess + hess.T)


# ---------------------------------------------------------------- minimizer

@dataclass(frozen=True)
class StepOptions:
    """Minimizer settings for one incremental step."""

    n_random: int = 8
    pattern_evals: int = 60
    newton_iters: int = 60
    grad_tol: float = 1e-12
    seed: int = 0


@dataclass
class StepInfo:
    value: float
    value_prev: float
    stick: bool
    newton_converged: bool
    source: str
    evaluations: int = 0


def _kink_start(g0, h0, rho):
    """First guess for the kink Newton: a scalar step along ``-g0``."""
    gnorm = float(np.linalg.norm(g0))
    n = g0 / gnorm
    kappa = float(n @ h0 @ n)
    if not kappa > 0:
        kappa = max(float(np.abs(h0).max()), 1.0)
    return -((gnorm - rho) / kappa) * n


def _kink_newton(fun, x_prev, rho, d, opts: StepOptions):
    """Semismooth Newton for ``grad g(x_prev + d) + rho d/|d| = 0`` with d != 0."""
    d = np.asarray(d, dtype=float).copy()

    def f(dd):
        return fun.value(x_prev + dd) + rho * float(np.linalg.norm(dd))

    fcur = f(d)
    if not math.isfinite(fcur) or float(np.linalg.norm(d)) == 0.0:
        return x_prev + d, False
    tol = opts.grad_tol * max(1.0, rho)
    converged = False
    for _ in range(opts.newton_iters):
        _, g = fun.value_grad(x_prev + d)
        s = float(np.linalg.norm(d))
        u = d / s
        res = g + rho * u
        rn = float(np.linalg.norm(res))
        if rn <= tol:
            converged = True
            break
        hess = fd_hessian(fun, x_prev + d)
        jac = hess + (rho / s) * (np.eye(5) - np.outer(u, u))
        shift = 0.0
        for _ in range(30):
            try:
                chol = np.linalg.cholesky(jac + shift * np.eye(5))
                break
            except np.linalg.LinAlgError:
                shift = max(2 * shift, 1e-8 * max(1.0, float(np.abs(jac).max())))
        else:
            return x_prev + d, False
        step = -np.linalg.solve(chol.T, np.linalg.solve(chol, res))
        slope = float(res @ step)
        alpha = 1.0
        accepted = False
        while alpha > 1e-12:
            dn = d + alpha * step
            if float(np.linalg.norm(dn)) > 0.0:
                fn = f(dn)
                if fn <= fcur + 1e-4 * alpha * slope or (fn <= fcur and alpha == 1.0):
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            # rounding floor of f reached
            converged = rn <= 1e3 * tol
            break
        small = float(np.linalg.norm(dn - d)) <= 1e-15 * (1.0 + float(np.linalg.norm(x_prev + d)))
        d, fcur = dn, fn
        if small:
            converged = True
            break
    return x_prev + d, converged


def _pattern_search(f, x0, f0, x_kink, step0, max_evals, min_step=1e-10):
    """Opportunistic compass search; the kink point is always a probe."""
    dirs = np.vstack([np.eye(5), -np.eye(5)])
    x, fx, step = x0.copy(), f0, step0
    evals = 0
    while step > min_step and evals < max_evals:
        improved = False
        probes = [x + step * d for d in dirs]
        gap = x_kink - x
        gn = float(np.linalg.norm(gap))
        if gn > 0:
            probes.append(x + min(step, gn) * gap / gn)
        for xt in probes:
            ft = f(xt)
            evals += 1
            if ft < fx:
                x, fx, improved = xt, ft, True
                break
        if not improved:
            step *= 0.5
    return x, fx, evals


def minimize_with_kink(fun, x_prev, rho: float, opts: StepOptions = StepOptions(),
                       rng: np.random.Generator | None = None, incumbent=None):
    """Approximately minimize ``fun(x) + rho |x - x_prev|``.

    Multi-start (previous state, semismooth-Newton point, one Newton step on
    the smooth part, random perturbations), compass search, then a Newton
    polish from the best point.  The result never has a larger objective
    than ``x_prev`` or than ``incumbent`` when one is given.

    Returns
    -------
    x : ndarray, shape (5,)
    info : StepInfo

    Raises
    ------
    NonFiniteEnergyError
        If every candidate has infinite energy.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    rng = rng if rng is not None else np.random.default_rng(opts.seed)

    def f(x):
        return fun.value(x) + rho * float(np.linalg.norm(x - x_prev))

    v0, g0 = fun.value_grad(x_prev)
    f_prev = v0
    cands: list[tuple[float, np.ndarray, str]] = []
    newton_ok = False
    stick = False
    scale = 1e-2
    if math.isfinite(v0):
        cands.append((v0, x_prev.copy(), "previous"))
        gnorm = float(np.linalg.norm(g0))
        h0 = fd_hessian(fun, x_prev)
        if gnorm <= rho:
            stick = True
        else:
            xn, newton_ok = _kink_newton(fun, x_prev, rho, _kink_start(g0, h0, rho), opts)
            fx = f(xn)
            if math.isfinite(fx):
                cands.append((fx, xn, "newton"))
            scale = max(scale, 2.0 * float(np.linalg.norm(xn - x_prev)))
        try:
            xs = x_prev - np.linalg.solve(h0, g0)
            fx = f(xs)
            if math.isfinite(fx):
                cands.append((fx, xs, "smooth-newton"))
        except np.linalg.LinAlgError:
            pass
    f_inc = math.inf
    if incumbent is not None:
        incumbent = np.asarray(incumbent, dtype=float).copy()
        f_inc = f(incumbent)
        if math.isfinite(f_inc):
            cands.append((f_inc, incumbent, "incumbent"))
    for _ in range(opts.n_random):
        xr = x_prev + scale * rng.uniform(0.1, 1.0) * t3.random_dev(rng)
        fx = f(xr)
        if math.isfinite(fx):
            cands.append((fx, xr, "random"))
    if not cands:
        raise NonFiniteEnergyError("no finite-energy competitor found")

    best_f, best_x, source = min(cands, key=lambda c: c[0])
    if stick and best_f >= f_prev - 1e-14 * (1.0 + abs(f_prev)):
        # elastic step: nothing beats staying put beyond rounding
        best_x, best_f, source = x_prev.copy(), f_prev, "previous"
    elif not (source == "newton" and newton_ok):
        px, pf, _ = _pattern_search(f, best_x, best_f, x_prev, 0.25 * scale, opts.pattern_evals)
        if pf < best_f:
            best_x, best_f, source = px, pf, "pattern"
        d = best_x - x_prev
        if float(np.linalg.norm(d)) > 0:
            xp, ok = _kink_newton(fun, x_prev, rho, d, opts)
            fp = f(xp)
            if fp < best_f:
                best_x, best_f, source, newton_ok = xp, fp, "polish", ok
    if math.isfinite(f_prev) and not best_f <= f_prev:
        best_x, best_f, source = x_prev.copy(), f_prev, "previous"
    if not best_f <= f_inc and math.isfinite(f_inc):
        best_x, best_f, source = incumbent, f_inc, "incumbent"
    return best_x, StepInfo(best_f, f_prev, stick and source == "previous", newton_ok, source)


# ------------------------------------------------------------------ stepping

def incremental_step(cp_prev, c_now, m: mat.MaterialModel, spec: DissipationSpec | None = None,
                     opts: StepOptions = StepOptions(), rng: np.random.Generator | None = None):
    """One incremental minimization; returns the new plastic state.

    Parameters
    ----------
    cp_prev : array_like, shape (3, 3)
        Previous plastic state (unit determinant, SPD).
    c_now : array_like, shape (3, 3)
        Current right Cauchy-Green tensor.
    """
    spec = spec or DissipationSpec(m.r)
    x_prev = t3.log_dev(t3.unit_det_spd(cp_prev))
    x, _ = minimize_with_kink(PointEnergy(c_now, m), x_prev, spec.rho, opts, rng)
    return t3.exp_dev(x)


@dataclass
class Trajectory:
    """Discrete evolution on a uniform partition.

    ``energy[i]`` is E(Cp_i, t_i); ``energy_prev[i]`` is E(Cp_{i-1}, t_i)
    (equal to ``energy[0]`` at i = 0); ``diss[i]`` is the step dissipation
    (0 at i = 0); ``power[i]`` the cumulative integral of dE/dt along the
    previous-state interpolant.
    """

    times: np.ndarray
    states: np.ndarray          # (N+1, 5) log coordinates (z for rescaled runs)
    energy: np.ndarray
    energy_prev: np.ndarray
    diss: np.ndarray
    power: np.ndarray
    margins: np.ndarray
    residuals: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    state_scale: float = 1.0    # Cp = exp(state_scale * state)
    kind: str = "finite"        # "linear": states are small-strain z

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def dissipation(self) -> float:
        return float(np.sum(self.diss))

    @property
    def cumulative_dissipation(self) -> np.ndarray:
        return np.cumsum(self.diss)

    @property
    def balance_residual(self) -> float:
        return float(self.energy[-1] + self.dissipation - self.energy[0] - self.power[-1])

    @property
    def plastic_states(self) -> np.ndarray:
        return np.array([t3.exp_dev(self.state_scale * s) for s in self.states])

    def step_inequality_defects(self) -> np.ndarray:
        """``E_i + d_i - E(Cp_{i-1}, t_i)``; non-positive for every step."""
        return self.energy[1:] + self.diss[1:] - self.energy_prev[1:]

    def det_drift(self) -> float:
        return max(abs(t3.det(c) - 1.0) for c in self.plastic_states)

    def to_csv(self, path) -> None:
        """Write one row per time node.

        The margin column is present only when margins were sampled at every
        node, the flow-rule columns only when they were computed, so every
        written value is finite.
        """
        if self.kind == "linear":
            cps, prefix = t3.dev_to_mat(self.states), "z"
        else:
            cps, prefix = self.plastic_states, "cp"
        cum = self.cumulative_dissipation
        head = ["t"] + [prefix + k for k in ("11", "22", "33", "23", "13", "12")]
        head += ["energy", "dissipation"]
        extra = [[] for _ in self.times]
        if np.all(np.isfinite(self.margins)):
            head.append("margin")
            for i in range(len(self.times)):
                extra[i].append(self.margins[i])
        if len(self.residuals) == len(self.times):
            head += ["yield_violation", "alignment", "complementarity"]
            for i in range(len(self.times)):
                extra[i].extend(self.residuals[i])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(head)
            for i, t in enumerate(self.times):
                c = cps[i]
                row = [t, c[0, 0], c[1, 1], c[2, 2], c[1, 2], c[0, 2], c[0, 1], self.energy[i],
                       cum[i], *extra[i]]
                w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def power_density(c, c_dot, cp, m: mat.MaterialModel) -> float:
    """Partial time derivative of the energy, ``S/2 : dC/dt``."""
    return 0.5 * t3.contract(mat.pk2_stress(c, cp, m), c_dot)


def _gauss(n: int = POWER_GAUSS):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def interval_power(load: LoadProgram, t0: float, t1: float, cp, m: mat.MaterialModel) -> float:
    """Gauss quadrature of the power over [t0, t1] at frozen Cp.

    The interval is split at the load program's breakpoints.
    """
    cuts = [t0] + [b for b in load.breakpoints if t0 < b < t1] + [t1]
    gx, gw = _gauss()
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        for x, w in zip(gx, gw):
            t = a + (b - a) * x
            total += (b - a) * w * power_density(load.c(t), load.c_dot(t), cp, m)
    return total


def stability_check(cp, c, m: mat.MaterialModel, spec: DissipationSpec | None = None,
                    samples: int = 64, rng: np.random.Generator | None = None,
                    energy: PointEnergy | None = None, inn: float = 1.0) -> float:
    """Smallest sampled value of ``E(Cp') + D(Cp, Cp') - E(Cp)``.

    Competitors are ``exp(log Cp + delta R)`` with R a random unit deviator
    and delta log-spaced in [1e-3, 1], plus the critical point of the smooth
    part reached by Newton from ``Cp``.
    """
    spec = spec or DissipationSpec(m.r)
    rng = rng if rng is not None else np.random.default_rng(0)
    fun = energy or PointEnergy(c, m)
    return _margin(fun, t3.log_dev(cp) / inn, spec.rho, samples, rng)


MARGIN_STREAM = 1


def stability_tolerance(energy: float) -> float:
    return -1e-6 * (1.0 + abs(energy))


def solve(load: LoadProgram, cp0, n_steps: int, m: mat.MaterialModel,
          spec: DissipationSpec | None = None, opts: StepOptions = StepOptions(),
          margin_stride: int = 0, margin_samples: int = 32, seed: int = 0,
          residuals: bool = True) -> Trajectory:
    """Time-discrete energetic solution on a uniform partition.

    Parameters
    ----------
    margin_stride : int
        Run ``stability_check`` every this many steps (0: never; the last
        step is always included when positive).
    """
    return _solve_generic(
        n_steps, load.horizon,
        lambda t: PointEnergy(load.c(t), m),
        t3.log_dev(t3.unit_det_spd(cp0)),
        (spec or DissipationSpec(m.r)).rho, opts, margin_stride, margin_samples, seed,
        power=lambda t0, t1, x: interval_power(load, t0, t1, t3.exp_dev(x), m),
        finish=(lambda traj: _attach_residuals(traj, load, m)) if residuals else None,
    )


def _solve_generic(n_steps, horizon, energy_at, x0, rho, opts, margin_stride, margin_samples,
                   seed, power, finish=None, inn: float = 1.0) -> Trajectory:
    if n_steps < 1:
        raise ValueError("need at least one step")
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, horizon, n_steps + 1)
    states = np.empty((n_steps + 1, 5))
    energy = np.empty(n_steps + 1)
    energy_prev = np.empty(n_steps + 1)
    diss = np.zeros(n_steps + 1)
    pw = np.zeros(n_steps + 1)
    margins = np.full(n_steps + 1, np.nan)
    x = np.asarray(x0, dtype=float).copy()
    fun = energy_at(0.0)
    states[0] = x
    energy[0] = energy_prev[0] = fun.value(x)
    if not math.isfinite(energy[0]):
        raise NonFiniteEnergyError("initial state has infinite energy")
    # margins reuse one competitor set, so equal states give equal margins and
    # the minimizer's random stream does not depend on the margin stride
    def margin_rng():
        return np.random.default_rng([seed, MARGIN_STREAM])

    if margin_stride:
        margins[0] = _margin(fun, x, rho, margin_samples, margin_rng())
        if margins[0] < stability_tolerance(energy[0]):
            warnings.warn("initial plastic state is not stable at t = 0 (sampled margin "
                          f"{margins[0]:.3e})", RuntimeWarning, stacklevel=3)
    for i in range(1, n_steps + 1):
        fun = energy_at(times[i])
        x_new, info = minimize_with_kink(fun, x, rho, opts, rng)
        pw[i] = pw[i - 1] + power(times[i - 1], times[i], x)
        states[i] = x_new
        energy_prev[i] = info.value_prev
        d = rho * float(np.linalg.norm(x_new - x))
        e_new = fun.value(x_new)
        if not e_new + d <= energy_prev[i]:
            # guard against evaluation-order rounding: stay put
            x_new, e_new, d = x.copy(), energy_prev[i], 0.0
            states[i] = x_new
        energy[i] = e_new
        diss[i] = d
        x = x_new
        if margin_stride and (i % margin_stride == 0 or i == n_steps):
            margins[i] = _margin(fun, x, rho, margin_samples, margin_rng())
    traj = Trajectory(times, states, energy, energy_prev, diss, pw, margins, state_scale=inn)
    if finish is not None:
        finish(traj)
    return traj


def _margin(fun, x0, rho, samples, rng) -> float:
    """Sampled stability margin in solver coordinates (see ``stability_check``)."""
    e0 = fun.value(x0)
    margin = math.inf
    for delta in np.logspace(-3.0, 0.0, samples):
        xt = x0 + delta * t3.random_dev(rng)
        val = fun.value(xt)
        if math.isfinite(val):
            margin = min(margin, val + rho * float(np.linalg.norm(xt - x0)) - e0)
    xc = x0.copy()
    for _ in range(20):
        _, g = fun.value_grad(xc)
        if float(np.linalg.norm(g)) < 1e-12:
            break
        try:
            xc = xc - np.linalg.solve(fd_hessian(fun, xc), g)
        except np.linalg.LinAlgError:
            break
    val = fun.value(xc)
    if math.isfinite(val):
        margin = min(margin, val + rho * float(np.linalg.norm(xc - x0)) - e0)
    return margin


def flow_rule_residual(traj: Trajectory, load: LoadProgram, m: mat.MaterialModel,
                       stick_tol: float = 1e-14) -> np.ndarray:
    """Per-step flow-rule defects, shape (N+1, 3).

    Columns: yield violation ``max(phi, 0)``, alignment defect of the plastic
    rate with ``Cp^{1/2} dev(Cp^{1/2} T Cp^{1/2}) Cp^{1/2}``, and the
    complementarity product ``zdot * phi``.  Sticking steps report only the
    yield violation at the step end.
    """
    out = np.zeros((traj.steps + 1, 3))
    cps = traj.plastic_states
    for i in range(1, traj.steps + 1):
        tau = traj.times[i] - traj.times[i - 1]
        dx = traj.states[i] - traj.states[i - 1]
        if float(np.linalg.norm(dx)) <= stick_tol:
            force = mat.driving_force(load.c(traj.times[i]), cps[i], m)
            out[i, 0] = max(mat.yield_value(cps[i], force, m.r), 0.0)
            continue
        t_mid = 0.5 * (traj.times[i] + traj.times[i - 1])
        cp_mid = t3.exp_dev(0.5 * traj.state_scale * (traj.states[i] + traj.states[i - 1]))
        force = mat.driving_force(load.c(t_mid), cp_mid, m)
        phi = mat.yield_value(cp_mid, force, m.r)
        p = t3.sqrt_spd(cp_mid)
        direction = p @ t3.dev(p @ force @ p) @ p
        rate = (cps[i] - cps[i - 1]) / tau
        rn = t3.norm(rate)
        dn = t3.norm(direction)
        zdot = rn / (2.0 * dn) if dn > 0 else 0.0
        out[i, 0] = max(phi, 0.0)
        out[i, 1] = t3.norm(rate / rn - direction / dn) if dn > 0 else 0.0
        out[i, 2] = abs(zdot * phi)
    return out


def _attach_residuals(traj: Trajectory, load: LoadProgram, m: mat.MaterialModel) -> None:
    if m.plastic.r_k is None:
        traj.residuals = flow_rule_residual(traj, load, m)

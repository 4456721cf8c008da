"""Energy densities, stresses and driving forces.

The stored energy is split additively into an isotropic elastic part,
evaluated on the elastic right Cauchy-Green tensor
``Ce = Cp^{-1/2} C Cp^{-1/2}``, and a hardening part in the plastic state
``Cp``.  The default elastic density is compressible neo-Hookean,

    W_e(F) = (a/2)(|F|^2 - 3) - a ln det F + (b/2)(det F - 1)^2,

and the default hardening is ``(h/4)|log Cp|^2``, optionally made infinite
outside the set ``{Cp, Cp^-1 : |.| <= r_K}``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import tensor3 as t3
from .errors import NonSpdError

FD_STEP = 1e-5
HESS_STEP = 1e-4


@dataclass(frozen=True)
class ElasticParams:
    """Elastic density parameters.

    ``family`` is ``"neo-hookean"`` (closed-form derivatives) or ``"ogden"``,

        sum_i a_i tr Ce^{g_i/2} + sum_j b_j tr (cof Ce)^{d_j/2}
            + k (J - 1)^2 - s ln J - const,   J = sqrt(det Ce),

    where ``s`` and ``const`` are fixed by a stress-free, zero-energy
    reference.  Ogden derivatives are finite differences.
    """

    a: float = 1.0
    b: float = 1.0
    family: str = "neo-hookean"
    ogden_a: tuple[float, ...] = ()
    ogden_gamma: tuple[float, ...] = ()
    ogden_b: tuple[float, ...] = ()
    ogden_delta: tuple[float, ...] = ()
    ogden_k: float = 1.0

    def __post_init__(self):
        if self.family not in ("neo-hookean", "ogden"):
            raise ValueError(f"unknown elastic family {self.family!r}")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("elastic moduli a, b must be positive")
        if self.family == "ogden":
            if len(self.ogden_a) != len(self.ogden_gamma) or len(self.ogden_b) != len(self.ogden_delta):
                raise ValueError("ogden coefficient and exponent lists differ in length")
            if any(x <= 0 for x in self.ogden_a + self.ogden_b) or self.ogden_k <= 0:
                raise ValueError("ogden coefficients must be positive")
            if any(x < 1 for x in self.ogden_gamma + self.ogden_delta):
                raise ValueError("ogden exponents must be >= 1")


@dataclass(frozen=True)
class PlasticParams:
    """Hardening modulus ``h`` and optional K-radius ``r_k`` (needs r_k^2 > 3)."""

    h: float = 0.5
    r_k: float | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("hardening modulus h must be positive")
        if self.r_k is not None and not self.r_k * self.r_k > 3.0:
            raise ValueError("K-radius must satisfy r_k^2 > 3")


@dataclass(frozen=True)
class MaterialModel:
    """Complete constitutive description at a point.

    ``r`` is the yield radius, ``mu`` the coefficient of the quadratic
    plastic-gradient energy used by the spatial solver.
    """

    elastic: ElasticParams = field(default_factory=ElasticParams)
    plastic: PlasticParams = field(default_factory=PlasticParams)
    r: float = 0.2
    mu: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("yield radius r must be positive")
        if self.mu < 0:
            raise ValueError("gradient coefficient mu must be >= 0")

    @property
    def closed_form(self) -> bool:
        return self.elastic.family == "neo-hookean"

    def with_(self, **kw) -> "MaterialModel":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("ogden_a", "ogden_gamma", "ogden_b", "ogden_delta"):
            d["elastic"][key] = list(d["elastic"][key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MaterialModel":
        el = dict(d.get("elastic", {}))
        for key in ("ogden_a", "ogden_gamma", "ogden_b", "ogden_delta"):
            if key in el:
                el[key] = tuple(el[key])
        return cls(
            elastic=ElasticParams(**el),
            plastic=PlasticParams(**d.get("plastic", {})),
            r=d.get("r", 0.2),
            mu=d.get("mu", 0.0),
        )


# ------------------------------------------------------------------- elastic

def _ogden_shift(p: ElasticParams) -> tuple[float, float]:
    slope = sum(a * g for a, g in zip(p.ogden_a, p.ogden_gamma)) + 2.0 * sum(
        b * d for b, d in zip(p.ogden_b, p.ogden_delta))
    const = 3.0 * (sum(p.ogden_a) + sum(p.ogden_b))
    return slope, const


def _ogden_from_eigs(lam: np.ndarray, p: ElasticParams) -> float:
    jac = math.sqrt(lam[0] * lam[1] * lam[2])
    cof = np.array([lam[1] * lam[2], lam[0] * lam[2], lam[0] * lam[1]])
    slope, const = _ogden_shift(p)
    w = sum(a * float(np.sum(lam ** (g / 2.0))) for a, g in zip(p.ogden_a, p.ogden_gamma))
    w += sum(b * float(np.sum(cof ** (d / 2.0))) for b, d in zip(p.ogden_b, p.ogden_delta))
    return w + p.ogden_k * (jac - 1.0) ** 2 - slope * math.log(jac) - const


def elastic_energy(ce, p: ElasticParams) -> float:
    """Elastic density as a function of the elastic Cauchy-Green tensor.

    Raises
    ------
    NonSpdError
        If ``ce`` is not positive definite.
    """
    lam, _ = t3.spectral(ce)
    if not lam[-1] > 0.0:
        raise NonSpdError("elastic Cauchy-Green tensor is not positive definite")
    if p.family == "ogden":
        return _ogden_from_eigs(lam, p)
    detc = float(lam[0] * lam[1] * lam[2])
    jac = math.sqrt(detc)
    return 0.5 * p.a * (float(np.sum(lam)) - 3.0) - 0.5 * p.a * math.log(detc) + 0.5 * p.b * (jac - 1.0) ** 2


def elastic_energy_F(f, p: ElasticParams) -> float:
    """Density in terms of the deformation gradient; +inf for det F <= 0."""
    f = np.asarray(f, dtype=float)
    jac = t3.det(f)
    if not jac > 0.0:
        return math.inf
    if p.family == "ogden":
        return elastic_energy(f.T @ f, p)
    return 0.5 * p.a * (float(np.sum(f * f)) - 3.0) - p.a * math.log(jac) + 0.5 * p.b * (jac - 1.0) ** 2


def _fd_sym_gradient(fun, c, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function of a symmetric tensor."""
    v0 = t3.to_mandel(c)
    g = np.empty(6)
    for k in range(6):
        hk = step * max(1.0, abs(v0[k]))
        e = np.zeros(6)
        e[k] = hk
        g[k] = (fun(t3.from_mandel(v0 + e)) - fun(t3.from_mandel(v0 - e))) / (2.0 * hk)
    return t3.from_mandel(g)


def elastic_stress(ce, p: ElasticParams) -> np.ndarray:
    """Derivative of the elastic density with respect to Ce."""
    if p.family == "ogden":
        return _fd_sym_gradient(lambda x: elastic_energy(x, p), ce)
    ce = np.asarray(ce, dtype=float)
    detc = t3.det(ce)
    if not detc > 0.0:
        raise NonSpdError("elastic Cauchy-Green tensor is not positive definite")
    jac = math.sqrt(detc)
    cinv = t3.inverse(ce)
    return t3.sym(0.5 * p.a * (t3.IDENTITY - cinv) + 0.5 * p.b * (jac - 1.0) * jac * cinv)


def polyconvex_density(f, g, delta: float, p: ElasticParams) -> float:
    """Convex representative of the elastic density on (F, cof F, det F) space."""
    if not delta > 0.0:
        return math.inf
    f = np.asarray(f, dtype=float)
    if p.family == "ogden":
        sf = np.linalg.svd(f, compute_uv=False)
        sg = np.linalg.svd(np.asarray(g, dtype=float), compute_uv=False)
        slope, const = _ogden_shift(p)
        w = sum(a * float(np.sum(sf ** gm)) for a, gm in zip(p.ogden_a, p.ogden_gamma))
        w += sum(b * float(np.sum(sg ** d)) for b, d in zip(p.ogden_b, p.ogden_delta))
        return w + p.ogden_k * (delta - 1.0) ** 2 - slope * math.log(delta) - const
    return 0.5 * p.a * (float(np.sum(f * f)) - 3.0) - p.a * math.log(delta) + 0.5 * p.b * (delta - 1.0) ** 2


def kirchhoff_ratio(ce, p: ElasticParams) -> float:
    """``|Fe^T dW/dFe| / (1 + W_e)``, computed as ``|2 Ce dW/dCe| / (1 + W_e)``."""
    return t3.norm(2.0 * np.asarray(ce) @ elastic_stress(ce, p)) / (1.0 + elastic_energy(ce, p))


# ------------------------------------------------------------------ plastic

def in_k_set(cp, r_k: float) -> bool:
    return t3.norm(cp) <= r_k and t3.norm(t3.mat_fn(cp, "inv")) <= r_k


def plastic_energy(cp, pp: PlasticParams) -> float:
    """Hardening density ``(h/4)|log Cp|^2``; +inf outside K when constrained."""
    if pp.r_k is not None and not in_k_set(cp, pp.r_k):
        return math.inf
    return 0.25 * pp.h * t3.norm(t3.log_spd(cp)) ** 2


def plastic_stress(cp, pp: PlasticParams) -> np.ndarray:
    """Closed form ``(h/2) Cp^{-1} log Cp`` (the two factors commute)."""
    lam, q = t3.spectral(cp)
    if not lam[-1] > 0.0:
        raise NonSpdError("plastic state is not positive definite")
    f = 0.5 * pp.h * np.log(lam) / lam
    return t3.sym((q * f) @ q.T)


# -------------------------------------------------------------------- total

def elastic_part(c, cp) -> np.ndarray:
    """``Ce = Cp^{-1/2} C Cp^{-1/2}``."""
    p_inv = t3.mat_fn(cp, "invsqrt")
    return t3.sym(p_inv @ np.asarray(c, dtype=float) @ p_inv)


def total_density(c, cp, m: MaterialModel) -> float:
    """Stored energy ``W_e(Ce) + W_p(Cp)``; may be +inf under the K-constraint."""
    wp = plastic_energy(cp, m.plastic)
    if math.isinf(wp):
        return math.inf
    return elastic_energy(elastic_part(c, cp), m.elastic) + wp


def density_from_FP(f, p, m: MaterialModel) -> float:
    """Density evaluated from a deformation gradient and a plastic factor P."""
    f = np.asarray(f, dtype=float)
    p = np.asarray(p, dtype=float)
    fe = f @ t3.inverse(p)
    cp = t3.sym(p.T @ p)
    wp = plastic_energy(cp, m.plastic)
    if math.isinf(wp):
        return math.inf
    return elastic_energy(t3.sym(fe.T @ fe), m.elastic) + wp


def pk2_stress(c, cp, m: MaterialModel) -> np.ndarray:
    """Second Piola-Kirchhoff stress ``2 Cp^{-1/2} dW_e(Ce) Cp^{-1/2}``."""
    p_inv = t3.mat_fn(cp, "invsqrt")
    ce = t3.sym(p_inv @ np.asarray(c, dtype=float) @ p_inv)
    return t3.sym(2.0 * p_inv @ elastic_stress(ce, m.elastic) @ p_inv)


def driving_force(c, cp, m: MaterialModel) -> np.ndarray:
    """Thermodynamic force conjugate to Cp (unconstrained hardening).

    ``T = 2 P^{-1} Ce dW_e(Ce) P^{-1} - 2 dW_p(Cp)`` with ``P = Cp^{1/2}``.
    """
    p_inv = t3.mat_fn(cp, "invsqrt")
    ce = t3.sym(p_inv @ np.asarray(c, dtype=float) @ p_inv)
    mandel = ce @ elastic_stress(ce, m.elastic)
    return t3.sym(2.0 * p_inv @ mandel @ p_inv - 2.0 * plastic_stress(cp, m.plastic))


def mandel_force(c, p, m: MaterialModel) -> np.ndarray:
    """``N = -dW/dP`` in closed form for a general invertible plastic factor P."""
    p = np.asarray(p, dtype=float)
    p_inv = t3.inverse(p)
    ce = t3.sym(p_inv.T @ np.asarray(c, dtype=float) @ p_inv)
    cp = t3.sym(p.T @ p)
    return 2.0 * ce @ elastic_stress(ce, m.elastic) @ p_inv.T - 2.0 * p @ plastic_stress(cp, m.plastic)


def yield_value(cp, force, r: float) -> float:
    """``|dev(Cp^{1/2} T Cp^{1/2})| - r``."""
    p = t3.sqrt_spd(cp)
    return t3.norm(t3.dev(p @ np.asarray(force, dtype=float) @ p)) - r


# ------------------------------------------------------- linearization data

def _mandel_hessian(fun, step: float) -> np.ndarray:
    """Second central differences of ``fun(I + from_mandel(v))`` at v = 0."""
    def f(v):
        return fun(t3.IDENTITY + t3.from_mandel(v))

    f0 = f(np.zeros(6))
    hess = np.empty((6, 6))
    for i in range(6):
        for j in range(i, 6):
            ei = np.zeros(6)
            ej = np.zeros(6)
            ei[i] = step
            ej[j] = step
            val = (f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)) / (4.0 * step * step)
            if i == j:
                val = (f(2 * ei) - 2.0 * f0 + f(-2 * ei)) / (4.0 * step * step)
            hess[i, j] = hess[j, i] = val
    return hess


def _richardson_hessian(fun, step: float = HESS_STEP) -> np.ndarray:
    coarse = _mandel_hessian(fun, step)
    fine = _mandel_hessian(fun, 0.5 * step)
    return (4.0 * fine - coarse) / 3.0


def linearization_tensors(m: MaterialModel) -> tuple[np.ndarray, np.ndarray]:
    """Elasticity and hardening tensors at the identity, 6x6 Mandel arrays.

    Both are four times the second derivative of the respective density at
    I, by Richardson-extrapolated central differences.
    """
    el = 4.0 * _richardson_hessian(lambda x: elastic_energy(x, m.elastic))
    unconstrained = replace(m.plastic, r_k=None)
    pl = 4.0 * _richardson_hessian(lambda x: plastic_energy(x, unconstrained))
    return t3.sym(el), t3.sym(pl)


def isotropic_elasticity(mu: float, lam: float) -> np.ndarray:
    """Mandel array of ``A -> 2 mu A + lam tr(A) I``."""
    out = 2.0 * mu * np.eye(6)
    out[:3, :3] += lam
    return out


def quad_behavior_ratio(m: MaterialModel, a) -> tuple[float, float]:
    """Relative quadratic-fit defects ``|W(I+2A) - |A|^2_T / 2| / |A|^2``.

    Returns the elastic defect and the hardening defect (the latter on the
    deviatoric part of A via ``exp(2 dev A)``).
    """
    a = t3.sym(a)
    cc, hh = linearization_tensors(m)
    n2 = t3.norm(a) ** 2
    el = abs(elastic_energy(t3.IDENTITY + 2.0 * a, m.elastic) - 0.5 * t3.quad4(cc, a)) / n2
    ad = t3.dev(a)
    nd2 = t3.norm(ad) ** 2
    pl = 0.0
    if nd2 > 0:
        unconstrained = replace(m.plastic, r_k=None)
        pl = abs(plastic_energy(t3.exp_sym(2.0 * ad), unconstrained) - 0.5 * t3.quad4(hh, ad)) / nd2
    return el, pl

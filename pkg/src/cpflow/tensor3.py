"""3x3 tensor algebra and spectral matrix functions.

Tensors are plain ``numpy`` arrays of shape (3, 3).  Two coordinate systems
are used for symmetric tensors:

* Mandel 6-vectors ``(A11, A22, A33, sqrt2 A23, sqrt2 A13, sqrt2 A12)``, in
  which the Frobenius inner product is the Euclidean one and fourth-order
  tensors with minor symmetries are symmetric 6x6 arrays.
* deviatoric 5-vectors in the orthonormal basis

  ``E1 = diag(1,-1,0)/sqrt2``, ``E2 = diag(1,1,-2)/sqrt6``,
  ``E3..E5 = (ei ej + ej ei)/sqrt2`` for (i,j) = (1,2), (1,3), (2,3),

  so trace zero holds by construction and ``|v| = |A|``.
"""
from __future__ import annotations

import math

import numpy as np

from ._backend import kernels
from .errors import NonSpdError, SingularError

SQ2 = math.sqrt(2.0)
SQ6 = math.sqrt(6.0)
IDENTITY = np.eye(3)

# tolerances for UnitDetSpd construction
DET_EXACT_TOL = 1e-10
DET_RENORM_TOL = 1e-6


def _basis() -> np.ndarray:
    b = np.zeros((5, 3, 3))
    b[0] = np.diag([1.0, -1.0, 0.0]) / SQ2
    b[1] = np.diag([1.0, 1.0, -2.0]) / SQ6
    for k, (i, j) in enumerate([(0, 1), (0, 2), (1, 2)]):
        b[2 + k, i, j] = b[2 + k, j, i] = 1.0 / SQ2
    return b


DEV_BASIS = _basis()
_MANDEL_IDX = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
_MANDEL_W = np.array([1.0, 1.0, 1.0, SQ2, SQ2, SQ2])


def as_mat(a) -> np.ndarray:
    """Contiguous float64 copy-free view where possible."""
    return np.ascontiguousarray(a, dtype=float).reshape(3, 3)


# ---------------------------------------------------------------- coordinates

def sym(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def dev_to_mat(v) -> np.ndarray:
    """Deviatoric 5-vector(s) to symmetric traceless matrix (matrices)."""
    return np.tensordot(np.asarray(v, dtype=float), DEV_BASIS, axes=(-1, 0))


def mat_to_dev(a) -> np.ndarray:
    """Project the symmetric part of ``a`` onto the deviatoric basis."""
    return np.tensordot(sym(a), DEV_BASIS, axes=([-2, -1], [1, 2]))


def to_mandel(a) -> np.ndarray:
    s = sym(a)
    return np.stack([s[..., i, j] for i, j in _MANDEL_IDX], axis=-1) * _MANDEL_W


def from_mandel(v) -> np.ndarray:
    v = np.asarray(v, dtype=float) / _MANDEL_W
    out = np.zeros(v.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(_MANDEL_IDX):
        out[..., i, j] = v[..., k]
        out[..., j, i] = v[..., k]
    return out


# -------------------------------------------------------------------- algebra

def trace(a) -> float:
    return float(np.trace(np.asarray(a, dtype=float)))


def dev(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a - np.trace(a, axis1=-2, axis2=-1)[..., None, None] / 3.0 * IDENTITY


def norm(a) -> float:
    """Frobenius norm."""
    return float(np.sqrt(np.sum(np.square(a))))


def contract(a, b) -> float:
    """Double contraction ``A : B``."""
    return float(np.sum(np.asarray(a, dtype=float) * np.asarray(b, dtype=float)))


def det(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
                 - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
                 + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))


def cofactor(a) -> np.ndarray:
    """Cofactor matrix; defined for every A, equal to det(A) A^-T if invertible."""
    a = np.asarray(a, dtype=float)
    c = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != i]
            s = [k for k in range(3) if k != j]
            minor = a[r[0], s[0]] * a[r[1], s[1]] - a[r[0], s[1]] * a[r[1], s[0]]
            c[i, j] = (-1) ** (i + j) * minor
    return c


def inverse(a) -> np.ndarray:
    d = det(a)
    if d == 0.0 or not math.isfinite(d):
        raise SingularError("tensor is singular")
    return cofactor(a).T / d


def apply4(t66, a) -> np.ndarray:
    """Action of a minor-symmetric fourth-order tensor on ``sym(a)``."""
    return from_mandel(np.asarray(t66) @ to_mandel(a))


def quad4(t66, a) -> float:
    """Quadratic form ``|A|^2_T = A : T A`` on the symmetric part of ``a``."""
    v = to_mandel(a)
    return float(v @ np.asarray(t66) @ v)


# --------------------------------------------------------- spectral functions

def spectral(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors of sym(s).

    Cyclic Jacobi rotations on the symmetric part of the input.
    """
    return kernels.eigh3(as_mat(s))


_KIND = {"exp": 0, "log": 1, "pow": 2}


def mat_fn(s, f: str, alpha: float | None = None) -> np.ndarray:
    """Apply ``f`` spectrally to a symmetric tensor.

    Parameters
    ----------
    s : array_like, shape (3, 3)
        Symmetric input; only the symmetric part is used.
    f : {"exp", "log", "pow", "sqrt", "invsqrt", "inv"}
        Scalar function.  Everything but ``exp`` needs positive eigenvalues.
    alpha : float, optional
        Exponent for ``"pow"``.

    Returns
    -------
    ndarray, shape (3, 3)
        Exactly symmetric result.

    Raises
    ------
    NonSpdError
        If positivity is required and an eigenvalue is <= 0.
    """
    if f == "sqrt":
        f, alpha = "pow", 0.5
    elif f == "invsqrt":
        f, alpha = "pow", -0.5
    elif f == "inv":
        f, alpha = "pow", -1.0
    if f not in _KIND:
        raise ValueError(f"unknown matrix function {f!r}")
    if f == "pow" and alpha is None:
        raise ValueError("power needs an exponent")
    status, out = kernels.sym_apply(as_mat(s), _KIND[f], 0.0 if alpha is None else float(alpha))
    if status != 0:
        raise NonSpdError(f"{f} requires a positive definite argument")
    return out


def exp_sym(s) -> np.ndarray:
    return mat_fn(s, "exp")


def log_spd(s) -> np.ndarray:
    return mat_fn(s, "log")


def sqrt_spd(s) -> np.ndarray:
    return mat_fn(s, "sqrt")


def exp_dev(v) -> np.ndarray:
    """exp of the deviatoric tensor with coordinates ``v``."""
    return exp_sym(dev_to_mat(v))


def log_dev(c) -> np.ndarray:
    """Deviatoric coordinates of log C for C in SL+sym."""
    return mat_to_dev(log_spd(c))


def is_spd(s) -> bool:
    w, _ = spectral(s)
    return bool(w[-1] > 0.0)


# ----------------------------------------------------------------- UnitDetSpd

def unit_det_spd(c) -> np.ndarray:
    """Validate a plastic state and remove small determinant drift.

    Returns a symmetric copy.  If ``|det - 1|`` lies in (1e-10, 1e-6] the
    tensor is rescaled by ``det^(-1/3)``; larger violations raise.

    Raises
    ------
    NonSpdError
        Not symmetric, not positive definite, or determinant too far from 1.
    """
    c = np.array(c, dtype=float).reshape(3, 3)
    if not np.all(np.isfinite(c)):
        raise NonSpdError("non-finite entries")
    if np.max(np.abs(c - c.T)) > 1e-12 * max(1.0, norm(c)):
        raise NonSpdError("tensor is not symmetric")
    c = sym(c)
    if not is_spd(c):
        raise NonSpdError("tensor is not positive definite")
    d = det(c)
    drift = abs(d - 1.0)
    if drift > DET_RENORM_TOL:
        raise NonSpdError(f"determinant {d!r} is not 1")
    if drift > DET_EXACT_TOL:
        c = c / d ** (1.0 / 3.0)
    return c


# ------------------------------------------------------------ Lipschitz probes

def lipschitz_log_check(c1, c2) -> tuple[float, float, float]:
    """Return ``(|log C1 - log C2|, (1 + max|Ci|^2)|C1 - C2|, ratio)``."""
    lhs = norm(log_spd(c1) - log_spd(c2))
    big = max(norm(c1), norm(c2))
    rhs = (1.0 + big * big) * norm(np.asarray(c1) - np.asarray(c2))
    ratio = 0.0 if rhs == 0.0 else lhs / rhs
    return lhs, rhs, ratio


def lipschitz_power_check(c1, c2, alpha: float) -> float:
    """Ratio ``|C1^a - C2^a| / |C1 - C2|`` (0 for identical inputs)."""
    den = norm(np.asarray(c1) - np.asarray(c2))
    if den == 0.0:
        return 0.0
    return norm(mat_fn(c1, "pow", alpha) - mat_fn(c2, "pow", alpha)) / den


# ------------------------------------------------------------------- sampling

def random_dev(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniformly distributed unit deviatoric 5-vector(s)."""
    shape = (5,) if size is None else (size, 5)
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_unit_det_spd(rng: np.random.Generator, max_log: float) -> np.ndarray:
    """exp(L) with L deviatoric, direction uniform and |L| uniform in [0, max_log]."""
    return exp_dev(random_dev(rng) * rng.uniform(0.0, max_log))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q

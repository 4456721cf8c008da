# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled 3x3 kernels.

Every function here has a line-for-line twin in ``_kernels_py`` so that the
two backends agree to rounding.  Matrices travel as C-contiguous float64
arrays of shape (3, 3); deviatoric tensors as 5-vectors in the orthonormal
basis documented in ``tensor3``.
"""
import numpy as np
from libc.math cimport sqrt, fabs, exp, log, sinh, isfinite, INFINITY

cdef double JACOBI_TOL = 1e-14
cdef int MAX_SWEEPS = 60

cdef double SQ2 = sqrt(2.0)
cdef double SQ6 = sqrt(6.0)

cdef enum:
    ST_OK = 0
    ST_NONSPD = 1
    ST_INTEGRATION = 2
    ST_MAXTIME = 3

STATUS_OK = ST_OK
STATUS_NONSPD = ST_NONSPD
STATUS_INTEGRATION = ST_INTEGRATION
STATUS_MAXTIME = ST_MAXTIME


cdef inline void _dev_to_mat(const double* v, double* m) noexcept nogil:
    m[0] = v[0] / SQ2 + v[1] / SQ6
    m[4] = -v[0] / SQ2 + v[1] / SQ6
    m[8] = -2.0 * v[1] / SQ6
    m[1] = v[2] / SQ2
    m[3] = m[1]
    m[2] = v[3] / SQ2
    m[6] = m[2]
    m[5] = v[4] / SQ2
    m[7] = m[5]


cdef inline void _mat_to_dev(const double* m, double* v) noexcept nogil:
    # projection of the symmetric part onto the deviatoric basis
    v[0] = (m[0] - m[4]) / SQ2
    v[1] = (m[0] + m[4] - 2.0 * m[8]) / SQ6
    v[2] = (m[1] + m[3]) / SQ2
    v[3] = (m[2] + m[6]) / SQ2
    v[4] = (m[5] + m[7]) / SQ2


cdef inline double _sinhc(double x) noexcept nogil:
    if fabs(x) < 1e-4:
        return 1.0 + x * x / 6.0 + x * x * x * x / 120.0
    return sinh(x) / x


cdef inline double _det(const double* a) noexcept nogil:
    return (a[0] * (a[4] * a[8] - a[5] * a[7])
            - a[1] * (a[3] * a[8] - a[5] * a[6])
            + a[2] * (a[3] * a[7] - a[4] * a[6]))


cdef void _eigh(const double* src, double* w, double* q) noexcept nogil:
    """Cyclic Jacobi; eigenvalues descending, eigenvectors in columns of q."""
    cdef double a[9]
    cdef int i, j, k, p, r, sweep, pi
    cdef double norm = 0.0, off, apq, theta, t, c, s, tau, g, hh, tmp
    cdef int pairs_p[3]
    cdef int pairs_q[3]
    pairs_p[0] = 0; pairs_q[0] = 1
    pairs_p[1] = 0; pairs_q[1] = 2
    pairs_p[2] = 1; pairs_q[2] = 2
    for i in range(3):
        for j in range(3):
            a[3 * i + j] = 0.5 * (src[3 * i + j] + src[3 * j + i])
            q[3 * i + j] = 1.0 if i == j else 0.0
            norm += a[3 * i + j] * a[3 * i + j]
    norm = sqrt(norm)
    for sweep in range(MAX_SWEEPS):
        off = sqrt(2.0 * (a[1] * a[1] + a[2] * a[2] + a[5] * a[5]))
        if off <= JACOBI_TOL * norm:
            break
        for pi in range(3):
            p = pairs_p[pi]
            k = pairs_q[pi]
            apq = a[3 * p + k]
            if apq == 0.0:
                continue
            theta = (a[3 * k + k] - a[3 * p + p]) / (2.0 * apq)
            if fabs(theta) > 1e150:
                t = 0.5 / theta
            else:
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
            c = 1.0 / sqrt(t * t + 1.0)
            s = t * c
            tau = s / (1.0 + c)
            a[3 * p + p] -= t * apq
            a[3 * k + k] += t * apq
            a[3 * p + k] = 0.0
            a[3 * k + p] = 0.0
            r = 3 - p - k
            g = a[3 * r + p]
            hh = a[3 * r + k]
            a[3 * r + p] = g - s * (hh + g * tau)
            a[3 * p + r] = a[3 * r + p]
            a[3 * r + k] = hh + s * (g - hh * tau)
            a[3 * k + r] = a[3 * r + k]
            for i in range(3):
                g = q[3 * i + p]
                hh = q[3 * i + k]
                q[3 * i + p] = g - s * (hh + g * tau)
                q[3 * i + k] = hh + s * (g - hh * tau)
    for i in range(3):
        w[i] = a[4 * i]
    # selection sort, descending
    for i in range(2):
        k = i
        for j in range(i + 1, 3):
            if w[j] > w[k]:
                k = j
        if k != i:
            tmp = w[i]; w[i] = w[k]; w[k] = tmp
            for j in range(3):
                tmp = q[3 * j + i]
                q[3 * j + i] = q[3 * j + k]
                q[3 * j + k] = tmp


cdef void _recompose(const double* q, const double* f, double* out) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(3):
        for j in range(i, 3):
            acc = 0.0
            for k in range(3):
                acc += f[k] * q[3 * i + k] * q[3 * j + k]
            out[3 * i + j] = acc
            out[3 * j + i] = acc


cdef void _rotate_in(const double* q, const double* m, double* out) noexcept nogil:
    # out = q^T m q
    cdef double tmp[9]
    cdef int i, j, k
    cdef double acc
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += m[3 * i + k] * q[3 * k + j]
            tmp[3 * i + j] = acc
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += q[3 * k + i] * tmp[3 * k + j]
            out[3 * i + j] = acc


cdef void _rotate_out(const double* q, const double* m, double* out) noexcept nogil:
    # out = q m q^T
    cdef double tmp[9]
    cdef int i, j, k
    cdef double acc
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += m[3 * i + k] * q[3 * j + k]
            tmp[3 * i + j] = acc
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += q[3 * i + k] * tmp[3 * k + j]
            out[3 * i + j] = acc


cdef void _exp_divdiff(const double* lam, double* gam) noexcept nogil:
    # first divided differences of exp at the eigenvalues lam
    cdef int i, j
    for i in range(3):
        for j in range(3):
            gam[3 * i + j] = exp(0.5 * (lam[i] + lam[j])) * _sinhc(0.5 * (lam[i] - lam[j]))


def eigh3(double[:, ::1] a):
    """Return (eigenvalues descending, eigenvector columns) of sym(a)."""
    w = np.empty(3)
    q = np.empty((3, 3))
    cdef double[::1] wv = w
    cdef double[:, ::1] qv = q
    _eigh(&a[0, 0], &wv[0], &qv[0, 0])
    return w, q


def sym_apply(double[:, ::1] a, int kind, double alpha=0.0):
    """Apply exp (kind 0), log (1) or power alpha (2) spectrally.

    Returns ``(status, result)``; status 1 flags a non-positive eigenvalue
    for log and power.
    """
    cdef double w[3]
    cdef double q[9]
    cdef double f[3]
    cdef int k
    out = np.empty((3, 3))
    cdef double[:, ::1] ov = out
    _eigh(&a[0, 0], w, q)
    for k in range(3):
        if kind == 0:
            f[k] = exp(w[k])
        else:
            if not w[k] > 0.0:
                return STATUS_NONSPD, None
            if kind == 1:
                f[k] = log(w[k])
            else:
                f[k] = w[k] ** alpha
    _recompose(q, f, &ov[0, 0])
    return STATUS_OK, out


def point_value_grad(double[::1] l5, double[:, ::1] c, double a, double b, double h,
                     double r_k=0.0):
    """Neo-Hookean plus log-quadratic hardening at Cp = exp(L).

    Returns ``(value, gradient)`` of
    (a/2)(C:exp(-L) - 3) - (a/2) ln det C + (b/2)(sqrt(det C) - 1)^2 + (h/4)|L|^2
    with the gradient taken in the deviatoric coordinates of L.  A positive
    ``r_k`` switches on the K-constraint on exp(L) and exp(-L).
    """
    cdef double lm[9]
    cdef double lam[3]
    cdef double mu[3]
    cdef double q[9]
    cdef double ct[9]
    cdef double gam[9]
    cdef double g[9]
    cdef double gm[9]
    cdef double gv[5]
    cdef double detc, jac, tr, val, n2, np2, nm2
    cdef int i, j
    grad = np.zeros(5)
    cdef double[::1] gr = grad
    detc = _det(&c[0, 0])
    if not detc > 0.0:
        return INFINITY, grad
    _dev_to_mat(&l5[0], lm)
    _eigh(lm, lam, q)
    if r_k > 0.0:
        np2 = 0.0
        nm2 = 0.0
        for i in range(3):
            np2 += exp(2.0 * lam[i])
            nm2 += exp(-2.0 * lam[i])
        if np2 > r_k * r_k or nm2 > r_k * r_k:
            return INFINITY, grad
    _rotate_in(q, &c[0, 0], ct)
    tr = 0.0
    for i in range(3):
        tr += exp(-lam[i]) * ct[4 * i]
    n2 = 0.0
    for i in range(5):
        n2 += l5[i] * l5[i]
    jac = sqrt(detc)
    val = 0.5 * a * (tr - 3.0) - 0.5 * a * log(detc) + 0.5 * b * (jac - 1.0) * (jac - 1.0) + 0.25 * h * n2
    for i in range(3):
        mu[i] = -lam[i]
    _exp_divdiff(mu, gam)
    for i in range(9):
        g[i] = gam[i] * ct[i]
    _rotate_out(q, g, gm)
    _mat_to_dev(gm, gv)
    for i in range(5):
        gr[i] = -0.5 * a * gv[i] + 0.5 * h * l5[i]
    return val, grad


def exp_pairing_grad(double[::1] l5, double[:, ::1] m):
    """Value M:exp(L) and its gradient in the deviatoric coordinates of L."""
    cdef double lm[9]
    cdef double lam[3]
    cdef double q[9]
    cdef double mt[9]
    cdef double gam[9]
    cdef double g[9]
    cdef double gm[9]
    cdef double gv[5]
    cdef double val = 0.0
    cdef int i
    grad = np.empty(5)
    cdef double[::1] gr = grad
    _dev_to_mat(&l5[0], lm)
    _eigh(lm, lam, q)
    _rotate_in(q, &m[0, 0], mt)
    for i in range(3):
        val += exp(lam[i]) * mt[4 * i]
    _exp_divdiff(lam, gam)
    for i in range(9):
        g[i] = gam[i] * mt[i]
    _rotate_out(q, g, gm)
    _mat_to_dev(gm, gv)
    for i in range(5):
        gr[i] = gv[i]
    return val, grad


def path_cost(double[:, ::1] nodes, double r, double[::1] gx, double[::1] gw):
    """Dissipation of the log-piecewise-linear path through ``nodes``.

    The integrand is (r/2)|Cp^{-1} dCp/dt| evaluated spectrally; ``gx`` and
    ``gw`` are Gauss nodes and weights on [0, 1].
    """
    cdef Py_ssize_t m = nodes.shape[0]
    cdef Py_ssize_t ng = gx.shape[0]
    cdef Py_ssize_t seg, k
    cdef double lv[5]
    cdef double dv[5]
    cdef double lm[9]
    cdef double hm[9]
    cdef double ht[9]
    cdef double lam[3]
    cdef double q[9]
    cdef double total = 0.0, acc, x
    cdef int i, j
    with nogil:
        for seg in range(m - 1):
            for i in range(5):
                dv[i] = nodes[seg + 1, i] - nodes[seg, i]
            _dev_to_mat(dv, hm)
            for k in range(ng):
                for i in range(5):
                    lv[i] = nodes[seg, i] + gx[k] * dv[i]
                _dev_to_mat(lv, lm)
                _eigh(lm, lam, q)
                _rotate_in(q, hm, ht)
                acc = 0.0
                for i in range(3):
                    for j in range(3):
                        x = exp(0.5 * (lam[j] - lam[i])) * _sinhc(0.5 * (lam[i] - lam[j])) * ht[3 * i + j]
                        acc += x * x
                total += gw[k] * 0.5 * r * sqrt(acc)
    return total


cdef inline double _fro(const double* a) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(9):
        s += a[i] * a[i]
    return sqrt(s)


cdef int _inv(const double* a, double* out) noexcept nogil:
    cdef double d = _det(a)
    if d == 0.0 or not isfinite(d):
        return 1
    out[0] = (a[4] * a[8] - a[5] * a[7]) / d
    out[1] = (a[2] * a[7] - a[1] * a[8]) / d
    out[2] = (a[1] * a[5] - a[2] * a[4]) / d
    out[3] = (a[5] * a[6] - a[3] * a[8]) / d
    out[4] = (a[0] * a[8] - a[2] * a[6]) / d
    out[5] = (a[2] * a[3] - a[0] * a[5]) / d
    out[6] = (a[3] * a[7] - a[4] * a[6]) / d
    out[7] = (a[1] * a[6] - a[0] * a[7]) / d
    out[8] = (a[0] * a[4] - a[1] * a[3]) / d
    return 0


cdef int _flow_rhs(const double* c, double* out) noexcept nogil:
    cdef double ci[9]
    cdef double n2 = 0.0
    cdef int i
    if _inv(c, ci):
        return 1
    for i in range(9):
        n2 += ci[i] * ci[i]
    for i in range(9):
        out[i] = -(c[i] - 3.0 * ci[i] / n2)
    return 0


cdef int _rk4(const double* c, double dt, double* out) noexcept nogil:
    """One RK4 step followed by symmetrization and det renormalization."""
    cdef double k1[9]
    cdef double k2[9]
    cdef double k3[9]
    cdef double k4[9]
    cdef double tmp[9]
    cdef double d, s
    cdef int i, j
    if _flow_rhs(c, k1):
        return 1
    for i in range(9):
        tmp[i] = c[i] + 0.5 * dt * k1[i]
    if _flow_rhs(tmp, k2):
        return 1
    for i in range(9):
        tmp[i] = c[i] + 0.5 * dt * k2[i]
    if _flow_rhs(tmp, k3):
        return 1
    for i in range(9):
        tmp[i] = c[i] + dt * k3[i]
    if _flow_rhs(tmp, k4):
        return 1
    for i in range(9):
        tmp[i] = c[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
    for i in range(3):
        for j in range(i + 1, 3):
            s = 0.5 * (tmp[3 * i + j] + tmp[3 * j + i])
            tmp[3 * i + j] = s
            tmp[3 * j + i] = s
    d = _det(tmp)
    if not (d > 0.0 and isfinite(d)):
        return 1
    # Sylvester test on the leading minors
    if not (tmp[0] > 0.0 and tmp[0] * tmp[4] - tmp[1] * tmp[3] > 0.0):
        return 1
    s = d ** (-1.0 / 3.0)
    for i in range(9):
        out[i] = tmp[i] * s
    return 0


def flow(double[:, ::1] c, double t, double h0):
    """Integrate the norm-decreasing flow up to time t; returns (status, C)."""
    out = np.array(c, copy=True)
    cdef double[:, ::1] ov = out
    cdef double cur[9]
    cdef double nxt[9]
    cdef double done = 0.0, dt
    cdef int i, failed = 0
    for i in range(9):
        cur[i] = (&c[0, 0])[i]
    with nogil:
        while done < t:
            dt = h0
            if done + dt > t:
                dt = t - done
            if _rk4(cur, dt, nxt):
                failed = 1
                break
            for i in range(9):
                cur[i] = nxt[i]
            done += dt
    if failed:
        return STATUS_INTEGRATION, None
    for i in range(9):
        (&ov[0, 0])[i] = cur[i]
    return STATUS_OK, out


def project(double[:, ::1] c, double r_k, double h0, double tol, double t_max):
    """Flow C until its norm reaches r_k; returns (status, C, hitting time)."""
    out = np.array(c, copy=True)
    cdef double[:, ::1] ov = out
    cdef double cur[9]
    cdef double nxt[9]
    cdef double t = 0.0, lo, hi, mid
    cdef int i, status = ST_OK
    for i in range(9):
        cur[i] = (&c[0, 0])[i]
    if _fro(cur) <= r_k:
        return STATUS_OK, out, 0.0
    with nogil:
        while True:
            if t > t_max:
                status = ST_MAXTIME
                break
            if _rk4(cur, h0, nxt):
                status = ST_INTEGRATION
                break
            if _fro(nxt) <= r_k:
                lo = 0.0
                hi = h0
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    if _rk4(cur, mid, nxt):
                        status = ST_INTEGRATION
                        break
                    if _fro(nxt) > r_k:
                        lo = mid
                    else:
                        hi = mid
                if status != ST_OK:
                    break
                if _rk4(cur, hi, nxt):
                    status = ST_INTEGRATION
                    break
                t += hi
                for i in range(9):
                    cur[i] = nxt[i]
                break
            for i in range(9):
                cur[i] = nxt[i]
            t += h0
    if status != ST_OK:
        return status, None, t
    for i in range(9):
        (&ov[0, 0])[i] = cur[i]
    return STATUS_OK, out, t

"""Pure-Python twin of the compiled kernels.

Same algorithms, same operation order, plain floats.  Used when the
extension is not built or when ``CPFLOW_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import math

import numpy as np

JACOBI_TOL = 1e-14
MAX_SWEEPS = 60

SQ2 = math.sqrt(2.0)
SQ6 = math.sqrt(6.0)

STATUS_OK = 0
STATUS_NONSPD = 1
STATUS_INTEGRATION = 2
STATUS_MAXTIME = 3

_PAIRS = ((0, 1), (0, 2), (1, 2))


def _dev_to_mat(v):
    m01 = v[2] / SQ2
    m02 = v[3] / SQ2
    m12 = v[4] / SQ2
    return [
        v[0] / SQ2 + v[1] / SQ6, m01, m02,
        m01, -v[0] / SQ2 + v[1] / SQ6, m12,
        m02, m12, -2.0 * v[1] / SQ6,
    ]


def _mat_to_dev(m):
    return [
        (m[0] - m[4]) / SQ2,
        (m[0] + m[4] - 2.0 * m[8]) / SQ6,
        (m[1] + m[3]) / SQ2,
        (m[2] + m[6]) / SQ2,
        (m[5] + m[7]) / SQ2,
    ]


def _sinhc(x):
    if abs(x) < 1e-4:
        return 1.0 + x * x / 6.0 + x * x * x * x / 120.0
    return math.sinh(x) / x


def _det(a):
    return (a[0] * (a[4] * a[8] - a[5] * a[7])
            - a[1] * (a[3] * a[8] - a[5] * a[6])
            + a[2] * (a[3] * a[7] - a[4] * a[6]))


def _eigh(src):
    a = [0.0] * 9
    q = [0.0] * 9
    norm = 0.0
    for i in range(3):
        for j in range(3):
            a[3 * i + j] = 0.5 * (src[3 * i + j] + src[3 * j + i])
            q[3 * i + j] = 1.0 if i == j else 0.0
            norm += a[3 * i + j] * a[3 * i + j]
    norm = math.sqrt(norm)
    for _ in range(MAX_SWEEPS):
        off = math.sqrt(2.0 * (a[1] * a[1] + a[2] * a[2] + a[5] * a[5]))
        if off <= JACOBI_TOL * norm:
            break
        for p, k in _PAIRS:
            apq = a[3 * p + k]
            if apq == 0.0:
                continue
            theta = (a[3 * k + k] - a[3 * p + p]) / (2.0 * apq)
            if abs(theta) > 1e150:
                t = 0.5 / theta
            else:
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
            c = 1.0 / math.sqrt(t * t + 1.0)
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
    w = [a[0], a[4], a[8]]
    for i in range(2):
        k = i
        for j in range(i + 1, 3):
            if w[j] > w[k]:
                k = j
        if k != i:
            w[i], w[k] = w[k], w[i]
            for j in range(3):
                q[3 * j + i], q[3 * j + k] = q[3 * j + k], q[3 * j + i]
    return w, q


def _recompose(q, f):
    out = [0.0] * 9
    for i in range(3):
        for j in range(i, 3):
            acc = 0.0
            for k in range(3):
                acc += f[k] * q[3 * i + k] * q[3 * j + k]
            out[3 * i + j] = acc
            out[3 * j + i] = acc
    return out


def _rotate_in(q, m):
    tmp = [0.0] * 9
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += m[3 * i + k] * q[3 * k + j]
            tmp[3 * i + j] = acc
    out = [0.0] * 9
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += q[3 * k + i] * tmp[3 * k + j]
            out[3 * i + j] = acc
    return out


def _rotate_out(q, m):
    tmp = [0.0] * 9
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += m[3 * i + k] * q[3 * j + k]
            tmp[3 * i + j] = acc
    out = [0.0] * 9
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += q[3 * i + k] * tmp[3 * k + j]
            out[3 * i + j] = acc
    return out


def _exp_divdiff(lam):
    return [math.exp(0.5 * (lam[i] + lam[j])) * _sinhc(0.5 * (lam[i] - lam[j]))
            for i in range(3) for j in range(3)]


def _flat(a):
    return np.asarray(a, dtype=float).ravel().tolist()


def eigh3(a):
    w, q = _eigh(_flat(a))
    return np.array(w), np.array(q).reshape(3, 3)


def sym_apply(a, kind, alpha=0.0):
    w, q = _eigh(_flat(a))
    f = [0.0] * 3
    for k in range(3):
        if kind == 0:
            f[k] = math.exp(w[k])
        else:
            if not w[k] > 0.0:
                return STATUS_NONSPD, None
            f[k] = math.log(w[k]) if kind == 1 else w[k] ** alpha
    return STATUS_OK, np.array(_recompose(q, f)).reshape(3, 3)


def point_value_grad(l5, c, a, b, h, r_k=0.0):
    l5 = _flat(l5)
    cf = _flat(c)
    grad = np.zeros(5)
    detc = _det(cf)
    if not detc > 0.0:
        return math.inf, grad
    lam, q = _eigh(_dev_to_mat(l5))
    if r_k > 0.0:
        np2 = 0.0
        nm2 = 0.0
        for i in range(3):
            np2 += math.exp(2.0 * lam[i])
            nm2 += math.exp(-2.0 * lam[i])
        if np2 > r_k * r_k or nm2 > r_k * r_k:
            return math.inf, grad
    ct = _rotate_in(q, cf)
    tr = 0.0
    for i in range(3):
        tr += math.exp(-lam[i]) * ct[4 * i]
    n2 = 0.0
    for i in range(5):
        n2 += l5[i] * l5[i]
    jac = math.sqrt(detc)
    val = 0.5 * a * (tr - 3.0) - 0.5 * a * math.log(detc) + 0.5 * b * (jac - 1.0) * (jac - 1.0) + 0.25 * h * n2
    gam = _exp_divdiff([-x for x in lam])
    gm = _rotate_out(q, [gam[i] * ct[i] for i in range(9)])
    gv = _mat_to_dev(gm)
    for i in range(5):
        grad[i] = -0.5 * a * gv[i] + 0.5 * h * l5[i]
    return val, grad


def exp_pairing_grad(l5, m):
    lam, q = _eigh(_dev_to_mat(_flat(l5)))
    mt = _rotate_in(q, _flat(m))
    val = 0.0
    for i in range(3):
        val += math.exp(lam[i]) * mt[4 * i]
    gam = _exp_divdiff(lam)
    gm = _rotate_out(q, [gam[i] * mt[i] for i in range(9)])
    return val, np.array(_mat_to_dev(gm))


def path_cost(nodes, r, gx, gw):
    nodes = np.asarray(nodes, dtype=float).tolist()
    gx = list(gx)
    gw = list(gw)
    total = 0.0
    for seg in range(len(nodes) - 1):
        dv = [nodes[seg + 1][i] - nodes[seg][i] for i in range(5)]
        hm = _dev_to_mat(dv)
        for k in range(len(gx)):
            lv = [nodes[seg][i] + gx[k] * dv[i] for i in range(5)]
            lam, q = _eigh(_dev_to_mat(lv))
            ht = _rotate_in(q, hm)
            acc = 0.0
            for i in range(3):
                for j in range(3):
                    x = math.exp(0.5 * (lam[j] - lam[i])) * _sinhc(0.5 * (lam[i] - lam[j])) * ht[3 * i + j]
                    acc += x * x
            total += gw[k] * 0.5 * r * math.sqrt(acc)
    return total


def _fro(a):
    s = 0.0
    for x in a:
        s += x * x
    return math.sqrt(s)


def _inv(a):
    d = _det(a)
    if d == 0.0 or not math.isfinite(d):
        return None
    return [
        (a[4] * a[8] - a[5] * a[7]) / d,
        (a[2] * a[7] - a[1] * a[8]) / d,
        (a[1] * a[5] - a[2] * a[4]) / d,
        (a[5] * a[6] - a[3] * a[8]) / d,
        (a[0] * a[8] - a[2] * a[6]) / d,
        (a[2] * a[3] - a[0] * a[5]) / d,
        (a[3] * a[7] - a[4] * a[6]) / d,
        (a[1] * a[6] - a[0] * a[7]) / d,
        (a[0] * a[4] - a[1] * a[3]) / d,
    ]


def _flow_rhs(c):
    ci = _inv(c)
    if ci is None:
        return None
    n2 = 0.0
    for x in ci:
        n2 += x * x
    return [-(c[i] - 3.0 * ci[i] / n2) for i in range(9)]


def _rk4(c, dt):
    k1 = _flow_rhs(c)
    if k1 is None:
        return None
    k2 = _flow_rhs([c[i] + 0.5 * dt * k1[i] for i in range(9)])
    if k2 is None:
        return None
    k3 = _flow_rhs([c[i] + 0.5 * dt * k2[i] for i in range(9)])
    if k3 is None:
        return None
    k4 = _flow_rhs([c[i] + dt * k3[i] for i in range(9)])
    if k4 is None:
        return None
    tmp = [c[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0 for i in range(9)]
    for i in range(3):
        for j in range(i + 1, 3):
            s = 0.5 * (tmp[3 * i + j] + tmp[3 * j + i])
            tmp[3 * i + j] = s
            tmp[3 * j + i] = s
    d = _det(tmp)
    if not (d > 0.0 and math.isfinite(d)):
        return None
    if not (tmp[0] > 0.0 and tmp[0] * tmp[4] - tmp[1] * tmp[3] > 0.0):
        return None
    s = d ** (-1.0 / 3.0)
    return [x * s for x in tmp]


def flow(c, t, h0):
    cur = _flat(c)
    done = 0.0
    while done < t:
        dt = h0
        if done + dt > t:
            dt = t - done
        cur = _rk4(cur, dt)
        if cur is None:
            return STATUS_INTEGRATION, None
        done += dt
    return STATUS_OK, np.array(cur).reshape(3, 3)


def project(c, r_k, h0, tol, t_max):
    cur = _flat(c)
    if _fro(cur) <= r_k:
        return STATUS_OK, np.array(cur).reshape(3, 3), 0.0
    t = 0.0
    while True:
        if t > t_max:
            return STATUS_MAXTIME, None, t
        nxt = _rk4(cur, h0)
        if nxt is None:
            return STATUS_INTEGRATION, None, t
        if _fro(nxt) <= r_k:
            lo, hi = 0.0, h0
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                trial = _rk4(cur, mid)
                if trial is None:
                    return STATUS_INTEGRATION, None, t
                if _fro(trial) > r_k:
                    lo = mid
                else:
                    hi = mid
            nxt = _rk4(cur, hi)
            if nxt is None:
                return STATUS_INTEGRATION, None, t
            return STATUS_OK, np.array(nxt).reshape(3, 3), t + hi
        cur = nxt
        t += h0

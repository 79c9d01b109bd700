# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric hot kernels.

Mirrors ``pykernels`` operation for operation; see that module for the
reference semantics and docstrings.
"""

from libc.math cimport sqrt, INFINITY

import numpy as np

NAME = "c"


def iou_matrix(boxes_a, boxes_b):
    a_arr = np.ascontiguousarray(np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4))
    b_arr = np.ascontiguousarray(np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4))
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] b = b_arr
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t n = b.shape[0]
    out_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double l1, t1, r1, b1, l2, t2, r2, b2, area1, iw, ih, inter, union
    for i in range(m):
        l1 = a[i, 0]; t1 = a[i, 1]; r1 = a[i, 2]; b1 = a[i, 3]
        area1 = (r1 - l1) * (b1 - t1)
        for j in range(n):
            l2 = b[j, 0]; t2 = b[j, 1]; r2 = b[j, 2]; b2 = b[j, 3]
            iw = min(r1, r2) - max(l1, l2)
            if iw <= 0.0:
                continue
            ih = min(b1, b2) - max(t1, t2)
            if ih <= 0.0:
                continue
            inter = iw * ih
            union = area1 + (r2 - l2) * (b2 - t2) - inter
            out[i, j] = inter / union
    return out_arr


def rle_intersection(counts_a, counts_b):
    ca_arr = np.ascontiguousarray(np.asarray(counts_a, dtype=np.int64))
    cb_arr = np.ascontiguousarray(np.asarray(counts_b, dtype=np.int64))
    cdef long long[::1] ca = ca_arr
    cdef long long[::1] cb = cb_arr
    cdef Py_ssize_t na = ca.shape[0]
    cdef Py_ssize_t nb = cb.shape[0]
    if na == 0 or nb == 0:
        return 0
    cdef long long inter = 0
    cdef Py_ssize_t ia = 0, ib = 0
    cdef long long ra = ca[0]
    cdef long long rb = cb[0]
    cdef long long step
    while True:
        while ra == 0:
            ia += 1
            if ia >= na:
                return int(inter)
            ra = ca[ia]
        while rb == 0:
            ib += 1
            if ib >= nb:
                return int(inter)
            rb = cb[ib]
        step = ra if ra < rb else rb
        if (ia & 1) and (ib & 1):
            inter += step
        ra -= step
        rb -= step


def lap_solve(cost):
    c_arr = np.ascontiguousarray(np.asarray(cost, dtype=np.float64))
    cdef double[:, ::1] c = c_arr
    cdef Py_ssize_t n = c.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    if n == 0:
        return out_arr
    u_arr = np.zeros(n + 1, dtype=np.float64)
    v_arr = np.zeros(n + 1, dtype=np.float64)
    p_arr = np.zeros(n + 1, dtype=np.int64)
    way_arr = np.zeros(n + 1, dtype=np.int64)
    minv_arr = np.zeros(n + 1, dtype=np.float64)
    used_arr = np.zeros(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef long long[::1] p = p_arr
    cdef long long[::1] way = way_arr
    cdef double[::1] minv = minv_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double ui, cur, delta
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            ui = u[i0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    for j in range(1, n + 1):
        out[p[j] - 1] = j - 1
    return out_arr


cdef void _chol4(double S[4][4], double L[4][4]) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(4):
        for j in range(4):
            L[i][j] = 0.0
    for i in range(4):
        for j in range(i + 1):
            s = S[i][j]
            for k in range(j):
                s -= L[i][k] * L[j][k]
            if i == j:
                if s < 1e-18:
                    s = 1e-18
                L[i][j] = sqrt(s)
            else:
                L[i][j] = s / L[j][j]


cdef void _chol4_solve(double L[4][4], double b[4], double x[4]) noexcept nogil:
    cdef double y[4]
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(4):
        s = b[i]
        for k in range(i):
            s -= L[i][k] * y[k]
        y[i] = s / L[i][i]
    for i in range(3, -1, -1):
        s = y[i]
        for k in range(i + 1, 4):
            s -= L[k][i] * x[k]
        x[i] = s / L[i][i]


def kf_predict(mean, cov, q_diag):
    m_arr = np.ascontiguousarray(np.asarray(mean, dtype=np.float64))
    P_arr = np.ascontiguousarray(np.asarray(cov, dtype=np.float64))
    q_arr = np.ascontiguousarray(np.asarray(q_diag, dtype=np.float64))
    cdef double[::1] m = m_arr
    cdef double[:, ::1] P = P_arr
    cdef double[::1] q = q_arr
    om_arr = np.empty(8, dtype=np.float64)
    oP_arr = np.empty((8, 8), dtype=np.float64)
    cdef double[::1] om = om_arr
    cdef double[:, ::1] oP = oP_arr
    cdef Py_ssize_t i, j
    cdef double val
    for i in range(4):
        om[i] = m[i] + m[i + 4]
        om[i + 4] = m[i + 4]
    for i in range(8):
        for j in range(8):
            val = P[i, j]
            if i < 4 and j < 4:
                val = val + P[i, j + 4] + P[i + 4, j] + P[i + 4, j + 4]
            elif i < 4:
                val = val + P[i + 4, j]
            elif j < 4:
                val = val + P[i, j + 4]
            oP[i, j] = val
    for i in range(8):
        oP[i, i] += q[i]
    return om_arr, oP_arr


def kf_update(mean, cov, z, r_diag):
    m_arr = np.ascontiguousarray(np.asarray(mean, dtype=np.float64))
    P_arr = np.ascontiguousarray(np.asarray(cov, dtype=np.float64))
    z_arr = np.ascontiguousarray(np.asarray(z, dtype=np.float64))
    r_arr = np.ascontiguousarray(np.asarray(r_diag, dtype=np.float64))
    cdef double[::1] m = m_arr
    cdef double[:, ::1] P = P_arr
    cdef double[::1] zz = z_arr
    cdef double[::1] r = r_arr
    om_arr = np.empty(8, dtype=np.float64)
    oP_arr = np.empty((8, 8), dtype=np.float64)
    cdef double[::1] om = om_arr
    cdef double[:, ::1] oP = oP_arr
    cdef double y[4]
    cdef double S[4][4]
    cdef double L[4][4]
    cdef double K[8][4]
    cdef double A[8][8]
    cdef double AP[8][8]
    cdef double b4[4]
    cdef double kx[4]
    cdef Py_ssize_t i, j, k
    cdef double s, val
    for k in range(4):
        y[k] = zz[k] - m[k]
    for i in range(4):
        for j in range(4):
            S[i][j] = P[i, j] + (r[i] if i == j else 0.0)
    _chol4(S, L)
    for i in range(8):
        for k in range(4):
            b4[k] = P[i, k]
        _chol4_solve(L, b4, kx)
        for k in range(4):
            K[i][k] = kx[k]
    for i in range(8):
        om[i] = m[i] + K[i][0] * y[0] + K[i][1] * y[1] + K[i][2] * y[2] + K[i][3] * y[3]
    for i in range(8):
        for j in range(8):
            val = 1.0 if i == j else 0.0
            if j < 4:
                val -= K[i][j]
            A[i][j] = val
    for i in range(8):
        for j in range(8):
            s = 0.0
            for k in range(8):
                s += A[i][k] * P[k, j]
            AP[i][j] = s
    for i in range(8):
        for j in range(8):
            s = 0.0
            for k in range(8):
                s += AP[i][k] * A[j][k]
            for k in range(4):
                s += K[i][k] * r[k] * K[j][k]
            oP[i, j] = s
    for i in range(8):
        for j in range(i):
            val = 0.5 * (oP[i, j] + oP[j, i])
            oP[i, j] = val
            oP[j, i] = val
    return om_arr, oP_arr


def kf_gating(mean, cov, z, r_diag):
    m_arr = np.ascontiguousarray(np.asarray(mean, dtype=np.float64))
    P_arr = np.ascontiguousarray(np.asarray(cov, dtype=np.float64))
    z_arr = np.ascontiguousarray(np.asarray(z, dtype=np.float64))
    r_arr = np.ascontiguousarray(np.asarray(r_diag, dtype=np.float64))
    cdef double[::1] m = m_arr
    cdef double[:, ::1] P = P_arr
    cdef double[::1] zz = z_arr
    cdef double[::1] r = r_arr
    cdef double S[4][4]
    cdef double L[4][4]
    cdef double w[4]
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(4):
        for j in range(4):
            S[i][j] = P[i, j] + (r[i] if i == j else 0.0)
    _chol4(S, L)
    for i in range(4):
        s = zz[i] - m[i]
        for k in range(i):
            s -= L[i][k] * w[k]
        w[i] = s / L[i][i]
    return w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]


def gating_matrix(means, covs, r_diags, zs):
    ms_arr = np.ascontiguousarray(np.asarray(means, dtype=np.float64))
    Ps_arr = np.ascontiguousarray(np.asarray(covs, dtype=np.float64))
    rs_arr = np.ascontiguousarray(np.asarray(r_diags, dtype=np.float64))
    zs_arr = np.ascontiguousarray(np.asarray(zs, dtype=np.float64).reshape(-1, 4))
    cdef double[:, ::1] ms = ms_arr
    cdef double[:, :, ::1] Ps = Ps_arr
    cdef double[:, ::1] rs = rs_arr
    cdef double[:, ::1] zl = zs_arr
    cdef Py_ssize_t t = ms.shape[0]
    cdef Py_ssize_t d = zl.shape[0]
    out_arr = np.zeros((t, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double S[4][4]
    cdef double L[4][4]
    cdef double w[4]
    cdef Py_ssize_t ti, di, i, j, k
    cdef double s
    for ti in range(t):
        for i in range(4):
            for j in range(4):
                S[i][j] = Ps[ti, i, j] + (rs[ti, i] if i == j else 0.0)
        _chol4(S, L)
        for di in range(d):
            for i in range(4):
                s = zl[di, i] - ms[ti, i]
                for k in range(i):
                    s -= L[i][k] * w[k]
                w[i] = s / L[i][i]
            out[ti, di] = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]
    return out_arr

"""Pure-Python reference implementations of the numeric hot kernels.

These mirror the compiled Cython kernels (``_ckern.pyx``) operation for
operation so that the two backends stay numerically interchangeable. NumPy
is only used at the boundary; the inner loops are plain Python on purpose,
this is the correctness-first fallback path.

Kernel surface:
    iou_matrix(boxes_a, boxes_b)        pairwise box IoU
    rle_intersection(counts_a, counts_b) foreground overlap of two RLE masks
    lap_solve(cost)                      optimal square assignment (JV)
    kf_predict(mean, cov, q_diag)        constant-velocity Kalman predict
    kf_update(mean, cov, z, r_diag)      Joseph-form Kalman update
    kf_gating(mean, cov, z, r_diag)      squared Mahalanobis distance
    gating_matrix(means, covs, r_diags, zs) batched gating distances
"""

from __future__ import annotations

import math

import numpy as np

NAME = "python"


def iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU of (m, 4) and (n, 4) arrays of (l, t, r, b) boxes."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    m, n = a.shape[0], b.shape[0]
    out = np.zeros((m, n), dtype=np.float64)
    al = a.tolist()
    bl = b.tolist()
    for i in range(m):
        l1, t1, r1, b1 = al[i]
        area1 = (r1 - l1) * (b1 - t1)
        for j in range(n):
            l2, t2, r2, b2 = bl[j]
            iw = min(r1, r2) - max(l1, l2)
            if iw <= 0.0:
                continue
            ih = min(b1, b2) - max(t1, t2)
            if ih <= 0.0:
                continue
            inter = iw * ih
            union = area1 + (r2 - l2) * (b2 - t2) - inter
            out[i, j] = inter / union
    return out


def rle_intersection(counts_a, counts_b) -> int:
    """Foreground overlap in pixels of two run-length masks of equal geometry.

    Runs alternate background/foreground starting with background; zero-length
    runs are permitted anywhere.
    """
    ca = [int(c) for c in counts_a]
    cb = [int(c) for c in counts_b]
    if not ca or not cb:
        return 0
    inter = 0
    ia, ib = 0, 0
    ra, rb = ca[0], cb[0]
    while True:
        while ra == 0:
            ia += 1
            if ia >= len(ca):
                return inter
            ra = ca[ia]
        while rb == 0:
            ib += 1
            if ib >= len(cb):
                return inter
            rb = cb[ib]
        step = ra if ra < rb else rb
        if (ia & 1) and (ib & 1):
            inter += step
        ra -= step
        rb -= step


def lap_solve(cost):
    """Optimal assignment on a square cost matrix (Jonker-Volgenant style).

    Returns an int64 array mapping row index -> column index. Deterministic:
    rows are augmented in order and ties resolve toward the lowest column.
    """
    c = np.asarray(cost, dtype=np.float64)
    n = c.shape[0]
    out = np.empty(n, dtype=np.int64)
    if n == 0:
        return out
    rows = c.tolist()
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j] = row assigned to column j (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            ui = u[i0]
            row = rows[i0 - 1]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui - v[j]
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
    return out


# The Kalman state is 8-dimensional: (cx, cy, aspect, height) plus their
# per-frame velocities. The transition is x' = x + v; the measurement is the
# four position components.


def kf_predict(mean, cov, q_diag):
    """Constant-velocity predict: positions += velocities, P <- F P F^T + Q."""
    m = np.asarray(mean, dtype=np.float64).tolist()
    P = np.asarray(cov, dtype=np.float64).tolist()
    q = np.asarray(q_diag, dtype=np.float64).tolist()
    om = [0.0] * 8
    for i in range(4):
        om[i] = m[i] + m[i + 4]
        om[i + 4] = m[i + 4]
    oP = [[0.0] * 8 for _ in range(8)]
    for i in range(8):
        for j in range(8):
            val = P[i][j]
            if i < 4 and j < 4:
                val = val + P[i][j + 4] + P[i + 4][j] + P[i + 4][j + 4]
            elif i < 4:
                val = val + P[i + 4][j]
            elif j < 4:
                val = val + P[i][j + 4]
            oP[i][j] = val
    for i in range(8):
        oP[i][i] += q[i]
    return np.array(om), np.array(oP)


def _chol4(S):
    """Lower Cholesky factor of a 4x4 SPD matrix (tiny diagonal clamp)."""
    L = [[0.0] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(i + 1):
            s = S[i][j]
            for k in range(j):
                s -= L[i][k] * L[j][k]
            if i == j:
                if s < 1e-18:
                    s = 1e-18
                L[i][j] = math.sqrt(s)
            else:
                L[i][j] = s / L[j][j]
    return L


def _chol4_solve(L, b):
    """Solve (L L^T) x = b for a 4-vector b."""
    y = [0.0] * 4
    for i in range(4):
        s = b[i]
        for k in range(i):
            s -= L[i][k] * y[k]
        y[i] = s / L[i][i]
    x = [0.0] * 4
    for i in range(3, -1, -1):
        s = y[i]
        for k in range(i + 1, 4):
            s -= L[k][i] * x[k]
        x[i] = s / L[i][i]
    return x


def kf_update(mean, cov, z, r_diag):
    """Measurement update on the four position components (Joseph form)."""
    m = np.asarray(mean, dtype=np.float64).tolist()
    P = np.asarray(cov, dtype=np.float64).tolist()
    zz = np.asarray(z, dtype=np.float64).tolist()
    r = np.asarray(r_diag, dtype=np.float64).tolist()
    y = [zz[k] - m[k] for k in range(4)]
    S = [[P[i][j] + (r[i] if i == j else 0.0) for j in range(4)] for i in range(4)]
    L = _chol4(S)
    # K = P[:, :4] @ S^-1; row i of K solves S k_i = P[i][:4] (S symmetric)
    K = [_chol4_solve(L, P[i][:4]) for i in range(8)]
    om = [m[i] + K[i][0] * y[0] + K[i][1] * y[1] + K[i][2] * y[2] + K[i][3] * y[3] for i in range(8)]
    # A = I - K H, nontrivial only in the first four columns
    A = [[(1.0 if i == j else 0.0) - (K[i][j] if j < 4 else 0.0) for j in range(8)] for i in range(8)]
    AP = [[0.0] * 8 for _ in range(8)]
    for i in range(8):
        Ai = A[i]
        for j in range(8):
            s = 0.0
            for k in range(8):
                s += Ai[k] * P[k][j]
            AP[i][j] = s
    oP = [[0.0] * 8 for _ in range(8)]
    for i in range(8):
        APi = AP[i]
        Ki = K[i]
        for j in range(8):
            s = 0.0
            Aj = A[j]
            for k in range(8):
                s += APi[k] * Aj[k]
            Kj = K[j]
            for k in range(4):
                s += Ki[k] * r[k] * Kj[k]
            oP[i][j] = s
    for i in range(8):
        for j in range(i):
            v = 0.5 * (oP[i][j] + oP[j][i])
            oP[i][j] = v
            oP[j][i] = v
    return np.array(om), np.array(oP)


def kf_gating(mean, cov, z, r_diag) -> float:
    """Squared Mahalanobis distance of a measurement from the state."""
    m = np.asarray(mean, dtype=np.float64).tolist()
    P = np.asarray(cov, dtype=np.float64).tolist()
    zz = np.asarray(z, dtype=np.float64).tolist()
    r = np.asarray(r_diag, dtype=np.float64).tolist()
    y = [zz[k] - m[k] for k in range(4)]
    S = [[P[i][j] + (r[i] if i == j else 0.0) for j in range(4)] for i in range(4)]
    L = _chol4(S)
    w = [0.0] * 4
    for i in range(4):
        s = y[i]
        for k in range(i):
            s -= L[i][k] * w[k]
        w[i] = s / L[i][i]
    return w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]


def gating_matrix(means, covs, r_diags, zs):
    """Squared Mahalanobis distances of each measurement from each state.

    means (t, 8), covs (t, 8, 8), r_diags (t, 4), zs (d, 4) -> (t, d).
    """
    ms = np.asarray(means, dtype=np.float64)
    Ps = np.asarray(covs, dtype=np.float64)
    rs = np.asarray(r_diags, dtype=np.float64)
    zl = np.asarray(zs, dtype=np.float64).reshape(-1, 4).tolist()
    t, d = ms.shape[0], len(zl)
    out = np.zeros((t, d), dtype=np.float64)
    for ti in range(t):
        m = ms[ti].tolist()
        P = Ps[ti].tolist()
        r = rs[ti].tolist()
        S = [[P[i][j] + (r[i] if i == j else 0.0) for j in range(4)] for i in range(4)]
        L = _chol4(S)
        for di in range(d):
            z = zl[di]
            w = [0.0] * 4
            for i in range(4):
                s = z[i] - m[i]
                for k in range(i):
                    s -= L[i][k] * w[k]
                w[i] = s / L[i][i]
            out[ti, di] = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]
    return out

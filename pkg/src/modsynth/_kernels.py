"""Compiled kernels for signed distance between convex polytopes.

Disjoint pairs get their Euclidean distance from GJK.  When GJK reports
contact, the penetration depth (length of the minimal separating
translation) is the smallest interval overlap of the separating-axis test
over face normals and edge-edge cross products, which is exact for
polytopes.
"""
import numba
import numpy as np

_AXIS_EPS = 1e-9
_GJK_MAX_ITER = 128


@numba.njit(cache=True)
def _project(V, nv, u):
    lo = np.inf
    hi = -np.inf
    for i in range(nv):
        val = V[i, 0] * u[0] + V[i, 1] * u[1] + V[i, 2] * u[2]
        if val < lo:
            lo = val
        if val > hi:
            hi = val
    return lo, hi


@numba.njit(cache=True)
def _axis_overlap(VA, na, VB, nb, u):
    alo, ahi = _project(VA, na, u)
    blo, bhi = _project(VB, nb, u)
    o1 = ahi - blo
    o2 = bhi - alo
    return o1 if o1 < o2 else o2


@numba.njit(cache=True)
def sat_min_overlap(VA, na, NA, nfa, EA, nea, VB, nb, NB, nfb, EB, neb):
    """Smallest interval overlap over all candidate separating axes.

    Negative means a separating axis exists.
    """
    best = np.inf
    for i in range(nfa):
        o = _axis_overlap(VA, na, VB, nb, NA[i])
        if o < best:
            best = o
    for i in range(nfb):
        o = _axis_overlap(VA, na, VB, nb, NB[i])
        if o < best:
            best = o
    u = np.empty(3)
    for i in range(nea):
        for j in range(neb):
            u[0] = EA[i, 1] * EB[j, 2] - EA[i, 2] * EB[j, 1]
            u[1] = EA[i, 2] * EB[j, 0] - EA[i, 0] * EB[j, 2]
            u[2] = EA[i, 0] * EB[j, 1] - EA[i, 1] * EB[j, 0]
            norm = np.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
            if norm < _AXIS_EPS:
                continue
            u /= norm
            o = _axis_overlap(VA, na, VB, nb, u)
            if o < best:
                best = o
    return best


@numba.njit(cache=True)
def _det3(M):
    return (
        M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
        - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
        + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
    )


@numba.njit(cache=True)
def _solve_small(G, rhs, m, lam):
    """Cramer's rule for the m x m Gram system (m <= 3); fills barycentric ``lam``."""
    scale = 0.0
    for r in range(m):
        scale = max(scale, G[r, r])
    if scale == 0.0:
        return False
    if m == 1:
        mu0 = rhs[0] / G[0, 0]
        lam[1] = mu0
        lam[0] = 1.0 - mu0
        return True
    if m == 2:
        det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        if abs(det) <= 1e-14 * scale * scale:
            return False
        mu0 = (rhs[0] * G[1, 1] - G[0, 1] * rhs[1]) / det
        mu1 = (G[0, 0] * rhs[1] - rhs[0] * G[1, 0]) / det
        lam[1] = mu0
        lam[2] = mu1
        lam[0] = 1.0 - mu0 - mu1
        return True
    det = _det3(G)
    if abs(det) <= 1e-14 * scale * scale * scale:
        return False
    s = 0.0
    M = np.empty((3, 3))
    for col in range(3):
        M[:, :] = G
        for r in range(3):
            M[r, col] = rhs[r]
        lam[col + 1] = _det3(M) / det
        s += lam[col + 1]
    lam[0] = 1.0 - s
    return True


@numba.njit(cache=True)
def _closest_on_simplex(W, nw, out_v, keep, G, rhs, E, lam, idx):
    """Closest point to the origin in conv(W[:nw]).

    Brute force over every subset: project the origin on the subset's affine
    hull and keep the smallest-norm projection with non-negative barycentric
    weights.  Writes the point into ``out_v`` and the support mask into
    ``keep``; returns the number of supporting points.  The remaining
    arguments are scratch buffers.
    """
    best = np.inf
    best_mask = 0
    bx = 0.0
    by = 0.0
    bz = 0.0
    for mask in range(1, 1 << nw):
        k = 0
        for i in range(nw):
            if mask & (1 << i):
                idx[k] = i
                k += 1
        i0 = idx[0]
        m = k - 1
        if m == 0:
            lam[0] = 1.0
        else:
            for r in range(m):
                for c in range(3):
                    E[r, c] = W[idx[r + 1], c] - W[i0, c]
            for r in range(m):
                rhs[r] = -(E[r, 0] * W[i0, 0] + E[r, 1] * W[i0, 1] + E[r, 2] * W[i0, 2])
                for c in range(m):
                    G[r, c] = E[r, 0] * E[c, 0] + E[r, 1] * E[c, 1] + E[r, 2] * E[c, 2]
            if not _solve_small(G, rhs, m, lam):
                continue
        neg = False
        for r in range(k):
            if lam[r] < -1e-13:
                neg = True
                break
        if neg:
            continue
        px = 0.0
        py = 0.0
        pz = 0.0
        for r in range(k):
            px += lam[r] * W[idx[r], 0]
            py += lam[r] * W[idx[r], 1]
            pz += lam[r] * W[idx[r], 2]
        dist = px * px + py * py + pz * pz
        if dist < best:
            best = dist
            best_mask = mask
            bx = px
            by = py
            bz = pz
    out_v[0] = bx
    out_v[1] = by
    out_v[2] = bz
    n_keep = 0
    for i in range(nw):
        keep[i] = (best_mask >> i) & 1
        n_keep += keep[i]
    return n_keep


@numba.njit(cache=True)
def _support_dot(V, nv, dx, dy, dz):
    best = 0
    best_val = V[0, 0] * dx + V[0, 1] * dy + V[0, 2] * dz
    for i in range(1, nv):
        val = V[i, 0] * dx + V[i, 1] * dy + V[i, 2] * dz
        if val > best_val:
            best_val = val
            best = i
    return best


@numba.njit(cache=True)
def gjk_distance(VA, na, VB, nb):
    """Euclidean distance between conv(VA) and conv(VB); 0 when they overlap."""
    W = np.empty((4, 3))
    keep = np.zeros(4, dtype=np.int64)
    v = np.empty(3)
    G = np.empty((3, 3))
    rhs = np.empty(3)
    E = np.empty((3, 3))
    lam = np.empty(4)
    idx = np.empty(4, dtype=np.int64)
    for c in range(3):
        v[c] = VA[0, c] - VB[0, c]
    nw = 0
    for _ in range(_GJK_MAX_ITER):
        vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
        if vv <= 1e-30:
            return 0.0
        ia = _support_dot(VA, na, -v[0], -v[1], -v[2])
        ib = _support_dot(VB, nb, v[0], v[1], v[2])
        w0 = VA[ia, 0] - VB[ib, 0]
        w1 = VA[ia, 1] - VB[ib, 1]
        w2 = VA[ia, 2] - VB[ib, 2]
        if vv - (v[0] * w0 + v[1] * w1 + v[2] * w2) <= 1e-14 * vv:
            break
        dup = False
        for i in range(nw):
            if W[i, 0] == w0 and W[i, 1] == w1 and W[i, 2] == w2:
                dup = True
        if dup:
            break
        W[nw, 0] = w0
        W[nw, 1] = w1
        W[nw, 2] = w2
        nw += 1
        n_keep = _closest_on_simplex(W, nw, v, keep, G, rhs, E, lam, idx)
        if n_keep == 4:
            return 0.0
        k = 0
        for i in range(nw):
            if keep[i]:
                for c in range(3):
                    W[k, c] = W[i, c]
                k += 1
        nw = k
    return np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@numba.njit(cache=True)
def signed_distance_kernel(VA, na, NA, nfa, EA, nea, VB, nb, NB, nfb, EB, neb):
    dist = gjk_distance(VA, na, VB, nb)
    if dist > 0.0:
        return dist
    # touching or overlapping: depth is the smallest SAT overlap
    return -sat_min_overlap(VA, na, NA, nfa, EA, nea, VB, nb, NB, nfb, EB, neb)


@numba.njit(cache=True)
def link_obstacle_distances(LV, LA, OV, onv, ON, onf, OE, one):
    """Signed distances for every (link, obstacle) pair, link-major order.

    ``LV`` holds link box vertices ``(L, 8, 3)`` and ``LA`` their axes
    ``(L, 3, 3)``; obstacle arrays are padded with per-obstacle counts.
    """
    n_links = LV.shape[0]
    n_obs = OV.shape[0]
    out = np.empty(n_links * n_obs)
    for i in range(n_links):
        for k in range(n_obs):
            out[i * n_obs + k] = signed_distance_kernel(
                LV[i], 8, LA[i], 3, LA[i], 3, OV[k], onv[k], ON[k], onf[k], OE[k], one[k]
            )
    return out


@numba.njit(cache=True)
def link_link_distances(LV, LA, pairs):
    out = np.empty(pairs.shape[0])
    for p in range(pairs.shape[0]):
        i = pairs[p, 0]
        k = pairs[p, 1]
        out[p] = signed_distance_kernel(LV[i], 8, LA[i], 3, LA[i], 3, LV[k], 8, LA[k], 3, LA[k], 3)
    return out


_CORNERS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)


@numba.njit(cache=True)
def link_boxes(a, alpha, d, q, width, V, A):
    """Fill link box vertices ``V (n, 8, 3)`` and axes ``A (n, 3, 3)`` for joint vector ``q``.

    Compiled twin of ``geometry._link_boxes`` for the solver loop.
    """
    n = a.shape[0]
    R = np.eye(3)
    p = np.zeros(3)
    Rn = np.empty((3, 3))
    pn = np.empty(3)
    u = np.empty(3)
    v = np.empty(3)
    w = np.empty(3)
    for i in range(n):
        ct, st = np.cos(q[i]), np.sin(q[i])
        ca, sa = np.cos(alpha[i]), np.sin(alpha[i])
        L00, L01, L02 = ct, -st * ca, st * sa
        L10, L11, L12 = st, ct * ca, -ct * sa
        L20, L21, L22 = 0.0, sa, ca
        for r in range(3):
            Rn[r, 0] = R[r, 0] * L00 + R[r, 1] * L10 + R[r, 2] * L20
            Rn[r, 1] = R[r, 0] * L01 + R[r, 1] * L11 + R[r, 2] * L21
            Rn[r, 2] = R[r, 0] * L02 + R[r, 1] * L12 + R[r, 2] * L22
            pn[r] = p[r] + R[r, 0] * (a[i] * ct) + R[r, 1] * (a[i] * st) + R[r, 2] * d[i]
        L = np.sqrt(a[i] * a[i] + d[i] * d[i])
        if L < 1e-12:
            for r in range(3):
                u[r] = Rn[r, 0]
                v[r] = R[r, 2]
        else:
            for r in range(3):
                u[r] = (d[i] * R[r, 2] + a[i] * Rn[r, 0]) / L
                v[r] = (d[i] * Rn[r, 0] - a[i] * R[r, 2]) / L
        w[0] = v[1] * u[2] - v[2] * u[1]
        w[1] = v[2] * u[0] - v[0] * u[2]
        w[2] = v[0] * u[1] - v[1] * u[0]
        seg = 0.0
        for r in range(3):
            seg += (pn[r] - p[r]) ** 2
        h0 = 0.5 * max(np.sqrt(seg), width)
        h1 = 0.5 * width
        for r in range(3):
            A[i, 0, r] = u[r]
            A[i, 1, r] = w[r]
            A[i, 2, r] = v[r]
        for c in range(8):
            for r in range(3):
                V[i, c, r] = (
                    0.5 * (p[r] + pn[r])
                    + _CORNERS[c, 0] * h0 * u[r]
                    + _CORNERS[c, 1] * h1 * w[r]
                    + _CORNERS[c, 2] * h1 * v[r]
                )
        R[:, :] = Rn
        p[:] = pn


@numba.njit(cache=True)
def _bounding_sphere(V, nv, c):
    c[:] = 0.0
    for i in range(nv):
        for r in range(3):
            c[r] += V[i, r]
    for r in range(3):
        c[r] /= nv
    rad = 0.0
    for i in range(nv):
        s = 0.0
        for r in range(3):
            s += (V[i, r] - c[r]) ** 2
        rad = max(rad, s)
    return np.sqrt(rad)


@numba.njit(cache=True)
def _sphere_gap(c1, r1, c2, r2):
    s = 0.0
    for r in range(3):
        s += (c1[r] - c2[r]) ** 2
    return np.sqrt(s) - r1 - r2


@numba.njit(cache=True)
def config_distances(a, alpha, d, q, width, OV, onv, ON, onf, OE, one, pairs, cutoff):
    """Link-obstacle distances (link-major) followed by link-link pair distances.

    Values below ``cutoff`` are exact.  A pair whose bounding spheres are at
    least ``cutoff`` apart gets the sphere gap instead, which is a lower
    bound on its distance; ``cutoff = inf`` makes every value exact.
    """
    n = a.shape[0]
    V = np.empty((n, 8, 3))
    A = np.empty((n, 3, 3))
    link_boxes(a, alpha, d, q, width, V, A)
    n_obs = OV.shape[0]
    LC = np.empty((n, 3))
    LR = np.empty(n)
    for i in range(n):
        LR[i] = _bounding_sphere(V[i], 8, LC[i])
    OC = np.empty((n_obs, 3))
    OR = np.empty(n_obs)
    for k in range(n_obs):
        OR[k] = _bounding_sphere(OV[k], onv[k], OC[k])
    out = np.empty(n * n_obs + pairs.shape[0])
    for i in range(n):
        for k in range(n_obs):
            gap = _sphere_gap(LC[i], LR[i], OC[k], OR[k])
            if gap >= cutoff:
                out[i * n_obs + k] = gap
            else:
                out[i * n_obs + k] = signed_distance_kernel(
                    V[i], 8, A[i], 3, A[i], 3, OV[k], onv[k], ON[k], onf[k], OE[k], one[k]
                )
    for p in range(pairs.shape[0]):
        i = pairs[p, 0]
        k = pairs[p, 1]
        gap = _sphere_gap(LC[i], LR[i], LC[k], LR[k])
        if gap >= cutoff:
            out[n * n_obs + p] = gap
        else:
            out[n * n_obs + p] = signed_distance_kernel(V[i], 8, A[i], 3, A[i], 3, V[k], 8, A[k], 3, A[k], 3)
    return out


# -- design-vector level kernels used by the inner solver ----------------------


@numba.njit(cache=True)
def _wrap(x):
    return np.pi - np.mod(np.pi - x, 2.0 * np.pi)


@numba.njit(cache=True)
def end_frame(a, alpha, d, q, R, p):
    """Write the end-frame rotation and position of the chain into ``R``, ``p``."""
    R[:, :] = 0.0
    R[0, 0] = 1.0
    R[1, 1] = 1.0
    R[2, 2] = 1.0
    p[:] = 0.0
    Rn = np.empty((3, 3))
    for i in range(a.shape[0]):
        ct, st = np.cos(q[i]), np.sin(q[i])
        ca, sa = np.cos(alpha[i]), np.sin(alpha[i])
        for r in range(3):
            p[r] += R[r, 0] * (a[i] * ct) + R[r, 1] * (a[i] * st) + R[r, 2] * d[i]
            Rn[r, 0] = R[r, 0] * ct + R[r, 1] * st
            Rn[r, 1] = -R[r, 0] * st * ca + R[r, 1] * ct * ca + R[r, 2] * sa
            Rn[r, 2] = R[r, 0] * st * sa - R[r, 1] * ct * sa + R[r, 2] * ca
        R[:, :] = Rn


@numba.njit(cache=True)
def euler_zyx(R, out):
    h = np.hypot(R[0, 0], R[1, 0])
    out[1] = np.arctan2(-R[2, 0], h)
    if h < 1e-12:
        out[0] = np.arctan2(-R[0, 1], R[1, 1])
        out[2] = 0.0
    else:
        out[0] = np.arctan2(R[1, 0], R[0, 0])
        out[2] = np.arctan2(R[2, 1], R[2, 2])
    for k in range(3):
        out[k] = _wrap(out[k])


@numba.njit(cache=True)
def pose_terms(x, n, n_tsl, P, O, Wt):
    """``(P_err, O_err)`` of design vector ``x`` against desired poses."""
    a = x[:n]
    alpha = x[n : 2 * n]
    d = x[2 * n : 3 * n]
    R = np.empty((3, 3))
    p = np.empty(3)
    e = np.empty(3)
    p_err = 0.0
    o_err = 0.0
    for j in range(n_tsl):
        q = x[3 * n + j * n : 3 * n + (j + 1) * n]
        end_frame(a, alpha, d, q, R, p)
        for k in range(3):
            p_err += (P[j, k] - p[k]) ** 2
        if Wt[j, 0] + Wt[j, 1] + Wt[j, 2] > 0.0:
            euler_zyx(R, e)
            for k in range(3):
                o_err += Wt[j, k] * _wrap(O[j, k] - e[k]) ** 2
    return p_err, o_err


@numba.njit(cache=True)
def merit(x, n, n_tsl, P, O, Wt):
    p_err, o_err = pose_terms(x, n, n_tsl, P, O, Wt)
    return p_err + o_err


@numba.njit(cache=True)
def merit_grad(x, n, n_tsl, P, O, Wt, h):
    f0 = merit(x, n, n_tsl, P, O, Wt)
    g = np.empty(x.shape[0])
    xk = x.copy()
    for k in range(x.shape[0]):
        xk[k] = x[k] + h[k]
        g[k] = (merit(xk, n, n_tsl, P, O, Wt) - f0) / h[k]
        xk[k] = x[k]
    return g


@numba.njit(cache=True)
def constraint_block(x, n, j, width, delta, OV, onv, ON, onf, OE, one, pairs):
    q = x[3 * n + j * n : 3 * n + (j + 1) * n].copy()
    dist = config_distances(x[:n], x[n : 2 * n], x[2 * n : 3 * n], q, width, OV, onv, ON, onf, OE, one, pairs, np.inf)
    return delta - dist


@numba.njit(cache=True)
def constraints(x, n, n_tsl, width, delta, OV, onv, ON, onf, OE, one, pairs):
    m = n * OV.shape[0] + pairs.shape[0]
    out = np.empty(m * n_tsl)
    for j in range(n_tsl):
        out[j * m : (j + 1) * m] = constraint_block(x, n, j, width, delta, OV, onv, ON, onf, OE, one, pairs)
    return out


@numba.njit(cache=True)
def constraint_jac(x, n, n_tsl, width, delta, OV, onv, ON, onf, OE, one, pairs, h):
    """Forward-difference Jacobian; ``theta[:, j]`` columns only touch block ``j``."""
    m = n * OV.shape[0] + pairs.shape[0]
    J = np.zeros((m * n_tsl, x.shape[0]))
    if m == 0:
        return J
    base = constraints(x, n, n_tsl, width, delta, OV, onv, ON, onf, OE, one, pairs)
    xk = x.copy()
    for k in range(x.shape[0]):
        xk[k] = x[k] + h[k]
        if k < 3 * n:
            for j in range(n_tsl):
                blk = constraint_block(xk, n, j, width, delta, OV, onv, ON, onf, OE, one, pairs)
                for r in range(m):
                    J[j * m + r, k] = (blk[r] - base[j * m + r]) / h[k]
        else:
            j = (k - 3 * n) // n
            blk = constraint_block(xk, n, j, width, delta, OV, onv, ON, onf, OE, one, pairs)
            for r in range(m):
                J[j * m + r, k] = (blk[r] - base[j * m + r]) / h[k]
        xk[k] = x[k]
    return J

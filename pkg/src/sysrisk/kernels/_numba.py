"""numba kernels, parallel across paths.

Every value stays ``uint64`` inside the hashing code: mixing a signed and an
unsigned 64-bit integer promotes to float64 in numba and silently destroys
the bit pattern.
"""
import numpy as np
from numba import njit, prange

from ..rng import AS241_A, AS241_B, AS241_C, AS241_D, AS241_E, AS241_F

_A = np.array(AS241_A)
_B = np.array(AS241_B)
_C = np.array(AS241_C)
_D = np.array(AS241_D)
_E = np.array(AS241_E)
_F = np.array(AS241_F)

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
TWO_M53 = 2.0 ** -53


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def path_key(key, p):
    return mix64(key ^ mix64((np.uint64(p) + np.uint64(1)) * GOLDEN))


@njit(cache=True, inline="always")
def _uniform(pkey, ctr):
    bits = mix64(pkey + (ctr + np.uint64(1)) * GOLDEN)
    return (np.float64(bits >> np.uint64(11)) + 0.5) * TWO_M53


@njit(cache=True, inline="always")
def _horner(c, r):
    return (((((((c[7] * r + c[6]) * r + c[5]) * r + c[4]) * r + c[3]) * r + c[2]) * r
             + c[1]) * r + c[0])


@njit(cache=True, inline="always")
def ndtri(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _horner(_A, r) / _horner(_B, r)
    r = p if q < 0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        x = _horner(_C, r) / _horner(_D, r)
    else:
        r = r - 5.0
        x = _horner(_E, r) / _horner(_F, r)
    return -x if q < 0 else x


@njit(cache=True, inline="always")
def _fill_normals(pkey, step, slots, z):
    base = np.uint64(step) * np.uint64(slots)
    for k in range(slots):
        z[k] = ndtri(_uniform(pkey, base + np.uint64(k)))


@njit(cache=True)
def normals_for_steps(pkey, steps, slots):
    out = np.empty((steps.shape[0], slots))
    for k in range(steps.shape[0]):
        _fill_normals(np.uint64(pkey), steps[k], slots, out[k])
    return out


@njit(cache=True, inline="always")
def _defaulted(g, h, level):
    # for D = 0 compare logs directly: exp(G) - exp(H) < 0  <=>  G < H
    if level == 0.0:
        return g < h
    return np.exp(g) - np.exp(h) < level


@njit(cache=True, parallel=True)
def simulate_system(G0, H0, alive0, n_paths, key, times, ca, cg, drift_a, drift_l,
                    sig_a, sig_l, ra_c, ra_i, rl_c, rl_i, default_level,
                    detect, retain, rec_idx):
    n = G0.shape[0]
    n_steps = ca.shape[0]
    slots = 2 * n + 2
    n_rec = rec_idx.shape[0]
    G = np.empty((n_paths, n))
    H = np.empty((n_paths, n))
    alive = np.empty((n_paths, n), dtype=np.bool_)
    dtime = np.full((n_paths, n), np.nan)
    valid = np.ones(n_paths, dtype=np.bool_)
    trG = np.empty((n_paths, n_rec, n))
    trH = np.empty((n_paths, n_rec, n))
    ukey = np.uint64(key)
    for p in prange(n_paths):
        g = G[p]
        h = H[p]
        al = alive[p]
        for i in range(n):
            g[i] = G0[i]
            h[i] = H0[i]
            al[i] = alive0[i]
        # banks that take part in the dynamics: all of them when failed
        # banks are retained, otherwise only the alive ones
        act = np.empty(n, dtype=np.bool_)
        z = np.empty(slots)
        pk = path_key(ukey, p)
        ri = 0
        if n_rec > 0 and rec_idx[0] == 0:
            for i in range(n):
                trG[p, 0, i] = g[i]
                trH[p, 0, i] = h[i]
            ri = 1
        for s in range(n_steps):
            first = -1
            for i in range(n):
                act[i] = retain or al[i]
                if first < 0 and act[i]:
                    first = i
            if first < 0:
                break
            _fill_normals(pk, s, slots, z)
            refg = g[first]
            refh = h[first]
            sg = 0.0
            sh = 0.0
            na = 0.0
            for k in range(n):
                if act[k]:
                    sg = sg + (g[k] - refg)
                    sh = sh + (h[k] - refh)
                    na = na + 1.0
            wa = ra_c[s] * z[0]
            wl = rl_c[s] * z[n + 1]
            dt = times[s + 1] - times[s]
            # every bank reads the pre-step state through sg, sh, refg, refh
            bad = False
            for i in range(n):
                if act[i]:
                    coop_g = ca[s] * (sg - na * (g[i] - refg))
                    coop_h = cg[s] * (sh - na * (h[i] - refh))
                    dW = wa + ra_i[s] * z[1 + i]
                    dZ = wl + rl_i[s] * z[n + 2 + i]
                    g[i] = g[i] + coop_g * dt + drift_a[s] * dt + sig_a[s] * dW
                    h[i] = h[i] + coop_h * dt + drift_l[s] * dt + sig_l[s] * dZ
                    if not (np.isfinite(g[i]) and np.isfinite(h[i])):
                        bad = True
            if bad:
                valid[p] = False
                break
            if detect:
                t_new = times[s + 1]
                for i in range(n):
                    if al[i] and _defaulted(g[i], h[i], default_level):
                        al[i] = False
                        dtime[p, i] = t_new
            if ri < n_rec and rec_idx[ri] == s + 1:
                for i in range(n):
                    trG[p, ri, i] = g[i]
                    trH[p, ri, i] = h[i]
                ri += 1
        # stopped paths repeat their last state in the remaining records
        while ri < n_rec:
            for i in range(n):
                trG[p, ri, i] = g[i]
                trH[p, ri, i] = h[i]
            ri += 1
    return G, H, alive, dtime, valid, trG, trH


@njit(cache=True, parallel=True)
def simulate_pmf(n_paths, key, times, a_zz, a_zs, b_ss, b_sz, sig_a, sig_l, sqdt, rec_idx):
    n_steps = a_zz.shape[0]
    n_rec = rec_idx.shape[0]
    Z = np.zeros(n_paths)
    S = np.zeros(n_paths)
    valid = np.ones(n_paths, dtype=np.bool_)
    trZ = np.empty((n_paths, n_rec))
    trS = np.empty((n_paths, n_rec))
    ukey = np.uint64(key)
    for p in prange(n_paths):
        z = np.empty(2)
        pk = path_key(ukey, p)
        x = 0.0
        y = 0.0
        ri = 0
        if n_rec > 0 and rec_idx[0] == 0:
            trZ[p, 0] = x
            trS[p, 0] = y
            ri = 1
        for s in range(n_steps):
            _fill_normals(pk, s, 2, z)
            dt = times[s + 1] - times[s]
            xn = x + (-a_zz[s] * x - a_zs[s] * y) * dt + sig_a[s] * (sqdt[s] * z[0])
            yn = y + (-b_ss[s] * y - b_sz[s] * x) * dt + sig_l[s] * (sqdt[s] * z[1])
            x = xn
            y = yn
            if not (np.isfinite(x) and np.isfinite(y)):
                valid[p] = False
                break
            if ri < n_rec and rec_idx[ri] == s + 1:
                trZ[p, ri] = x
                trS[p, ri] = y
                ri += 1
        while ri < n_rec:
            trZ[p, ri] = x
            trS[p, ri] = y
            ri += 1
        Z[p] = x
        S[p] = y
    return Z, S, valid, trZ, trS


@njit(cache=True, parallel=True)
def simulate_mf(n_paths, key, times, alpha, gamma, sig_a, sig_l, sqdt, rec_idx):
    n_steps = alpha.shape[0]
    n_rec = rec_idx.shape[0]
    Z = np.zeros(n_paths)
    S = np.zeros(n_paths)
    valid = np.ones(n_paths, dtype=np.bool_)
    trZ = np.empty((n_paths, n_rec))
    trS = np.empty((n_paths, n_rec))
    ukey = np.uint64(key)
    for p in prange(n_paths):
        z = np.empty(2)
        pk = path_key(ukey, p)
        x = 0.0
        y = 0.0
        ri = 0
        if n_rec > 0 and rec_idx[0] == 0:
            trZ[p, 0] = x
            trS[p, 0] = y
            ri = 1
        for s in range(n_steps):
            _fill_normals(pk, s, 2, z)
            dt = times[s + 1] - times[s]
            xn = x + (-alpha[s] * x) * dt + sig_a[s] * (sqdt[s] * z[0])
            yn = y + (-gamma[s] * y) * dt + sig_l[s] * (sqdt[s] * z[1])
            x = xn
            y = yn
            if not (np.isfinite(x) and np.isfinite(y)):
                valid[p] = False
                break
            if ri < n_rec and rec_idx[ri] == s + 1:
                trZ[p, ri] = x
                trS[p, ri] = y
                ri += 1
        while ri < n_rec:
            trZ[p, ri] = x
            trS[p, ri] = y
            ri += 1
        Z[p] = x
        S[p] = y
    return Z, S, valid, trZ, trS


@njit(cache=True, inline="always")
def _rhs_a(a, c, l1, l2, l3, rr, ra):
    return -(a * a / l1 + c * c / (4.0 * l2) - rr - l3 * (1.0 - ra))


@njit(cache=True, inline="always")
def _rhs_b(b, c, l1, l2, l4, rr, rl):
    return -(b * b / l2 + c * c / (4.0 * l1) - rr - l4 * (1.0 - rl))


@njit(cache=True, inline="always")
def _rhs_c(a, b, c, l1, l2, rr):
    return -(a * c / l1 + b * c / l2 + 2.0 * rr)


@njit(cache=True)
def rk4_riccati(l1, l2, l3, l4, ra, rl, sa2, sl2, T1, n_steps, bound):
    h = T1 / n_steps
    rr = ra * rl
    a = np.zeros(n_steps + 1)
    b = np.zeros(n_steps + 1)
    c = np.zeros(n_steps + 1)
    d = np.zeros(n_steps + 1)
    for k in range(n_steps):
        x = a[k]
        y = b[k]
        w = c[k]
        k1a = _rhs_a(x, w, l1, l2, l3, rr, ra)
        k1b = _rhs_b(y, w, l1, l2, l4, rr, rl)
        k1c = _rhs_c(x, y, w, l1, l2, rr)
        x2 = x + 0.5 * h * k1a
        y2 = y + 0.5 * h * k1b
        w2 = w + 0.5 * h * k1c
        k2a = _rhs_a(x2, w2, l1, l2, l3, rr, ra)
        k2b = _rhs_b(y2, w2, l1, l2, l4, rr, rl)
        k2c = _rhs_c(x2, y2, w2, l1, l2, rr)
        x3 = x + 0.5 * h * k2a
        y3 = y + 0.5 * h * k2b
        w3 = w + 0.5 * h * k2c
        k3a = _rhs_a(x3, w3, l1, l2, l3, rr, ra)
        k3b = _rhs_b(y3, w3, l1, l2, l4, rr, rl)
        k3c = _rhs_c(x3, y3, w3, l1, l2, rr)
        x4 = x + h * k3a
        y4 = y + h * k3b
        w4 = w + h * k3c
        k4a = _rhs_a(x4, w4, l1, l2, l3, rr, ra)
        k4b = _rhs_b(y4, w4, l1, l2, l4, rr, rl)
        k4c = _rhs_c(x4, y4, w4, l1, l2, rr)
        e1 = x * sa2 + y * sl2
        e2 = x2 * sa2 + y2 * sl2
        e3 = x3 * sa2 + y3 * sl2
        e4 = x4 * sa2 + y4 * sl2
        a[k + 1] = x + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        b[k + 1] = y + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        c[k + 1] = w + h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        d[k + 1] = d[k] + h / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4)
        ok = (abs(a[k + 1]) <= bound and abs(b[k + 1]) <= bound
              and abs(c[k + 1]) <= bound and np.isfinite(d[k + 1]))
        if not ok:
            return a, b, c, d, k + 1
    return a, b, c, d, n_steps

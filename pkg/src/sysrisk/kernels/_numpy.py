"""Pure-numpy kernels, vectorized across paths.

Arithmetic follows the numba kernels operation by operation so the two
backends agree to rounding in the transcendental functions.
"""
import numpy as np

from ..rng import AS241_A, AS241_B, AS241_C, AS241_D, AS241_E, AS241_F

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
ONE = np.uint64(1)
TWO_M53 = 2.0 ** -53


def mix64(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
        return z ^ (z >> np.uint64(31))


def path_keys(key, n_paths):
    p = np.arange(n_paths, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) ^ mix64((p + ONE) * GOLDEN))


def _uniform(pkey, ctr):
    with np.errstate(over="ignore"):
        bits = mix64(pkey + (ctr + ONE) * GOLDEN)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * TWO_M53


def _horner(c, r):
    acc = c[7]
    for k in range(6, -1, -1):
        acc = acc * r + c[k]
    return acc


def ndtri(p):
    """Vectorized AS241 inverse normal CDF, same operation order as the scalar code."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    central = np.abs(q) <= 0.425
    r = 0.180625 - q * q
    x_c = q * _horner(AS241_A, r) / _horner(AS241_B, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        rt = np.where(q < 0, p, 1.0 - p)
        rt = np.sqrt(-np.log(np.where(central, 0.5, rt)))
    near = rt <= 5.0
    r1 = rt - 1.6
    r2 = rt - 5.0
    x_t = np.where(near, _horner(AS241_C, r1) / _horner(AS241_D, r1),
                   _horner(AS241_E, r2) / _horner(AS241_F, r2))
    x_t = np.where(q < 0, -x_t, x_t)
    return np.where(central, x_c, x_t)


def _fill_normals(pkeys, step, slots, out):
    """Write the ``slots`` normals of ``step`` for every path into ``out``."""
    base = np.uint64(step) * np.uint64(slots)
    for k in range(slots):
        out[:, k] = ndtri(_uniform(pkeys, base + np.uint64(k)))


def normals_for_steps(pkey, steps, slots):
    """Normals of one path for the given step indices, shape (len(steps), slots)."""
    steps = np.asarray(steps, dtype=np.uint64)
    out = np.empty((steps.size, slots))
    base = steps * np.uint64(slots)
    pk = np.uint64(pkey)
    for k in range(slots):
        out[:, k] = ndtri(_uniform(pk, base + np.uint64(k)))
    return out


def _defaulted(G, H, level):
    if level == 0.0:
        return G < H
    return np.exp(G) - np.exp(H) < level


def simulate_system(G0, H0, alive0, n_paths, key, times, ca, cg, drift_a, drift_l,
                    sig_a, sig_l, ra_c, ra_i, rl_c, rl_i, default_level,
                    detect, retain, rec_idx):
    n = G0.shape[0]
    n_steps = ca.shape[0]
    slots = 2 * n + 2
    P = n_paths
    G = np.tile(G0, (P, 1))
    H = np.tile(H0, (P, 1))
    alive = np.tile(alive0, (P, 1))
    dtime = np.full((P, n), np.nan)
    valid = np.ones(P, dtype=np.bool_)
    n_rec = rec_idx.shape[0]
    trG = np.empty((P, n_rec, n))
    trH = np.empty((P, n_rec, n))
    ri = 0
    if n_rec > 0 and rec_idx[0] == 0:
        trG[:, 0] = G
        trH[:, 0] = H
        ri = 1
    pkeys = path_keys(key, P)
    z = np.empty((P, slots))
    rows = np.arange(P)
    for s in range(n_steps):
        part = np.ones((P, n), dtype=np.bool_) if retain else alive.copy()
        part &= valid[:, None]
        run = part.any(axis=1)
        if not run.any():
            break
        _fill_normals(pkeys, s, slots, z)
        # first participating bank is the reference level for the sums
        first = np.argmax(part, axis=1)
        refg = G[rows, first]
        refh = H[rows, first]
        sg = np.zeros(P)
        sh = np.zeros(P)
        na = np.zeros(P)
        for k in range(n):
            m = part[:, k]
            sg = np.where(m, sg + (G[:, k] - refg), sg)
            sh = np.where(m, sh + (H[:, k] - refh), sh)
            na = np.where(m, na + 1.0, na)
        wa = ra_c[s] * z[:, 0]
        wl = rl_c[s] * z[:, n + 1]
        dt = times[s + 1] - times[s]
        for i in range(n):
            upd = part[:, i]
            coop_g = ca[s] * (sg - na * (G[:, i] - refg))
            coop_h = cg[s] * (sh - na * (H[:, i] - refh))
            dW = wa + ra_i[s] * z[:, 1 + i]
            dZ = wl + rl_i[s] * z[:, n + 2 + i]
            g_new = G[:, i] + coop_g * dt + drift_a[s] * dt + sig_a[s] * dW
            h_new = H[:, i] + coop_h * dt + drift_l[s] * dt + sig_l[s] * dZ
            G[:, i] = np.where(upd, g_new, G[:, i])
            H[:, i] = np.where(upd, h_new, H[:, i])
        bad = run & ~(np.isfinite(G).all(axis=1) & np.isfinite(H).all(axis=1))
        valid &= ~bad
        if detect:
            t_new = times[s + 1]
            hit = alive & (run & ~bad)[:, None] & _defaulted(G, H, default_level)
            alive &= ~hit
            dtime = np.where(hit, t_new, dtime)
        if ri < n_rec and rec_idx[ri] == s + 1:
            trG[:, ri] = G
            trH[:, ri] = H
            ri += 1
    for k in range(ri, n_rec):
        trG[:, k] = G
        trH[:, k] = H
    return G, H, alive, dtime, valid, trG, trH


def simulate_pmf(n_paths, key, times, a_zz, a_zs, b_ss, b_sz, sig_a, sig_l, sqdt, rec_idx):
    """dZ = -(a_zz Z + a_zs S) dt + sig_a dP ;  dS = -(b_ss S + b_sz Z) dt + sig_l dQ."""
    P = n_paths
    n_steps = a_zz.shape[0]
    Z = np.zeros(P)
    S = np.zeros(P)
    valid = np.ones(P, dtype=np.bool_)
    n_rec = rec_idx.shape[0]
    trZ = np.empty((P, n_rec))
    trS = np.empty((P, n_rec))
    ri = 0
    if n_rec > 0 and rec_idx[0] == 0:
        trZ[:, 0] = Z
        trS[:, 0] = S
        ri = 1
    pkeys = path_keys(key, P)
    z = np.empty((P, 2))
    for s in range(n_steps):
        _fill_normals(pkeys, s, 2, z)
        dt = times[s + 1] - times[s]
        zn = Z + (-a_zz[s] * Z - a_zs[s] * S) * dt + sig_a[s] * (sqdt[s] * z[:, 0])
        sn = S + (-b_ss[s] * S - b_sz[s] * Z) * dt + sig_l[s] * (sqdt[s] * z[:, 1])
        Z = np.where(valid, zn, Z)
        S = np.where(valid, sn, S)
        valid &= np.isfinite(Z) & np.isfinite(S)
        if ri < n_rec and rec_idx[ri] == s + 1:
            trZ[:, ri] = Z
            trS[:, ri] = S
            ri += 1
    return Z, S, valid, trZ, trS


def simulate_mf(n_paths, key, times, alpha, gamma, sig_a, sig_l, sqdt, rec_idx):
    """dZ = -alpha Z dt + sig_a dP ;  dS = -gamma S dt + sig_l dQ."""
    P = n_paths
    n_steps = alpha.shape[0]
    Z = np.zeros(P)
    S = np.zeros(P)
    valid = np.ones(P, dtype=np.bool_)
    n_rec = rec_idx.shape[0]
    trZ = np.empty((P, n_rec))
    trS = np.empty((P, n_rec))
    ri = 0
    if n_rec > 0 and rec_idx[0] == 0:
        trZ[:, 0] = Z
        trS[:, 0] = S
        ri = 1
    pkeys = path_keys(key, P)
    z = np.empty((P, 2))
    for s in range(n_steps):
        _fill_normals(pkeys, s, 2, z)
        dt = times[s + 1] - times[s]
        zn = Z + (-alpha[s] * Z) * dt + sig_a[s] * (sqdt[s] * z[:, 0])
        sn = S + (-gamma[s] * S) * dt + sig_l[s] * (sqdt[s] * z[:, 1])
        Z = np.where(valid, zn, Z)
        S = np.where(valid, sn, S)
        valid &= np.isfinite(Z) & np.isfinite(S)
        if ri < n_rec and rec_idx[ri] == s + 1:
            trZ[:, ri] = Z
            trS[:, ri] = S
            ri += 1
    return Z, S, valid, trZ, trS


def _riccati_rhs(a, b, c, l1, l2, l3, l4, rr, ra, rl):
    # right-hand side in reversed time tau = T1 - t (sign flipped)
    da = -(a * a / l1 + c * c / (4.0 * l2) - rr - l3 * (1.0 - ra))
    db = -(b * b / l2 + c * c / (4.0 * l1) - rr - l4 * (1.0 - rl))
    dc = -(a * c / l1 + b * c / l2 + 2.0 * rr)
    return da, db, dc


def rk4_riccati(l1, l2, l3, l4, ra, rl, sa2, sl2, T1, n_steps, bound):
    """Integrate the value-function coefficients from tau = 0 (t = T1) to tau = T1.

    Returns arrays indexed by tau-step and the number of completed steps;
    integration stops early when a coefficient leaves [-bound, bound] or
    becomes non-finite.
    """
    h = T1 / n_steps
    rr = ra * rl
    a = np.zeros(n_steps + 1)
    b = np.zeros(n_steps + 1)
    c = np.zeros(n_steps + 1)
    d = np.zeros(n_steps + 1)
    for k in range(n_steps):
        x, y, w = a[k], b[k], c[k]
        k1 = _riccati_rhs(x, y, w, l1, l2, l3, l4, rr, ra, rl)
        k2 = _riccati_rhs(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], w + 0.5 * h * k1[2],
                          l1, l2, l3, l4, rr, ra, rl)
        k3 = _riccati_rhs(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], w + 0.5 * h * k2[2],
                          l1, l2, l3, l4, rr, ra, rl)
        k4 = _riccati_rhs(x + h * k3[0], y + h * k3[1], w + h * k3[2],
                          l1, l2, l3, l4, rr, ra, rl)
        # d depends on a, b only: dd/dtau = a sa2 + b sl2
        e1 = x * sa2 + y * sl2
        e2 = (x + 0.5 * h * k1[0]) * sa2 + (y + 0.5 * h * k1[1]) * sl2
        e3 = (x + 0.5 * h * k2[0]) * sa2 + (y + 0.5 * h * k2[1]) * sl2
        e4 = (x + h * k3[0]) * sa2 + (y + h * k3[1]) * sl2
        a[k + 1] = x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        b[k + 1] = y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        c[k + 1] = w + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        d[k + 1] = d[k] + h / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4)
        ok = (abs(a[k + 1]) <= bound and abs(b[k + 1]) <= bound
              and abs(c[k + 1]) <= bound and np.isfinite(d[k + 1]))
        if not ok:
            return a, b, c, d, k + 1
    return a, b, c, d, n_steps

"""Counter-based random streams.

Every standard normal used by the simulators is a pure function of
``(stream key, path index, step index, slot index)``; no generator state is
carried between draws. This makes path-parallel execution order independent
and lets candidates share noise exactly (common random numbers).

Scheme
------
``mix64`` is the SplitMix64 finalizer. With ``GOLDEN = 0x9E3779B97F4A7C15``
and all arithmetic modulo 2**64::

    path_key(key, p)  = mix64(key ^ mix64((p + 1) * GOLDEN))
    bits(pk, c)       = mix64(pk + (c + 1) * GOLDEN)
    uniform(pk, c)    = (bits(pk, c) >> 11) * 2**-53             in [0, 1)

A step with ``S`` slots uses counters ``n*S .. n*S + S - 1``; slot ``k``
is the standard normal ``ndtri(u)`` with the open-interval uniform::

    u = ((bits(pk, n*S + k) >> 11) + 0.5) * 2**-53                in (0, 1)

and ``ndtri`` the inverse normal CDF evaluated with Wichura's AS241
rational approximations (relative accuracy about 1e-16).

The functions here are the scalar reference; the kernels reimplement the
same arithmetic in numba and vectorized numpy.
"""
from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
TWO_M53 = 2.0 ** -53

# stream tags for derive_key
TAG_PATHS = 1
TAG_INNER = 2
TAG_OUTER = 3
TAG_BASELINE = 4
TAG_PMF = 5


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *words: int) -> int:
    """Fold a master seed and any number of integer labels into a 64-bit key."""
    key = mix64((seed & MASK64) + GOLDEN)
    for w in words:
        key = mix64(key ^ mix64(((w & MASK64) + 1) * GOLDEN))
    return key


def path_key(key: int, path: int) -> int:
    return mix64(key ^ mix64((path + 1) * GOLDEN))


def uniform(pkey: int, counter: int) -> float:
    return ((mix64(pkey + (counter + 1) * GOLDEN) >> 11) + 0.5) * TWO_M53


# AS241 (PPND16) coefficients, highest degree last
AS241_A = (3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
           1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
           3.3430575583588128105e+4, 2.5090809287301226727e+3)
AS241_B = (1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2, 5.3941960214247511077e+3,
           2.1213794301586595867e+4, 3.9307895800092710610e+4, 2.8729085735721942674e+4,
           5.2264952788528545610e+3)
AS241_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
           3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
           2.27238449892691845833e-2, 7.74545014278341407640e-4)
AS241_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
           1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
           1.05075007164441684324e-9)
AS241_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
           2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
           2.71155556874348757815e-5, 2.01033439929228813265e-7)
AS241_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
           7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
           2.04426310338993978564e-15)


def _horner(c, r):
    acc = c[7]
    for k in range(6, -1, -1):
        acc = acc * r + c[k]
    return acc


def ndtri(p: float) -> float:
    """Inverse standard normal CDF for ``0 < p < 1`` (scalar reference)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _horner(AS241_A, r) / _horner(AS241_B, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        x = _horner(AS241_C, r) / _horner(AS241_D, r)
    else:
        r = r - 5.0
        x = _horner(AS241_E, r) / _horner(AS241_F, r)
    return -x if q < 0 else x


def normals(pkey: int, step: int, slots: int) -> list[float]:
    """Scalar reference for the ``slots`` normals of one step of one path."""
    base = step * slots
    return [ndtri(uniform(pkey, base + k)) for k in range(slots)]


class CounterStream:
    """Sequential view of one path's counter stream.

    Each call to :meth:`standard_normal` consumes whole steps, so the values
    line up with what the simulation kernels draw for the same path.
    Mirrors the ``numpy.random.Generator.standard_normal`` call shape.
    """

    def __init__(self, key: int, path: int = 0, step: int = 0):
        self.key = key
        self.path = path
        self.step = step
        self._pkey = path_key(key, path)

    def standard_normal(self, size) -> np.ndarray:
        from .kernels import numpy_backend

        shape = (size,) if np.isscalar(size) else tuple(size)
        slots = shape[-1]
        n_steps = int(np.prod(shape[:-1], dtype=np.int64)) if len(shape) > 1 else 1
        steps = np.arange(self.step, self.step + n_steps, dtype=np.uint64)
        z = numpy_backend.normals_for_steps(np.uint64(self._pkey), steps, slots)
        self.step += n_steps
        return z.reshape(shape)

"""splitmix64 primitives as numba kernels (uint64 arithmetic).

Bit-identical to the python twin in ``_rng_py``.  State is np.uint64;
unsigned wraparound replaces the explicit masking of the python version.
Only imported when the numba backend is active.
"""

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_K1 = np.uint64(0xBF58476D1CE4E5B9)
_K2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0xD1342543DE82EF95)

_INV_2_53 = 2.0 ** -53


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _K1
    z = (z ^ (z >> np.uint64(27))) * _K2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def next_u01(state):
    state = state + GOLDEN
    z = mix64(state)
    return state, np.float64(z >> np.uint64(11)) * _INV_2_53


@njit(cache=True)
def site_u01(seed, site):
    su = np.uint64(site)  # two's-complement wrap for negative sites
    z = mix64(seed + su * GOLDEN)
    return np.float64(z >> np.uint64(11)) * _INV_2_53


@njit(cache=True)
def stream_for(seed, k):
    h = mix64(np.uint64(k) * GOLDEN + _STREAM_SALT)
    return mix64(seed + h)

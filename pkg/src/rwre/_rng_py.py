"""splitmix64 primitives on masked python ints (plain-python backend).

Bit-identical to the numba twin in ``_rng_nb``; tests compare the two
stream-for-stream.  State is a python int in [0, 2**64).
"""

_MASK64 = (1 << 64) - 1

GOLDEN = 0x9E3779B97F4A7C15
_K1 = 0xBF58476D1CE4E5B9
_K2 = 0x94D049BB133111EB
_STREAM_SALT = 0xD1342543DE82EF95

_INV_2_53 = 2.0 ** -53


def mix64(z):
    """Finalizing avalanche mix of a 64-bit value."""
    z = int(z)
    z = ((z ^ (z >> 30)) * _K1) & _MASK64
    z = ((z ^ (z >> 27)) * _K2) & _MASK64
    return z ^ (z >> 31)


def next_u01(state):
    """Advance the stream; return (new_state, uniform in [0, 1))."""
    state = (int(state) + GOLDEN) & _MASK64
    z = mix64(state)
    return state, (z >> 11) * _INV_2_53


def site_u01(seed, site):
    """Stateless uniform attached to (seed, site); site may be negative."""
    su = int(site) & _MASK64
    z = mix64((int(seed) + su * GOLDEN) & _MASK64)
    return (z >> 11) * _INV_2_53


def stream_for(seed, k):
    """Initial state of substream k of the given seed."""
    h = mix64(((int(k) & _MASK64) * GOLDEN + _STREAM_SALT) & _MASK64)
    return mix64((int(seed) + h) & _MASK64)

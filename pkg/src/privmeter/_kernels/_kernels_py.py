"""Pure-numpy modular arithmetic kernels.

All moduli must be < 2**32 so that a product of two residues fits in a
uint64 without overflow. The group code keeps its modulus near 2**31,
well inside that bound.
"""

import numpy as np

BACKEND = "python"

_MAX_MODULUS = 1 << 32


def _check_modulus(m):
    m = int(m)
    if not 1 < m < _MAX_MODULUS:
        raise ValueError(f"modulus must be in (1, 2**32), got {m}")
    return np.uint64(m)


def mul_mod(a, b, m):
    """Elementwise (a * b) % m on uint64 arrays (broadcasts)."""
    m = _check_modulus(m)
    a = np.asarray(a, dtype=np.uint64) % m
    b = np.asarray(b, dtype=np.uint64) % m
    return (a * b) % m


def pow_mod(base, exp, m):
    """Elementwise pow(base, exp, m) by square-and-multiply.

    base and exp broadcast against each other; exp may be a scalar.
    Runs one squaring pass per bit of the largest exponent, so the cost
    is O(n * log max(exp)) vector operations.
    """
    m = _check_modulus(m)
    base = np.asarray(base, dtype=np.uint64) % m
    exp = np.asarray(exp, dtype=np.uint64)
    base, exp = np.broadcast_arrays(base, exp)
    base = base.copy()
    exp = exp.copy()
    out = np.ones(base.shape, dtype=np.uint64)
    one = np.uint64(1)
    while True:
        hot = exp != 0
        if not hot.any():
            break
        odd = (exp & one).astype(bool)
        out[odd] = (out[odd] * base[odd]) % m
        exp >>= one
        base = (base * base) % m
    return out

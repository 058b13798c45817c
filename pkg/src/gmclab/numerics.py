"""Low-level numerical helpers: seeding, Bessel J0, quadrature nodes."""

from functools import lru_cache

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN64 = 0x9E3779B97F4A7C15

# Tags for deriving independent substreams from a replica seed.
TAG_FIELD = 0x46494C44  # "FILD"
TAG_ROOT = 0x524F4F54   # "ROOT"


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer (Steele et al. mixing constants), mod 2**64."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def replica_seed(master_seed: int, replica_index: int) -> int:
    """Derive the replica seed: SplitMix64(master XOR replica * golden ratio).

    The constant 0x9E3779B97F4A7C15 is fixed so that the stream is
    bit-exact across platforms and worker layouts.
    """
    return splitmix64((master_seed ^ ((replica_index * GOLDEN64) & MASK64)) & MASK64)


def substream_seed(seed: int, tag: int) -> int:
    """Independent substream (e.g. the root draw) of a replica seed."""
    return splitmix64((seed ^ tag) & MASK64)


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# Bessel J0.
#
# Ascending power series below the crossover, Hankel asymptotic expansion
# above it.  Absolute error <= 1e-10 over the real line (checked against an
# independent implementation in the test suite); the amplitude of J0 is <= 1
# so this is also the relative accuracy away from the zeros.
# ---------------------------------------------------------------------------

_J0_CROSSOVER = 14.0
_J0_SERIES_TERMS = 64
_J0_ASYMPTOTIC_TERMS = 28


@lru_cache(maxsize=1)
def _hankel_coeffs():
    # b_m = prod_{j<=m} (2j-1)^2 / (m! 8^m), signs applied in the caller
    b = np.empty(_J0_ASYMPTOTIC_TERMS + 1)
    b[0] = 1.0
    for m in range(1, _J0_ASYMPTOTIC_TERMS + 1):
        b[m] = b[m - 1] * (2 * m - 1) ** 2 / (8.0 * m)
    return b


def bessel_j0(x):
    """J0 evaluated elementwise on scalars or arrays."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    ax = np.abs(np.atleast_1d(x))
    out = np.empty_like(ax)

    small = ax < _J0_CROSSOVER
    if np.any(small):
        xs = ax[small]
        q = -(xs * xs) / 4.0
        term = np.ones_like(xs)
        acc = np.ones_like(xs)
        for m in range(1, _J0_SERIES_TERMS + 1):
            term = term * q / (m * m)
            acc += term
        out[small] = acc

    if np.any(~small):
        xl = ax[~small]
        b = _hankel_coeffs()
        inv = 1.0 / xl
        p = np.zeros_like(xl)
        qq = np.zeros_like(xl)
        for k in range((_J0_ASYMPTOTIC_TERMS + 1) // 2):
            sign = -1.0 if k % 2 else 1.0
            p += sign * b[2 * k] * inv ** (2 * k)
            if 2 * k + 1 <= _J0_ASYMPTOTIC_TERMS:
                qq -= sign * b[2 * k + 1] * inv ** (2 * k + 1)
        chi = xl - np.pi / 4.0
        out[~small] = np.sqrt(2.0 / (np.pi * xl)) * (p * np.cos(chi) - qq * np.sin(chi))

    return float(out[0]) if scalar else out.reshape(x.shape)


@lru_cache(maxsize=8)
def gauss_legendre(n: int):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights

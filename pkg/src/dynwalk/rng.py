"""Counter-based random numbers for dynamical walk realizations.

Every random quantity attached to step index ``n`` of a realization is a pure
function of ``(seed, n, slot)``, so a realization can be queried index by
index without materializing anything else.  The generator is SplitMix64 with a
per-index starting state:

    key(seed, n)        = mix64(seed ^ mix64(n))
    draw(seed, n, slot) = mix64(key(seed, n) + (slot + 1) * GAMMA)

``mix64`` is the SplitMix64 output finalizer.  Realization ``i`` of an
experiment seeded with ``seed`` uses ``split_seed(seed, i)``.

Slot layout per index: slot ``2m`` holds the direction ``Y^m``, slot ``2m - 1``
the ``m``-th exponential gap.  ``FRESH_SLOT`` holds the independent direction
used by the two-slice coupling.
"""

import numpy as np

PRNG_ID = "splitmix64-indexed/v1"

GAMMA = np.uint64(0x9E3779B97F4A7C15)
GAMMA_SPLIT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)
_S11, _S62 = np.uint64(11), np.uint64(62)

FRESH_SLOT = 1 << 40

_MASK64 = (1 << 64) - 1


def _u64(a):
    if isinstance(a, (int, np.integer)):
        return np.uint64(int(a) & _MASK64)
    return np.asarray(a).astype(np.uint64)


def mix64(x):
    """SplitMix64 finalizer, elementwise on uint64 arrays."""
    x = np.array(x, dtype=np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x ^= x >> _S30
        x *= _M1
        x ^= x >> _S27
        x *= _M2
        x ^= x >> _S31
    return x


def split_seed(seed, i):
    """Seed of sub-experiment ``i`` (scalar or array) of ``seed``."""
    i = _u64(i)
    with np.errstate(over="ignore"):
        return mix64(_u64(seed) + (i + np.uint64(1)) * GAMMA_SPLIT)


def index_key(seed, n):
    """Stream key of step index ``n``; broadcasts over ``seed`` and ``n``."""
    return mix64(_u64(seed) ^ mix64(_u64(n)))


def draw(key, slot):
    """Raw 64-bit draw ``slot`` from the stream(s) ``key``."""
    with np.errstate(over="ignore"):
        return mix64(key + (_u64(slot) + np.uint64(1)) * GAMMA)


def to_unit(bits):
    """Map 64-bit draws to doubles in [0, 1)."""
    return (bits >> _S11).astype(np.float64) * (1.0 / (1 << 53))


def to_direction(bits):
    """Map 64-bit draws to direction codes 0..3 (top two bits)."""
    return (bits >> _S62).astype(np.int8)


def to_gap(bits):
    """Exponential(1) gap by inverse CDF."""
    return -np.log1p(-to_unit(bits))

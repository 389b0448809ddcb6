"""Counter-based random streams.

Every draw is a pure function of ``(seed, stage, counter)``: a SplitMix64
finalizer applied to ``key + (counter + 1) * golden`` where ``key`` mixes
seed and stage. Any subset of draws can therefore be produced in any order
or on any worker with identical results.
"""
import struct

import numpy as np

from . import kernels

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

STAGE_LATERAL_U = 1
STAGE_LATERAL_V = 2
STAGE_AXIAL = 3

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(x):
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def check_seed(seed):
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) <= MASK64:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def stream_key(seed, stage):
    return mix64(mix64(check_seed(seed)) ^ mix64(stage * GOLDEN))


def derive_seed(seed, index, multiplier=0.0):
    """Child seed for item ``index`` of a dataset generated at ``multiplier``."""
    (mbits,) = struct.unpack("<Q", struct.pack("<d", float(multiplier)))
    h = mix64(check_seed(seed) ^ mix64(int(index) * GOLDEN + 1))
    return mix64(h ^ mix64(mbits))


def uniform_pairs(seed, stage, start, count):
    """Two uniforms per counter: the first in (0, 1], the second in [0, 1)."""
    bits = kernels.hash_counters(stream_key(seed, stage), 2 * start, 2 * count)
    bits = bits.reshape(count, 2) >> np.uint64(11)
    u = bits.astype(np.float64) * _INV_2_53
    u[:, 0] += _INV_2_53
    return u[:, 0], u[:, 1]


def standard_normals(seed, stage, start, count):
    """Standard normal draws for counters ``start .. start + count - 1`` (Box-Muller)."""
    u1, u2 = uniform_pairs(seed, stage, start, count)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)

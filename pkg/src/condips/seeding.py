"""Per-trajectory seed derivation.

Every trajectory ``i`` of an ensemble with master seed ``s`` gets the seed

    derive_seed(s, i) = mix64(s XOR (i * 0x9E3779B97F4A7C15 mod 2**64))

where ``mix64`` is the SplitMix64 finalizer

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

with all products taken mod 2**64. ``mix64`` is a bijection on 64-bit words,
so for a fixed index distinct master seeds give distinct path seeds. The path
seed feeds ``numpy.random.PCG64``.

Test vector: ``derive_seed(12345, 7) == 0x9378B9D8EA31F81D``.
"""

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, stream_index: int) -> int:
    if stream_index < 0:
        raise ValueError("stream_index must be nonnegative")
    return mix64((master_seed & MASK64) ^ ((stream_index * GOLDEN) & MASK64))


def path_rng(master_seed: int, stream_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, stream_index)))

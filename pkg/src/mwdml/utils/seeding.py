"""
Counter-based seed splitting

Every random stream in the package is derived from a user seed plus a
tuple of counters, so streams can be created in any order (or in parallel
workers) and still reproduce.

Seeds are signed 64-bit integers; they are read modulo 2**64, so -1 and
2**64 - 1 name the same stream.
"""
import numpy as np

SEED_MODULUS = 2 ** 64


def _sequence(seed: int, counters) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) % SEED_MODULUS, spawn_key=tuple(int(c) for c in counters))


def child_seed(seed: int, *counters: int) -> int:
    """
    Derive a 63-bit integer seed from a parent seed and counters.

    Args:
        seed: Parent seed, any integer
        counters: Position of the child stream (repetition, replicate, ...)

    Returns:
        Non-negative integer usable as a seed anywhere
    """
    seq = _sequence(seed, counters)
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def child_rng(seed: int, *counters: int) -> np.random.Generator:
    """Generator for the child stream (seed, *counters)."""
    return np.random.default_rng(_sequence(seed, counters))

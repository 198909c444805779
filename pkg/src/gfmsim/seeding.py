"""Deterministic seed derivation for replicates, series and purposes."""

from __future__ import annotations

import zlib

import numpy as np

PURPOSES = ("coef", "noise", "group", "model", "tune", "split")


def _purpose_code(purpose: str) -> int:
    # crc32 is stable across interpreter runs, unlike hash()
    return zlib.crc32(purpose.encode("utf-8"))


def derive_seed(base_seed: int, replicate: int = 0, series: int = 0, purpose: str = "noise") -> int:
    """Mix (base_seed, replicate, series, purpose) into one 63-bit seed.

    The mixing is done by numpy's ``SeedSequence`` hash, so nearby inputs
    give unrelated streams and the result does not depend on call order.
    """
    if min(base_seed, replicate, series) < 0:
        raise ValueError("seed components must be non-negative")
    seq = np.random.SeedSequence([int(base_seed), int(replicate), int(series), _purpose_code(purpose)])
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def rng_for(base_seed: int, replicate: int = 0, series: int = 0, purpose: str = "noise") -> np.random.Generator:
    return np.random.default_rng(derive_seed(base_seed, replicate, series, purpose))


def as_generator(rng: np.random.Generator | int | None) -> tuple[np.random.Generator, int | None]:
    """Accept a generator or an integer seed; return the generator and the seed if known."""
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None:
        return np.random.default_rng(0), 0
    seed = int(rng)
    return np.random.default_rng(seed), seed

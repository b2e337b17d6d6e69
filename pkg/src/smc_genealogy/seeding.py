"""Deterministic random streams.

Every random stream in the package is a :class:`numpy.random.Generator`
backed by PCG64. Child streams are derived from a master seed with
:class:`numpy.random.SeedSequence` using an explicit ``spawn_key``, so the
stream for e.g. ``("smc", N, replicate)`` is the same no matter how many
workers run or in which order replicates are scheduled.
"""

import zlib

import numpy as np

RNG_ALGORITHM = "PCG64"


def _key_part(part):
    if isinstance(part, str):
        # crc32 is stable across interpreter runs, unlike hash()
        return zlib.crc32(part.encode("utf8"))
    return int(part)


def derive_seed(master_seed, *keys):
    """Return the SeedSequence for ``keys`` under ``master_seed``.

    String keys are mapped to integers with CRC-32, integers are used as is.
    """
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(_key_part(k) for k in keys))


def make_rng(seed, *keys):
    """Build a PCG64 generator.

    ``seed`` may be an int, a SeedSequence or an existing Generator (returned
    unchanged when no keys are given).
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("cannot derive keyed streams from a Generator")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        if keys:
            seed = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + tuple(_key_part(k) for k in keys))
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))

"""
Seeded random streams.

Every random draw in the project comes from a counter-based Philox generator
whose key is derived from a master seed plus a stream path, e.g.
`generator(master_seed, fold, CGAN_TRAIN)`. Streams with different paths are
statistically independent, so folds can run on any worker in any order.
"""
import numpy as np

# stream components
BALANCE = 1
FOLDS = 2
CGAN_INIT = 3
CGAN_TRAIN = 4
GENERATE_TRAIN = 5
GENERATE_EVAL = 6
CLASSIFIER = 7
CLUSTERING = 8


def _seed_sequence(seed, stream):
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))


def generator(seed, *stream):
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, stream)))


def derive_seed(seed, *stream):
    """Unsigned 64-bit seed for the given stream path."""
    return int(_seed_sequence(seed, stream).generate_state(1, dtype=np.uint64)[0])


def as_generator(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return generator(seed_or_rng)

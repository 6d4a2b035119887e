"""
pcortest random streams - counter-based Philox substreams

Every random quantity is drawn from a stream addressed by integer words,
e.g. (master_seed, scenario_id, replication). Streams are derived, never
shared, so results do not depend on evaluation order or worker count.
"""
from typing import Union

import numpy as np

from inference.errors import DomainError

# Stream domains keep data and permutation draws of one seed disjoint
DATA_STREAM = 0
PERMUTATION_STREAM = 1

SeedLike = Union[int, np.random.Generator]


def _check_words(words) -> list:
    checked = []
    for word in words:
        word = int(word)
        if word < 0:
            raise DomainError(f"seed words must be non-negative, got {word}")
        checked.append(word)
    return checked


def derive_seed(*words: int) -> int:
    """Hash integer words into a single 63-bit seed"""
    state = np.random.SeedSequence(_check_words(words)).generate_state(1, dtype=np.uint64)
    return int(state[0]) >> 1


def stream_key(seed: int, domain: int) -> np.ndarray:
    """128-bit Philox key for (seed, domain)"""
    return np.random.SeedSequence(_check_words((seed, domain))).generate_state(2, dtype=np.uint64)


def philox_stream(seed: int, domain: int = DATA_STREAM, index: int = 0) -> np.random.Generator:
    """Generator for substream `index` of (seed, domain).

    Substreams differ in the top counter word, so they never overlap.
    """
    if index < 0:
        raise DomainError(f"substream index must be non-negative, got {index}")
    counter = np.array([0, 0, 0, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=stream_key(seed, domain), counter=counter))


def as_generator(seed: SeedLike, domain: int = DATA_STREAM) -> np.random.Generator:
    """Accept either a ready generator or an integer seed"""
    if isinstance(seed, np.random.Generator):
        return seed
    return philox_stream(int(seed), domain)


def fresh_seed() -> int:
    """Seed drawn from OS entropy, for runs where the user gave none"""
    return derive_seed(np.random.SeedSequence().entropy)

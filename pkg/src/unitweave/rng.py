"""Splittable per-sample random streams.

Corpus construction draws randomness from a counter-based Philox generator
keyed by (corpus_seed, sample_id), so regenerating a corpus is independent
of sample order and shards can be processed in parallel without coordinating
generator state.
"""

import numpy as np

from .hashing import fnv1a_64

_MASK64 = 0xFFFFFFFFFFFFFFFF


def sample_rng(corpus_seed: int, sample_id: str) -> np.random.Generator:
    """Return the dedicated generator for one sample of one corpus run."""
    key = np.array(
        [corpus_seed & _MASK64, fnv1a_64(sample_id.encode("utf-8"))],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))

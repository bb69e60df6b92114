"""Named random substreams.

Every random draw in a run flows from one 64-bit seed through a labelled
substream, so any shard, batch, noise draw or permutation can be reproduced
in isolation. Labels are hashed with SHA-256, which keeps streams identical
across platforms and Python versions (unlike `hash()`).
"""

import hashlib

import numpy as np


def _entropy_words(seed: int, labels: tuple) -> list[int]:
    tag = "/".join(str(part) for part in labels)
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    words = [int.from_bytes(digest[k : k + 4], "little") for k in range(0, 16, 4)]
    return [seed & 0xFFFFFFFFFFFFFFFF] + words


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for the substream named by `labels`, derived from `seed`."""
    ss = np.random.SeedSequence(_entropy_words(seed, labels))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *labels) -> int:
    """63-bit integer seed for APIs that take a plain seed."""
    ss = np.random.SeedSequence(_entropy_words(seed, labels))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)

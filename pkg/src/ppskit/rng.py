"""Counter-based random streams.

Every stochastic routine in the package draws from a Philox generator whose
key is derived from a user seed plus a string path naming the consumer
(e.g. ``substream(seed, "sweep", cell, rep)``).  Seed and path fully
determine the stream, so repetitions and sweep cells can run in any order,
or in parallel, and still reproduce bit-identical results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, *path) -> np.ndarray:
    """Derive a 128-bit Philox key from ``seed`` and a stream path."""
    tag = "/".join([str(int(seed))] + [str(p) for p in path])
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=16).digest()
    return np.frombuffer(digest, dtype=np.uint64)


def substream(seed: int, *path) -> np.random.Generator:
    """Independent generator for (seed, path); identical inputs replay."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *path)))


def multinomial_counts(n: int, probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Exact multinomial draw by chained conditional binomials.

    Cost is O(#outcomes) independent of n (binomial draws are O(1)), so
    trial budgets of 1e12 are as cheap as 1e3.  The total is exactly n.
    """
    probs = np.asarray(probs, dtype=float).reshape(-1)
    counts = np.zeros(probs.size, dtype=np.int64)
    remaining = int(n)
    tail = float(probs.sum())
    for idx in range(probs.size - 1):
        if remaining == 0 or tail <= 0.0:
            break
        p = min(max(probs[idx] / tail, 0.0), 1.0)
        c = int(rng.binomial(remaining, p))
        counts[idx] = c
        remaining -= c
        tail -= probs[idx]
    counts[-1] += remaining
    return counts

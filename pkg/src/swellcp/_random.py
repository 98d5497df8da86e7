"""Named, counter-based random substreams.

Every random draw in the package comes from a Philox generator keyed by the
user seed, a stream name and an optional index (tree number, repetition
number). Streams never share state, so results do not depend on the order
in which trees or repetitions are scheduled.
"""

import numpy as np

STREAMS = {
    "split": 1,
    "tree": 2,
    "generator": 3,
    "repetition": 4,
    "shift": 5,
}


def substream(seed, name, *index):
    """Return an independent ``np.random.Generator`` for ``(seed, name, *index)``."""
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    entropy = [seed, STREAMS[name], *(int(i) for i in index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, name, *index):
    """Derive a child integer seed, used to hand a whole sub-pipeline its own seed."""
    return int(substream(seed, name, *index).integers(0, 2**63 - 1))

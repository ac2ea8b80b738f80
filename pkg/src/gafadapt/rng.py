"""Counter-based random streams for reproducible (and parallel) Monte Carlo.

Every stochastic component draws from a Philox generator keyed by the
master seed plus an integer path, e.g. (seed, SIM, run) for trajectory
noise or (seed, FILTER, run, step, tag) for one moment transform.  Streams
are independent of evaluation order and of how much any other stream
consumed, which is what makes common-random-number comparisons and
worker-count-independent results possible.
"""

from __future__ import annotations

import numpy as np

# Stream namespaces; keep values stable, they are part of reproducibility.
SIM = 1
TRAIN = 2
WARMUP = 3
FILTER = 4
INIT = 5
ACTIONS = 6


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Philox generator for the stream identified by (master_seed, *path)."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic 64-bit child seed for (master_seed, *path)."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    hi, lo = (int(w) for w in seq.generate_state(2, np.uint32))
    return (hi << 32) | lo

"""Deterministic random-stream derivation.

Every stochastic decision in an experiment draws from a generator keyed by
the master seed plus an integer path (purpose tag, generation, individual,
episode ...).  Streams are therefore independent of evaluation order and of
how work is distributed over processes.
"""

from __future__ import annotations

import numpy as np

# Purpose tags: first path element after the master seed.
WEIGHTS = 0     # fixed synaptic weights of the policy network
NOISE = 1       # mirrored perturbations (population init and mutation)
PARENTS = 2     # parent choice for each offspring pair
FITNESS = 3     # fitness-episode seeds
ELITE = 4       # elite-confirmation episode seeds
RUN = 5         # per-run seeds inside a multi-run experiment


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *path)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


def derive_seed(seed: int, *path: int) -> int:
    """Collapse a stream identity into a single integer seed."""
    return int(stream(seed, *path).integers(0, 2**63))

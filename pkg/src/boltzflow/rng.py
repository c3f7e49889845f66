"""Seed management: one master seed, named counter-based substreams.

Every component that consumes randomness gets its own stream derived from
the master seed via ``SeedSequence(seed, spawn_key=(stream_id,))``, so the
draws of one component never perturb another (e.g. changing the eval set
size leaves training bit-identical).
"""

from __future__ import annotations

import numpy as np

# Stream ids are part of the reproducibility contract; never renumber.
STREAMS = {
    "init": 0,       # network parameter initialisation
    "buffer": 1,     # prior draws pushed through the flow into the buffer
    "batch": 2,      # buffer sampling, t draws, conditional perturbations
    "estimator": 3,  # Monte Carlo candidate draws (spawned per batch row)
    "eval": 4,       # evaluation-time sampling
    "data": 5,       # ground-truth / MCMC reference dataset generation
}


def substream(seed: int, name: str) -> np.random.Generator:
    """Return the named generator derived from the master seed."""
    try:
        stream_id = STREAMS[name]
    except KeyError:
        raise KeyError(f"unknown stream {name!r}; expected one of {sorted(STREAMS)}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream_id,))))


class RunStreams:
    """All named substreams of one run, created lazily from the master seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        for name in STREAMS:
            setattr(self, name, substream(self.seed, name))

    def __repr__(self):
        return f"RunStreams(seed={self.seed})"
